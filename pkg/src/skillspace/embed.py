"""Skill Space trainer: distributed-memory paragraph vectors with negative sampling.

Every delta is one document: its API tokens are the words, and the delta's
developer, project, and corpus language are tags that receive vectors of their
own. For each API position the context is all remaining APIs of the delta plus
the tags (the window always covers the whole document; API order never
matters), and one negative-sampling step updates the output rows and every
context row.

Two execution modes: deterministic (single worker, bit-reproducible for a
fixed seed) and parallel (lock-free workers whose racy lost updates are an
accepted SGD approximation).
"""

from __future__ import annotations

import threading
import time
from collections import Counter
from dataclasses import dataclass, field, asdict
from typing import Iterable, Sequence

import numpy as np

from .corpus import DeltaRecord
from .errors import SkillSpaceError


class EmptyVocabulary(SkillSpaceError):
    """No token survived the minimum-count filter."""


TAG_KINDS = ("developer", "project", "language")


class Vocabulary:
    """Dense-id dictionary over API tokens with delta-level occurrence counts."""

    def __init__(self, tokens: Sequence[str], counts: Sequence[int], min_count: int):
        self.tokens = list(tokens)
        self.counts = list(counts)
        self.min_count = min_count
        self.token_to_id = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def lookup(self, token: str) -> int | None:
        """Dense id for a token, or None: a miss is detectable, never a default id."""
        return self.token_to_id.get(token)


class TagSpace:
    """Dense indices for tag entities; kinds occupy contiguous, disjoint blocks."""

    def __init__(self, entries: Sequence[tuple[str, str]], counts: Sequence[int]):
        self.entries = list(entries)
        self.counts = list(counts)
        self.index = {e: i for i, e in enumerate(self.entries)}
        self.kind_ranges: dict[str, tuple[int, int]] = {}
        start = 0
        for kind in TAG_KINDS:
            stop = start
            while stop < len(self.entries) and self.entries[stop][0] == kind:
                stop += 1
            if stop > start:
                self.kind_ranges[kind] = (start, stop)
            start = stop

    def __len__(self) -> int:
        return len(self.entries)

    def lookup(self, kind: str, tag_id: str) -> int | None:
        return self.index.get((kind, tag_id))

    def ids_of_kind(self, kind: str) -> list[str]:
        lo, hi = self.kind_ranges.get(kind, (0, 0))
        return [self.entries[i][1] for i in range(lo, hi)]


@dataclass(frozen=True)
class TrainConfig:
    """Trainer hyperparameters; the defaults reproduce the reference setup."""

    dim: int = 200
    negatives: int = 20
    epochs: int = 10
    alpha_start: float = 0.025
    alpha_min: float = 1e-4
    window: int = 30
    seed: int = 1
    unigram_power: float = 0.75
    threads: int = 1
    min_count: int = 5
    subsample: float = 0.0
    use_developer_tags: bool = True
    use_project_tags: bool = True
    use_language_tags: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if self.negatives < 1:
            raise ValueError("negatives must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if not self.alpha_min < self.alpha_start:
            raise ValueError("alpha_min must be < alpha_start")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    def enabled_kinds(self) -> tuple[str, ...]:
        kinds = []
        if self.use_developer_tags:
            kinds.append("developer")
        if self.use_project_tags:
            kinds.append("project")
        if self.use_language_tags:
            kinds.append("language")
        return tuple(kinds)


@dataclass
class EmbeddingModel:
    """The Skill Space: input API matrix W, tag matrix D, output matrix O."""

    W: np.ndarray
    D: np.ndarray
    O: np.ndarray
    vocab: Vocabulary
    tags: TagSpace
    config: TrainConfig
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.W.shape[1]


@dataclass
class EpochStats:
    epoch: int
    deltas: int
    skipped: int
    updates: int
    mean_loss: float
    alpha_end: float
    wall_seconds: float


@dataclass
class TrainReport:
    epochs: list[EpochStats] = field(default_factory=list)
    total_updates: int = 0
    final_alpha: float = 0.0

    def rows(self) -> list[tuple]:
        header = ("epoch", "deltas", "skipped", "updates", "mean_loss",
                  "alpha_end", "wall_seconds")
        body = [(e.epoch, e.deltas, e.skipped, e.updates, e.mean_loss,
                 e.alpha_end, e.wall_seconds) for e in self.epochs]
        return [header] + body


def build_vocab(records: Iterable[DeltaRecord], min_count: int = 5,
                kinds: Sequence[str] = TAG_KINDS) -> tuple[Vocabulary, TagSpace]:
    """Count tokens at the delta level (deduplicated within a delta), drop rare ones,
    and index every developer/project/language seen as a tag."""
    token_counts: Counter[str] = Counter()
    tag_counts: Counter[tuple[str, str]] = Counter()
    for r in records:
        for token in set(r.apis):
            token_counts[token] += 1
        if "developer" in kinds:
            tag_counts[("developer", r.developer)] += 1
        if "project" in kinds:
            tag_counts[("project", r.project)] += 1
        if "language" in kinds:
            tag_counts[("language", r.language)] += 1
    kept = [(t, c) for t, c in token_counts.items() if c >= min_count]
    if not kept:
        raise EmptyVocabulary(
            f"no token appears in at least {min_count} deltas "
            f"({len(token_counts)} distinct tokens seen)")
    kept.sort(key=lambda tc: (-tc[1], tc[0]))
    vocab = Vocabulary([t for t, _ in kept], [c for _, c in kept], min_count)
    entries = []
    for kind in TAG_KINDS:
        if kind not in kinds:
            continue
        ids = sorted(tid for k, tid in tag_counts if k == kind)
        entries.extend((kind, tid) for tid in ids)
    tags = TagSpace(entries, [tag_counts[e] for e in entries])
    return vocab, tags


def build_noise_table(vocab: Vocabulary, unigram_power: float = 0.75) -> np.ndarray:
    """Cumulative table for drawing token id i with probability count_i^p / sum count_j^p."""
    if len(vocab) == 0:
        raise EmptyVocabulary("cannot build a noise table over an empty vocabulary")
    weights = np.asarray(vocab.counts, dtype=np.float64) ** unigram_power
    return np.cumsum(weights)


def sample_negatives(cum_table: np.ndarray, rng: np.random.Generator, k: int,
                     forbidden: int, max_attempts: int = 8) -> np.ndarray:
    """Draw k ids from the noise table; draws colliding with `forbidden` are
    redrawn up to `max_attempts` times and then dropped."""
    total = cum_table[-1]
    draws = np.searchsorted(cum_table, rng.random(k) * total, side="right")
    if forbidden < 0:
        return draws
    keep = []
    for d in draws:
        attempts = 0
        while d == forbidden and attempts < max_attempts:
            d = int(np.searchsorted(cum_table, rng.random() * total, side="right"))
            attempts += 1
        if d != forbidden:
            keep.append(d)
    return np.asarray(keep, dtype=np.int64)


def loss_and_grad(W: np.ndarray, D: np.ndarray, O: np.ndarray,
                  api_context: np.ndarray, tag_context: np.ndarray,
                  target: int, negatives: np.ndarray):
    """One negative-sampling step: loss and exact analytic gradients.

    The hidden vector is the arithmetic mean of the context rows (API rows from
    W, tag rows from D). Returns (loss, output-row gradients aligned with
    [target] + negatives, shared context-row gradient). The sigmoid argument is
    clamped to [-30, 30] for overflow safety (error below 1e-13).
    """
    n_api = len(api_context)
    n_tag = len(tag_context)
    n_ctx = n_api + n_tag
    if n_ctx == 0:
        raise ValueError("context must be non-empty")
    dtype = W.dtype
    if n_api and n_tag:
        h = (W[api_context].sum(axis=0) + D[tag_context].sum(axis=0)) / dtype.type(n_ctx)
    elif n_api:
        h = W[api_context].sum(axis=0) / dtype.type(n_ctx)
    else:
        h = D[tag_context].sum(axis=0) / dtype.type(n_ctx)
    rows = np.empty(1 + len(negatives), dtype=np.int64)
    rows[0] = target
    rows[1:] = negatives
    out_rows = O[rows]
    scores = np.clip((out_rows @ h).astype(np.float64), -30.0, 30.0)
    sig = 1.0 / (1.0 + np.exp(-scores))
    loss = -float(np.log(sig[0]) + np.log1p(-sig[1:]).sum())
    g = sig.copy()
    g[0] -= 1.0
    g = g.astype(dtype)
    grad_out = g[:, None] * h[None, :]
    grad_ctx = (g @ out_rows) / dtype.type(n_ctx)
    return loss, grad_out, grad_ctx


def _prepare(records: Sequence[DeltaRecord], vocab: Vocabulary, tags: TagSpace,
             config: TrainConfig) -> list[tuple[np.ndarray, np.ndarray]]:
    """Resolve each delta to (in-vocabulary API ids, tag indices), deduplicated
    in first-appearance order."""
    kinds = config.enabled_kinds()
    prepared = []
    for r in records:
        seen = set()
        ids = []
        for token in r.apis:
            i = vocab.lookup(token)
            if i is not None and i not in seen:
                seen.add(i)
                ids.append(i)
        tag_ids = []
        if "developer" in kinds:
            tag_ids.append(tags.lookup("developer", r.developer))
        if "project" in kinds:
            tag_ids.append(tags.lookup("project", r.project))
        if "language" in kinds:
            tag_ids.append(tags.lookup("language", r.language))
        tag_ids = [t for t in tag_ids if t is not None]
        prepared.append((np.asarray(ids, dtype=np.int64),
                         np.asarray(tag_ids, dtype=np.int64)))
    return prepared


def _keep_probabilities(vocab: Vocabulary, threshold: float) -> np.ndarray | None:
    if threshold <= 0.0:
        return None
    freq = np.asarray(vocab.counts, dtype=np.float64)
    freq /= freq.sum()
    keep = np.sqrt(threshold / freq) + threshold / freq
    return np.minimum(keep, 1.0)


def _train_deltas(W, D, O, prepared, order, cum_table, rng, config,
                  alpha_schedule, counter, keep_p):
    """Run the update loop over `prepared[order]`; returns epoch tallies.

    `counter` is a single-element list holding the global update count used by
    the linear learning-rate schedule.
    """
    k = config.negatives
    deltas_seen = 0
    skipped = 0
    updates = 0
    loss_sum = 0.0
    alpha = config.alpha_start
    for idx in order:
        api_ids, tag_ids = prepared[idx]
        if keep_p is not None and len(api_ids):
            mask = rng.random(len(api_ids)) < keep_p[api_ids]
            api_ids = api_ids[mask]
        if len(api_ids) == 0 or (len(api_ids) == 1 and len(tag_ids) == 0):
            skipped += 1
            continue
        deltas_seen += 1
        n = len(api_ids)
        for t in range(n):
            alpha = alpha_schedule(counter[0])
            counter[0] += 1
            target = int(api_ids[t])
            ctx = np.concatenate((api_ids[:t], api_ids[t + 1:]))
            negatives = sample_negatives(cum_table, rng, k, target)
            loss, grad_out, grad_ctx = loss_and_grad(W, D, O, ctx, tag_ids,
                                                     target, negatives)
            rows = np.empty(1 + len(negatives), dtype=np.int64)
            rows[0] = target
            rows[1:] = negatives
            np.add.at(O, rows, -alpha * grad_out)
            if len(ctx):
                W[ctx] -= alpha * grad_ctx
            if len(tag_ids):
                D[tag_ids] -= alpha * grad_ctx
            loss_sum += loss
            updates += 1
    return deltas_seen, skipped, updates, loss_sum, alpha


def train(records: Iterable[DeltaRecord], config: TrainConfig | None = None,
          vocab: Vocabulary | None = None,
          tags: TagSpace | None = None) -> tuple[EmbeddingModel, TrainReport]:
    """Train the co-embedding on (training-split) records.

    With threads=1 the run is bit-reproducible for a fixed seed. With more
    threads, workers shard the deltas and update the shared matrices without
    locks; element writes stay memory-safe but lost updates make the result
    non-reproducible.
    """
    config = config or TrainConfig()
    records = list(records)
    if vocab is None or tags is None:
        vocab, tags = build_vocab(records, config.min_count, config.enabled_kinds())
    prepared = _prepare(records, vocab, tags, config)

    longest = max((len(a) for a, _ in prepared), default=0)
    if longest > config.window:
        raise ValueError(
            f"a delta has {longest} in-vocabulary APIs but the window is "
            f"{config.window}; filter the corpus (max_apis_per_delta) or widen the window")

    V, T, dim = len(vocab), len(tags), config.dim
    if __debug__:
        for api_ids, tag_ids in prepared:
            assert len(api_ids) == 0 or int(api_ids.max()) < V
            assert len(tag_ids) == 0 or int(tag_ids.max()) < T
    rng = np.random.default_rng(config.seed)
    W = (rng.random((V, dim), dtype=np.float32) - np.float32(0.5)) / np.float32(dim)
    D = (rng.random((T, dim), dtype=np.float32) - np.float32(0.5)) / np.float32(dim)
    O = np.zeros((V, dim), dtype=np.float32)

    eligible_positions = sum(
        len(a) for a, t in prepared if len(a) and not (len(a) == 1 and len(t) == 0))
    total_updates = max(1, config.epochs * eligible_positions)
    span = config.alpha_start - config.alpha_min

    def alpha_schedule(u: int) -> float:
        return max(config.alpha_min, config.alpha_start - span * (u / total_updates))

    cum_table = build_noise_table(vocab, config.unigram_power)
    keep_p = _keep_probabilities(vocab, config.subsample)
    report = TrainReport()
    counter = [0]
    max_ts = max((r.timestamp for r in records), default=0)

    for epoch in range(config.epochs):
        started = time.perf_counter()
        order = rng.permutation(len(prepared))
        if config.threads == 1:
            seen, skipped, updates, loss_sum, alpha = _train_deltas(
                W, D, O, prepared, order, cum_table, rng, config,
                alpha_schedule, counter, keep_p)
        else:
            shards = [order[w::config.threads] for w in range(config.threads)]
            results = [None] * config.threads
            counters = [[counter[0] // config.threads] for _ in shards]

            def run(w):
                worker_rng = np.random.default_rng(config.seed + 7919 * (w + 1) + epoch)
                results[w] = _train_deltas(
                    W, D, O, prepared, shards[w], cum_table, worker_rng, config,
                    lambda u: alpha_schedule(u * config.threads), counters[w], keep_p)

            workers = [threading.Thread(target=run, args=(w,)) for w in range(len(shards))]
            for th in workers:
                th.start()
            for th in workers:
                th.join()
            seen = sum(r[0] for r in results)
            skipped = sum(r[1] for r in results)
            updates = sum(r[2] for r in results)
            loss_sum = sum(r[3] for r in results)
            alpha = results[-1][4]
            counter[0] += updates
        report.epochs.append(EpochStats(
            epoch=epoch, deltas=seen, skipped=skipped, updates=updates,
            mean_loss=loss_sum / updates if updates else 0.0,
            alpha_end=alpha, wall_seconds=time.perf_counter() - started))

    report.total_updates = sum(e.updates for e in report.epochs)
    report.final_alpha = report.epochs[-1].alpha_end if report.epochs else config.alpha_start

    for name, matrix in (("W", W), ("D", D), ("O", O)):
        if not np.isfinite(matrix).all():
            raise SkillSpaceError(f"matrix {name} contains NaN/Inf after training")

    model = EmbeddingModel(W=W, D=D, O=O, vocab=vocab, tags=tags, config=config,
                           meta={"max_train_timestamp": int(max_ts),
                                 "n_train_deltas": len(records),
                                 "total_updates": report.total_updates})
    return model, report


def train_config_snapshot(config: TrainConfig) -> dict:
    return asdict(config)
