"""Topology queries over a trained space: similarity, neighbors, analogies, alignment.

All scans are exact (brute force over candidate rows) and read-only; scores are
cosines accumulated at 64-bit in a canonical elementwise order, so pairwise and
matrix paths agree to the last bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingModel
from .errors import SkillSpaceError
from .model import ENTITY_KINDS, EntityRef, vector


class ZeroVector(SkillSpaceError):
    pass


class DimensionMismatch(SkillSpaceError):
    pass


class UnknownEntity(SkillSpaceError):
    def __init__(self, ref):
        super().__init__(f"unknown entity {ref}")
        self.ref = ref


class NoResolvableApis(SkillSpaceError):
    pass


@dataclass(frozen=True)
class Neighbor:
    entity: EntityRef
    score: float


@dataclass(frozen=True)
class AlignmentScore:
    value: float
    n_items: int
    skipped: int = 0


def _dot64(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(a * b))


def cosine(a, b) -> float:
    """Cosine of two nonzero vectors of equal dimension, clamped to [-1, 1]."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    na = np.sqrt(np.sum(a * a))
    nb = np.sqrt(np.sum(b * b))
    if na == 0.0 or nb == 0.0:
        raise ZeroVector("cosine of a zero vector is undefined")
    return float(np.clip(np.sum(a * b) / (na * nb), -1.0, 1.0))


def _resolve(model: EmbeddingModel, ref: EntityRef) -> np.ndarray:
    vec = vector(model, ref)
    if vec is None:
        raise UnknownEntity(ref)
    return vec


def _candidate_block(model: EmbeddingModel, kind: str):
    """(refs, rows) for every entity of one kind."""
    if kind == "api":
        refs = [EntityRef("api", t) for t in model.vocab.tokens]
        return refs, model.W
    lo, hi = model.tags.kind_ranges.get(kind, (0, 0))
    refs = [EntityRef(kind, model.tags.entries[i][1]) for i in range(lo, hi)]
    return refs, model.D[lo:hi]


def _scan(model: EmbeddingModel, query_vec: np.ndarray, kinds, language,
          api_languages, exclude: set[EntityRef]) -> list[Neighbor]:
    q = np.asarray(query_vec, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != model.dim:
        raise DimensionMismatch(f"query vector has shape {q.shape}, model dim {model.dim}")
    qn = np.sqrt(np.sum(q * q))
    if qn == 0.0:
        raise ZeroVector("query vector is zero")
    neighbors: list[Neighbor] = []
    for kind in kinds:
        refs, rows = _candidate_block(model, kind)
        if not refs:
            continue
        m = rows.astype(np.float64, copy=False)
        dots = np.sum(m * q[None, :], axis=1)
        norms = np.sqrt(np.sum(m * m, axis=1))
        for i, ref in enumerate(refs):
            if ref in exclude or norms[i] == 0.0:
                continue
            if language is not None and kind == "api":
                if api_languages is None or language not in api_languages.get(ref.id, ()):
                    continue
            score = float(np.clip(dots[i] / (norms[i] * qn), -1.0, 1.0))
            neighbors.append(Neighbor(ref, score))
    neighbors.sort(key=lambda nb: (-nb.score, nb.entity.kind, nb.entity.id))
    return neighbors


def most_similar(model: EmbeddingModel, seed, top_n: int = 10, kinds=None,
                 language: str | None = None, api_languages: dict | None = None,
                 exclude=()) -> list[Neighbor]:
    """Exact nearest-neighbor scan by cosine.

    `seed` is an EntityRef or a raw vector. Candidates default to the seed's
    own kind (api for raw vectors); `kinds` widens or narrows that. The
    language filter applies to API candidates via the corpus attribution table
    `api_languages` (token -> set of language ids). The seed entity itself is
    always excluded; ties break by ascending id.
    """
    if top_n < 1:
        raise ValueError("top_n must be >= 1")
    excluded = set(exclude)
    if isinstance(seed, EntityRef):
        vec = _resolve(model, seed)
        excluded.add(seed)
        default_kinds = (seed.kind,)
    else:
        vec = np.asarray(seed)
        default_kinds = ("api",)
    kinds = tuple(kinds) if kinds else default_kinds
    for kind in kinds:
        if kind not in ENTITY_KINDS:
            raise ValueError(f"unknown candidate kind {kind!r}")
    return _scan(model, vec, kinds, language, api_languages, excluded)[:top_n]


def analogy(model: EmbeddingModel, terms, top_n: int = 10, kinds=None,
            language: str | None = None, api_languages: dict | None = None) -> list[Neighbor]:
    """Signed vector arithmetic: terms are (sign, EntityRef) pairs.

    The query vector is the signed sum of the raw vectors, accumulated in a
    canonical term order so the result is independent of how the expression
    was written. Expression entities are excluded from the results.
    """
    terms = list(terms)
    if not terms:
        raise ValueError("need at least one term")
    terms.sort(key=lambda sr: (sr[1].kind, sr[1].id, sr[0]))
    q = np.zeros(model.dim, dtype=np.float64)
    exclude = set()
    for sign, ref in terms:
        vec = _resolve(model, ref)
        q += float(sign) * vec.astype(np.float64)
        exclude.add(ref)
    if kinds is None:
        kinds = ("api",)
    return _scan(model, q, tuple(kinds), language, api_languages, exclude)[:top_n]


def _mean_alignment(model: EmbeddingModel, base_vec: np.ndarray, refs,
                    aggregation: str) -> AlignmentScore:
    vectors = []
    skipped = 0
    for ref in refs:
        vec = vector(model, ref)
        if vec is None or not np.any(vec):
            skipped += 1
            continue
        vectors.append(np.asarray(vec, dtype=np.float64))
    if not vectors:
        raise NoResolvableApis(f"none of the {len(list(refs))} items resolve to a nonzero vector")
    if aggregation == "centroid":
        value = cosine(base_vec, np.mean(vectors, axis=0))
    elif aggregation == "mean":
        value = float(np.mean([cosine(base_vec, v) for v in vectors]))
    else:
        raise ValueError("aggregation must be 'mean' or 'centroid'")
    return AlignmentScore(value=value, n_items=len(vectors), skipped=skipped)


def align_to_apis(model: EmbeddingModel, dev: EntityRef, apis,
                  aggregation: str = "mean") -> AlignmentScore:
    """Alignment of one entity to a set of API tokens.

    Default is the mean of cosines (each API's contribution stays bounded);
    aggregation="centroid" scores against the mean vector instead.
    Unresolvable APIs are skipped and counted.
    """
    base = _resolve(model, dev)
    refs = [EntityRef("api", a) for a in apis]
    return _mean_alignment(model, base, refs, aggregation)


def align_entities(model: EmbeddingModel, base: EntityRef, refs,
                   aggregation: str = "mean") -> AlignmentScore:
    """Alignment of one entity to a set of arbitrary entities (same semantics
    as align_to_apis)."""
    return _mean_alignment(model, _resolve(model, base), list(refs), aggregation)


def align_pair(model: EmbeddingModel, a: EntityRef, b: EntityRef) -> float:
    """Cosine between the raw vectors of two entities."""
    return cosine(_resolve(model, a), _resolve(model, b))
