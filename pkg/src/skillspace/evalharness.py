"""End-to-end evaluations of a trained space on held-out activity.

Five checks ship, mirroring the questions the space is meant to answer:

  h1  do developers align more with the new APIs they go on to use than with
      random same-language APIs they never touched? (paired t, per language)
  h2  same question for the new projects they join (paired t, pooled)
  h3  do projects align more with their new contributors than with random
      uninvolved developers? (Welch t, pooled)
  h4  does developer-project alignment predict pull-request acceptance after
      the usual controls? (logistic regression + VIFs)
  h5  does alignment track self-reported skill? (two linear models)

All sampling is seeded and iteration orders are sorted, so identical inputs
and seeds produce byte-identical reports. Evaluations refuse to run when the
model saw data at or past the cutoff.
"""

from __future__ import annotations

import csv
import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field, fields as dataclass_fields
from typing import Iterable, Sequence

import numpy as np

from .corpus import DeltaRecord, language_attribution
from .embed import EmbeddingModel
from .errors import SkillSpaceError
from .model import EntityRef, vector
from .query import align_entities, align_pair, align_to_apis
from .stats import (RegressionResult, TTestResult, ZeroVariance,
                    TooFewSamples, logistic_regression, ols, paired_t_test,
                    vif, welch_t_test)


class NoEligibleDevelopers(SkillSpaceError):
    pass


class NoEligibleProjects(SkillSpaceError):
    pass


class LeakageDetected(SkillSpaceError):
    """The model was trained on data at or past the evaluation cutoff."""


@dataclass(frozen=True)
class EvalConfig:
    cutoff: int
    seed: int = 1
    n_random: int = 10
    per_language: bool | None = None
    aggregation: str = "mean"

    def __post_init__(self):
        if self.n_random < 1:
            raise ValueError("n_random must be >= 1")
        if self.aggregation not in ("mean", "centroid"):
            raise ValueError("aggregation must be 'mean' or 'centroid'")


@dataclass
class TTestTable:
    """Labeled t-test rows plus the metadata every report embeds."""

    entries: list[tuple[str, TTestResult]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)


def _check_leakage(model: EmbeddingModel, cfg: EvalConfig) -> None:
    max_ts = model.meta.get("max_train_timestamp")
    if max_ts is not None and max_ts >= cfg.cutoff:
        raise LeakageDetected(
            f"model saw a delta at timestamp {max_ts}, at or past the cutoff {cfg.cutoff}")


def _base_meta(cfg: EvalConfig) -> dict:
    return {"seed": cfg.seed, "cutoff": cfg.cutoff, "aggregation": cfg.aggregation}


def _draw(rng: np.random.Generator, pool: Sequence[str], size: int) -> list[str]:
    idx = rng.choice(len(pool), size=size, replace=False)
    return [pool[i] for i in idx]


# ---------------------------------------------------------------------------
# H1 / H2: paired factual-vs-random alignment per developer
# ---------------------------------------------------------------------------

def _paired_eval(model, cfg, kind: str, factual_by_lang, pool_by_lang,
                 history, default_per_language: bool, test_name: str,
                 extra_meta: dict | None = None) -> TTestTable:
    """Shared engine for the paired evaluations.

    factual_by_lang: language -> developer -> sorted factual entity ids
    pool_by_lang:    language -> sorted candidate entity ids
    history:         developer -> ids to exclude from control pools
    """
    per_language = (cfg.per_language if cfg.per_language is not None
                    else default_per_language)
    rng = np.random.default_rng(cfg.seed)
    excluded = {"no_vector": 0, "short_pool": 0, "degenerate": 0}
    pairs_by_label: dict[str, tuple[list[float], list[float]]] = defaultdict(
        lambda: ([], []))
    skipped_languages: list[str] = []

    for lang in sorted(factual_by_lang):
        pool_all = pool_by_lang.get(lang, [])
        for dev in sorted(factual_by_lang[lang]):
            fact = sorted(factual_by_lang[lang][dev])
            if not fact:
                continue
            dev_ref = EntityRef("developer", dev)
            if vector(model, dev_ref) is None:
                excluded["no_vector"] += 1
                continue
            pool = [e for e in pool_all if e not in history.get(dev, ())]
            if len(pool) < len(fact):
                excluded["short_pool"] += 1
                continue
            controls = _draw(rng, pool, len(fact))
            overlap = set(controls) & set(fact)
            assert not overlap, f"control sample intersects factual set: {overlap}"
            if kind == "api":
                a_fact = align_to_apis(model, dev_ref, fact, cfg.aggregation).value
                a_ctrl = align_to_apis(model, dev_ref, controls, cfg.aggregation).value
            else:
                a_fact = align_entities(model, dev_ref,
                                        [EntityRef(kind, e) for e in fact],
                                        cfg.aggregation).value
                a_ctrl = align_entities(model, dev_ref,
                                        [EntityRef(kind, e) for e in controls],
                                        cfg.aggregation).value
            label = lang if per_language else "ALL"
            pairs_by_label[label][0].append(a_fact)
            pairs_by_label[label][1].append(a_ctrl)

    table = TTestTable(meta=_base_meta(cfg))
    for label in sorted(pairs_by_label):
        xs, ys = pairs_by_label[label]
        try:
            table.entries.append((label, paired_t_test(xs, ys)))
        except (TooFewSamples, ZeroVariance) as exc:
            excluded["degenerate"] += len(xs)
            skipped_languages.append(f"{label}({exc.__class__.__name__})")
    table.meta.update({
        "test": test_name,
        "granularity": "per-language" if per_language else "pooled",
        "excluded_no_vector": excluded["no_vector"],
        "excluded_short_pool": excluded["short_pool"],
        "excluded_degenerate": excluded["degenerate"],
    })
    if extra_meta:
        table.meta.update(extra_meta)
    if skipped_languages:
        table.meta["skipped_labels"] = ",".join(sorted(skipped_languages))
    if not table.entries:
        raise NoEligibleDevelopers(f"no label had enough eligible developers for {test_name}")
    return table


def eval_new_apis(model: EmbeddingModel, train: Iterable[DeltaRecord],
                  test: Iterable[DeltaRecord], cfg: EvalConfig) -> TTestTable:
    """H1: per developer, alignment to APIs first used in the test period vs.
    an equal-size random draw from the same-language vocabulary they never used."""
    train = list(train)
    test = list(test)
    _check_leakage(model, cfg)
    attr = language_attribution(train)
    dev_train: dict[str, set] = defaultdict(set)
    for r in train:
        dev_train[r.developer].update(r.apis)
    dev_all: dict[str, set] = defaultdict(set)
    for d, apis in dev_train.items():
        dev_all[d] = set(apis)
    for r in test:
        dev_all[r.developer].update(r.apis)

    pool_by_lang: dict[str, list[str]] = defaultdict(list)
    for token in model.vocab.tokens:
        for lang in attr.api_languages.get(token, ()):
            pool_by_lang[lang].append(token)

    factual: dict[str, dict[str, set]] = defaultdict(lambda: defaultdict(set))
    for r in test:
        for api in r.apis:
            if api in model.vocab and api not in dev_train.get(r.developer, ()):
                factual[r.language][r.developer].add(api)

    test_devs = {r.developer for r in test}
    with_factual = {d for per_dev in factual.values() for d in per_dev}
    return _paired_eval(model, cfg, "api", factual, pool_by_lang, dev_all,
                        default_per_language=True, test_name="h1-new-apis",
                        extra_meta={"excluded_no_new": len(test_devs - with_factual)})


def eval_new_projects(model: EmbeddingModel, train: Iterable[DeltaRecord],
                      test: Iterable[DeltaRecord], cfg: EvalConfig) -> TTestTable:
    """H2: per developer, alignment to the projects they first join in the test
    period vs. random same-language projects they never touched (pooled by default)."""
    train = list(train)
    test = list(test)
    _check_leakage(model, cfg)
    attr = language_attribution(train)
    dev_train_projects: dict[str, set] = defaultdict(set)
    for r in train:
        dev_train_projects[r.developer].add(r.project)
    dev_all_projects: dict[str, set] = defaultdict(set)
    for d, projs in dev_train_projects.items():
        dev_all_projects[d] = set(projs)
    for r in test:
        dev_all_projects[r.developer].add(r.project)

    pool_by_lang: dict[str, list[str]] = defaultdict(list)
    seen: dict[str, set] = defaultdict(set)
    for proj in sorted(attr.project_languages):
        if model.tags.lookup("project", proj) is None:
            continue
        for lang in attr.project_languages[proj]:
            if proj not in seen[lang]:
                seen[lang].add(proj)
                pool_by_lang[lang].append(proj)

    factual: dict[str, dict[str, set]] = defaultdict(lambda: defaultdict(set))
    for r in test:
        if r.project in dev_train_projects.get(r.developer, ()):
            continue
        if model.tags.lookup("project", r.project) is None:
            continue
        factual[r.language][r.developer].add(r.project)

    test_devs = {r.developer for r in test}
    with_factual = {d for per_dev in factual.values() for d in per_dev}
    return _paired_eval(model, cfg, "project", factual, pool_by_lang,
                        dev_all_projects, default_per_language=False,
                        test_name="h2-new-projects",
                        extra_meta={"excluded_no_new": len(test_devs - with_factual)})


# ---------------------------------------------------------------------------
# H3: new contributors vs. random developers, Welch over pooled alignments
# ---------------------------------------------------------------------------

def eval_new_contributors(model: EmbeddingModel, train: Iterable[DeltaRecord],
                          test: Iterable[DeltaRecord], cfg: EvalConfig) -> TTestTable:
    """H3: per project, alignment to its new test-period contributors vs. random
    developers who never contributed; one Welch t-test over the pooled values."""
    train = list(train)
    test = list(test)
    _check_leakage(model, cfg)
    proj_train_devs: dict[str, set] = defaultdict(set)
    for r in train:
        proj_train_devs[r.project].add(r.developer)
    proj_all_devs: dict[str, set] = defaultdict(set)
    for p, devs in proj_train_devs.items():
        proj_all_devs[p] = set(devs)
    test_devs_by_project: dict[str, set] = defaultdict(set)
    for r in test:
        proj_all_devs[r.project].add(r.developer)
        test_devs_by_project[r.project].add(r.developer)

    all_devs = model.tags.ids_of_kind("developer")
    rng = np.random.default_rng(cfg.seed)
    factual_vals: list[float] = []
    control_vals: list[float] = []
    projects_used = 0
    excluded = {"no_vector": 0, "no_new_contributors": 0, "short_pool": 0}

    for proj in sorted(test_devs_by_project):
        proj_ref = EntityRef("project", proj)
        if vector(model, proj_ref) is None:
            excluded["no_vector"] += 1
            continue
        newcomers = sorted(
            d for d in test_devs_by_project[proj]
            if d not in proj_train_devs.get(proj, ())
            and model.tags.lookup("developer", d) is not None)
        if not newcomers:
            excluded["no_new_contributors"] += 1
            continue
        pool = [d for d in all_devs if d not in proj_all_devs[proj]]
        if len(pool) < len(newcomers):
            excluded["short_pool"] += 1
            continue
        controls = _draw(rng, pool, len(newcomers))
        assert not (set(controls) & set(newcomers))
        for d in newcomers:
            factual_vals.append(align_pair(model, EntityRef("developer", d), proj_ref))
        for d in controls:
            control_vals.append(align_pair(model, EntityRef("developer", d), proj_ref))
        projects_used += 1

    if projects_used == 0:
        raise NoEligibleProjects("no project had eligible new contributors")
    table = TTestTable(meta=_base_meta(cfg))
    table.entries.append(("ALL", welch_t_test(factual_vals, control_vals)))
    table.meta.update({
        "test": "h3-new-contributors",
        "granularity": "pooled",
        "projects_used": projects_used,
        "excluded_no_vector": excluded["no_vector"],
        "excluded_no_new_contributors": excluded["no_new_contributors"],
        "excluded_short_pool": excluded["short_pool"],
    })
    return table


# ---------------------------------------------------------------------------
# H4: pull-request acceptance regression
# ---------------------------------------------------------------------------

PR_BINARY_FIELDS = ("dependency", "contain_issue_fix", "user_accepted_repo",
                    "contain_test_code")
PR_COUNT_FIELDS = ("creator_submitted", "creator_accepted", "repo_submitted",
                   "repo_accepted", "age", "comments", "review_comments",
                   "commits", "additions", "deletions", "changed_files",
                   "creator_total_commits", "creator_total_projects")


@dataclass(frozen=True)
class PrRecord:
    developer: str
    project: str
    accepted: int
    creator_submitted: float = 0.0
    creator_accepted: float = 0.0
    repo_submitted: float = 0.0
    repo_accepted: float = 0.0
    dependency: int = 0
    age: float = 0.0
    comments: float = 0.0
    review_comments: float = 0.0
    commits: float = 0.0
    additions: float = 0.0
    deletions: float = 0.0
    changed_files: float = 0.0
    contain_issue_fix: int = 0
    user_accepted_repo: int = 0
    creator_total_commits: float = 0.0
    creator_total_projects: float = 0.0
    contain_test_code: int = 0

    def __post_init__(self):
        if self.accepted not in (0, 1):
            raise ValueError("accepted must be 0 or 1")
        for name in PR_BINARY_FIELDS:
            if getattr(self, name) not in (0, 1):
                raise ValueError(f"{name} must be 0 or 1")
        for name in PR_COUNT_FIELDS:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


PR_CSV_COLUMNS = tuple(f.name for f in dataclass_fields(PrRecord))


def read_pr_csv(path: str) -> list[PrRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = set(PR_CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"pr csv missing columns: {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            try:
                records.append(PrRecord(
                    developer=row["developer"], project=row["project"],
                    accepted=int(row["accepted"]),
                    **{name: (int(row[name]) if name in PR_BINARY_FIELDS
                              else float(row[name]))
                       for name in PR_BINARY_FIELDS + PR_COUNT_FIELDS}))
            except ValueError as exc:
                raise ValueError(f"pr csv line {i}: {exc}") from exc
    return records


def _log1p_standardize(values: np.ndarray) -> np.ndarray:
    v = np.log1p(values)
    sd = v.std(ddof=1)
    if sd == 0.0:
        return v - v.mean()
    return (v - v.mean()) / sd


def eval_pr_acceptance(model: EmbeddingModel, prs: Sequence[PrRecord],
                       cfg: EvalConfig) -> RegressionResult:
    """H4: logistic regression of acceptance on developer-project alignment plus
    the usual controls (count predictors log1p-scaled and standardized)."""
    _check_leakage(model, cfg)
    usable: list[tuple[PrRecord, float]] = []
    dropped = 0
    for pr in prs:
        dev = vector(model, EntityRef("developer", pr.developer))
        proj = vector(model, EntityRef("project", pr.project))
        if dev is None or proj is None:
            dropped += 1
            continue
        usable.append((pr, align_pair(model, EntityRef("developer", pr.developer),
                                      EntityRef("project", pr.project))))
    total = len(prs)
    if total and dropped / total > 0.5:
        warnings.warn(f"{dropped}/{total} pull requests dropped: developer or "
                      f"project missing from the model", stacklevel=2)
    if not usable:
        raise NoEligibleDevelopers("no pull request resolves to model vectors")

    n = len(usable)
    y = np.array([pr.accepted for pr, _ in usable], dtype=np.float64)
    names = ["(Intercept)", "similarity"]
    columns = [np.ones(n), np.array([sim for _, sim in usable])]
    for name in PR_COUNT_FIELDS:
        raw = np.array([getattr(pr, name) for pr, _ in usable], dtype=np.float64)
        columns.append(_log1p_standardize(raw))
        names.append(name)
    for name in PR_BINARY_FIELDS:
        columns.append(np.array([getattr(pr, name) for pr, _ in usable], dtype=np.float64))
        names.append(name)
    X = np.column_stack(columns)
    result = logistic_regression(X, y, names)
    # full design: the constant is excluded from the output but kept in the
    # auxiliary regressions, which the VIF definition requires
    result.vif = vif(X, names)
    result.meta.update(_base_meta(cfg))
    result.meta.update({"test": "h4-pr-acceptance", "prs_input": total,
                        "prs_dropped": dropped,
                        "count_transform": "log1p+standardize"})
    return result


# ---------------------------------------------------------------------------
# H5: self-reported skill
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurveyRecord:
    developer: str
    api: str
    score: int
    commits: float

    def __post_init__(self):
        if not (isinstance(self.score, int) and 1 <= self.score <= 5):
            raise ValueError("score must be an integer in [1, 5]")


def read_survey_csv(path: str) -> list[SurveyRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        needed = {"developer", "api", "score", "commits"}
        missing = needed - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"survey csv missing columns: {sorted(missing)}")
        for i, row in enumerate(reader, start=2):
            try:
                records.append(SurveyRecord(row["developer"], row["api"],
                                            int(row["score"]), float(row["commits"])))
            except ValueError as exc:
                raise ValueError(f"survey csv line {i}: {exc}") from exc
    return records


def eval_self_reported(model: EmbeddingModel, surveys: Sequence[SurveyRecord],
                       cfg: EvalConfig) -> tuple[RegressionResult, RegressionResult]:
    """H5: two linear models over survey respondents.

    Per respondent the alignment measure is the cosine to the declared API
    minus the mean cosine to `n_random` seeded control APIs. Model A explains
    that alignment from API indicators, log(commits), and the score; model B
    explains the score from API indicators, log(commits), and the alignment.
    """
    _check_leakage(model, cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    dropped = {"unresolvable": 0, "no_commits": 0}
    for rec in surveys:
        dev_ref = EntityRef("developer", rec.developer)
        api_ref = EntityRef("api", rec.api)
        if vector(model, dev_ref) is None or vector(model, api_ref) is None:
            dropped["unresolvable"] += 1
            continue
        if rec.commits < 1:
            dropped["no_commits"] += 1
            continue
        pool = [t for t in model.vocab.tokens if t != rec.api]
        if len(pool) < cfg.n_random:
            raise NoEligibleDevelopers(
                f"vocabulary too small for {cfg.n_random} control APIs")
        controls = _draw(rng, pool, cfg.n_random)
        a_fact = align_pair(model, dev_ref, api_ref)
        a_ctrl = align_to_apis(model, dev_ref, controls, cfg.aggregation).value
        rows.append((rec, a_fact - a_ctrl))
    if not rows:
        raise NoEligibleDevelopers("no survey row resolves to model vectors")

    apis = sorted({rec.api for rec, _ in rows})
    n = len(rows)
    indicators = []
    names = []
    for api in apis:
        indicators.append(np.array([1.0 if rec.api == api else 0.0 for rec, _ in rows]))
        names.append(f"api:{api}")
    log_commits = np.array([math.log(rec.commits) for rec, _ in rows])
    score = np.array([float(rec.score) for rec, _ in rows])
    alignment = np.array([a for _, a in rows])

    X_a = np.column_stack(indicators + [log_commits, score])
    model_a = ols(X_a, alignment, names + ["log_commits", "score"])
    X_b = np.column_stack(indicators + [log_commits, alignment])
    model_b = ols(X_b, score, names + ["log_commits", "alignment"])
    for which, result in (("alignment", model_a), ("score", model_b)):
        result.meta.update(_base_meta(cfg))
        result.meta.update({"test": f"h5-self-reported-{which}",
                            "n_random": cfg.n_random,
                            "rows_input": len(surveys),
                            "dropped_unresolvable": dropped["unresolvable"],
                            "dropped_no_commits": dropped["no_commits"]})
    return model_a, model_b
