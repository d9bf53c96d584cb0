"""Delta corpus: the line format, storage, cleaning filters, and the time split.

A corpus file is UTF-8 lines of `language;project;timestamp;developer;api1;api2;...`,
optionally gzip-compressed (.gz suffix). Alias maps are TSV `raw<TAB>canonical`
files applied at read time.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .errors import SkillSpaceError
from .util import atomic_write, open_maybe_gzip

SEP = ";"


class BadFieldCount(SkillSpaceError):
    """A corpus line has fewer than five `;`-separated fields."""

    def __init__(self, message: str, line_no: int = 0):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class BadTimestamp(SkillSpaceError):
    """The timestamp field is not a non-negative integer."""

    def __init__(self, message: str, line_no: int = 0):
        super().__init__(f"line {line_no}: {message}" if line_no else message)
        self.line_no = line_no


class BadAliasMap(SkillSpaceError):
    """An alias map violates the fixed-point invariant or is malformed."""


@dataclass(frozen=True)
class DeltaRecord:
    """One changed file's API set, tagged with project, developer, timestamp, language."""

    language: str
    project: str
    timestamp: int
    developer: str
    apis: tuple[str, ...]

    def __post_init__(self):
        if not self.apis:
            raise ValueError("a delta must carry at least one API")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")
        for f in (self.language, self.project, self.developer, *self.apis):
            if SEP in f:
                raise ValueError(f"field {f!r} contains the reserved separator {SEP!r}")


def parse_delta_line(line: str, line_no: int = 0) -> DeltaRecord:
    """Parse one corpus line; errors carry the offending line number."""
    fields = line.rstrip("\n").split(SEP)
    if len(fields) < 5:
        raise BadFieldCount(f"expected at least 5 fields, got {len(fields)}", line_no)
    language, project, ts_text, developer = fields[:4]
    try:
        timestamp = int(ts_text)
    except ValueError:
        raise BadTimestamp(f"timestamp {ts_text!r} is not an integer", line_no) from None
    if timestamp < 0:
        raise BadTimestamp(f"timestamp {timestamp} is negative", line_no)
    return DeltaRecord(language, project, timestamp, developer, tuple(fields[4:]))


def format_delta_line(record: DeltaRecord) -> str:
    return SEP.join((record.language, record.project, str(record.timestamp),
                     record.developer, *record.apis))


def read_corpus(path: str) -> Iterator[DeltaRecord]:
    """Stream records from a corpus file (gzip-aware); blank lines are skipped."""
    with open_maybe_gzip(path, "rt") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            yield parse_delta_line(line, line_no)


def write_corpus(records: Iterable[DeltaRecord], path: str) -> int:
    """Write records to `path` (gzip when suffixed .gz); returns the record count."""
    n = 0
    with atomic_write(path, "wt") as fh:
        for record in records:
            fh.write(format_delta_line(record))
            fh.write("\n")
            n += 1
    return n


def load_alias_map(path: str) -> dict[str, str]:
    """Load a TSV alias map; `#` starts a comment line.

    Validates the fixed-point invariant: a canonical id that itself appears as
    a raw key must map to itself.
    """
    entries: dict[str, str] = {}
    with open_maybe_gzip(path, "rt") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise BadAliasMap(f"line {line_no}: expected raw<TAB>canonical, got {line!r}")
            entries[parts[0]] = parts[1]
    for raw, canonical in entries.items():
        if entries.get(canonical, canonical) != canonical:
            raise BadAliasMap(
                f"canonical id {canonical!r} (for {raw!r}) is not a fixed point")
    return entries


def apply_aliases(records: Iterable[DeltaRecord], dev_map: dict[str, str],
                  proj_map: dict[str, str]) -> Iterator[DeltaRecord]:
    """Replace developer/project ids by their canonical ids; unknown ids pass through."""
    for r in records:
        dev = dev_map.get(r.developer, r.developer)
        proj = proj_map.get(r.project, r.project)
        if dev == r.developer and proj == r.project:
            yield r
        else:
            yield DeltaRecord(r.language, proj, r.timestamp, dev, r.apis)


@dataclass(frozen=True)
class FilterConfig:
    """Cleaning bounds: developer activity window and the per-delta API cap."""

    min_commits: int = 100
    max_commits: int = 25_000
    max_apis_per_delta: int = 30
    drop_or_truncate: str = "drop"  # or "truncate"

    def __post_init__(self):
        if not (0 < self.min_commits <= self.max_commits):
            raise ValueError("need 0 < min_commits <= max_commits")
        if self.max_apis_per_delta < 1:
            raise ValueError("max_apis_per_delta must be >= 1")
        if self.drop_or_truncate not in ("drop", "truncate"):
            raise ValueError("drop_or_truncate must be 'drop' or 'truncate'")


@dataclass
class FilterReport:
    input_deltas: int = 0
    output_deltas: int = 0
    developers_below_min: int = 0
    developers_above_max: int = 0
    deltas_removed_dev_bounds: int = 0
    deltas_removed_api_cap: int = 0
    deltas_truncated: int = 0

    def rows(self) -> list[tuple[str, int]]:
        return [
            ("input_deltas", self.input_deltas),
            ("output_deltas", self.output_deltas),
            ("developers_below_min", self.developers_below_min),
            ("developers_above_max", self.developers_above_max),
            ("deltas_removed_dev_bounds", self.deltas_removed_dev_bounds),
            ("deltas_removed_api_cap", self.deltas_removed_api_cap),
            ("deltas_truncated", self.deltas_truncated),
        ]


def filter_corpus(records: Iterable[DeltaRecord],
                  cfg: FilterConfig) -> tuple[list[DeltaRecord], FilterReport]:
    """Apply the activity-window and API-cap filters (two passes over the records).

    Developer activity is approximated by delta count. Deltas exceeding the API
    cap are dropped, or truncated to the first `max_apis_per_delta` APIs when
    the config says truncate.
    """
    records = list(records)
    report = FilterReport(input_deltas=len(records))
    per_dev = Counter(r.developer for r in records)
    low = {d for d, n in per_dev.items() if n < cfg.min_commits}
    high = {d for d, n in per_dev.items() if n > cfg.max_commits}
    report.developers_below_min = len(low)
    report.developers_above_max = len(high)
    out: list[DeltaRecord] = []
    for r in records:
        if r.developer in low or r.developer in high:
            report.deltas_removed_dev_bounds += 1
            continue
        if len(r.apis) > cfg.max_apis_per_delta:
            if cfg.drop_or_truncate == "drop":
                report.deltas_removed_api_cap += 1
                continue
            r = DeltaRecord(r.language, r.project, r.timestamp, r.developer,
                            r.apis[:cfg.max_apis_per_delta])
            report.deltas_truncated += 1
        out.append(r)
    report.output_deltas = len(out)
    return out, report


def time_split(records: Iterable[DeltaRecord],
               cutoff: int) -> tuple[list[DeltaRecord], list[DeltaRecord]]:
    """Exact partition at the cutoff: train strictly before, test at or after."""
    train: list[DeltaRecord] = []
    test: list[DeltaRecord] = []
    for r in records:
        (train if r.timestamp < cutoff else test).append(r)
    return train, test


@dataclass
class LanguageStats:
    deltas: int = 0
    authors: int = 0
    projects: int = 0
    distinct_apis: int = 0
    fraction_within_cap: float = 1.0
    max_apis: int = 0


@dataclass
class CorpusStats:
    """Per-language delta/author/project/API counts plus the API-cap fraction."""

    per_language: dict[str, LanguageStats] = field(default_factory=dict)
    total: LanguageStats = field(default_factory=LanguageStats)

    def rows(self) -> list[tuple]:
        header = ("language", "deltas", "authors", "projects", "distinct_apis",
                  "fraction_within_cap", "max_apis")
        body = [
            (lang, s.deltas, s.authors, s.projects, s.distinct_apis,
             s.fraction_within_cap, s.max_apis)
            for lang, s in sorted(self.per_language.items())
        ]
        t = self.total
        body.append(("TOTAL", t.deltas, t.authors, t.projects, t.distinct_apis,
                     t.fraction_within_cap, t.max_apis))
        return [header] + body


def corpus_stats(records: Iterable[DeltaRecord], api_cap: int = 30) -> CorpusStats:
    """Exact per-language counts; distinct counts are over the ids as stored."""
    deltas = Counter()
    within = Counter()
    max_apis = Counter()
    devs = defaultdict(set)
    projects = defaultdict(set)
    apis = defaultdict(set)
    all_devs, all_projects, all_apis = set(), set(), set()
    total = LanguageStats()
    for r in records:
        lang = r.language
        deltas[lang] += 1
        if len(r.apis) <= api_cap:
            within[lang] += 1
        max_apis[lang] = max(max_apis[lang], len(r.apis))
        devs[lang].add(r.developer)
        projects[lang].add(r.project)
        apis[lang].update(r.apis)
        all_devs.add(r.developer)
        all_projects.add(r.project)
        all_apis.update(r.apis)
        total.deltas += 1
        total.max_apis = max(total.max_apis, len(r.apis))
    stats = CorpusStats()
    within_total = 0
    for lang in deltas:
        n = deltas[lang]
        within_total += within[lang]
        stats.per_language[lang] = LanguageStats(
            deltas=n,
            authors=len(devs[lang]),
            projects=len(projects[lang]),
            distinct_apis=len(apis[lang]),
            fraction_within_cap=within[lang] / n if n else 1.0,
            max_apis=max_apis[lang],
        )
    total.authors = len(all_devs)
    total.projects = len(all_projects)
    total.distinct_apis = len(all_apis)
    total.fraction_within_cap = within_total / total.deltas if total.deltas else 1.0
    stats.total = total
    return stats


def sample_projects(records: Iterable[DeltaRecord], n_projects: int,
                    seed: int) -> list[DeltaRecord]:
    """Keep only the deltas of `n_projects` projects drawn uniformly (seeded).

    Returns all records unchanged when the corpus has that many projects or
    fewer. Useful for cutting a corpus down to a trainable size.
    """
    import numpy as np

    records = list(records)
    projects = sorted({r.project for r in records})
    if len(projects) <= n_projects:
        return records
    rng = np.random.default_rng(seed)
    chosen = {projects[i] for i in rng.choice(len(projects), size=n_projects,
                                              replace=False)}
    return [r for r in records if r.project in chosen]


@dataclass
class Attribution:
    """Which languages each API token / project / developer was seen in."""

    api_languages: dict[str, set[str]] = field(default_factory=dict)
    project_languages: dict[str, set[str]] = field(default_factory=dict)
    developer_languages: dict[str, set[str]] = field(default_factory=dict)


def language_attribution(records: Iterable[DeltaRecord]) -> Attribution:
    attr = Attribution()
    for r in records:
        for api in r.apis:
            attr.api_languages.setdefault(api, set()).add(r.language)
        attr.project_languages.setdefault(r.project, set()).add(r.language)
        attr.developer_languages.setdefault(r.developer, set()).add(r.language)
    return attr
