"""Import extraction: turn source-file content into the API tokens it depends on.

Extraction is rule-table driven rather than parser based: each corpus language
carries a set of line-oriented regex rules (plus a JSON-manifest rule for
dependency manifests such as package.json). Rule tables can be loaded from a
text config; a default table covering eight languages is embedded below.

Known imprecision: only line comments are stripped before matching, block
comments are scanned as-is.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass

from .errors import SkillSpaceError


class MalformedManifest(SkillSpaceError):
    """Manifest content could not be parsed as a dependency object (skip the blob)."""


class EmptyToken(SkillSpaceError):
    """Normalization reduced an import operand to the empty string."""


class BadRuleTable(SkillSpaceError):
    """A rule-table line could not be parsed."""


# One rule per line: language id, match kind, pattern, capture group (TAB separated).
# Kinds:
#   ext          pattern = space-separated file extensions (no dots)
#   file         pattern = manifest basename matched exactly
#   import       pattern = regex run per line / multiline, operand in `group`
#   import-block pattern = regex whose `group` spans a block; quoted strings
#                inside the block are the operands
#   manifest     pattern = "json": operands are the keys of the dependencies
#                and devDependencies maps
#   comment      pattern = line-comment prefix cut before matching
#   norm         pattern = token normalization rule: plain | toplevel | trim-tail
DEFAULT_RULES = """\
C	ext	c h cpp cc cxx hpp hh hxx c++ h++	-
C	comment	//	-
C	import	^\\s*#\\s*include\\s*(<[^>\\n]*>|"[^"\\n]*")	1
C	norm	plain	-
JAVA	ext	java	-
JAVA	comment	//	-
JAVA	import	^\\s*import\\s+(?:static\\s+)?([\\w.]+)	1
JAVA	norm	trim-tail	-
PY	ext	py pyw	-
PY	comment	#	-
PY	import	^\\s*from\\s+([A-Za-z_][\\w.]*)\\s+import\\b	1
PY	import	^\\s*import\\s+(.+)$	1
PY	norm	toplevel	-
GO	ext	go	-
GO	comment	//	-
GO	import	^\\s*import\\s+(?:[\\w.]+\\s+)?("[^"\\n]*")	1
GO	import-block	^\\s*import\\s*\\(([^)]*)\\)	1
GO	norm	plain	-
RB	ext	rb	-
RB	comment	#	-
RB	import	^\\s*require\\s+['"]([^'"\\n]+)['"]	1
RB	norm	plain	-
JS	file	package.json	-
JS	manifest	json	-
JS	norm	plain	-
PL	ext	pl pm	-
PL	comment	#	-
PL	import	^\\s*(?:use|require)\\s+([A-Za-z_][\\w:]*)	1
PL	norm	plain	-
R	ext	r	-
R	comment	#	-
R	import	(?:\\blibrary|\\brequire)\\s*\\(\\s*['"]?([\\w.]+)['"]?\\s*[,)]	1
R	norm	plain	-
"""

_QUOTED = re.compile(r'"([^"\n]*)"')
_ENCLOSERS = {("<", ">"), ('"', '"'), ("'", "'"), ("`", "`")}


@dataclass(frozen=True)
class CorpusLanguage:
    """One corpus language: its file-extension table and extraction rules."""

    id: str
    extensions: frozenset = frozenset()
    manifest_names: frozenset = frozenset()
    import_rules: tuple = ()        # (compiled regex, group) pairs
    block_rules: tuple = ()         # (compiled regex, group) pairs
    comment: str | None = None
    norm: str = "plain"
    manifest: bool = False

    def __repr__(self):
        return f"CorpusLanguage({self.id})"


def load_rule_table(text: str) -> dict[str, CorpusLanguage]:
    """Parse a rule-table config into CorpusLanguage objects keyed by id."""
    raw: dict[str, dict] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise BadRuleTable(f"line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        lang_id, kind, pattern, group = (p.strip() for p in parts)
        entry = raw.setdefault(
            lang_id,
            {"extensions": set(), "manifest_names": set(), "import_rules": [],
             "block_rules": [], "comment": None, "norm": "plain", "manifest": False},
        )
        if kind == "ext":
            entry["extensions"].update(e.lower() for e in pattern.split())
        elif kind == "file":
            entry["manifest_names"].add(pattern.lower())
        elif kind == "import":
            entry["import_rules"].append((re.compile(pattern, re.M), int(group)))
        elif kind == "import-block":
            entry["block_rules"].append((re.compile(pattern, re.M | re.S), int(group)))
        elif kind == "manifest":
            if pattern != "json":
                raise BadRuleTable(f"line {lineno}: unsupported manifest format {pattern!r}")
            entry["manifest"] = True
        elif kind == "comment":
            entry["comment"] = pattern
        elif kind == "norm":
            if pattern not in ("plain", "toplevel", "trim-tail"):
                raise BadRuleTable(f"line {lineno}: unknown norm rule {pattern!r}")
            entry["norm"] = pattern
        else:
            raise BadRuleTable(f"line {lineno}: unknown rule kind {kind!r}")
    return {
        lang_id: CorpusLanguage(
            id=lang_id,
            extensions=frozenset(e["extensions"]),
            manifest_names=frozenset(e["manifest_names"]),
            import_rules=tuple(e["import_rules"]),
            block_rules=tuple(e["block_rules"]),
            comment=e["comment"],
            norm=e["norm"],
            manifest=e["manifest"],
        )
        for lang_id, e in raw.items()
    }


_DEFAULT_TABLE: dict[str, CorpusLanguage] | None = None


def languages() -> dict[str, CorpusLanguage]:
    """Default language table (built once from the embedded rules)."""
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = load_rule_table(DEFAULT_RULES)
    return _DEFAULT_TABLE


def load_rule_file(path: str) -> dict[str, CorpusLanguage]:
    with open(path, encoding="utf-8") as fh:
        return load_rule_table(fh.read())


def detect_language(path: str, table: dict[str, CorpusLanguage] | None = None) -> CorpusLanguage | None:
    """Match a file path to a corpus language by basename (manifests) or final extension."""
    table = table if table is not None else languages()
    base = os.path.basename(path).lower()
    for lang in table.values():
        if base in lang.manifest_names:
            return lang
    if "." not in base:
        return None
    ext = base.rsplit(".", 1)[1]
    for lang in table.values():
        if ext in lang.extensions:
            return lang
    return None


def normalize_api(raw: str, lang: CorpusLanguage) -> str:
    """Canonicalize a captured import operand into an API token.

    Strips enclosing quotes/brackets, alias clauses, trailing punctuation and
    version suffixes; applies the language's dotted-path rule; replaces the
    reserved ';' separator. Idempotent.

    Raises EmptyToken when nothing is left.
    """
    tok = raw.strip()
    while len(tok) >= 2 and (tok[0], tok[-1]) in _ENCLOSERS:
        tok = tok[1:-1].strip()
    parts = tok.split()
    tok = parts[0] if parts else ""
    tok = tok.rstrip(";,")
    at = tok.find("@", 1)  # version suffix; a leading @ is a scope, keep it
    if at > 0:
        tok = tok[:at]
    if lang.norm == "toplevel":
        tok = tok.split(".", 1)[0]
    elif lang.norm == "trim-tail":
        tok = tok.rstrip("*.")
    tok = tok.replace(";", "_")
    if not tok:
        raise EmptyToken(f"operand {raw!r} normalized to nothing")
    return tok


def _cut_line_comments(content: str, comment: str | None) -> str:
    if not comment:
        return content
    lines = content.split("\n")
    return "\n".join(line.split(comment, 1)[0] if comment in line else line for line in lines)


def _extract_manifest(content: str) -> list[str]:
    try:
        obj = json.loads(content)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedManifest(f"not parseable as a manifest object: {exc}") from exc
    if not isinstance(obj, dict):
        raise MalformedManifest("manifest top level is not an object")
    names = []
    for key in ("dependencies", "devDependencies"):
        deps = obj.get(key, {})
        if not isinstance(deps, dict):
            raise MalformedManifest(f"{key} is not an object")
        names.extend(deps.keys())
    return names


def extract_imports(lang: CorpusLanguage, content: str) -> list[str]:
    """Extract canonical API tokens from `content`, first-appearance order, deduplicated.

    For manifest languages the tokens are the dependency-map keys. Raises
    MalformedManifest in that case when the content is not a valid manifest;
    this marks a skippable blob, not a fatal condition.
    """
    if lang.manifest:
        raws = _extract_manifest(content)
        found = list(enumerate(raws))
    else:
        text = _cut_line_comments(content, lang.comment)
        found = []
        for pat, group in lang.import_rules:
            for m in pat.finditer(text):
                found.append((m.start(), m.group(group)))
        for pat, group in lang.block_rules:
            for m in pat.finditer(text):
                base = m.start(group)
                for qm in _QUOTED.finditer(m.group(group)):
                    found.append((base + qm.start(), qm.group(1)))
        found.sort(key=lambda item: item[0])
    out: list[str] = []
    seen: set[str] = set()
    for _, raw in found:
        for piece in raw.split(","):
            if not piece.strip():
                continue
            try:
                tok = normalize_api(piece, lang)
            except EmptyToken:
                continue
            if tok not in seen:
                seen.add(tok)
                out.append(tok)
    return out


def decode_blob(data: bytes) -> str:
    """Decode raw file bytes as UTF-8 with lossy replacement (maximizes recall)."""
    return data.decode("utf-8", errors="replace")
