"""Model persistence and typed vector access.

Binary layout (all integers little-endian):

    magic "SKSP" | version u32 | dim u32 | V u32 | T u32
    config JSON (u32 length + UTF-8 bytes)
    meta   JSON (u32 length + UTF-8 bytes)
    V x (u32 token length + token UTF-8 + u64 count)
    T x (kind byte + u32 id length + id UTF-8)
    W (V*dim float32), D (T*dim float32), O (V*dim float32), row-major

The text export uses the common header-plus-rows vector format: first line
"<rows> <dim>", then one entity per line.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .embed import EmbeddingModel, TagSpace, TrainConfig, Vocabulary
from .errors import SkillSpaceError
from .util import atomic_write

MAGIC = b"SKSP"
FORMAT_VERSION = 1

_KIND_TO_BYTE = {"developer": 0, "project": 1, "language": 2}
_BYTE_TO_KIND = {v: k for k, v in _KIND_TO_BYTE.items()}

ENTITY_KINDS = ("api", "developer", "project", "language")
_NAMESPACE = {"api": "api", "developer": "dev", "project": "proj", "language": "lang"}


class BadMagic(SkillSpaceError):
    pass


class UnsupportedVersion(SkillSpaceError):
    pass


class TruncatedFile(SkillSpaceError):
    def __init__(self, offset: int, wanted: int, got: int):
        super().__init__(f"file ends at byte {offset + got}: needed {wanted} more "
                         f"bytes at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class EntityRef:
    """A typed handle into the space: an API token or a developer/project/language tag."""

    kind: str
    id: str

    def __post_init__(self):
        if self.kind not in ENTITY_KINDS:
            raise ValueError(f"unknown entity kind {self.kind!r}")

    def __str__(self):
        return f"{_NAMESPACE[self.kind]}:{self.id}"


def parse_entity(text: str) -> EntityRef:
    """Parse "kind:id" notation; bare ids default to the api kind."""
    if ":" in text:
        prefix, rest = text.split(":", 1)
        for kind, ns in _NAMESPACE.items():
            if prefix in (ns, kind):
                return EntityRef(kind, rest)
    return EntityRef("api", text)


def save(model: EmbeddingModel, path: str) -> None:
    """Serialize the model; the write is atomic and the byte stream deterministic."""
    config_blob = json.dumps(_config_dict(model.config), sort_keys=True,
                             separators=(",", ":")).encode("utf-8")
    meta_blob = json.dumps(model.meta, sort_keys=True,
                           separators=(",", ":")).encode("utf-8")
    V, dim = model.W.shape
    T = model.D.shape[0]
    with atomic_write(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<IIII", FORMAT_VERSION, dim, V, T))
        fh.write(struct.pack("<I", len(config_blob)))
        fh.write(config_blob)
        fh.write(struct.pack("<I", len(meta_blob)))
        fh.write(meta_blob)
        for token, count in zip(model.vocab.tokens, model.vocab.counts):
            raw = token.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<Q", count))
        for kind, tag_id in model.tags.entries:
            raw = tag_id.encode("utf-8")
            fh.write(struct.pack("<BI", _KIND_TO_BYTE[kind], len(raw)))
            fh.write(raw)
        for matrix in (model.W, model.D, model.O):
            fh.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, n: int) -> bytes:
        if self.offset + n > len(self.data):
            raise TruncatedFile(self.offset, n, len(self.data) - self.offset)
        chunk = self.data[self.offset:self.offset + n]
        self.offset += n
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load(path: str) -> EmbeddingModel:
    """Load a model saved by `save`; magic and version are checked before anything else."""
    with open(path, "rb") as fh:
        data = fh.read()
    r = _Reader(data)
    magic = r.take(4)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r} at offset 0")
    (version,) = r.unpack("<I")
    if version != FORMAT_VERSION:
        raise UnsupportedVersion(f"format version {version} not supported "
                                 f"(expected {FORMAT_VERSION})")
    dim, V, T = r.unpack("<III")
    (config_len,) = r.unpack("<I")
    config = _config_from_dict(json.loads(r.take(config_len).decode("utf-8")))
    (meta_len,) = r.unpack("<I")
    meta = json.loads(r.take(meta_len).decode("utf-8"))
    tokens, counts = [], []
    for _ in range(V):
        (tlen,) = r.unpack("<I")
        tokens.append(r.take(tlen).decode("utf-8"))
        (count,) = r.unpack("<Q")
        counts.append(count)
    entries = []
    for _ in range(T):
        kind_byte, ilen = r.unpack("<BI")
        if kind_byte not in _BYTE_TO_KIND:
            raise SkillSpaceError(f"unknown tag kind byte {kind_byte} at offset {r.offset}")
        entries.append((_BYTE_TO_KIND[kind_byte], r.take(ilen).decode("utf-8")))
    vocab = Vocabulary(tokens, counts, config.min_count)
    tag_counts = [0] * len(entries)
    tags = TagSpace(entries, tag_counts)

    def matrix(rows: int) -> np.ndarray:
        raw = r.take(rows * dim * 4)
        return np.frombuffer(raw, dtype="<f4").reshape(rows, dim).copy()

    W = matrix(V)
    D = matrix(T)
    O = matrix(V)
    return EmbeddingModel(W=W, D=D, O=O, vocab=vocab, tags=tags,
                          config=config, meta=meta)


def _config_dict(config: TrainConfig) -> dict:
    from dataclasses import asdict

    return asdict(config)


def _config_from_dict(d: dict) -> TrainConfig:
    return TrainConfig(**d)


def vector(model: EmbeddingModel, ref: EntityRef) -> np.ndarray | None:
    """Raw (unnormalized) input-side vector for an entity; None on a miss."""
    if ref.kind == "api":
        i = model.vocab.lookup(ref.id)
        return None if i is None else model.W[i]
    i = model.tags.lookup(ref.kind, ref.id)
    return None if i is None else model.D[i]


def iter_entities(model: EmbeddingModel, which: str = "all"):
    """Yield (EntityRef, vector) pairs for api rows, tag rows, or both."""
    if which not in ("api", "tags", "all"):
        raise ValueError("which must be one of api, tags, all")
    if which in ("api", "all"):
        for i, token in enumerate(model.vocab.tokens):
            yield EntityRef("api", token), model.W[i]
    if which in ("tags", "all"):
        for i, (kind, tag_id) in enumerate(model.tags.entries):
            yield EntityRef(kind, tag_id), model.D[i]


def export_text(model: EmbeddingModel, path: str, which: str = "api") -> int:
    """Write input-side vectors as text: header "<rows> <dim>", one entity per line.

    API rows are written under their plain token name unless which="all", where
    every id is namespaced. Whitespace inside ids is replaced to keep the line
    format parseable. Returns the row count.
    """
    entities = list(iter_entities(model, which))
    dim = model.dim
    with atomic_write(path, "wt") as fh:
        fh.write(f"{len(entities)} {dim}\n")
        for ref, vec in entities:
            if which == "all" or ref.kind != "api":
                name = str(ref)
            else:
                name = ref.id
            name = "_".join(name.split())
            values = " ".join(f"{v:.6f}" for v in vec)
            fh.write(f"{name} {values}\n")
    return len(entities)
