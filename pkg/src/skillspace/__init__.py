"""Skill Space: one vector space for APIs, developers, projects, and languages.

The package covers the full pipeline: import extraction from changed source
files (`extract`), the delta corpus with its filters and time split (`corpus`),
the paragraph-vector trainer with negative sampling (`embed`), model
persistence (`model`), similarity/analogy/alignment queries (`query`), native
statistical kernels (`stats`), and the held-out evaluations h1..h5
(`evalharness`). The `skillspace` CLI wires them together.
"""

from .corpus import DeltaRecord, FilterConfig
from .embed import EmbeddingModel, TrainConfig, train
from .errors import SkillSpaceError
from .evalharness import EvalConfig
from .model import EntityRef, load, save

__all__ = [
    "DeltaRecord",
    "EmbeddingModel",
    "EntityRef",
    "EvalConfig",
    "FilterConfig",
    "SkillSpaceError",
    "TrainConfig",
    "load",
    "save",
    "train",
]

__version__ = "0.1.0"
