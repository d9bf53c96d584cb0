"""Shared exception base for all skillspace modules.

Every module-level error derives from SkillSpaceError so that callers (and
the CLI) can map failures to a single machine-parsable class name.
"""


class SkillSpaceError(Exception):
    """Base class for all errors raised by this package."""

    def __str__(self) -> str:
        msg = super().__str__()
        return msg if msg else self.__class__.__name__
