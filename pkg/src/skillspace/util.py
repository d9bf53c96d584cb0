"""Small shared helpers: atomic file writes and gzip-aware opening."""

from __future__ import annotations

import gzip
import os
import tempfile
from contextlib import contextmanager


def open_maybe_gzip(path: str, mode: str = "rt", encoding: str | None = "utf-8"):
    """Open `path`, transparently using gzip when the suffix is .gz.

    Text modes get UTF-8 encoding by default; binary modes ignore `encoding`.
    """
    if "b" in mode:
        encoding = None
    if str(path).endswith(".gz"):
        return gzip.open(path, mode, encoding=encoding)
    return open(path, mode, encoding=encoding)


@contextmanager
def atomic_write(path: str, mode: str = "wt", encoding: str | None = "utf-8"):
    """Write to a temp file in the target directory, rename into place on success.

    A failure inside the block leaves no partial output at `path`.
    """
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(fd)
    try:
        if str(path).endswith(".gz") and "b" not in mode:
            handle = gzip.open(tmp, mode, encoding=encoding)
        elif "b" in mode:
            handle = open(tmp, mode)
        else:
            handle = open(tmp, mode, encoding=encoding)
        with handle:
            yield handle
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
