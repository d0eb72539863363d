"""Output helpers shared by the CSV writers."""
from __future__ import annotations

import contextlib
from pathlib import Path


@contextlib.contextmanager
def text_out(target):
    """Yield a writable text stream for a path or pass an open stream through."""
    if hasattr(target, "write"):
        yield target
        return
    with Path(target).open("w", newline="") as fh:
        yield fh


def out_path(target):
    return None if hasattr(target, "write") else Path(target)
