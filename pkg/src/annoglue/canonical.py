"""Canonical JSON and atomic file replacement.

Canonical form: UTF-8, LF line endings, object keys sorted lexicographically,
arrays kept in insertion order, no trailing whitespace. Equal values always
serialize to identical bytes, which is what makes byte-level round-trip
checks and golden files possible.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

from .errors import IoFailureError


def canonical_dumps(value, *, indent: int | None = None) -> str:
    """Deterministic JSON text. Compact by default; pass ``indent`` for the
    pretty repository-file form."""
    return json.dumps(
        value,
        sort_keys=True,
        ensure_ascii=False,
        allow_nan=False,
        indent=indent,
        separators=(",", ":") if indent is None else (",", ": "),
    )


def canonical_file_text(value) -> str:
    """Repository files are pretty-printed (indent 2) with a trailing LF."""
    return canonical_dumps(value, indent=2) + "\n"


def atomic_write_text(path: Path, text: str) -> None:
    """Write-temp-then-rename so readers only ever see old or new content."""
    path = Path(path)
    try:
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(text)
                handle.flush()
                os.fsync(handle.fileno())
            os.replace(tmp_name, path)
        except BaseException:
            try:
                os.unlink(tmp_name)
            except OSError:
                pass
            raise
    except OSError as exc:
        raise IoFailureError(f"cannot write {path}: {exc}") from exc
