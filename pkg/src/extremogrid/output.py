"""Deterministic file output: atomic writes, fixed float formatting, hashes.

Primary outputs carry no timestamps, so identical runs produce identical
bytes.  Floats are printed with 17 significant digits, enough to round-trip
double precision.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile

__all__ = [
    "atomic_write_bytes",
    "atomic_write_text",
    "config_hash",
    "csv_text",
    "fmt",
    "json_text",
]


def fmt(value) -> str:
    """Render a cell: floats at 17 significant digits, '.' decimal point."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return f"{value:.17g}"
    return str(value)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def config_hash(config: dict) -> str:
    """Short stable hash of a fully resolved configuration."""
    canon = "\n".join(f"{k}={config[k]}" for k in sorted(config))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def csv_text(columns, rows, header_lines=()) -> str:
    """CSV with '#'-prefixed header comment lines before the column row."""
    lines = [f"# {line}" for line in header_lines]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(fmt(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def json_text(payload: dict) -> str:
    """Deterministic JSON: sorted keys, fixed separators."""
    return json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
