"""CSV persistence.

Tables are ordered mappings of column name to a 1-D sequence. Floats are
written with 17 significant digits so the file round-trips bit-exactly;
integers and booleans are written as integers.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

__all__ = ["emit_csv", "read_csv", "format_value"]


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def emit_csv(table: dict, path) -> Path:
    """Write ``table`` to ``path`` (LF endings, header row, no quoting)."""
    path = Path(path)
    names = list(table)
    cols = [np.asarray(table[k]) if not isinstance(table[k], list) else table[k] for k in names]
    lengths = {len(c) for c in cols}
    if len(lengths) > 1:
        raise ValueError(f"columns have different lengths: {sorted(lengths)}")
    n = lengths.pop() if lengths else 0
    lines = [",".join(names)]
    converted = [c.tolist() if isinstance(c, np.ndarray) else list(c) for c in cols]
    for i in range(n):
        lines.append(",".join(format_value(c[i]) for c in converted))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> dict:
    """Read a file written by :func:`emit_csv` into float columns."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n").split(",")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    out = {}
    for j, name in enumerate(header):
        vals = [r[j] for r in rows]
        try:
            out[name] = np.array([float(v) for v in vals])
        except ValueError:
            out[name] = vals
    return out
