"""Small text formats: 17-digit floats, key=value sidecars and CSV tables."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .constants import FLOAT_DIGITS


def format_float(x) -> str:
    return f"{float(x):.{FLOAT_DIGITS}g}"


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format_float(v)
    if v is None:
        return ""
    return str(v)


def write_keyvalue(path, items: dict) -> Path:
    path = Path(path)
    path.write_text("".join(f"{k}={format_value(v)}\n" for k, v in items.items()))
    return path


def read_keyvalue(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    lines = [",".join(header)]
    lines.extend(",".join(format_value(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n")
    return path
