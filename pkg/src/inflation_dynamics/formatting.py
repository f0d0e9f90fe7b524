"""Fixed-precision number formatting for every emitted report."""
from __future__ import annotations

import json
from pathlib import Path

SIG_DIGITS = 12


def fmt(x) -> str:
    """12 significant digits; ``-0`` collapses to ``0``."""
    x = float(x)
    if x == 0:
        return "0"
    return format(x, f".{SIG_DIGITS}g")


def num(x) -> float:
    return float(fmt(x))


def write_json(obj, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=False) + "\n", encoding="utf-8")
