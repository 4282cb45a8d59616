"""Bounded fan-out over independent examples.

FUSENET_THREADS caps the worker count (default: machine cores). Results
always come back in input order, so aggregation downstream is identical
whatever the worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "FUSENET_THREADS"


def max_workers() -> int:
    raw = os.environ.get(ENV_VAR)
    if raw is not None:
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}")
        if value < 1:
            raise ValueError(f"{ENV_VAR} must be >= 1, got {value}")
        return value
    return os.cpu_count() or 1


def ordered_map(fn, items: list) -> list:
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
