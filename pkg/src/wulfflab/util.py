"""Small shared helpers: thread budget, ordered parallel map, stable float text."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

_THREAD_ENV = "WULFFLAB_THREADS"


def thread_count() -> int:
    """Worker budget for data-parallel loops, capped by WULFFLAB_THREADS."""
    raw = os.environ.get(_THREAD_ENV)
    if raw is not None:
        try:
            n = int(raw)
        except ValueError:
            n = 1
        return max(1, n)
    return max(1, min(4, os.cpu_count() or 1))


def parallel_map(fn, items):
    """Map a pure function over items, preserving order.

    Uses a thread pool when the budget allows; falls back to a plain loop.
    Results are reduced in input order, so output is deterministic.
    """
    items = list(items)
    workers = thread_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def float_text(x) -> str:
    """Shortest round-trip decimal text for a float (stable across runs)."""
    return repr(float(x))


def json_ready(obj):
    """Recursively convert numpy scalars/arrays so json.dumps can emit them."""
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
