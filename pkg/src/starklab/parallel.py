"""Deterministic parallel map over independent pure tasks.

Per-point band solves and per-trajectory evolutions are embarrassingly
parallel; the heavy lifting happens inside LAPACK/BLAS which releases the
GIL, so a thread pool gives real speedup without pickling overhead.
Results always come back in input order.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

_DEFAULT_WORKERS = 1


def default_workers() -> int:
    return _DEFAULT_WORKERS


def set_default_workers(n: int) -> None:
    global _DEFAULT_WORKERS
    _DEFAULT_WORKERS = max(1, int(n))


def pmap(fn, items, workers: int | None = None) -> list:
    """map(fn, items) with deterministic ordering, optionally threaded."""
    items = list(items)
    workers = default_workers() if workers is None else workers
    workers = min(max(1, workers), len(items) or 1, os.cpu_count() or 1)
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
