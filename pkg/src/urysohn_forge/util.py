"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def default_workers():
    """Worker-pool size: URYSOHN_FORGE_WORKERS, defaulting to 1 (sequential)."""
    try:
        return max(1, int(os.environ.get("URYSOHN_FORGE_WORKERS", "1")))
    except ValueError:
        return 1


def pmap(fn, items, workers=None):
    """Order-preserving map, fanning out over a thread pool when workers > 1.

    Results are returned in input order regardless of the pool size, so
    callers stay deterministic.
    """
    items = list(items)
    workers = default_workers() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
