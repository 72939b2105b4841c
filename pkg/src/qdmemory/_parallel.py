"""Order-preserving process-pool map shared by the sweep and noise drivers."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

WORKERS_ENV = "QDMEMORY_WORKERS"


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    return max(n, 1)


def ordered_map(fn, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally spread over worker processes.

    Results come back in input order whatever the worker count, so any
    reduction done afterwards is deterministic.
    """
    items = list(items)
    workers = default_workers() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))
