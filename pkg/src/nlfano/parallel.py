"""Order-preserving parallel map, capped by the FANO_THREADS environment variable."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor


def worker_count(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, int(requested))
    env = os.environ.get("FANO_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"FANO_THREADS must be an integer, got {env!r}") from None
    return os.cpu_count() or 1


def pmap(func, items, workers: int | None = None) -> list:
    items = list(items)
    n = min(worker_count(workers), len(items))
    if n <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(func, items, chunksize=max(1, len(items) // (4 * n))))
