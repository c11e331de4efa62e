"""Worker-count policy shared by every parallel sweep."""

import os
from concurrent.futures import ThreadPoolExecutor


def worker_count() -> int:
    """Number of worker threads; ``HSBMO_THREADS`` caps the CPU count."""
    n = os.cpu_count() or 1
    cap = os.environ.get("HSBMO_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def parallel_map(fn, items):
    """Ordered map over ``items``; serial when a single worker is allowed."""
    items = list(items)
    workers = min(worker_count(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
