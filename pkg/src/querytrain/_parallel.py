"""Fixed-chunk thread mapping.

Work is always split into chunks of a fixed size and results are returned
in chunk order, so the arithmetic never depends on the worker count.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

CHUNK_SIZE = 128


def chunk_bounds(n: int, chunk: int = CHUNK_SIZE):
    return [(start, min(start + chunk, n)) for start in range(0, n, chunk)]


def chunked_map(fn, n: int, threads: int = 1, chunk: int = CHUNK_SIZE):
    """Call ``fn(start, stop)`` for every chunk of ``range(n)``; results in order."""
    bounds = chunk_bounds(n, chunk)
    if threads <= 1 or len(bounds) <= 1:
        return [fn(a, b) for a, b in bounds]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda ab: fn(*ab), bounds))
