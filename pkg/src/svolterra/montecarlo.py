"""Batched Monte Carlo with a fixed reduction order.

Paths are cut into batches of ``batch_size`` consecutive indices.  Batches
may run on any number of worker threads, but their partial sums are always
combined in batch order, so results are bitwise independent of ``workers``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, TypeVar

T = TypeVar("T")

DEFAULT_BATCH = 500


def batch_bounds(n_paths: int, batch_size: int = DEFAULT_BATCH):
    return [(lo, min(lo + batch_size, n_paths)) for lo in range(0, n_paths, batch_size)]


def map_batches(fn: Callable[[int, int], T], n_paths: int, batch_size: int = DEFAULT_BATCH,
                workers: int = 1) -> list[T]:
    """Apply ``fn(lo, hi)`` to every batch; results come back in batch order."""
    bounds = batch_bounds(n_paths, batch_size)
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def ordered_sum(parts):
    total = parts[0]
    for p in parts[1:]:
        total = total + p
    return total
