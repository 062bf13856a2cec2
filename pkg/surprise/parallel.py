"""Deterministic chunked map/reduce over data rows.

Chunk boundaries depend only on ``n`` and ``chunk_size``, never on the worker
count, and partial results are combined in chunk order, so every reduction
is bit-identical whether it runs on one thread or many.
"""

from __future__ import annotations

from collections.abc import Callable
from functools import reduce
from typing import Any, TypeVar

import numpy as np
from joblib import Parallel, delayed

from .config import DEFAULT_CHUNK_SIZE

T = TypeVar("T")


def chunk_bounds(n: int, chunk_size: int = DEFAULT_CHUNK_SIZE) -> list[tuple[int, int]]:
    if chunk_size < 1:
        raise ValueError("chunk_size must be positive.")
    return [(start, min(start + chunk_size, n)) for start in range(0, n, chunk_size)]


def chunked_map(
    fn: Callable[[int, int], T],
    n: int,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> list[T]:
    """Apply ``fn(start, stop)`` to every chunk, results in chunk order."""
    bounds = chunk_bounds(n, chunk_size)
    if workers <= 1 or len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]
    # numpy releases the GIL inside its kernels, threads avoid copying the data
    return Parallel(n_jobs=workers, prefer="threads")(delayed(fn)(start, stop) for start, stop in bounds)


def chunked_sum(
    fn: Callable[[int, int], T],
    n: int,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> T:
    """Sum chunk results in chunk order; tuples are added elementwise."""
    return reduce(_combine, chunked_map(fn, n, workers=workers, chunk_size=chunk_size))


def _combine(a: Any, b: Any) -> Any:
    if isinstance(a, tuple):
        return tuple(x + y for x, y in zip(a, b))
    return a + b


def chunked_concat(
    fn: Callable[[int, int], np.ndarray],
    n: int,
    *,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK_SIZE,
) -> np.ndarray:
    return np.concatenate(chunked_map(fn, n, workers=workers, chunk_size=chunk_size))
