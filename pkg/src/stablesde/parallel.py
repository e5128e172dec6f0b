"""Chunked, order-independent fan-out over path indices."""

from __future__ import annotations

import os
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor

from .errors import ParameterError

WORKERS_ENV = "STABLESDE_WORKERS"

# Work is split into chunks of this many paths whatever the worker count, so
# every path is computed inside an identically shaped array.
CHUNK_SIZE = 64


def resolve_workers(workers: int | str | None = None) -> int:
    if workers is None:
        workers = os.environ.get(WORKERS_ENV, 1)
    if workers == "auto":
        return os.cpu_count() or 1
    try:
        n = int(workers)
    except (TypeError, ValueError):
        raise ParameterError(f"worker count must be a positive integer or 'auto', got {workers!r}")
    if n < 1:
        raise ParameterError(f"worker count must be positive, got {n}")
    return n


def chunk_bounds(n_items: int, chunk: int = CHUNK_SIZE) -> list[tuple[int, int]]:
    return [(lo, min(lo + chunk, n_items)) for lo in range(0, n_items, chunk)]


def map_chunks(fn: Callable, n_items: int, args: Sequence = (), workers: int = 1,
               chunk: int = CHUNK_SIZE) -> list:
    """Call ``fn(lo, hi, *args)`` for each chunk and return results in chunk order.

    ``fn`` and ``args`` must be picklable when ``workers > 1``.
    """
    bounds = chunk_bounds(n_items, chunk)
    if workers <= 1 or len(bounds) <= 1:
        return [fn(lo, hi, *args) for lo, hi in bounds]
    with ProcessPoolExecutor(max_workers=min(workers, len(bounds))) as ex:
        futures = [ex.submit(fn, lo, hi, *args) for lo, hi in bounds]
        return [f.result() for f in futures]
