"""Thread-pool helpers for chunked kernels.

Chunk boundaries depend only on the problem size, never on the worker
count, and results are consumed in chunk order; outputs are therefore
bitwise identical for any number of workers.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

CHUNK = 256


def resolve_workers(workers: int | None) -> int:
    """``None`` falls back to ``$NLH_WORKERS``; 0 means one per CPU."""
    if workers is None:
        workers = int(os.environ.get("NLH_WORKERS", "1"))
    if workers < 0:
        raise ValueError(f"workers must be >= 0, got {workers}")
    if workers == 0:
        workers = os.cpu_count() or 1
    return workers


def chunk_bounds(total: int, chunk: int = CHUNK):
    return [(lo, min(lo + chunk, total)) for lo in range(0, total, chunk)]


def map_chunks(fn, total: int, workers: int | None = 1, chunk: int = CHUNK):
    """Call ``fn(lo, hi)`` for every chunk; return results in chunk order."""
    bounds = chunk_bounds(total, chunk)
    workers = resolve_workers(workers)
    if workers == 1 or len(bounds) <= 1:
        return [fn(lo, hi) for lo, hi in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda b: fn(*b), bounds))


def ordered_chunks(fn, total: int, workers: int | None = 1, chunk: int = CHUNK):
    """Yield ``(lo, hi, fn(lo, hi))`` in chunk order with bounded lookahead."""
    bounds = chunk_bounds(total, chunk)
    workers = resolve_workers(workers)
    if workers == 1:
        for lo, hi in bounds:
            yield lo, hi, fn(lo, hi)
        return
    with ThreadPoolExecutor(max_workers=workers) as pool:
        window = 2 * workers
        pending = []
        it = iter(bounds)
        for b in it:
            pending.append((b, pool.submit(fn, *b)))
            if len(pending) >= window:
                break
        while pending:
            (lo, hi), fut = pending.pop(0)
            result = fut.result()
            nxt = next(it, None)
            if nxt is not None:
                pending.append((nxt, pool.submit(fn, *nxt)))
            yield lo, hi, result
