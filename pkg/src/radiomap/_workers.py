"""Row-range scheduling for the nogil numba kernels."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

THREADS_ENV = "RADIOMAP_THREADS"


def resolve_threads(threads: int | None = None) -> int:
    """Effective worker count: the request, capped by ``RADIOMAP_THREADS``."""
    n = threads if threads is not None else (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, int(cap))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


def run_rows(kernel, height: int, args: tuple, threads: int | None = 1) -> None:
    """Call ``kernel(*args, row_start, row_stop)`` over disjoint row blocks.

    Each block writes only its own output rows, so the result does not depend
    on the number of workers.
    """
    n = min(resolve_threads(threads), height)
    if n <= 1:
        kernel(*args, 0, height)
        return
    bounds = [round(k * height / n) for k in range(n + 1)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(kernel, *args, lo, hi) for lo, hi in zip(bounds, bounds[1:]) if hi > lo]
        for f in futures:
            f.result()
