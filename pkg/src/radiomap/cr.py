"""Concentration rate (CR): a trimmed top-sum of window intensities.

For a pixel with a ``(2s+1) x (2s+1)`` window of ``N`` gray levels sorted in
ascending order, CR sums the order statistics with ranks
``N-num-m+1 .. N-m``: the ``num`` brightest values left after discarding the
``m`` brightest outliers.

Two implementations are provided. :func:`cr_map_naive` sorts every window;
:func:`cr_map_fast` slides a 256-bin histogram along each row and is the one
to use on full slices. Both produce identical integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from radiomap._workers import run_rows
from radiomap.preprocess import as_levels, pad_reflect

#: Coarse histogram block width (256 / 16 blocks).
_BLOCK = 16


@dataclass(frozen=True)
class CrParams:
    """Window half-size ``s``, summed count ``num``, excluded top count ``m``."""

    s: int = 2
    num: int = 15
    m: int = 5

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if self.num < 1:
            raise ValueError(f"num must be >= 1, got {self.num}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.num + self.m > self.window_size:
            raise ValueError(
                f"num + m = {self.num + self.m} exceeds window size N = {self.window_size} for s = {self.s}"
            )

    @property
    def window_size(self) -> int:
        return (2 * self.s + 1) ** 2


def cr_map_naive(levels: np.ndarray, params: CrParams = CrParams()) -> np.ndarray:
    """CR map by sorting each reflect-padded window.

    Args:
        levels: 2D array of integer gray levels in ``[0, 255]``.
        params: window and trimming parameters.

    Returns:
        float64 map of the same shape holding integer values in ``[0, 255*num]``.
    """
    levels = as_levels(levels)
    s, n = params.s, params.window_size
    lo, hi = n - params.num - params.m, n - params.m
    padded = pad_reflect(levels, s).astype(np.int64)
    height, width = levels.shape
    out = np.empty((height, width), dtype=np.float64)
    # Row blocks keep the (rows, width, N) window tensor small.
    step = max(1, 2**22 // (width * n))
    for r0 in range(0, height, step):
        r1 = min(height, r0 + step)
        block = padded[r0 : r1 + 2 * s]
        windows = np.lib.stride_tricks.sliding_window_view(block, (2 * s + 1, 2 * s + 1))
        windows = np.sort(windows.reshape(r1 - r0, width, n), axis=-1)
        out[r0:r1] = windows[..., lo:hi].sum(axis=-1)
    return out


@numba.njit(nogil=True, cache=True)
def _trimmed_top_sum(hist, block_count, block_sum, skip, need):
    total = 0
    b = 256 // _BLOCK - 1
    while b >= 0 and need > 0:
        c = block_count[b]
        if c <= skip:
            skip -= c
        elif skip == 0 and c <= need:
            total += block_sum[b]
            need -= c
        else:
            v = (b + 1) * _BLOCK - 1
            while v >= b * _BLOCK and need > 0:
                k = hist[v]
                if skip > 0:
                    dropped = min(k, skip)
                    skip -= dropped
                    k -= dropped
                taken = min(k, need)
                total += taken * v
                need -= taken
                v -= 1
        b -= 1
    return total


@numba.njit(nogil=True, cache=True)
def _cr_rows(padded, s, num, m, out, row_start, row_stop):
    width = out.shape[1]
    w = 2 * s + 1
    hist = np.zeros(256, dtype=np.int64)
    block_count = np.zeros(256 // _BLOCK, dtype=np.int64)
    block_sum = np.zeros(256 // _BLOCK, dtype=np.int64)
    for i in range(row_start, row_stop):
        hist[:] = 0
        block_count[:] = 0
        block_sum[:] = 0
        for r in range(i, i + w):
            for c in range(w):
                v = padded[r, c]
                hist[v] += 1
                block_count[v // _BLOCK] += 1
                block_sum[v // _BLOCK] += v
        for j in range(width):
            out[i, j] = _trimmed_top_sum(hist, block_count, block_sum, m, num)
            if j + 1 < width:
                for r in range(i, i + w):
                    v = padded[r, j]
                    hist[v] -= 1
                    block_count[v // _BLOCK] -= 1
                    block_sum[v // _BLOCK] -= v
                    v = padded[r, j + w]
                    hist[v] += 1
                    block_count[v // _BLOCK] += 1
                    block_sum[v // _BLOCK] += v


def cr_map_fast(levels: np.ndarray, params: CrParams = CrParams(), threads: int | None = 1) -> np.ndarray:
    """CR map from a rolling histogram; bit-identical to :func:`cr_map_naive`.

    Each row keeps a 256-bin count histogram plus 16 coarse blocks carrying
    counts and value sums. Sliding one column right removes and adds ``2s+1``
    samples; the trimmed sum walks blocks from the top, consuming whole blocks
    where possible.

    ``threads`` splits rows across workers (capped by ``RADIOMAP_THREADS``);
    output is independent of it.
    """
    levels = as_levels(levels)
    padded = pad_reflect(levels, params.s).astype(np.int64)
    out = np.empty(levels.shape, dtype=np.int64)
    run_rows(_cr_rows, levels.shape[0], (padded, params.s, params.num, params.m, out), threads)
    return out.astype(np.float64)
