"""Windowed co-occurrence matrices and the Renyi-entropy (RE) feature map.

Every pixel gets one combined GLCM: pairs at distances 1 and 2 along the four
principal directions are counted inside its ``(2s+1) x (2s+1)`` reflect-padded
window, symmetrically, and summed into a single 256x256 table. RE is the
order-``alpha`` Renyi entropy (natural log) of that table after normalizing by
its total.

:func:`re_map_naive` rebuilds the table for every pixel. :func:`re_map_fast`
slides it: moving one column right only touches pairs with an endpoint in the
leaving or entering column, and ``sum((count/total)**alpha)`` is updated cell by cell
through a precomputed power table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from radiomap._workers import run_rows
from radiomap.preprocess import LEVELS, as_levels, pad_reflect

#: Row/column step per direction in degrees (rows grow downward).
DIRECTION_STEPS = {0: (0, 1), 45: (-1, 1), 90: (-1, 0), 135: (-1, -1)}


@dataclass(frozen=True)
class GlcmParams:
    s: int = 5
    alpha: float = 7.0
    distances: tuple[int, ...] = (1, 2)
    directions: tuple[int, ...] = (0, 45, 90, 135)

    def __post_init__(self):
        if self.s < 1:
            raise ValueError(f"s must be >= 1, got {self.s}")
        if not (self.alpha > 0) or self.alpha == 1 or not math.isfinite(self.alpha):
            raise ValueError(f"alpha must be > 0 and != 1, got {self.alpha}")
        if not self.distances or not set(self.distances) <= {1, 2}:
            raise ValueError(f"distances must be a nonempty subset of {{1, 2}}, got {self.distances}")
        if not self.directions or not set(self.directions) <= set(DIRECTION_STEPS):
            raise ValueError(f"directions must be a nonempty subset of {sorted(DIRECTION_STEPS)}")
        if len(set(self.distances)) != len(self.distances) or len(set(self.directions)) != len(self.directions):
            raise ValueError("distances and directions must not repeat")

    def offsets(self) -> np.ndarray:
        """``(k, 2)`` int array of (row, col) displacements, one per distance/direction."""
        return np.array(
            [(d * DIRECTION_STEPS[t][0], d * DIRECTION_STEPS[t][1]) for d in self.distances for t in self.directions],
            dtype=np.int64,
        )


@dataclass
class Glcm:
    counts: np.ndarray  # (256, 256) int64
    total: int

    def probabilities(self) -> np.ndarray:
        if self.total <= 0:
            raise ValueError("empty GLCM")
        return self.counts / self.total


def accumulate_pairs(first: np.ndarray, second: np.ndarray, counts: np.ndarray | None = None) -> Glcm:
    """Add each pair ``(first[k], second[k])`` to a 256x256 table in both orders."""
    a = np.asarray(first, dtype=np.intp).ravel()
    b = np.asarray(second, dtype=np.intp).ravel()
    if a.shape != b.shape:
        raise ValueError("pair endpoint arrays differ in length")
    if counts is None:
        counts = np.zeros((LEVELS, LEVELS), dtype=np.int64)
    np.add.at(counts, (a, b), 1)
    np.add.at(counts, (b, a), 1)
    return Glcm(counts=counts, total=int(counts.sum()))


def window_glcm(levels: np.ndarray, center: tuple[int, int], params: GlcmParams = GlcmParams()) -> Glcm:
    """Combined symmetric GLCM of the window centred on ``center = (row, col)``.

    Pairs whose partner falls outside the window are not counted.
    """
    levels = as_levels(levels)
    i, j = center
    if not (0 <= i < levels.shape[0] and 0 <= j < levels.shape[1]):
        raise IndexError(f"center {center} outside image of shape {levels.shape}")
    s = params.s
    w = 2 * s + 1
    window = pad_reflect(levels, s)[i : i + w, j : j + w].astype(np.intp)
    glcm = Glcm(counts=np.zeros((LEVELS, LEVELS), dtype=np.int64), total=0)
    for dr, dc in params.offsets():
        a = window[max(0, -dr) : w - max(0, dr), max(0, -dc) : w - max(0, dc)]
        b = window[max(0, dr) : w + min(0, dr), max(0, dc) : w + min(0, dc)]
        glcm = accumulate_pairs(a, b, glcm.counts)
    return glcm


def renyi_entropy(glcm: Glcm, alpha: float) -> float:
    """Order-``alpha`` Renyi entropy of the normalized table, natural log.

    Zero cells contribute nothing. A table with a single occupied cell has
    entropy exactly 0.
    """
    if not (alpha > 0) or alpha == 1:
        raise ValueError(f"alpha must be > 0 and != 1, got {alpha}")
    if glcm.total <= 0:
        raise ValueError("empty GLCM")
    f = glcm.counts[glcm.counts > 0] / glcm.total
    if f.size == 1:
        return 0.0
    return math.log(float(np.sum(f**alpha))) / (1.0 - alpha)


@numba.njit(nogil=True, cache=True)
def _re_rows_naive(padded, s, offsets, alpha, out, row_start, row_stop):
    width = out.shape[1]
    w = 2 * s + 1
    counts = np.zeros(LEVELS * LEVELS, dtype=np.int64)
    touched = np.empty(LEVELS * LEVELS, dtype=np.int64)
    for i in range(row_start, row_stop):
        for j in range(width):
            n_touched = 0
            total = 0
            for k in range(offsets.shape[0]):
                dr = offsets[k, 0]
                dc = offsets[k, 1]
                for r in range(max(0, -dr), w - max(0, dr)):
                    for c in range(max(0, -dc), w - max(0, dc)):
                        a = padded[i + r, j + c]
                        b = padded[i + r + dr, j + c + dc]
                        cell = a * LEVELS + b
                        if counts[cell] == 0:
                            touched[n_touched] = cell
                            n_touched += 1
                        counts[cell] += 1
                        cell = b * LEVELS + a
                        if counts[cell] == 0:
                            touched[n_touched] = cell
                            n_touched += 1
                        counts[cell] += 1
                        total += 2
            acc = 0.0
            for t in range(n_touched):
                acc += (counts[touched[t]] / total) ** alpha
                counts[touched[t]] = 0
            if n_touched == 1:
                out[i, j] = 0.0
            else:
                out[i, j] = math.log(acc) / (1.0 - alpha)


def _check_map_inputs(levels, params):
    levels = as_levels(levels)
    return levels, pad_reflect(levels, params.s).astype(np.int32)


def re_map_naive(levels: np.ndarray, params: GlcmParams = GlcmParams(), threads: int | None = 1) -> np.ndarray:
    """RE map, rebuilding the combined GLCM from scratch at every pixel."""
    levels, padded = _check_map_inputs(levels, params)
    out = np.empty(levels.shape, dtype=np.float64)
    run_rows(_re_rows_naive, levels.shape[0], (padded, params.s, params.offsets(), float(params.alpha), out), threads)
    return out


_EPS = 2.0**-53


@numba.njit(nogil=True, cache=True, inline="always")
def _two_sum(a, b):
    s = a + b
    bp = s - a
    return s, (a - (s - bp)) + (b - bp)


@numba.njit(nogil=True, cache=True, inline="always")
def _bump(cell, step, weight, counts, powers, n, hi, lo, err):
    # (hi, lo) is a double-double power sum; every term is exact, so rounding
    # only enters through lo and err bounds it.
    c = counts[cell]
    c2 = c + step
    counts[cell] = c2
    # n counts occupied cells of the full table, mirrors included.
    n += int(weight) * ((c == 0) - (c2 == 0))
    d, e = _two_sum(weight * powers[c2], -weight * powers[c])
    hi, e2 = _two_sum(hi, d)
    lo += e + e2
    err += 2.0 * _EPS * abs(lo)
    return n, hi, lo, err


@numba.njit(nogil=True, cache=True, inline="always")
def _pair(a, b, delta, counts, powers, n, hi, lo, err):
    # Symmetric table, upper triangle only: an off-diagonal cell stands for
    # itself and its mirror (weight 2); a diagonal pair adds 2 to one cell.
    if a == b:
        return _bump(a * LEVELS + a, 2 * delta, 1.0, counts, powers, n, hi, lo, err)
    if a < b:
        return _bump(a * LEVELS + b, delta, 2.0, counts, powers, n, hi, lo, err)
    return _bump(b * LEVELS + a, delta, 2.0, counts, powers, n, hi, lo, err)


@numba.njit(nogil=True, cache=True)
def _column_pairs(padded, top, left, w, col, offsets, delta, counts, powers, n, hi, lo, err):
    # Every in-window pair with an endpoint in window column ``col``.
    x = left + col
    for k in range(offsets.shape[0]):
        dr = offsets[k, 0]
        dc = offsets[k, 1]
        for r in range(w):
            r2 = r + dr
            if dc == 0:
                if 0 <= r2 < w:
                    n, hi, lo, err = _pair(padded[top + r, x], padded[top + r2, x], delta,
                                           counts, powers, n, hi, lo, err)
            else:
                c2 = col + dc
                if 0 <= r2 < w and 0 <= c2 < w:
                    n, hi, lo, err = _pair(padded[top + r, x], padded[top + r2, x + dc], delta,
                                           counts, powers, n, hi, lo, err)
                r1 = r - dr
                c1 = col - dc
                if 0 <= r1 < w and 0 <= c1 < w:
                    n, hi, lo, err = _pair(padded[top + r1, x - dc], padded[top + r, x], delta,
                                           counts, powers, n, hi, lo, err)
    return n, hi, lo, err


@numba.njit(nogil=True, cache=True)
def _resum(padded, top, left, w, offsets, counts, powers):
    # Exact recount of the power sum over the window's occupied cells. Visited
    # cells are marked by negating their count and restored afterwards.
    hi, lo = 0.0, 0.0
    for sweep in range(2):
        for k in range(offsets.shape[0]):
            dr = offsets[k, 0]
            dc = offsets[k, 1]
            for r in range(max(0, -dr), w - max(0, dr)):
                for c in range(max(0, -dc), w - max(0, dc)):
                    a = padded[top + r, left + c]
                    b = padded[top + r + dr, left + c + dc]
                    cell = min(a, b) * LEVELS + max(a, b)
                    cnt = counts[cell]
                    if sweep == 0 and cnt > 0:
                        weight = 1.0 if a == b else 2.0
                        hi, e = _two_sum(hi, weight * powers[cnt])
                        lo += e
                        counts[cell] = -cnt
                    elif sweep == 1 and cnt < 0:
                        counts[cell] = -cnt
    return hi, lo


@numba.njit(nogil=True, cache=True)
def _re_rows_fast(padded, s, offsets, alpha, powers, rel_tol, out, row_start, row_stop):
    width = out.shape[1]
    w = 2 * s + 1
    counts = np.zeros(LEVELS * LEVELS, dtype=np.int32)
    scale = 1.0 / (1.0 - alpha)
    for i in range(row_start, row_stop):
        # Fresh table per row: rows are independent work units.
        counts[:] = 0
        n, hi, lo, err = 0, 0.0, 0.0, 0.0
        for k in range(offsets.shape[0]):
            dr = offsets[k, 0]
            dc = offsets[k, 1]
            for r in range(max(0, -dr), w - max(0, dr)):
                for c in range(max(0, -dc), w - max(0, dc)):
                    n, hi, lo, err = _pair(padded[i + r, c], padded[i + r + dr, c + dc], 1,
                                           counts, powers, n, hi, lo, err)
        for j in range(width):
            if n == 1:
                out[i, j] = 0.0
            else:
                acc = hi + lo
                h = math.log(acc) * scale
                if err > rel_tol * abs(alpha - 1.0) * abs(h) * acc:
                    hi, lo = _resum(padded, i, j, w, offsets, counts, powers)
                    err = 0.0
                    acc = hi + lo
                    h = math.log(acc) * scale
                out[i, j] = h
            if j + 1 < width:
                n, hi, lo, err = _column_pairs(padded, i, j, w, 0, offsets, -1,
                                               counts, powers, n, hi, lo, err)
                n, hi, lo, err = _column_pairs(padded, i, j + 1, w, w - 1, offsets, 1,
                                               counts, powers, n, hi, lo, err)


#: Target bound on the relative drift of the running power sum before a resync,
#: scaled per pixel by ``|alpha - 1| * H``.
_DRIFT_TOL = 1e-12


def re_map_fast(levels: np.ndarray, params: GlcmParams = GlcmParams(), threads: int | None = 1) -> np.ndarray:
    """RE map with an incrementally slid GLCM; matches :func:`re_map_naive` to ~1e-12 relative.

    Per row the first window's table is built once; each step right removes
    the pairs touching the leaving column and adds those touching the entering
    one. ``sum((count/total)**alpha)`` changes only at touched cells, read from a
    power table, and is carried as a double-double sum with a rounding-error
    bound. The sum is recounted from the window whenever that bound could
    affect the entropy beyond ``_DRIFT_TOL``.
    """
    levels, padded = _check_map_inputs(levels, params)
    offsets = params.offsets()
    w = 2 * params.s + 1
    total = 2 * sum((w - abs(dr)) * (w - abs(dc)) for dr, dc in offsets)
    alpha = float(params.alpha)
    powers = (np.arange(total + 1, dtype=np.float64) / total) ** alpha
    out = np.empty(levels.shape, dtype=np.float64)
    args = (padded, params.s, offsets, alpha, powers, _DRIFT_TOL, out)
    run_rows(_re_rows_fast, levels.shape[0], args, threads)
    return out
