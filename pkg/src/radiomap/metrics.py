"""Pixelwise segmentation metrics for binary masks and their aggregation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int


def as_mask(values: np.ndarray) -> np.ndarray:
    """Check that ``values`` is a nonempty 2D {0, 1} array and return it as bool."""
    arr = np.asarray(values)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValueError(f"mask must be 2D and nonempty, got shape {arr.shape}")
    if arr.dtype != bool and not np.all((arr == 0) | (arr == 1)):
        raise ValueError("mask values must be 0 or 1")
    return arr.astype(bool)


def confusion(pred: np.ndarray, gt: np.ndarray) -> Confusion:
    pred, gt = as_mask(pred), as_mask(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"dimension mismatch: pred {pred.shape} vs gt {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return Confusion(tp=tp, fp=fp, fn=fn, tn=pred.size - tp - fp - fn)


# Empty-denominator conventions: two empty masks agree perfectly; an empty
# prediction has no false positives (precision 1) but misses everything.


def dice(c: Confusion) -> float:
    denom = 2 * c.tp + c.fp + c.fn
    return 1.0 if denom == 0 else 2 * c.tp / denom


def precision(c: Confusion) -> float:
    denom = c.tp + c.fp
    return 1.0 if denom == 0 else c.tp / denom


def sensitivity(c: Confusion) -> float:
    denom = c.tp + c.fn
    return 1.0 if denom == 0 else c.tp / denom


def scores(pred: np.ndarray, gt: np.ndarray) -> dict[str, float]:
    """Dice, precision and sensitivity of one mask pair."""
    c = confusion(pred, gt)
    return {"dice": dice(c), "precision": precision(c), "sensitivity": sensitivity(c)}


def aggregate(values, with_sd: bool = False) -> dict[str, float]:
    """Arithmetic mean, plus the sample (n-1) standard deviation if asked.

    A single value has ``sd = 0``.
    """
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot aggregate an empty list")
    out = {"mean": float(arr.mean()), "n": int(arr.size)}
    if with_sd:
        out["sd"] = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return out


def fold_summary(folds: list[list[float]]) -> dict[str, float]:
    """Slice-level mean within each fold, then mean and sd across fold means."""
    means = [aggregate(f)["mean"] for f in folds]
    summary = aggregate(means, with_sd=True)
    summary["fold_means"] = means
    return summary
