"""Paired Wilcoxon signed-rank test and Bonferroni adjustment."""

from __future__ import annotations

import csv
import io
import math
from typing import NamedTuple

import numpy as np

#: Largest number of nonzero differences handled by exact enumeration.
EXACT_MAX_N = 20


class WilcoxonResult(NamedTuple):
    statistic: float
    pvalue: float
    n: int
    method: str


def midranks(values: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing their average rank."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="mergesort")
    ranks = np.empty(values.size, dtype=np.float64)
    sorted_vals = values[order]
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j + 2) / 2.0
        i = j + 1
    return ranks


def _null_counts(doubled_ranks: np.ndarray) -> np.ndarray:
    # counts[t] = number of sign assignments whose positive doubled-rank sum is t.
    counts = np.zeros(int(doubled_ranks.sum()) + 1, dtype=np.int64)
    counts[0] = 1
    for r in doubled_ranks:
        r = int(r)
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: counts.size - r]
        counts = counts + shifted
    return counts


def _normal_sf(z: float) -> float:
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def wilcoxon_signed_rank(baseline, treatment, alternative: str = "two-sided") -> WilcoxonResult:
    """Wilcoxon signed-rank test on ``treatment - baseline``.

    Zero differences are dropped; ties in ``|d|`` get midranks. For a
    two-sided test the statistic is ``min(W+, W-)``; for
    ``alternative="greater"`` it is ``W+``. Up to ``EXACT_MAX_N`` nonzero
    differences the p-value is exact: the share of the ``2**n`` equally likely
    sign assignments at least as extreme as observed. Beyond that a normal
    approximation with tie-corrected variance and a 0.5 continuity correction
    is used. All differences zero gives ``W = 0, p = 1``.
    """
    if alternative not in ("two-sided", "greater"):
        raise ValueError(f"alternative must be 'two-sided' or 'greater', got {alternative!r}")
    x = np.asarray(baseline, dtype=np.float64)
    y = np.asarray(treatment, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("baseline and treatment must be 1D and of equal length")
    if x.size == 0:
        raise ValueError("need at least one pair")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("samples must be finite")
    d = y - x
    d = d[d != 0]
    n = int(d.size)
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "exact")
    ranks = midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    w_minus = float(ranks[d < 0].sum())
    stat = min(w_plus, w_minus) if alternative == "two-sided" else w_plus

    if n <= EXACT_MAX_N:
        doubled = np.rint(2 * ranks).astype(np.int64)
        counts = _null_counts(doubled)
        total = 2.0**n
        if alternative == "two-sided":
            lo = int(round(2 * stat))
            top = counts.size - 1
            extreme = counts[: lo + 1].sum() + counts[max(lo + 1, top - lo) :].sum()
            p = extreme / total
        else:
            p = counts[int(round(2 * stat)) :].sum() / total
        return WilcoxonResult(stat, float(min(1.0, p)), n, "exact")

    mean = n * (n + 1) / 4.0
    _, tie_sizes = np.unique(np.abs(d), return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24.0 - float(np.sum(tie_sizes**3 - tie_sizes)) / 48.0
    if alternative == "two-sided":
        z = max(abs(w_plus - mean) - 0.5, 0.0) / math.sqrt(var)
        p = 2.0 * _normal_sf(z)
    else:
        z = (w_plus - mean - 0.5) / math.sqrt(var)
        p = _normal_sf(z)
    return WilcoxonResult(stat, float(min(1.0, p)), n, "normal")


def bonferroni(pvalues, m: int | None = None) -> list[float]:
    """``min(1, p*m)`` for each p; ``m`` defaults to the number of p-values."""
    pvalues = [float(p) for p in pvalues]
    if m is None:
        m = len(pvalues)
    if m < len(pvalues) or m < 1:
        raise ValueError(f"comparison count {m} is smaller than the {len(pvalues)} p-values given")
    for p in pvalues:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    return [min(1.0, p * m) for p in pvalues]


def load_pairs(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Read a paired CSV with ``baseline`` and ``treatment`` columns."""
    reader = csv.DictReader(io.StringIO(text))
    fields = [f.strip() for f in (reader.fieldnames or [])]
    if "baseline" not in fields or "treatment" not in fields:
        raise ValueError("paired CSV needs 'baseline' and 'treatment' columns")
    reader.fieldnames = fields
    base, treat = [], []
    for line, row in enumerate(reader, start=2):
        try:
            base.append(float(row["baseline"]))
            treat.append(float(row["treatment"]))
        except (TypeError, ValueError):
            raise ValueError(f"line {line}: non-numeric value in {row}") from None
    if not base:
        raise ValueError("paired CSV has no rows")
    return np.array(base), np.array(treat)
