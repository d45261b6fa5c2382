"""Training stability: spread of consecutive changes in a validation curve."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np


@dataclass
class ValidationCurve:
    scores: list[float]
    label: str = ""

    def __post_init__(self):
        self.scores = [float(v) for v in self.scores]
        if len(self.scores) < 2:
            raise ValueError(f"a curve needs at least 2 points, got {len(self.scores)}")
        if not all(math.isfinite(v) for v in self.scores):
            raise ValueError("curve scores must be finite")


def sdd(curve: ValidationCurve | list[float]) -> float:
    """Standard deviation of derivatives.

    With ``P`` scores there are ``P-1`` differences ``d_i = score_i -
    score_{i-1}``; the result is their population standard deviation (divisor
    ``P-1``).

    Differences that agree to within the rounding of the stored scores (a few
    ulps of the largest ``|score|``) count as equal, so affine curves such as
    ``[0.1, 0.2, 0.3]`` give exactly 0.
    """
    if not isinstance(curve, ValidationCurve):
        curve = ValidationCurve(curve)
    scores = np.asarray(curve.scores, dtype=np.float64)
    d = np.diff(scores)
    if np.ptp(d) <= 4 * np.spacing(np.max(np.abs(scores))):
        return 0.0
    return float(np.sqrt(np.mean((d - d.mean()) ** 2)))


class CurveParseError(ValueError):
    def __init__(self, message: str, line: int):
        self.line = line
        super().__init__(f"line {line}: {message}")


def load_curve(text: str, label: str = "") -> ValidationCurve:
    """Parse a CSV with a ``score`` column (an ``epoch`` column is allowed).

    Scores keep file order. If epochs are present they must increase.
    """
    rows = list(csv.reader(io.StringIO(text)))
    rows = [(n, r) for n, r in enumerate(rows, start=1) if any(cell.strip() for cell in r)]
    if not rows:
        raise CurveParseError("empty curve file", 1)
    header_line, header = rows[0]
    header = [h.strip().lower() for h in header]
    if "score" not in header:
        raise CurveParseError("missing 'score' column", header_line)
    col = header.index("score")
    epoch_col = header.index("epoch") if "epoch" in header else None
    scores, last_epoch = [], None
    for line, row in rows[1:]:
        if len(row) != len(header):
            raise CurveParseError(f"expected {len(header)} fields, got {len(row)}", line)
        try:
            value = float(row[col])
        except ValueError:
            raise CurveParseError(f"non-numeric score {row[col]!r}", line) from None
        if not math.isfinite(value):
            raise CurveParseError(f"non-finite score {row[col]!r}", line)
        if epoch_col is not None:
            try:
                epoch = float(row[epoch_col])
            except ValueError:
                raise CurveParseError(f"non-numeric epoch {row[epoch_col]!r}", line) from None
            if last_epoch is not None and epoch <= last_epoch:
                raise CurveParseError(f"epoch {row[epoch_col]} does not increase", line)
            last_epoch = epoch
        scores.append(value)
    if len(scores) < 2:
        raise CurveParseError(f"a curve needs at least 2 scores, got {len(scores)}", rows[-1][0])
    return ValidationCurve(scores, label=label)
