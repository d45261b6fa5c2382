import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from radiomap.stability import CurveParseError, ValidationCurve, load_curve, sdd

scores = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=40)


def synthetic_curve(seed: int, noise: float, epochs: int = 60) -> list[float]:
    t = np.arange(epochs)
    trend = 0.75 * (1 - np.exp(-t / 12.0))
    return list(trend + np.random.default_rng(seed).normal(0, noise, epochs))


@pytest.mark.parametrize("curve", [[0.5, 0.5, 0.5], [0.1, 0.2, 0.3, 0.4], [3.0, 1.0, -1.0]])
def test_zero_for_affine(curve):
    assert sdd(curve) == 0.0


def test_worked_example():
    # d = (0.4, -0.2, 0.4), mean 0.2, population sd sqrt(0.08)
    assert sdd([0.0, 0.4, 0.2, 0.6]) == pytest.approx(0.282843, abs=1e-6)
    assert sdd([0.0, 0.4, 0.2, 0.6]) == pytest.approx(np.sqrt(0.08), rel=1e-12)


def test_needs_two_points():
    with pytest.raises(ValueError):
        sdd([0.3])


@given(scores, st.floats(-100, 100, allow_nan=False))
def test_shift_invariance(values, c):
    assert sdd([v + c for v in values]) == pytest.approx(sdd(values), abs=1e-9)


@given(scores, st.floats(-1, 1, allow_nan=False))
def test_drift_invariance(values, slope):
    drifted = [v + slope * k for k, v in enumerate(values)]
    assert sdd(drifted) == pytest.approx(sdd(values), abs=1e-9)


@given(scores, st.floats(-5, 5, allow_nan=False))
def test_scaling(values, lam):
    assert sdd([lam * v for v in values]) == pytest.approx(abs(lam) * sdd(values), rel=1e-9, abs=1e-9)


def test_noise_ordering():
    wins = sum(sdd(synthetic_curve(seed, 0.01)) < sdd(synthetic_curve(seed + 10_000, 0.02)) for seed in range(200))
    assert wins >= 190


def test_load_curve_plain():
    assert load_curve("score\n0.1\n0.2").scores == [0.1, 0.2]


def test_load_curve_with_epochs():
    assert load_curve("epoch,score\n1,0.3\n2,0.5\n").scores == [0.3, 0.5]


def test_load_curve_bad_cell():
    with pytest.raises(CurveParseError, match="line 3") as info:
        load_curve("score\n0.1\nabc\n")
    assert info.value.line == 3


@pytest.mark.parametrize("text", ["", "\n\n", "epoch\n1\n2", "epoch,score\n2,0.1\n1,0.2"])
def test_load_curve_errors(text):
    with pytest.raises(CurveParseError):
        load_curve(text)


def test_curve_type_invariants():
    with pytest.raises(ValueError):
        ValidationCurve([0.1, float("nan")])
