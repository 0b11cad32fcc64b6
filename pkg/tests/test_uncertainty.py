import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import variance_direct
from pipecenter.center_geometry import WallPoint
from pipecenter.uncertainty import (
    CovarianceModel,
    axis_variances,
    beam_separation,
    confidence_weights,
    variance_at,
)

UNIT = CovarianceModel(1.0, 30.0, 30.0)


def test_frozen_values_against_direct_evaluation():
    # e^-18 + 1 + e^-18 and 2 e^-4.5 + e^-40.5
    assert variance_at(UNIT, 180.0) == pytest.approx(1 + 2 * math.exp(-18), rel=1e-15)
    assert variance_at(UNIT, 180.0) == pytest.approx(1.0000000305, abs=1e-10)
    assert variance_at(UNIT, 90.0) == pytest.approx(2 * math.exp(-4.5) + math.exp(-40.5), rel=1e-15)
    assert variance_at(UNIT, 90.0) == pytest.approx(0.022218, abs=1e-6)


@given(st.floats(0, 360), st.floats(1e-3, 10), st.floats(1, 80), st.floats(1, 80))
def test_matches_direct_formula(theta, a, w1, w2):
    m = CovarianceModel(a, w1, w2)
    assert variance_at(m, theta) == pytest.approx(variance_direct(theta, a, w1, w2), rel=1e-12)


def test_wraparound_continuity():
    assert variance_at(UNIT, 0.0) == pytest.approx(variance_at(UNIT, 360.0 - 1e-9), rel=1e-12)


def test_array_evaluation():
    th = np.array([0.0, 90.0, 180.0])
    assert np.allclose(variance_at(UNIT, th), [variance_at(UNIT, t) for t in th])


@given(st.floats(1e-3, 10), st.floats(1, 80))
def test_symmetric_about_180(a, w):
    m = CovarianceModel(a, w, w)
    for t in np.linspace(0, 180, 37):
        assert variance_at(m, 180 - t) == pytest.approx(variance_at(m, 180 + t), rel=1e-9)


def test_shape_over_parameter_grid():
    widths = (5, 30, 60, 80)
    for a in (0.01, 0.05, 1.0, 7.0):
        for w1 in widths:
            for w2 in widths:
                m = CovarianceModel(a, w1, w2)
                v = variance_at(m, np.linspace(0, 360, 3601))
                assert np.all(v > 0)
                assert variance_at(m, 90) < variance_at(m, 0)
                assert variance_at(m, 90) < variance_at(m, 180)


def test_90_deg_dip_fails_for_very_wide_bumps():
    # With w1 = w2 the 90 deg value overtakes the 0 deg value near w = 81.17,
    # so "lower at 90 deg for any width < 90" does not hold at the top end.
    m = CovarianceModel(1.0, 89.0, 89.0)
    assert variance_at(m, 90) > variance_at(m, 0)
    m = CovarianceModel(1.0, 81.0, 81.0)
    assert variance_at(m, 90) < variance_at(m, 0)


@pytest.mark.parametrize("w", [5, 15, 30, 45, 50])
def test_maxima_near_bump_centers(w):
    # The tail of the 180 deg bump nudges the first maximum a hair past 0 deg.
    m = CovarianceModel(1.0, w, w)
    th = np.linspace(0, 180, 18001)
    v = variance_at(m, th)
    interior = np.flatnonzero((v[1:-1] >= v[:-2]) & (v[1:-1] >= v[2:])) + 1
    peaks = np.concatenate([[0] if v[0] > v[1] else [], interior, [len(th) - 1]]).astype(int)
    assert all(min(th[k], 180 - th[k]) <= 1.0 for k in peaks)
    assert v.argmax() in (0, len(th) - 1) or min(th[v.argmax()], 180 - th[v.argmax()]) <= 1.0


def test_weights_examples():
    assert confidence_weights((0.0, 1.0)) == (1.0, 0.5)
    assert confidence_weights((1e300, 1e300))[0] < 1e-299
    with pytest.raises(ValueError):
        confidence_weights((-1.0, 0.0))


def test_weights_strictly_decreasing_on_dense_grid():
    var = np.linspace(0, 100, 200001)
    w = np.array([confidence_weights((v, v))[0] for v in var[::50]])
    assert np.all(np.diff(w) < 0)
    assert np.all((w > 0) & (w <= 1))


def test_beam_separation_examples():
    assert beam_separation((0, -1), (0, -2)) == 0.0
    assert beam_separation((0, -1), (0, 1)) == pytest.approx(180.0, abs=1e-12)
    # ccw from straight down to -X is a clockwise quarter turn
    assert beam_separation((0, -1), (-1, 0)) == pytest.approx(270.0, abs=1e-12)
    assert beam_separation((0, -1), (1, 0)) == pytest.approx(90.0, abs=1e-12)
    assert variance_at(UNIT, 270.0) == pytest.approx(variance_at(UNIT, 90.0), rel=1e-12)
    assert beam_separation(WallPoint(0, -1), WallPoint(1, 0)) == pytest.approx(90.0)


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10))
def test_beam_separation_range(a, b, c, d):
    if math.hypot(a, b) == 0 or math.hypot(c, d) == 0:
        with pytest.raises(ValueError):
            beam_separation((a, b), (c, d))
        return
    assert 0.0 <= beam_separation((a, b), (c, d)) < 360.0


def test_axis_variances_per_axis_models():
    mx, mz = CovarianceModel(1.0), CovarianceModel(2.0)
    vx, vz = axis_variances((mx, mz), 90.0)
    assert vz == pytest.approx(2 * vx)
    assert axis_variances(mx, 90.0) == (vx, vx)


def test_model_validation():
    for bad in ((0, 30, 30), (1, 0, 30), (1, 30, -1)):
        with pytest.raises(ValueError):
            CovarianceModel(*bad)
