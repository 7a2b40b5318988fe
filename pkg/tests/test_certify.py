import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from odeco_feedback.certify import (
    BoundaryEquilibrium,
    ConvergesToZero,
    EscapesMinusInfinity,
    EscapesPlusInfinity,
    classify_mode_fate,
    escape_time,
    escape_time_mode,
    linearization_modal,
    roa_membership,
    settling_time,
    settling_time_mode,
    settling_times,
    threshold,
)
from odeco_feedback.errors import PreconditionError, UnsupportedRegimeError
from odeco_feedback.modal import ModeParams, mode_horizon, mode_params, to_modal
from odeco_feedback.sim import integrate_many, integrate_modal
from odeco_feedback.tensor import OdecoSystem, random_orthonormal

# scipy DOP853 event times (rtol 1e-13) for |y(t)| = eps
DOP853_SETTLE_EVEN = 4.055814039153833    # kappa=-1, lam=1, p=2, y0=0.5, eps=0.01
DOP853_SETTLE_LINEAR = 2.302585092994063  # kappa=-2, lam=0, y0=1, eps=0.01
DOP853_SETTLE_NEG = 3.8531564869748887    # kappa=-1, lam=-0.5, p=2, y0=0.5, eps=0.01


def test_thresholds():
    assert threshold(ModeParams(-1, 1, 2)) == 1.0
    assert threshold(ModeParams(-4, 1, 2)) == 2.0
    assert threshold(ModeParams(-1, -1, 1)) == -1.0
    assert threshold(ModeParams(-1, 0, 2)) is None
    assert threshold(ModeParams(-1, -1, 2)) is None
    with pytest.raises(UnsupportedRegimeError):
        threshold(ModeParams(0, 1, 2))


def test_threshold_beyond_float_range_is_unconstrained():
    m = ModeParams(-1.0, 1e-310, 1)
    assert threshold(m) is None
    assert isinstance(classify_mode_fate(m, 1e300), ConvergesToZero)


def test_roa_examples(planar, v1, v2):
    assert roa_membership(planar, [0, 0]).inside
    cert = roa_membership(planar, 1.2 * v1)
    assert not cert.inside and cert.violated == [0]
    assert roa_membership(planar, 5 * v2).inside
    d = cert.to_dict()
    assert d["violated_modes"] == [1] and d["modes"][1]["threshold"] == "unconstrained"


def test_roa_boundary_is_outside():
    sys = OdecoSystem(np.eye(2), [1, 1], [-1, -4], 4)
    cert = roa_membership(sys, [1.0, 0.0])
    assert not cert.inside and cert.on_boundary


def test_roa_odd_parity():
    sys = OdecoSystem(np.eye(2), [1, -1], [-1, -1], 3)
    assert roa_membership(sys, [-50.0, 50.0]).inside
    assert not roa_membership(sys, [1.5, 0.0]).inside
    assert not roa_membership(sys, [0.0, -1.5]).inside
    assert [c.kind for c in roa_membership(sys, [0, 0]).modes] == ["upper", "lower"]


def test_roa_refuses_unstable_gain():
    sys = OdecoSystem(np.eye(2), [1, 1], [-1, 0.5], 4)
    with pytest.raises(UnsupportedRegimeError) as info:
        roa_membership(sys, [0, 0])
    assert info.value.mode == 1


@pytest.mark.parametrize("m, y0, expected", [
    (ModeParams(-1, 1, 2), 0.5, ConvergesToZero),
    (ModeParams(-1, 1, 2), -1.0, BoundaryEquilibrium),
    (ModeParams(-1, 1, 2), 1.5, EscapesPlusInfinity),
    (ModeParams(-1, 1, 2), -1.5, EscapesMinusInfinity),
    (ModeParams(-1, -0.5, 2), 100.0, ConvergesToZero),
    (ModeParams(-1, 1, 1), 1.5, EscapesPlusInfinity),
    (ModeParams(-1, 1, 1), 1.0, BoundaryEquilibrium),
    (ModeParams(-1, 1, 1), -100.0, ConvergesToZero),
    (ModeParams(-1, -1, 1), -2.0, EscapesMinusInfinity),
    (ModeParams(-1, -1, 1), -1.0, BoundaryEquilibrium),
    (ModeParams(-1, -1, 1), 100.0, ConvergesToZero),
    (ModeParams(-1, 0, 3), 1e6, ConvergesToZero),
])
def test_fate_table(m, y0, expected):
    assert isinstance(classify_mode_fate(m, y0), expected)


def test_fate_examples():
    assert classify_mode_fate(ModeParams(-1, 1, 2), 1.0) == BoundaryEquilibrium(1.0)
    fate = classify_mode_fate(ModeParams(-1, -1, 1), -2.0)
    assert fate.t_esc == pytest.approx(math.log(2), abs=1e-15)


def test_settling_examples():
    assert settling_time_mode(ModeParams(-2, 0, 2), 1.0, 0.01) == pytest.approx(DOP853_SETTLE_LINEAR, abs=1e-12)
    assert settling_time_mode(ModeParams(-1, 1, 2), 0.5, 0.01) == pytest.approx(DOP853_SETTLE_EVEN, abs=1e-12)
    assert settling_time_mode(ModeParams(-1, 1, 2), 0.5, 0.01) == pytest.approx(0.5 * math.log(9999 / 3), abs=1e-14)
    assert settling_time_mode(ModeParams(-1, -0.5, 2), 0.5, 0.01) == pytest.approx(DOP853_SETTLE_NEG, abs=1e-12)
    assert settling_time_mode(ModeParams(-1, 1, 2), 0.005, 0.01) == 0.0


def test_settling_odd_uses_sign():
    # p = 1, lam = 1, y0 < 0: the nonlinearity helps, so it settles faster than the linear part alone
    m = ModeParams(-1, 1, 1)
    t = settling_time_mode(m, -0.5, 0.01)
    assert t < math.log(50)
    ens = integrate_modal([m], [[-0.5]], 6.0, 1e-3)
    hit = np.argmax(np.abs(ens.y[:, 0, 0]) <= 0.01)
    assert abs(ens.t[hit] - t) <= 2e-3


def test_settling_refuses_outside():
    with pytest.raises(PreconditionError):
        settling_time_mode(ModeParams(-1, 1, 2), 1.5, 0.01)
    with pytest.raises(PreconditionError):
        settling_time_mode(ModeParams(-1, 1, 2), 1.0, 0.01)


def test_settling_aggregate(planar, v1, v2):
    assert settling_time(planar, [0, 0], 0.01) == 0.0
    x0 = 0.5 * v1 + 0.5 * v2
    assert settling_time(planar, x0, 0.01) == pytest.approx(max(DOP853_SETTLE_EVEN, DOP853_SETTLE_NEG), abs=1e-12)
    assert settling_time(planar, 0.5 * v1, 0.01) == pytest.approx(DOP853_SETTLE_EVEN, abs=1e-12)
    with pytest.raises(PreconditionError):
        settling_times(planar, 1.2 * v1, 0.01)


def test_escape_examples(planar, v1):
    assert escape_time_mode(ModeParams(-1, 1, 2), 2.0) == pytest.approx(0.5 * math.log(4 / 3), abs=1e-15)
    assert escape_time_mode(ModeParams(-1, -1, 1), -2.0) == pytest.approx(math.log(2), abs=1e-15)
    with pytest.raises(PreconditionError):
        escape_time_mode(ModeParams(-1, 1, 2), 1.0)
    assert escape_time(planar, 2 * v1) == pytest.approx(0.14384103622589045, abs=1e-14)
    assert escape_time(planar, 0.5 * v1) is None


def test_escape_two_modes():
    sys = OdecoSystem(np.eye(2), [1, 1], [-1, -1], 4)
    assert escape_time(sys, [2.0, 3.0]) == pytest.approx(0.5 * math.log(9 / 8), abs=1e-15)


def test_escape_formula_matches_horizon():
    for m, y0 in [(ModeParams(-1, 1, 2), 2.0), (ModeParams(-0.3, 2.0, 3), 0.8), (ModeParams(-2, -1, 1), -5.0)]:
        assert escape_time_mode(m, y0) == pytest.approx(mode_horizon(m, y0), rel=1e-12)


def test_linearization_is_diagonal_gain(rng):
    sys = OdecoSystem(random_orthonormal(3, rng), [1, -1, 0.5], [-1, -2, -3], 5)
    np.testing.assert_allclose(linearization_modal(sys), np.diag([-1, -2, -3]), atol=1e-12)


# -- properties -----------------------------------------------------------------

stable_modes = st.builds(
    ModeParams,
    kappa=st.floats(-3, -0.05),
    lam=st.floats(-2, 2),
    p=st.integers(1, 4),
)


@settings(max_examples=300, deadline=None)
@given(stable_modes, st.floats(-5, 5))
def test_fate_consistent_with_horizon(m, y0):
    fate = classify_mode_fate(m, y0)
    h = mode_horizon(m, y0)
    if isinstance(fate, (ConvergesToZero, BoundaryEquilibrium)):
        assert h == math.inf
    else:
        assert fate.t_esc == h and 0 < h < math.inf


@settings(max_examples=200, deadline=None)
@given(stable_modes, st.floats(0.05, 0.95), st.booleans(), st.floats(1e-4, 0.1), st.floats(1.0, 10.0))
def test_settling_monotone(m, frac, neg, eps, factor):
    c = threshold(m)
    bound = 3.0 if c is None else min(abs(c), 3.0)
    sgn = -1.0 if neg else 1.0
    if c is not None and not m.even:
        # the constrained side is the side of c; the other side is unconstrained
        sgn = math.copysign(1.0, c) if neg else -math.copysign(1.0, c)
    y0 = sgn * frac * bound
    t_small = settling_time_mode(m, y0, eps)
    assert settling_time_mode(m, y0, eps * factor) <= t_small + 1e-12
    y_in = y0 * 0.5
    assert settling_time_mode(m, y_in, eps) <= t_small + 1e-12


def test_sharpness_oracle():
    m = ModeParams(-1, 1, 2)
    ens = integrate_modal([m], [[1 - 1e-3], [1 + 1e-3]], 15.0, 1e-3)
    below, above = ens.y[:, 0, 0], ens.y[:, 1, 0]
    assert np.nanmin(np.abs(below)) <= 1e-3
    assert np.isfinite(ens.blowup_time[1]) and np.isnan(ens.blowup_time[0])
    assert np.nanmax(np.abs(above)) > 1e6 or np.isfinite(ens.blowup_time[1])


@pytest.mark.parametrize("k", [4, 3])
def test_forward_invariance_oracle(k):
    rng = np.random.default_rng(k)
    sys = OdecoSystem(random_orthonormal(3, rng), [1.0, -0.7, 0.4], [-1.0, -0.5, -2.0], k)
    constraints = [threshold(mode_params(sys, r)) for r in range(3)]
    y0 = np.empty((50, 3))
    for r, c in enumerate(constraints):
        if c is None:
            y0[:, r] = rng.uniform(-3, 3, 50)
        elif k % 2 == 0:
            y0[:, r] = rng.uniform(-0.99, 0.99, 50) * c
        elif c > 0:
            y0[:, r] = rng.uniform(-3, 0.99 * c, 50)
        else:
            y0[:, r] = rng.uniform(0.99 * c, 3, 50)
    x0 = y0 @ sys.basis.T
    assert all(roa_membership(sys, x).inside for x in x0)
    ens = integrate_many(sys, x0, 30.0, 1e-3, stride=10)
    assert not np.any(np.isfinite(ens.blowup_time))
    for r, c in enumerate(constraints):
        y = ens.y[:, :, r]
        if c is None:
            continue
        if k % 2 == 0:
            assert np.all(np.abs(y) < c)
        elif c > 0:
            assert np.all(y < c)
        else:
            assert np.all(y > c)
    assert np.max(np.abs(ens.y[-1])) < 1e-3
