import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from odeco_feedback.errors import DimensionError, UnsupportedRegimeError
from odeco_feedback.modal import ModeParams, closed_form_state, mode_value, system_modes
from odeco_feedback.sim import (
    BangBangWorstCase,
    Custom,
    NoDisturbance,
    Sinusoid,
    basin_agreement,
    basin_grid,
    hitting_times,
    integrate,
    integrate_many,
    integrate_modal,
    make_paper_disturbance,
    measure_hitting_time,
    measure_ultimate_magnitude,
)
from odeco_feedback.tensor import OdecoSystem, random_orthonormal

# scipy DOP853 (rtol 1e-13) times at which |y| first reaches each threshold
DOP853_CROSS_EVEN = {1e3: 0.14384053622564288, 1e5: 0.14384103617589317, 1e7: 0.14384103622588776}
DOP853_CROSS_ODD = {1e3: 0.69214668022637, 1e5: 0.6931371805099533, 1e7: 0.6931470805599483}
T_ESC_EVEN = 0.5 * math.log(4 / 3)


def scalar_system(kappa, lam, k):
    return OdecoSystem(np.eye(1), [lam], [kappa], k)


def test_linear_decay(rng):
    sys = OdecoSystem(random_orthonormal(3, rng), [0, 0, 0], [-1, -1, -1], 4)
    x0 = np.array([0.3, -1.2, 0.7])
    traj = integrate(sys, x0, 3.0)
    norms = np.linalg.norm(traj.x, axis=1)
    np.testing.assert_allclose(norms, np.exp(-traj.t) * np.linalg.norm(x0), atol=1e-9)


def test_trajectory_invariants(planar, v1):
    traj = integrate(planar, 0.5 * v1, 2.0, 1e-2)
    np.testing.assert_allclose(traj.y, traj.x @ planar.basis, atol=1e-12)
    assert np.allclose(np.diff(traj.t), 1e-2)
    assert traj.completed and traj.termination == "completed"
    assert traj.t.size == 201


def test_cross_oracle_planar(planar, v1):
    traj = integrate(planar, 0.5 * v1, 5.0)
    exact = closed_form_state(planar, 0.5 * v1, traj.t)
    assert np.max(np.abs(traj.x - exact)) <= 1e-6


def test_blowup_flagged(planar, v1):
    traj = integrate(planar, 2 * v1, 1.0)
    assert not traj.completed and traj.blowup.mode == 0
    assert abs(traj.blowup.t - T_ESC_EVEN) < 1e-3
    assert "mode=1" in traj.termination


@pytest.mark.parametrize("kappa, lam, k, y0, table", [
    (-1.0, 1.0, 4, 2.0, DOP853_CROSS_EVEN),
    (-1.0, -1.0, 3, -2.0, DOP853_CROSS_ODD),
])
def test_blowup_crossings(kappa, lam, k, y0, table):
    sys = scalar_system(kappa, lam, k)
    t_esc = T_ESC_EVEN if k == 4 else math.log(2)
    times = []
    for thr, ref in table.items():
        traj = integrate(sys, [y0], 1.0, 1e-3, blowup_threshold=thr)
        # localised to dt/100 in time; RK4 error in the crossing itself is far smaller
        assert abs(traj.blowup.t - ref) <= 1e-5
        times.append(traj.blowup.t)
    assert times == sorted(times)
    # for p = 1 the exact 1e3 crossing already sits 1.0005e-3 before t_esc
    assert np.all(np.diff(times) < 1e-3)
    assert abs(times[-1] - t_esc) <= 1e-3


def test_nonfinite_counts_as_blowup():
    # a huge step overflows at once; the subdivision still reports a crossing
    sys = scalar_system(-1.0, 1.0, 4)
    traj = integrate(sys, [50.0], 1.0, 0.5)
    assert not traj.completed and traj.blowup.t < 1e-3


def test_initial_state_beyond_threshold():
    traj = integrate(scalar_system(-1.0, 1.0, 4), [1e9], 1.0)
    assert traj.blowup.t == 0.0 and traj.t.size == 1


def test_dimension_check(planar):
    with pytest.raises(DimensionError):
        integrate(planar, [1.0, 2.0, 3.0], 1.0)


def test_hitting_times_examples():
    lin = integrate(scalar_system(-2.0, 0.0, 4), [1.0], 4.0)
    assert measure_hitting_time(lin, 0.01)[0] == pytest.approx(math.log(100) / 2, abs=2e-3)
    cub = integrate(scalar_system(-1.0, 1.0, 4), [0.5], 6.0)
    assert measure_hitting_time(cub, 0.01)[0] == pytest.approx(4.055814039153833, abs=2e-3)
    assert measure_hitting_time(cub, 0.6)[0] == 0.0
    assert measure_hitting_time(cub, 1e-9) == [None]


def test_hitting_time_interpolates():
    t = np.array([0.0, 1.0, 2.0])
    y = np.array([1.0, 0.5, 0.0])
    assert hitting_times(t, y, 0.25) == pytest.approx(1.5)
    with pytest.raises(ValueError):
        hitting_times(t, y, 0.0)


def test_ultimate_magnitude(planar, v1):
    traj = integrate(planar, 0.5 * v1, 30.0, 1e-2)
    assert np.all(measure_ultimate_magnitude(traj, (20.0, 30.0)) <= 1e-3)
    zero = integrate(planar, [0.0, 0.0], 5.0, 1e-2, make_paper_disturbance(0.0))
    np.testing.assert_array_equal(measure_ultimate_magnitude(zero, (0.0, 5.0)), [0.0, 0.0])
    with pytest.raises(ValueError):
        measure_ultimate_magnitude(traj, (20.0, 40.0))
    with pytest.raises(ValueError):
        measure_ultimate_magnitude(integrate(planar, 2 * v1, 1.0), (0.0, 0.1))


def test_paper_disturbance():
    d = make_paper_disturbance(0.15, 1.0)
    np.testing.assert_allclose(d.modal(0.0, np.zeros(2)), [0.0, 0.15], atol=1e-16)
    ts = np.linspace(0, 100, 20001)
    vals = np.array([d.modal(t, np.zeros(2)) for t in ts])
    assert np.max(np.abs(vals)) <= 0.15
    np.testing.assert_allclose(vals[:, 1], 0.15 * np.cos(0.9 * ts), atol=1e-15)
    assert not np.any(make_paper_disturbance(0.0).modal(1.3, np.zeros(2)))
    three = make_paper_disturbance(0.2, 2.0, n=3)
    assert three.modal(0.7, np.zeros(3))[2] == 0.0
    with pytest.raises(ValueError):
        make_paper_disturbance(0.1, 0.0)


def test_disturbance_respects_envelope_at_substeps(planar):
    seen = []
    base = make_paper_disturbance(np.array([0.15, 0.1]), 3.0)

    class Recorder:
        def modal(self, t, y):
            v = base.modal(t, y)
            seen.append(np.abs(v))
            return v

    integrate(planar, [0.1, 0.1], 10.0, 1e-2, Recorder())
    assert len(seen) == 4 * 1000
    assert np.all(np.max(seen, axis=0) <= base.bounds(2))


def test_other_signals():
    assert not np.any(NoDisturbance().modal(0.0, np.ones(2)))
    bb = BangBangWorstCase(np.array([0.2, 0.3]), (1,))
    np.testing.assert_array_equal(bb.modal(0.0, np.array([-1.0, -2.0])), [0.0, -0.3])
    np.testing.assert_array_equal(bb.bounds(2), [0.0, 0.3])
    c = Custom([0.0, 1.0], [[0.1, 0.0], [0.2, -0.4]])
    np.testing.assert_array_equal(c.modal(0.5, np.zeros(2)), [0.1, 0.0])
    np.testing.assert_array_equal(c.modal(1.5, np.zeros(2)), [0.2, -0.4])
    np.testing.assert_array_equal(c.bounds(2), [0.2, 0.4])
    with pytest.raises(ValueError):
        Custom([1.0, 0.0], [[0.0], [0.0]])


def test_rk4_order(planar, v1, v2):
    x0 = 0.8 * v1 - 1.5 * v2
    exact = closed_form_state(planar, x0, 2.0)
    errs = [np.max(np.abs(integrate(planar, x0, 2.0, dt).x[-1] - exact)) for dt in (0.1, 0.05, 0.025)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.5


def test_modal_consistency(rng):
    sys = OdecoSystem(random_orthonormal(3, rng), [1.0, -0.5, 0.3], [-1.0, -2.0, -0.5], 4)
    x0 = np.array([0.2, -0.3, 0.4])
    dist = make_paper_disturbance(0.1, 1.0, 3)
    traj = integrate(sys, x0, 5.0, 1e-3, dist)
    ens = integrate_modal(system_modes(sys), x0 @ sys.basis, 5.0, 1e-3, dist)
    assert np.max(np.abs(traj.y - ens.y[:, 0, :])) <= 1e-10


def test_integrate_many_matches_single(planar, v1, v2):
    x0s = np.array([0.5 * v1, 0.3 * v1 + 2 * v2, 2 * v1])
    ens = integrate_many(planar, x0s, 2.0, 1e-3, stride=100)
    single = integrate(planar, x0s[1], 2.0)
    np.testing.assert_allclose(ens.y[:, 1], single.y[::100], atol=1e-13)
    assert np.isnan(ens.blowup_time[0]) and ens.blowup_time[2] == pytest.approx(T_ESC_EVEN, abs=2e-3)
    assert np.all(np.isnan(ens.y[-1, 2]))


def test_trajectory_csv(tmp_path, planar, v1):
    traj = integrate(planar, 0.5 * v1, 0.01, 1e-3)
    path = tmp_path / "traj.csv"
    traj.to_csv(path, {"bound1": 0.15})
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["t", "x1", "x2", "y1", "y2", "bound1"]
    assert len(rows) == 12 and float(rows[-1][-1]) == 0.15


def test_basin_trivial_cases(tmp_path):
    glob = OdecoSystem(np.eye(2), [-1.0, -0.5], [-1.0, -2.0], 4)
    grid = basin_grid(glob, counts=(9, 9), t_end=15.0, dt=1e-2)
    assert grid.counts()["conv"] == 81
    origin = basin_grid(glob, (0.0, 0.0), (0.0, 0.0), (1, 1))
    assert origin.labels[0, 0] == "conv"
    path = tmp_path / "grid.csv"
    grid.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["x1", "x2", "label"] and len(rows) == 82


def test_basin_small_planar(planar):
    grid = basin_grid(planar, counts=(31, 31), t_end=30.0, dt=1e-2)
    assert len(grid.boundaries) == 2 and {b["value"] for b in grid.boundaries} == {-1.0, 1.0}
    summary = basin_agreement(grid, planar)
    assert summary["fraction"] == 1.0 and summary["excluded_band"] > 0


def test_basin_needs_planar(rng):
    sys = OdecoSystem(random_orthonormal(3, rng), [1, 1, 1], [-1, -1, -1], 4)
    with pytest.raises(UnsupportedRegimeError):
        basin_grid(sys)


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, -0.1), st.floats(-2, 2), st.sampled_from([3, 4, 5]), st.floats(0.05, 0.9))
def test_integrator_tracks_closed_form(kappa, lam, k, frac):
    m = ModeParams(kappa, lam, k - 2)
    # below the threshold when there is one (positive side; for odd p with
    # lam < 0 that side is unconstrained), and never above 2
    c = (-kappa / lam) ** (1 / m.p) if lam > 0 else math.inf
    y0 = frac * min(c, 2.0)
    ens = integrate_modal([m], [y0], 3.0, 1e-3, stride=50)
    assert np.max(np.abs(ens.y[:, 0, 0] - mode_value(m, y0, ens.t))) <= 1e-6
