import json
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import solve_bvp

from bcplab.errors import BoundViolated, NotSupported
from bcplab.ewf import (Ewf1D, PiecewiseLinear, cross_check, ewf_from_network, ewf_value_1d, push_cost_1d,
                        rbm_path, rbm_simulate, verify_lower_bound)
from bcplab.workload import WorkloadData, build_workload

# golden-ratio conjugate: V(0) for hhat(w) = w, mu = -1, sigma^2 = 2, gamma = 1
N1_VALUE = 0.6180339887498949
# N2 with h = (1, 3): slope 2, sigma^2 = 1.5, mu = 0, w = Lambda q0 = 1.5
N2_VALUE = 3.3064365182787436


def linear_closed_form(slope, mu, sigma2, gamma, p, w):
    lm = (-mu - math.sqrt(mu * mu + 2 * sigma2 * gamma)) / sigma2
    B = (-p - slope / gamma) / lm
    return slope * w / gamma + slope * mu / gamma ** 2 + B * math.exp(lm * w)


def bvp_oracle(e, ws, w_max=30.0):
    """Collocation solve of the ODE on [0, w_max] with the asymptotic slope imposed at w_max."""
    s_last = e.hhat.slopes[-1]

    def rhs(w, y):
        return np.vstack([y[1], 2.0 / e.variance * (e.gamma * y[0] - e.hhat(w) - e.drift * y[1])])

    def bc(ya, yb):
        return np.array([ya[1] + e.push_cost, yb[1] - s_last / e.gamma])

    grid = np.linspace(0, w_max, 3001)
    guess = np.vstack([e.hhat(grid) / e.gamma + 1.0, np.full(grid.size, s_last / e.gamma)])
    sol = solve_bvp(rhs, bc, grid, guess, tol=1e-10, max_nodes=200_000)
    assert sol.success
    return sol.sol(ws)[0]


def test_zero_cost_zero_value():
    e = Ewf1D(-0.5, 1.0, PiecewiseLinear.linear(0.0), 0.0, 1.0)
    np.testing.assert_array_equal(ewf_value_1d(e, [0.0, 1.0, 5.0]), 0.0)


def test_n1_value():
    e = Ewf1D(-1.0, 2.0, PiecewiseLinear.linear(1.0), 0.0, 1.0)
    assert ewf_value_1d(e, 0.0) == pytest.approx(N1_VALUE, abs=1e-12)
    assert N1_VALUE == pytest.approx((math.sqrt(5) - 1) / 2, abs=1e-15)


def test_n2_value(htd2):
    wd = build_workload(htd2)
    e = ewf_from_network(htd2, wd, [1.0, 3.0], [0.0], 1.0)
    assert (e.drift, e.variance, e.push_cost) == (0.0, 1.5, 0.0)
    np.testing.assert_allclose(e.hhat.slopes, [2.0])
    assert ewf_value_1d(e, 1.5) == pytest.approx(N2_VALUE, rel=1e-13)
    assert linear_closed_form(2.0, 0.0, 1.5, 1.0, 0.0, 1.5) == pytest.approx(N2_VALUE, rel=1e-13)


@given(st.floats(0.1, 5), st.floats(-2, 2), st.floats(0.1, 4), st.floats(0.2, 3), st.floats(0, 3),
       st.floats(0, 5))
def test_linear_matches_closed_form(slope, mu, sigma2, gamma, p, w):
    e = Ewf1D(mu, sigma2, PiecewiseLinear.linear(slope), p, gamma)
    assert ewf_value_1d(e, w) == pytest.approx(linear_closed_form(slope, mu, sigma2, gamma, p, w), rel=1e-10)
    lm, lp = e.roots
    for lam in (lm, lp):
        assert 0.5 * sigma2 * lam ** 2 + mu * lam - gamma == pytest.approx(0, abs=1e-9 * (1 + gamma))


@pytest.mark.parametrize("knots, slopes, mu, p", [
    ([0.0, 1.0], [0.5, 2.0], -0.5, 0.0),
    ([0.0, 0.5, 2.0], [0.0, 1.0, 3.0], 0.3, 0.7),
])
def test_piecewise_matches_bvp(knots, slopes, mu, p):
    e = Ewf1D(mu, 1.2, PiecewiseLinear(knots, slopes), p, 1.0)
    ws = np.linspace(0, 4, 17)
    np.testing.assert_allclose(ewf_value_1d(e, ws), bvp_oracle(e, ws), rtol=1e-6, atol=1e-7)


def test_value_shape():
    hh = PiecewiseLinear([0.0, 1.0, 2.0], [0.5, 1.0, 4.0])
    ws = np.linspace(0, 5, 20)
    v0 = ewf_value_1d(Ewf1D(-0.3, 1.0, hh, 0.0, 1.0), ws)
    assert np.all(np.diff(v0) >= -1e-12)
    assert np.all(np.diff(v0, 2) >= -1e-12)
    # a push cost makes the value decrease near 0 but keeps it convex
    vp = ewf_value_1d(Ewf1D(-0.3, 1.0, hh, 2.0, 1.0), ws)
    assert np.all(np.diff(vp, 2) >= -1e-12)


def test_doubling_hhat_doubles_value():
    hh = PiecewiseLinear([0.0, 1.0], [0.5, 2.0])
    e1 = Ewf1D(0.2, 0.8, hh, 0.0, 1.5)
    e2 = Ewf1D(0.2, 0.8, hh.scaled(2.0), 0.0, 1.5)
    ws = np.linspace(0, 3, 7)
    np.testing.assert_allclose(ewf_value_1d(e2, ws), 2 * ewf_value_1d(e1, ws), rtol=1e-12)


def test_not_supported():
    e = Ewf1D(0.0, 1.0, PiecewiseLinear([0.0, 1.0], [1.0, -0.5]), 0.0, 1.0)
    with pytest.raises(NotSupported):
        ewf_value_1d(e, 1.0)
    wd2d = WorkloadData(np.eye(2), np.eye(2), 1.0)
    with pytest.raises(NotSupported):
        ewf_from_network(SimpleNamespace(), wd2d, [1, 1], [0, 0], 1.0)
    with pytest.raises(ValueError):
        Ewf1D(0.0, 0.0, PiecewiseLinear.linear(1.0), 0.0, 1.0)


def test_push_cost(htd2):
    wd = build_workload(htd2)
    assert push_cost_1d(wd, htd2, [5.0]) == pytest.approx(5.0)
    wd = build_workload(htd2, [[1.0, 2.0]])
    # G = 2: half a unit of idleness pushes one unit of workload
    assert push_cost_1d(wd, htd2, [5.0]) == pytest.approx(2.5)


def test_rbm_deterministic():
    hh = PiecewiseLinear.linear(1.0)
    flat = rbm_simulate(1.0, 0.0, 0.0, 1.0, hh, 0.0, 5.0, 1e-3, 0)
    assert flat[0] == pytest.approx(1 - math.exp(-5.0), abs=1e-6)
    drop = rbm_simulate(1.0, -1.0, 0.0, 1.0, hh, 0.0, 30.0, 1e-3, 0)
    assert drop[0] == pytest.approx(math.exp(-1.0), abs=1e-6)
    # after hitting 0 the minimal push offsets the drift exactly
    pushed = rbm_simulate(1.0, -1.0, 0.0, 1.0, hh, 1.0, 30.0, 1e-3, 0)
    assert pushed[0] - drop[0] == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_rbm_replay():
    hh = PiecewiseLinear.linear(1.0)
    a = rbm_simulate(0.5, -0.2, 1.0, 1.0, hh, 0.3, 2.0, 1e-2, 7, paths=50)
    b = rbm_simulate(0.5, -0.2, 1.0, 1.0, hh, 0.3, 2.0, 1e-2, 7, paths=50)
    assert a.tobytes() == b.tobytes()


@given(st.integers(0, 10 ** 6), st.floats(0, 2), st.floats(-2, 1))
def test_rbm_path_invariants(seed, w, mu):
    dt, sigma2 = 1e-2, 1.0
    path = rbm_path(w, mu, sigma2, 3.0, dt, seed)
    assert np.all(path.W >= -1e-12)
    dL = np.diff(path.L)
    assert np.all(dL >= 0)
    # pushing happens only in steps that end within a few step deviations of 0
    tol = 8 * math.sqrt(sigma2 * dt)
    assert np.all(dL[path.W[1:] > tol] == 0)
    free = w + mu * path.times
    assert path.W[0] == w and path.times[-1] == pytest.approx(3.0)
    assert np.all(np.isfinite(free))


def test_cross_check_small():
    e = Ewf1D(-1.0, 2.0, PiecewiseLinear.linear(1.0), 0.0, 1.0)
    cc = cross_check(e, 0.0, paths=2000, dt=2e-3, seed=3)
    assert cc.ode_value == pytest.approx(N1_VALUE)
    assert cc.agrees(3.0)


def test_verify_lower_bound():
    est = {10.0: SimpleNamespace(mean=5.0, std_error=0.1), 20.0: SimpleNamespace(mean=4.0, std_error=0.1)}
    rep = verify_lower_bound(est, 1.0, w=1.5)
    assert rep.passed and rep.trend
    assert [row["gap"] for row in rep.per_r] == [4.0, 3.0]
    assert json.loads(rep.to_json())["w"] == 1.5
    bad = {10.0: SimpleNamespace(mean=2.0, std_error=0.1), 20.0: SimpleNamespace(mean=1.0, std_error=0.01)}
    with pytest.raises(BoundViolated) as info:
        verify_lower_bound(bad, 1.1)
    assert info.value.report.violations == [20.0]
    rep = verify_lower_bound(bad, 1.1, raise_on_violation=False)
    assert not rep.passed
    with pytest.raises(ValueError):
        verify_lower_bound({10.0: est[10.0]}, 1.0)
