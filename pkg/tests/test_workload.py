import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from bcplab.errors import (Assumption25Violated, GNotNonnegative, InconsistentWorkload, NoCanonicalConstruction,
                           NotInWorkloadSpace)
from bcplab.lp import LinearProgram, enumerate_vertices
from bcplab.workload import WorkloadData, build_workload, check_effective_inequality, effective_cost, lift

from test_network import spill_network, tandem_network

H2 = np.array([1.0, 3.0])


@pytest.fixture
def wd2(htd2):
    return build_workload(htd2)


def test_n2_auto(htd2, wd2):
    np.testing.assert_allclose(wd2.Lambda, [[0.5, 1.0]])
    np.testing.assert_allclose(wd2.G, [[1.0]])
    assert wd2.lower_norm_c == pytest.approx(1.0)
    np.testing.assert_allclose(wd2.Lambda @ htd2.R, wd2.G @ htd2.K_mat, atol=1e-12)


def test_n1_auto(htd1):
    wd = build_workload(htd1)
    np.testing.assert_allclose(wd.Lambda, [[1.0]])
    np.testing.assert_allclose(wd.G, [[1.0]])


def test_inconsistent_user_lambda(htd2):
    with pytest.raises(InconsistentWorkload):
        build_workload(htd2, [[1.0, 1.0]])


def test_user_lambda_accepted(htd2):
    wd = build_workload(htd2, [[1.0, 2.0]])
    np.testing.assert_allclose(wd.G, [[2.0]])
    assert wd.lower_norm_c == pytest.approx(2.0)


def test_negative_g_rejected():
    htd = spill_network().analyze()
    with pytest.raises(GNotNonnegative):
        build_workload(htd, [[1.0, 0.5]])


def test_no_canonical_for_two_servers():
    with pytest.raises(NoCanonicalConstruction):
        build_workload(tandem_network().analyze())


def test_user_lambda_with_nonbasic_activity():
    htd = spill_network().analyze()
    wd = build_workload(htd, [[1.0, 2.0]])
    np.testing.assert_allclose(wd.G, [[1.0, 2.0, 1.0]], atol=1e-12)
    np.testing.assert_allclose(wd.Lambda @ htd.R, wd.G @ htd.K_mat, atol=1e-12)
    assert wd.lower_norm_c == pytest.approx(1.0)
    # equal workload per buffer leaves the nonbasic control with a zero column
    with pytest.raises(Assumption25Violated):
        build_workload(htd, [[1.0, 1.0]])


def test_effective_cost_examples(wd2):
    assert effective_cost(wd2, H2, [1.0]) == pytest.approx(2.0)
    np.testing.assert_allclose(lift(wd2, H2, [1.0]), [2.0, 0.0], atol=1e-12)
    assert effective_cost(wd2, H2, [0.0]) == 0.0
    np.testing.assert_array_equal(lift(wd2, H2, [0.0]), [0.0, 0.0])
    with pytest.raises(NotInWorkloadSpace):
        effective_cost(wd2, H2, [-1.0])
    with pytest.raises(NotInWorkloadSpace):
        lift(wd2, H2, [-1.0])


def test_lift_tie_lexicographic():
    wd = WorkloadData(np.array([[1.0, 1.0]]), np.ones((1, 1)), 1.0)
    np.testing.assert_allclose(lift(wd, [1.0, 1.0], [2.0]), [0.0, 2.0], atol=1e-12)


def test_inequality_examples(wd2):
    assert check_effective_inequality(wd2, H2, [1.0, 1.0]) == pytest.approx(1.0)
    q = lift(wd2, H2, [1.7])
    assert check_effective_inequality(wd2, H2, q) == pytest.approx(0.0, abs=1e-12)
    assert check_effective_inequality(wd2, H2, [0.0, 0.0]) == 0.0


def _enum_hhat(Lam, h, w):
    verts = enumerate_vertices(LinearProgram(h, eq_lhs=Lam, eq_rhs=w))
    return min(v.value for v in verts)


positive = st.floats(0.1, 5.0)


@given(st.lists(positive, min_size=2, max_size=4), st.data())
def test_hhat_properties(lam_row, data):
    n = len(lam_row)
    h = np.array(data.draw(st.lists(positive, min_size=n, max_size=n)))
    wd = WorkloadData(np.array([lam_row]), np.ones((1, 1)), 1.0)
    w1, w2 = data.draw(positive), data.draw(positive)
    v1 = effective_cost(wd, h, [w1])
    # closed form: cheapest cost per unit of workload
    assert v1 == pytest.approx(w1 * np.min(h / np.array(lam_row)), rel=1e-9)
    assert v1 == pytest.approx(_enum_hhat(wd.Lambda, h, [w1]), rel=1e-9)
    for lam in (0.0, 0.5, 2.0):
        assert effective_cost(wd, h, [lam * w1]) == pytest.approx(lam * v1, rel=1e-9, abs=1e-12)
    mid = effective_cost(wd, h, [(w1 + w2) / 2])
    assert mid <= (v1 + effective_cost(wd, h, [w2])) / 2 + 1e-9
    q = lift(wd, h, [w1])
    assert np.all(q >= 0)
    assert wd.Lambda @ q == pytest.approx([w1], abs=1e-9)
    assert h @ q == pytest.approx(v1, rel=1e-9)


@given(st.lists(st.lists(st.floats(0.1, 3.0), min_size=3, max_size=3), min_size=2, max_size=2), st.data())
def test_two_dimensional_hhat_matches_scipy(rows, data):
    Lam = np.array(rows)
    h = np.array(data.draw(st.lists(st.floats(0.1, 5.0), min_size=3, max_size=3)))
    # components below HiGHS's feasibility tolerance make the reference report infeasible
    z = np.array(data.draw(st.lists(st.one_of(st.just(0.0), st.floats(1e-3, 3.0)), min_size=3, max_size=3)))
    w = Lam @ z
    wd = WorkloadData(Lam, np.eye(2), 1.0)
    ref = linprog(h, A_eq=Lam, b_eq=w, bounds=(0, None), method="highs")
    assert effective_cost(wd, h, w) == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)
    q = lift(wd, h, w)
    np.testing.assert_allclose(Lam @ q, w, atol=1e-8)
    assert h @ q == pytest.approx(ref.fun, rel=1e-7, abs=1e-9)
    assert check_effective_inequality(wd, h, z) >= -1e-9


def test_lipschitz_surrogate(wd2):
    ws = np.linspace(0.1, 5, 50)
    vals = np.array([effective_cost(wd2, H2, [w]) for w in ws])
    slope = np.max(np.abs(np.diff(vals) / np.diff(ws)))
    delta = 1e-3
    for w in ws:
        assert abs(effective_cost(wd2, H2, [w + delta]) - effective_cost(wd2, H2, [w])) <= slope * delta + 1e-12
