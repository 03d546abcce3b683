import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import linprog

from bcplab.errors import DimensionMismatch, TooLarge
from bcplab.lp import LinearProgram, dual_value, enumerate_vertices, solve_lp


def test_n1_allocation_program():
    # variables (x, rho): min rho, x = 1, x - rho <= 0
    lp = LinearProgram([0, 1], eq_lhs=[[1, 0]], eq_rhs=[1], ub_lhs=[[1, -1]], ub_rhs=[0])
    sol = solve_lp(lp)
    assert sol.status == "optimal"
    np.testing.assert_allclose(sol.point, [1, 1], atol=1e-12)
    assert sol.value == pytest.approx(1, abs=1e-12)
    assert sol.is_unique


def test_infeasible():
    assert solve_lp(LinearProgram([0], eq_lhs=[[1]], eq_rhs=[-1])).status == "infeasible"


def test_unbounded():
    assert solve_lp(LinearProgram([-1], ub_lhs=[[-1]], ub_rhs=[0])).status == "unbounded"


def test_simplex_example():
    sol = solve_lp(LinearProgram([1, 2], eq_lhs=[[1, 1]], eq_rhs=[3]))
    np.testing.assert_allclose(sol.point, [3, 0], atol=1e-12)
    assert sol.value == pytest.approx(3)
    assert sol.is_unique


def test_tie_is_not_unique():
    sol = solve_lp(LinearProgram([1, 1], eq_lhs=[[1, 1]], eq_rhs=[2]))
    assert sol.optimal and not sol.is_unique


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        LinearProgram([1, 2], eq_lhs=[[1, 1, 1]], eq_rhs=[1])
    with pytest.raises(DimensionMismatch):
        LinearProgram([1, 2], eq_lhs=[[1, 1]], eq_rhs=[1, 2])
    with pytest.raises(DimensionMismatch):
        LinearProgram([1, 2], eq_lhs=[[1, 1]])


def test_enumerate_examples():
    verts = enumerate_vertices(LinearProgram([1, 2], eq_lhs=[[1, 1]], eq_rhs=[3]))
    np.testing.assert_allclose([v.point for v in verts], [[0, 3], [3, 0]], atol=1e-12)
    np.testing.assert_allclose([v.value for v in verts], [6, 3])
    assert enumerate_vertices(LinearProgram([0], eq_lhs=[[1]], eq_rhs=[-1])) == []
    verts = enumerate_vertices(LinearProgram([0, 1], eq_lhs=[[1, 0]], eq_rhs=[1], ub_lhs=[[1, -1]], ub_rhs=[0]))
    assert len(verts) == 1
    np.testing.assert_allclose(verts[0].point, [1, 1])


def test_enumerate_too_large():
    with pytest.raises(TooLarge):
        enumerate_vertices(LinearProgram(np.ones(13), eq_lhs=np.ones((1, 13)), eq_rhs=[1]))


def test_free_variables():
    # min x subject to x >= -2 written as -x <= 2, x free
    sol = solve_lp(LinearProgram([1], ub_lhs=[[-1]], ub_rhs=[2], nonneg=False))
    assert sol.point[0] == pytest.approx(-2)


@st.composite
def bounded_programs(draw):
    n = draw(st.integers(1, 4))
    m_e = draw(st.integers(0, 2))
    m_u = draw(st.integers(0, 3))
    ints = st.integers(-3, 3)
    c = np.array(draw(st.lists(st.integers(0, 4), min_size=n, max_size=n)), float)
    E = np.array(draw(st.lists(st.lists(ints, min_size=n, max_size=n), min_size=m_e, max_size=m_e)), float)
    e = np.array(draw(st.lists(ints, min_size=m_e, max_size=m_e)), float)
    U = np.array(draw(st.lists(st.lists(ints, min_size=n, max_size=n), min_size=m_u, max_size=m_u)), float)
    u = np.array(draw(st.lists(st.integers(0, 5), min_size=m_u, max_size=m_u)), float)
    # a box keeps the feasible set bounded so vertex enumeration covers the optimum
    U = np.vstack([U.reshape(m_u, n), np.eye(n)])
    u = np.concatenate([u, np.full(n, 4.0)])
    return LinearProgram(c, E.reshape(m_e, n) if m_e else None, e if m_e else None, U, u)


@given(bounded_programs())
def test_matches_vertex_enumeration(lp):
    sol = solve_lp(lp)
    verts = enumerate_vertices(lp)
    if not verts:
        assert sol.status == "infeasible"
        return
    assert sol.status == "optimal"
    best = min(v.value for v in verts)
    assert sol.value == pytest.approx(best, abs=1e-9)
    n_opt = sum(abs(v.value - best) <= 1e-9 for v in verts)
    assert sol.is_unique == (n_opt == 1)
    assert abs(dual_value(lp, sol) - sol.value) <= 1e-9 * max(1, abs(sol.value))


@given(bounded_programs())
def test_matches_scipy(lp):
    sol = solve_lp(lp, check_unique=False)
    ref = linprog(lp.objective, A_ub=lp.ub_lhs, b_ub=lp.ub_rhs,
                  A_eq=lp.eq_lhs if lp.eq_lhs.size else None, b_eq=lp.eq_rhs if lp.eq_rhs.size else None,
                  bounds=(0, None), method="highs")
    if ref.status == 2:
        assert sol.status == "infeasible"
    else:
        assert ref.status == 0
        assert sol.value == pytest.approx(ref.fun, abs=1e-7)
        assert np.all(lp.ub_lhs @ sol.point <= lp.ub_rhs + 1e-9)
        if lp.eq_lhs.size:
            np.testing.assert_allclose(lp.eq_lhs @ sol.point, lp.eq_rhs, atol=1e-9)


def test_weak_duality_dual_feasible():
    lp = LinearProgram([1, 2, 0], eq_lhs=[[1, 1, 1]], eq_rhs=[3], ub_lhs=[[1, 0, 0]], ub_rhs=[2])
    sol = solve_lp(lp)
    y_eq, y_ub = sol.dual_point[:1], sol.dual_point[1:]
    assert np.all(y_ub <= 1e-12)
    assert np.all(lp.eq_lhs.T @ y_eq + lp.ub_lhs.T @ y_ub <= lp.objective + 1e-9)
    assert dual_value(lp, sol) == pytest.approx(sol.value)
