"""Dense two-phase simplex and brute-force vertex enumeration for tiny LPs.

Problems have the form::

    minimize    c . x
    subject to  A_eq x  = b_eq
                A_ub x <= b_ub
                x >= 0            (only when ``nonneg`` is set)

Everything is sized for the handful of variables that show up in the
structural analysis of a processing network, so the code favours
determinism (Bland's rule, fixed tolerances) over speed.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import DimensionMismatch, NumericalFailure, TooLarge

TOL = 1e-9
PIVOT_TOL = 1e-12
ORACLE_MAX = 12


@dataclass(frozen=True)
class LinearProgram:
    objective: np.ndarray
    eq_lhs: Optional[np.ndarray] = None
    eq_rhs: Optional[np.ndarray] = None
    ub_lhs: Optional[np.ndarray] = None
    ub_rhs: Optional[np.ndarray] = None
    nonneg: bool = True

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.objective, dtype=float))
        if c.ndim != 1:
            raise DimensionMismatch("objective must be a vector")
        n = c.size
        object.__setattr__(self, "objective", c)
        for lhs_name, rhs_name in (("eq_lhs", "eq_rhs"), ("ub_lhs", "ub_rhs")):
            lhs, rhs = getattr(self, lhs_name), getattr(self, rhs_name)
            if lhs is None and rhs is None:
                lhs, rhs = np.zeros((0, n)), np.zeros(0)
            elif lhs is None or rhs is None:
                raise DimensionMismatch(f"{lhs_name} and {rhs_name} must be given together")
            lhs = np.asarray(lhs, dtype=float)
            rhs = np.atleast_1d(np.asarray(rhs, dtype=float))
            if lhs.ndim == 1:
                lhs = lhs.reshape(1, -1) if lhs.size else np.zeros((0, n))
            if lhs.ndim != 2 or lhs.shape[1] != n or rhs.ndim != 1 or rhs.size != lhs.shape[0]:
                raise DimensionMismatch(
                    f"{lhs_name} has shape {lhs.shape}, {rhs_name} has shape {rhs.shape}, "
                    f"expected ({rhs.size}, {n})")
            object.__setattr__(self, lhs_name, lhs)
            object.__setattr__(self, rhs_name, rhs)
        for name in ("objective", "eq_lhs", "eq_rhs", "ub_lhs", "ub_rhs"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} contains non-finite entries")

    @property
    def n(self) -> int:
        return self.objective.size

    @property
    def n_constraints(self) -> int:
        return self.eq_lhs.shape[0] + self.ub_lhs.shape[0]


@dataclass
class LpSolution:
    status: str  # "optimal" | "infeasible" | "unbounded"
    value: float = float("nan")
    point: np.ndarray = field(default_factory=lambda: np.zeros(0))
    is_unique: bool = False
    dual_point: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


class Vertex(NamedTuple):
    point: np.ndarray
    value: float


# ---------------------------------------------------------------------------
# standard form


class _StandardForm:
    """min c.z, A z = b, z >= 0, b >= 0, with a map back to the original x."""

    def __init__(self, lp: LinearProgram):
        n = lp.n
        m_e, m_u = lp.eq_lhs.shape[0], lp.ub_lhs.shape[0]
        if lp.nonneg:
            x_map = np.eye(n)
        else:
            x_map = np.hstack([np.eye(n), -np.eye(n)])
        nx = x_map.shape[1]
        A = np.zeros((m_e + m_u, nx + m_u))
        A[:m_e, :nx] = lp.eq_lhs @ x_map
        A[m_e:, :nx] = lp.ub_lhs @ x_map
        A[m_e:, nx:] = np.eye(m_u)
        b = np.concatenate([lp.eq_rhs, lp.ub_rhs])
        sign = np.where(b < 0, -1.0, 1.0)
        self.A = A * sign[:, None]
        self.b = b * sign
        self.row_sign = sign
        self.c = np.concatenate([lp.objective @ x_map, np.zeros(m_u)])
        self.x_map = np.hstack([x_map, np.zeros((n, m_u))])
        self.free = not lp.nonneg

    def to_x(self, z: np.ndarray) -> np.ndarray:
        return self.x_map @ z


class _Tableau:
    def __init__(self, A, b, basis):
        m, N = A.shape
        self.T = np.zeros((m, N + 1))
        self.T[:, :N] = A
        self.T[:, N] = b
        self.basis = list(basis)

    @property
    def rhs(self):
        return self.T[:, -1]

    def pivot(self, row: int, col: int):
        T = self.T
        piv = T[row, col]
        if abs(piv) < PIVOT_TOL:
            raise NumericalFailure(f"pivot magnitude {abs(piv):.3e} below {PIVOT_TOL}")
        T[row] /= piv
        for i in range(T.shape[0]):
            if i != row and T[i, col] != 0.0:
                T[i] -= T[i, col] * T[row]
        T[row, col] = 1.0
        self.basis[row] = col

    def reduced_costs(self, c):
        cb = c[self.basis]
        return c - cb @ self.T[:, :-1]

    def point(self, N):
        z = np.zeros(N)
        z[self.basis] = self.rhs
        return z


def _run_simplex(tab: _Tableau, c: np.ndarray, allowed: np.ndarray) -> str:
    """Bland's-rule primal simplex on a tableau in canonical form."""
    N = c.size
    for _ in range(50_000):
        d = tab.reduced_costs(c)
        entering = -1
        for j in range(N):
            if allowed[j] and j not in tab.basis and d[j] < -TOL:
                entering = j
                break
        if entering < 0:
            return "optimal"
        col = tab.T[:, entering]
        rows = np.flatnonzero(col > PIVOT_TOL)
        if rows.size == 0:
            if np.any(col > 0.0):
                raise NumericalFailure("entering column has only sub-tolerance pivots")
            return "unbounded"
        ratios = tab.rhs[rows] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + TOL * max(1.0, abs(best))]
        leave = min(ties, key=lambda r: tab.basis[r])
        tab.pivot(leave, entering)
    raise NumericalFailure("simplex iteration limit reached")


def _phase_one(sf: _StandardForm):
    """Return a feasible tableau (redundant rows removed) or None if infeasible."""
    A, b = sf.A, sf.b
    m, N = A.shape
    if m == 0:
        return _Tableau(np.zeros((0, N)), np.zeros(0), []), np.arange(0)
    art = np.hstack([A, np.eye(m)])
    tab = _Tableau(art, b, range(N, N + m))
    c1 = np.concatenate([np.zeros(N), np.ones(m)])
    allowed = np.ones(N + m, dtype=bool)
    _run_simplex(tab, c1, allowed)
    if c1[tab.basis] @ tab.rhs > TOL * max(1.0, np.abs(b).max()):
        return None, None
    # drive artificials out of the basis; rows that cannot be cleared are redundant
    keep = []
    for row in range(m):
        if tab.basis[row] >= N:
            cands = np.flatnonzero(np.abs(tab.T[row, :N]) > 1e-9)
            cands = [j for j in cands if j not in tab.basis]
            if cands:
                tab.pivot(row, cands[0])
                keep.append(row)
        else:
            keep.append(row)
    keep = np.array(keep, dtype=int)
    T = tab.T[keep][:, list(range(N)) + [N + m]]
    out = _Tableau(T[:, :N], T[:, N], [tab.basis[r] for r in keep])
    return out, keep


def _solve_standard(sf: _StandardForm, c: np.ndarray):
    """Solve min c.z over the standard-form polyhedron; returns (status, tableau, kept rows)."""
    tab, keep = _phase_one(sf)
    if tab is None:
        return "infeasible", None, None
    allowed = np.ones(c.size, dtype=bool)
    status = _run_simplex(tab, c, allowed)
    return status, tab, keep


def _face_is_singleton(sf: _StandardForm, tab: _Tableau, keep, lp: LinearProgram) -> bool:
    """Probe the optimal face along every zero-reduced-cost nonbasic direction."""
    N = sf.c.size
    d = tab.reduced_costs(sf.c)
    nonbasic = np.array([j not in tab.basis for j in range(N)])
    zero = nonbasic & (np.abs(d) <= TOL)
    if not zero.any():
        return True
    positive = nonbasic & ~zero
    A = sf.A[keep]
    b = sf.b[keep]
    # the optimal face: z feasible with every positive-reduced-cost column pinned at 0
    fix = np.eye(N)[positive]
    face = LinearProgram(np.zeros(N), np.vstack([A, fix]), np.concatenate([b, np.zeros(fix.shape[0])]))
    x0 = sf.to_x(tab.point(N))
    if not sf.free:
        probe = LinearProgram(-zero.astype(float), face.eq_lhs, face.eq_rhs)
        res = solve_lp(probe, check_unique=False)
        if res.status == "unbounded":
            return False
        return res.optimal and -res.value <= TOL * max(1.0, np.abs(x0).max())
    # split free variables make z non-unique even when x is unique: probe x coordinates
    for k in range(lp.n):
        for s in (1.0, -1.0):
            probe = LinearProgram(s * sf.x_map[k], face.eq_lhs, face.eq_rhs)
            res = solve_lp(probe, check_unique=False)
            if res.status == "unbounded":
                return False
            if abs(s * res.value - x0[k]) > TOL * max(1.0, abs(x0[k])):
                return False
    return True


def solve_lp(lp: LinearProgram, check_unique: bool = True) -> LpSolution:
    """Solve a small dense LP.

    Returns a basic optimal point, a dual vector ``(y_eq, y_ub)`` with
    ``A_eq' y_eq + A_ub' y_ub <= c`` (``y_ub <= 0``), and a flag telling
    whether the primal optimum is unique.
    """
    sf = _StandardForm(lp)
    status, tab, keep = _solve_standard(sf, sf.c)
    if status != "optimal":
        return LpSolution(status=status)
    N = sf.c.size
    z = tab.point(N)
    x = sf.to_x(z)
    value = float(lp.objective @ x)

    y = np.zeros(sf.A.shape[0])
    if keep.size:
        B = sf.A[np.ix_(keep, tab.basis)]
        y_kept = np.linalg.solve(B.T, sf.c[tab.basis])
        y[keep] = y_kept
    y *= sf.row_sign

    unique = _face_is_singleton(sf, tab, keep, lp) if check_unique else False
    return LpSolution("optimal", value, x, bool(unique), y)


def dual_value(lp: LinearProgram, sol: LpSolution) -> float:
    return float(np.concatenate([lp.eq_rhs, lp.ub_rhs]) @ sol.dual_point)


def enumerate_vertices(lp: LinearProgram) -> List[Vertex]:
    """Every vertex of the feasible set, by brute force over active sets.

    Intended as an oracle for :func:`solve_lp`; refuses anything beyond
    12 variables or 12 constraints.
    """
    n = lp.n
    if n > ORACLE_MAX or lp.n_constraints > ORACLE_MAX:
        raise TooLarge(f"vertex enumeration limited to n, m <= {ORACLE_MAX}")
    ineq = [lp.ub_lhs]
    rhs = [lp.ub_rhs]
    if lp.nonneg:
        ineq.append(-np.eye(n))
        rhs.append(np.zeros(n))
    G = np.vstack(ineq)
    h = np.concatenate(rhs)
    E, e = lp.eq_lhs, lp.eq_rhs
    rank_e = np.linalg.matrix_rank(E) if E.size else 0
    need = n - rank_e

    found = {}
    for active in itertools.combinations(range(G.shape[0]), need):
        M = np.vstack([E, G[list(active)]])
        if np.linalg.matrix_rank(M) < n:
            continue
        rhs_vec = np.concatenate([e, h[list(active)]])
        x, *_ = np.linalg.lstsq(M, rhs_vec, rcond=None)
        if np.abs(M @ x - rhs_vec).max(initial=0.0) > 1e-9:
            continue
        if E.size and np.abs(E @ x - e).max() > TOL:
            continue
        if G.size and (G @ x - h).max() > TOL:
            continue
        x = np.where(np.abs(x) < 1e-12, 0.0, x)
        key = tuple(np.round(x, 9))
        found.setdefault(key, x)
    keys = sorted(found)
    return [Vertex(found[k], float(lp.objective @ found[k])) for k in keys]
