"""Workload matrix, the matrix G, and the effective cost function."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (Assumption25Violated, GNotNonnegative, InconsistentWorkload,
                     NoCanonicalConstruction, NotInWorkloadSpace)
from .lp import LinearProgram, solve_lp
from .network import HeavyTrafficData

RESID_TOL = 1e-9
POS_TOL = 1e-12
LP_TOL = 1e-9


@dataclass(frozen=True)
class WorkloadData:
    Lambda: np.ndarray
    G: np.ndarray
    lower_norm_c: float

    @property
    def dim(self) -> int:
        return self.Lambda.shape[0]

    def workload(self, q) -> np.ndarray:
        return self.Lambda @ np.asarray(q, dtype=float)


def canonical_single_pool_lambda(htd: HeavyTrafficData) -> np.ndarray:
    """Row of effective mean service requirements for a single-server network.

    Solves ``Lambda (C - P')_b diag(beta_b) = 1'`` over the basic
    activities; with no rerouting this is ``Lambda_i = 1/beta_j(i)``.
    """
    t = htd.topology
    if t.num_servers != 1:
        raise NoCanonicalConstruction(
            f"automatic workload matrix needs a single server pool, network has {t.num_servers}")
    B = htd.num_basic
    basic_buffers = t.buffer_of[:B]
    if B != t.num_buffers or len(set(basic_buffers.tolist())) != B:
        raise NoCanonicalConstruction("automatic workload matrix needs exactly one basic activity per buffer")
    M = htd.R[:, :B]
    try:
        lam = np.linalg.solve(M.T, np.ones(B))
    except np.linalg.LinAlgError as exc:
        raise NoCanonicalConstruction("basic part of R is singular") from exc
    return lam.reshape(1, -1)


def _solve_gk(K, LR):
    """G with G K = LR, solved on a square nonsingular column subset of K.

    K has 0/+-1 entries and full row rank, so this avoids the rounding a
    least-squares solve would add to otherwise exact rationals.
    """
    cols = []
    for j in range(K.shape[1]):
        if np.linalg.matrix_rank(K[:, cols + [j]]) == len(cols) + 1:
            cols.append(j)
        if len(cols) == K.shape[0]:
            break
    if len(cols) < K.shape[0]:
        raise InconsistentWorkload("K does not have full row rank")
    return np.linalg.solve(K[:, cols].T, LR[:, cols].T).T


def build_workload(htd: HeavyTrafficData, Lambda="auto") -> WorkloadData:
    if isinstance(Lambda, str):
        if Lambda != "auto":
            raise ValueError("Lambda must be a matrix or 'auto'")
        Lam = canonical_single_pool_lambda(htd)
    else:
        Lam = np.atleast_2d(np.asarray(Lambda, dtype=float))
        if Lam.shape[1] != htd.topology.num_buffers:
            raise InconsistentWorkload(f"Lambda must have {htd.topology.num_buffers} columns")

    LR = Lam @ htd.R
    G = _solve_gk(htd.K_mat, LR)
    resid = np.abs(G @ htd.K_mat - LR).max(initial=0.0)
    if resid >= RESID_TOL:
        raise InconsistentWorkload(f"Lambda R = G K has residual {resid:.3e}")
    if np.any(G < -POS_TOL):
        raise GNotNonnegative(f"G has negative entries: {G}")
    G = np.where(G < 0, 0.0, G)
    col_max = G.max(axis=0)
    if np.any(col_max < POS_TOL):
        bad = np.flatnonzero(col_max < POS_TOL).tolist()
        raise Assumption25Violated(f"columns {bad} of G have no strictly positive entry")

    # |Gu|_1 = 1'Gu on u >= 0, so the LP over the unit simplex is exact
    m = G.shape[1]
    sol = solve_lp(LinearProgram(G.sum(axis=0), eq_lhs=np.ones((1, m)), eq_rhs=[1.0]), check_unique=False)
    c = float(sol.value)
    vertex_min = float(G.sum(axis=0).min())
    if abs(c - vertex_min) > LP_TOL or c <= 0:
        raise Assumption25Violated(f"lower norm bound certification failed (LP {c}, vertices {vertex_min})")
    return WorkloadData(Lam, G, vertex_min)


def _check_h(h, size):
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size != size:
        raise ValueError(f"h must have length {size}")
    if np.any(h <= 0):
        raise ValueError("holding costs must be strictly positive")
    return h


def _program(wd: WorkloadData, h, w):
    h = _check_h(h, wd.Lambda.shape[1])
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if w.size != wd.dim:
        raise ValueError(f"w must have length {wd.dim}")
    return LinearProgram(h, eq_lhs=wd.Lambda, eq_rhs=w), h, w


def effective_cost(wd: WorkloadData, h, w) -> float:
    """min{h.q : Lambda q = w, q >= 0}."""
    prog, _, w = _program(wd, h, w)
    sol = solve_lp(prog, check_unique=False)
    if sol.status != "optimal":
        raise NotInWorkloadSpace(f"w = {w} is not in the workload cone")
    return sol.value


def lift(wd: WorkloadData, h, w) -> np.ndarray:
    """Lexicographically smallest minimiser of the effective-cost LP."""
    prog, h, w = _program(wd, h, w)
    sol = solve_lp(prog, check_unique=False)
    if sol.status != "optimal":
        raise NotInWorkloadSpace(f"w = {w} is not in the workload cone")
    I = h.size
    reduced = h - wd.Lambda.T @ sol.dual_point
    pinned = reduced > LP_TOL * max(1.0, np.abs(h).max())
    eq_rows = [wd.Lambda, np.eye(I)[pinned]]
    eq_rhs = [w, np.zeros(int(pinned.sum()))]
    q = np.zeros(I)
    for k in range(I):
        if pinned[k]:
            q[k] = 0.0
            continue
        step = solve_lp(LinearProgram(np.eye(I)[k], eq_lhs=np.vstack(eq_rows),
                                      eq_rhs=np.concatenate(eq_rhs)), check_unique=False)
        q[k] = max(step.point[k], 0.0) if step.optimal else sol.point[k]
        eq_rows.append(np.eye(I)[k:k + 1])
        eq_rhs.append([q[k]])
    return q


def check_effective_inequality(wd: WorkloadData, h, q) -> float:
    """h.q - hhat(Lambda q); nonnegative up to rounding."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if np.any(q < 0):
        raise ValueError("q must be nonnegative")
    h = _check_h(h, q.size)
    return float(h @ q - effective_cost(wd, h, wd.Lambda @ q))
