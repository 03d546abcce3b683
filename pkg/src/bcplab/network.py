"""Unitary network description and heavy-traffic structural analysis.

Indices are 0-based everywhere: buffer ``i`` in ``0..I-1``, server ``k`` in
``0..K-1``, activity ``j`` in ``0..J-1``.  Routing rows carry the exit
probability in column 0 followed by the buffer probabilities.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .errors import (InfeasibleTraffic, InvalidTopology, NonUniqueAllocation,
                     NotHeavyTraffic, NotStochastic)
from .lp import LinearProgram, solve_lp

ROUTING_TOL = 1e-12
HT_TOL = 1e-9
SIGMA_CONVENTIONS = ("classical", "literal")


@dataclass(frozen=True)
class NetworkTopology:
    """Buffers, servers and activities of a unitary network.

    Parameters
    ----------
    C : (I, J) 0/1 array, ``C[i, j] = 1`` if activity j serves buffer i.
    A : (K, J) 0/1 array, ``A[k, j] = 1`` if activity j runs on server k.
    routing : (J, I + 1) array; row j is ``(p_0^j, p_1^j, ..., p_I^j)``.
    num_exogenous : buffers ``0..num_exogenous-1`` receive outside arrivals.
    """

    C: np.ndarray
    A: np.ndarray
    routing: np.ndarray
    num_exogenous: int

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        routing = np.atleast_2d(np.asarray(self.routing, dtype=float))
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "routing", routing)
        object.__setattr__(self, "num_exogenous", int(self.num_exogenous))

    @property
    def num_buffers(self) -> int:
        return self.C.shape[0]

    @property
    def num_servers(self) -> int:
        return self.A.shape[0]

    @property
    def num_activities(self) -> int:
        return self.C.shape[1]

    @property
    def P(self) -> np.ndarray:
        """The I x J matrix P' with ``P[i, j] = p_i^j``."""
        return self.routing[:, 1:].T.copy()

    @property
    def buffer_of(self) -> np.ndarray:
        """Buffer served by each activity."""
        return np.argmax(self.C, axis=0)

    @property
    def server_of(self) -> np.ndarray:
        return np.argmax(self.A, axis=0)

    def activities_of_buffer(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.C[i] > 0)

    def relabeled(self, perm: Sequence[int]) -> "NetworkTopology":
        perm = np.asarray(perm)
        return NetworkTopology(self.C[:, perm], self.A[:, perm], self.routing[perm], self.num_exogenous)


@dataclass
class ValidationReport:
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def raise_if_failed(self):
        if self.violations:
            raise InvalidTopology("; ".join(self.violations))


def validate_topology(t: NetworkTopology) -> ValidationReport:
    report = ValidationReport()
    v = report.violations
    I, J, K = t.num_buffers, t.num_activities, t.num_servers
    if t.A.shape[1] != J:
        v.append(f"C has {J} activity columns but A has {t.A.shape[1]}")
        return report
    if t.routing.shape != (J, I + 1):
        v.append(f"routing has shape {t.routing.shape}, expected ({J}, {I + 1})")
        return report
    for name, M in (("C", t.C), ("A", t.A)):
        if not np.all((M == 0) | (M == 1)):
            v.append(f"{name} is not a 0/1 matrix")
    for j in range(J):
        nb = int(t.C[:, j].sum())
        if nb == 0:
            v.append(f"activity {j} serves no buffer")
        elif nb > 1:
            v.append(f"activity {j} serves {nb} buffers")
        ns = int(t.A[:, j].sum())
        if ns == 0:
            v.append(f"activity {j} has no server")
        elif ns > 1:
            v.append(f"activity {j} uses {ns} servers")
    for i in range(I):
        if t.C[i].sum() < 1:
            v.append(f"buffer {i} is served by no activity")
    for k in range(K):
        if t.A[k].sum() < 1:
            v.append(f"server {k} has no activity")
    if not np.all(np.isfinite(t.routing)):
        v.append("routing contains non-finite entries")
    for j in range(J):
        row = t.routing[j]
        if np.any(row < 0) or abs(row.sum() - 1.0) > ROUTING_TOL:
            v.append(f"routing not stochastic for activity {j} (sum {row.sum():.6g})")
    if not 1 <= t.num_exogenous <= I:
        v.append(f"num_exogenous={t.num_exogenous} outside [1, {I}]")
    return report


@dataclass(frozen=True)
class LimitParams:
    alpha: np.ndarray
    beta: np.ndarray
    sigma_u: np.ndarray
    sigma_v: np.ndarray
    theta1: np.ndarray
    theta2: np.ndarray
    q0: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta", "sigma_u", "sigma_v", "theta1", "theta2", "q0"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))

    def check(self, t: NetworkTopology):
        I, J, Ip = t.num_buffers, t.num_activities, t.num_exogenous
        for name, size in (("alpha", I), ("sigma_u", I), ("theta1", I), ("q0", I),
                           ("beta", J), ("sigma_v", J), ("theta2", J)):
            if getattr(self, name).size != size:
                raise ValueError(f"{name} must have length {size}")
        if np.any(self.alpha[Ip:] != 0) or np.any(self.sigma_u[Ip:] != 0):
            raise ValueError("alpha and sigma_u must be exactly 0 for buffers without exogenous arrivals")
        if np.any(self.alpha[:Ip] <= 0):
            raise ValueError("alpha must be positive on exogenous buffers")
        if np.any(self.sigma_u < 0):
            raise ValueError("sigma_u must be nonnegative")
        if np.any(self.beta <= 0) or np.any(self.sigma_v <= 0):
            raise ValueError("beta and sigma_v must be positive")
        if np.any(self.q0 < 0):
            raise ValueError("q0 must be nonnegative")

    def rates(self, r: float):
        """(alpha^r, beta^r) = (alpha + theta1/r, beta + theta2/r)."""
        return self.alpha + self.theta1 / r, self.beta + self.theta2 / r

    def relabeled(self, perm) -> "LimitParams":
        perm = np.asarray(perm)
        return LimitParams(self.alpha, self.beta[perm], self.sigma_u, self.sigma_v[perm],
                           self.theta1, self.theta2[perm], self.q0)


def routing_covariance(p) -> np.ndarray:
    """Covariance of one multinomial routing draw over buffers (exit implied).

    >>> routing_covariance([0.5, 0.25])
    array([[ 0.25  , -0.125 ],
           [-0.125 ,  0.1875]])
    """
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any(p < 0) or p.sum() > 1 + ROUTING_TOL:
        raise NotStochastic(f"routing probabilities {p} are not a sub-probability vector")
    return np.diag(p) - np.outer(p, p)


@dataclass(frozen=True)
class HeavyTrafficData:
    """Output of :func:`heavy_traffic_analysis`.

    All J-indexed quantities are in *relabeled* order: basic activities
    first.  ``perm[b]`` is the original index of relabeled activity ``b``.
    """

    perm: np.ndarray
    x_star: np.ndarray
    rho_star: float
    num_basic: int
    R: np.ndarray
    K_mat: np.ndarray
    theta: np.ndarray
    Sigma: np.ndarray
    sigma_phi: List[np.ndarray]
    topology: NetworkTopology
    params: LimitParams
    sigma_convention: str = "classical"

    @property
    def basic_set(self) -> np.ndarray:
        """Original indices of the basic activities."""
        return self.perm[: self.num_basic]

    @property
    def C(self):
        return self.topology.C

    @property
    def A(self):
        return self.topology.A

    @property
    def P(self):
        return self.topology.P

    @property
    def CmP(self):
        return self.topology.C - self.topology.P

    @property
    def num_controls(self) -> int:
        """K + J - B, the dimension of U."""
        return self.K_mat.shape[0]

    def relabel(self, arr):
        """Reorder the last axis of a J-indexed array from original to relabeled order."""
        return np.asarray(arr)[..., self.perm]


def _covariance(t: NetworkTopology, lp: LimitParams, x: np.ndarray, convention: str):
    if convention == "classical":
        var_u = lp.alpha ** 3 * lp.sigma_u ** 2
        var_v = lp.beta ** 3 * lp.sigma_v ** 2
    elif convention == "literal":
        var_u = lp.sigma_u ** 2
        var_v = lp.sigma_v ** 2
    else:
        raise ValueError(f"sigma_convention must be one of {SIGMA_CONVENTIONS}")
    CmP = t.C - t.P
    sigma_phi = [routing_covariance(t.routing[j, 1:]) for j in range(t.num_activities)]
    Sigma = np.diag(var_u) + CmP @ np.diag(var_v * x) @ CmP.T
    for j, S in enumerate(sigma_phi):
        Sigma = Sigma + S * lp.beta[j] * x[j]
    return 0.5 * (Sigma + Sigma.T), sigma_phi


def heavy_traffic_analysis(t: NetworkTopology, lp: LimitParams,
                           sigma_convention: str = "classical") -> HeavyTrafficData:
    """Solve the nominal allocation LP and build R, K, theta and Sigma."""
    validate_topology(t).raise_if_failed()
    lp.check(t)
    I, J, K = t.num_buffers, t.num_activities, t.num_servers
    R = (t.C - t.P) @ np.diag(lp.beta)

    # variables (x_1..x_J, rho): min rho, Rx = alpha, Ax - rho e <= 0
    prog = LinearProgram(
        objective=np.r_[np.zeros(J), 1.0],
        eq_lhs=np.hstack([R, np.zeros((I, 1))]),
        eq_rhs=lp.alpha,
        ub_lhs=np.hstack([t.A, -np.ones((K, 1))]),
        ub_rhs=np.zeros(K),
    )
    sol = solve_lp(prog)
    if sol.status != "optimal":
        raise InfeasibleTraffic(f"allocation LP is {sol.status}")
    x, rho = sol.point[:J], float(sol.point[J])
    x = np.where(np.abs(x) <= HT_TOL, 0.0, x)
    if not sol.is_unique:
        raise NonUniqueAllocation("allocation LP has multiple optimal solutions")
    if abs(rho - 1.0) > HT_TOL:
        raise NotHeavyTraffic(f"rho* = {rho:.12g}, expected 1")
    if np.abs(t.A @ x - 1.0).max() > HT_TOL:
        raise NotHeavyTraffic(f"A x* = {t.A @ x}, servers not fully utilised")

    basic = np.flatnonzero(x > 0)
    nonbasic = np.flatnonzero(x <= 0)
    perm = np.concatenate([basic, nonbasic]).astype(int)
    B = basic.size
    tr = t.relabeled(perm)
    pr = lp.relabeled(perm)
    xr = x[perm]

    Am = tr.A
    K_mat = np.zeros((K + J - B, J))
    K_mat[:K, :] = Am
    K_mat[K:, B:] = -np.eye(J - B)

    R_rel = R[:, perm]
    theta = pr.theta1 - (tr.C - tr.P) @ (pr.theta2 * xr)
    Sigma, sigma_phi = _covariance(tr, pr, xr, sigma_convention)
    return HeavyTrafficData(perm=perm, x_star=xr, rho_star=rho, num_basic=B, R=R_rel,
                            K_mat=K_mat, theta=theta, Sigma=Sigma, sigma_phi=sigma_phi,
                            topology=tr, params=pr, sigma_convention=sigma_convention)


@dataclass(frozen=True)
class Network:
    """A topology together with the limit laws of its primitives.

    ``arrivals[i]`` is the limit interarrival law of exogenous buffer i
    (mean ``1/alpha_i``), ``services[j]`` the limit service law of activity
    j (mean ``1/beta_j``).  The r-th network uses the same families and
    coefficients of variation with rates ``alpha + theta1/r`` and
    ``beta + theta2/r``.
    """

    topology: NetworkTopology
    arrivals: tuple
    services: tuple
    theta1: np.ndarray = None
    theta2: np.ndarray = None
    q0: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        t = self.topology
        object.__setattr__(self, "arrivals", tuple(self.arrivals))
        object.__setattr__(self, "services", tuple(self.services))
        if len(self.arrivals) != t.num_exogenous:
            raise ValueError(f"need {t.num_exogenous} arrival laws, got {len(self.arrivals)}")
        if len(self.services) != t.num_activities:
            raise ValueError(f"need {t.num_activities} service laws, got {len(self.services)}")
        for name, size in (("theta1", t.num_buffers), ("theta2", t.num_activities), ("q0", t.num_buffers)):
            v = getattr(self, name)
            v = np.zeros(size) if v is None else np.atleast_1d(np.asarray(v, dtype=float))
            if v.size != size:
                raise ValueError(f"{name} must have length {size}")
            object.__setattr__(self, name, v)
        if np.any(self.theta1[t.num_exogenous:] != 0):
            raise ValueError("theta1 must vanish on buffers without exogenous arrivals")

    @property
    def params(self) -> LimitParams:
        t = self.topology
        I, Ip = t.num_buffers, t.num_exogenous
        alpha = np.zeros(I)
        sigma_u = np.zeros(I)
        alpha[:Ip] = [1.0 / d.mean for d in self.arrivals]
        sigma_u[:Ip] = [d.sd for d in self.arrivals]
        beta = np.array([1.0 / d.mean for d in self.services])
        sigma_v = np.array([d.sd for d in self.services])
        return LimitParams(alpha, beta, sigma_u, sigma_v, self.theta1, self.theta2, self.q0)

    def rates(self, r: float):
        return self.params.rates(r)

    def arrival_law(self, i: int, r: float):
        alpha_r = 1.0 / self.arrivals[i].mean + self.theta1[i] / r
        if alpha_r <= 0:
            raise ValueError(f"arrival rate of buffer {i} at r={r} is not positive")
        return self.arrivals[i].with_mean(1.0 / alpha_r)

    def service_law(self, j: int, r: float):
        beta_r = 1.0 / self.services[j].mean + self.theta2[j] / r
        if beta_r <= 0:
            raise ValueError(f"service rate of activity {j} at r={r} is not positive")
        return self.services[j].with_mean(1.0 / beta_r)

    def initial_queue(self, r: float) -> np.ndarray:
        """q^r = round(r q0)."""
        return np.rint(r * self.q0).astype(np.int64)

    def analyze(self, sigma_convention: str = "classical") -> HeavyTrafficData:
        return heavy_traffic_analysis(self.topology, self.params, sigma_convention)
