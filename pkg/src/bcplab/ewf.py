"""One-dimensional workload control problem: value function, reflected BM, lower-bound check.

With one workload dimension, a nondecreasing effective cost and a
nonnegative push cost, the cheapest admissible control is the minimal
push that keeps workload at or above 0, i.e. reflection at 0.  Its
discounted cost solves ``gamma V = hhat + mu V' + sigma^2 V'' / 2`` with
``V'(0) = -push_cost`` and at most linear growth.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from .errors import BoundViolated, NotSupported
from .lp import LinearProgram, solve_lp
from .network import HeavyTrafficData
from .workload import WorkloadData, effective_cost


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous function on [0, inf) with ``f(0) = 0``.

    ``knots[0] = 0``; slope ``slopes[k]`` applies on ``[knots[k], knots[k+1])``
    and the last slope continues to infinity.
    """

    knots: np.ndarray
    slopes: np.ndarray

    def __post_init__(self):
        k = np.atleast_1d(np.asarray(self.knots, dtype=float))
        s = np.atleast_1d(np.asarray(self.slopes, dtype=float))
        if k.size != s.size or k.size == 0 or k[0] != 0 or np.any(np.diff(k) <= 0):
            raise ValueError("knots must start at 0, increase strictly and match slopes in length")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "slopes", s)

    @classmethod
    def linear(cls, slope: float) -> "PiecewiseLinear":
        return cls([0.0], [slope])

    @property
    def offsets(self) -> np.ndarray:
        """Intercepts ``c_k`` with ``f(w) = c_k + slopes[k] w`` on piece k."""
        vals = np.concatenate([[0.0], np.cumsum(self.slopes[:-1] * np.diff(self.knots))])
        return vals - self.slopes * self.knots

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        k = np.clip(np.searchsorted(self.knots, w, side="right") - 1, 0, None)
        return self.offsets[k] + self.slopes[k] * w

    def scaled(self, factor: float) -> "PiecewiseLinear":
        return PiecewiseLinear(self.knots, self.slopes * factor)

    @property
    def nondecreasing(self) -> bool:
        return bool(np.all(self.slopes >= 0))

    @property
    def convex(self) -> bool:
        return bool(np.all(np.diff(self.slopes) >= 0))


@dataclass(frozen=True)
class Ewf1D:
    drift: float
    variance: float
    hhat: PiecewiseLinear
    push_cost: float
    gamma: float

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError("variance must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.push_cost < 0:
            raise ValueError("push_cost must be nonnegative")

    @property
    def roots(self):
        """Roots (negative, positive) of ``sigma^2 l^2 / 2 + mu l - gamma``."""
        a, b, c = 0.5 * self.variance, self.drift, -self.gamma
        disc = math.sqrt(b * b - 4 * a * c)
        # stable form for both roots
        q = -0.5 * (b + math.copysign(disc, b if b != 0 else 1.0))
        r1, r2 = q / a, c / q
        return min(r1, r2), max(r1, r2)


def push_cost_1d(wd: WorkloadData, htd: HeavyTrafficData, p) -> float:
    """Cheapest ``p.u`` per unit of workload push ``G u = 1`` with ``u = K y >= 0``."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    if wd.dim != 1:
        raise NotSupported(f"workload dimension {wd.dim} > 1")
    Km = htd.K_mat
    m, J = Km.shape
    prog = LinearProgram(objective=p @ Km, eq_lhs=wd.G @ Km, eq_rhs=[1.0],
                         ub_lhs=-Km, ub_rhs=np.zeros(m), nonneg=False)
    sol = solve_lp(prog, check_unique=False)
    if sol.status != "optimal":
        raise NotSupported(f"push-cost LP is {sol.status}")
    return max(float(sol.value), 0.0)


def ewf_from_network(htd: HeavyTrafficData, wd: WorkloadData, h, p, gamma: float) -> Ewf1D:
    """Drift ``Lambda theta``, variance ``Lambda Sigma Lambda'`` and effective cost for L = 1."""
    if wd.dim != 1:
        raise NotSupported(f"workload dimension {wd.dim} > 1")
    L = wd.Lambda[0]
    slope = effective_cost(wd, h, [1.0])
    # homogeneity: sample a second ray point to confirm linearity on [0, inf)
    if abs(effective_cost(wd, h, [2.0]) - 2 * slope) > 1e-9 * max(1.0, slope):
        raise NotSupported("effective cost is not linear along the workload ray")
    return Ewf1D(drift=float(L @ htd.theta), variance=float(L @ htd.Sigma @ L),
                 hhat=PiecewiseLinear.linear(slope), push_cost=push_cost_1d(wd, htd, p), gamma=float(gamma))


def _coefficients(e: Ewf1D):
    """Homogeneous-solution coefficients on each piece of hhat.

    On piece k the value is ``(c_k + s_k w)/gamma + s_k mu/gamma^2
    + A_k exp(lp (w - b_{k+1})) + B_k exp(lm (w - b_k))``; the last piece
    has ``A = 0``.
    """
    lm, lp = e.roots
    g, mu = e.gamma, e.drift
    b = e.hhat.knots
    s = e.hhat.slopes
    c = e.hhat.offsets
    m = b.size
    n = 2 * m - 1  # A_0..A_{m-2}, B_0..B_{m-1}
    M = np.zeros((n, n))
    rhs = np.zeros(n)

    def a_idx(k):
        return k

    def b_idx(k):
        return (m - 1) + k

    def basis(k, w):
        """(value, derivative) coefficients of A_k, B_k at w, plus particular part."""
        ea = math.exp(lp * (w - b[k + 1])) if k < m - 1 else 0.0
        eb = math.exp(lm * (w - b[k]))
        part = (c[k] + s[k] * w) / g + s[k] * mu / g ** 2
        return (ea, lp * ea), (eb, lm * eb), (part, s[k] / g)

    # V'(0) = -push_cost
    (ea, dea), (eb, deb), (_, dpart) = basis(0, 0.0)
    row = 0
    if m > 1:
        M[row, a_idx(0)] = dea
    M[row, b_idx(0)] = deb
    rhs[row] = -e.push_cost - dpart
    row += 1
    for k in range(1, m):
        w = b[k]
        (la, dla), (lb, dlb), (lp_, dlp) = basis(k - 1, w)
        (ra, dra), (rb, drb), (rp, drp) = basis(k, w)
        for deriv in (0, 1):
            M[row, a_idx(k - 1)] = (la, dla)[deriv]
            M[row, b_idx(k - 1)] = (lb, dlb)[deriv]
            if k < m - 1:
                M[row, a_idx(k)] = -(ra, dra)[deriv]
            M[row, b_idx(k)] = -(rb, drb)[deriv]
            rhs[row] = (rp, drp)[deriv] - (lp_, dlp)[deriv]
            row += 1
    coef = np.linalg.solve(M, rhs)
    A = np.append(coef[: m - 1], 0.0)
    B = coef[m - 1:]
    return A, B, basis


def ewf_value_1d(e: Ewf1D, w) -> np.ndarray:
    """Discounted cost of workload reflected at 0, started from ``w >= 0``."""
    if not e.hhat.nondecreasing:
        raise NotSupported("effective cost must be nondecreasing")
    w_arr = np.atleast_1d(np.asarray(w, dtype=float))
    if np.any(w_arr < 0):
        raise ValueError("w must be nonnegative")
    A, B, basis = _coefficients(e)
    out = np.empty_like(w_arr)
    for n, x in enumerate(w_arr):
        k = int(np.clip(np.searchsorted(e.hhat.knots, x, side="right") - 1, 0, None))
        (ea, _), (eb, _), (part, _) = basis(k, x)
        out[n] = part + A[k] * ea + B[k] * eb
    return out if np.ndim(w) else float(out[0])


@dataclass(frozen=True)
class RbmPath:
    times: np.ndarray
    W: np.ndarray
    L: np.ndarray


def _rbm_steps(w, mu, sigma2, T, dt, rng, paths):
    """Exact reflected walk on the grid: bridge minima give the running minimum of the free path."""
    n = int(math.ceil(T / dt - 1e-9))
    sd = math.sqrt(max(sigma2, 0.0) * dt)
    x = np.zeros(paths)
    run_min = np.full(paths, float(w))
    for _ in range(n):
        z = rng.standard_normal(paths)
        u = 1.0 - rng.random(paths)
        x_new = x + mu * dt + sd * z
        lo, hi = w + x, w + x_new
        bridge_min = 0.5 * (lo + hi - np.sqrt((hi - lo) ** 2 - 2.0 * sd * sd * np.log(u)))
        np.minimum(run_min, bridge_min, out=run_min)
        x = x_new
        L = np.maximum(0.0, -run_min)
        yield w + x + L, L


def rbm_path(w, mu, sigma2, T, dt, seed) -> RbmPath:
    rng = np.random.default_rng(seed)
    Ws, Ls = [np.array([float(w)])], [np.array([0.0])]
    for Wn, Ln in _rbm_steps(w, mu, sigma2, T, dt, rng, 1):
        Ws.append(Wn.copy())
        Ls.append(Ln.copy())
    n = len(Ws)
    return RbmPath(np.arange(n) * dt, np.concatenate(Ws), np.concatenate(Ls))


def rbm_simulate(w, mu, sigma2, gamma, hhat, p, T, dt, seed, paths: int = 1) -> np.ndarray:
    """Discounted costs of ``paths`` reflected Brownian paths started at w.

    ``hhat`` is a callable on arrays.  Holding cost uses the trapezoid
    rule and the push cost the trapezoid weight on each increment of L.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    rng = np.random.default_rng(seed)
    prev_W = np.full(paths, float(w))
    prev_L = np.zeros(paths)
    prev_f = np.asarray(hhat(prev_W), dtype=float)
    hold = np.zeros(paths)
    push = np.zeros(paths)
    k = 0
    for W, L in _rbm_steps(w, mu, sigma2, T, dt, rng, paths):
        d0, d1 = math.exp(-gamma * k * dt), math.exp(-gamma * (k + 1) * dt)
        f = np.asarray(hhat(W), dtype=float)
        hold += 0.5 * dt * (d0 * prev_f + d1 * f)
        push += 0.5 * (d0 + d1) * (L - prev_L)
        prev_f, prev_L = f, L
        k += 1
    return hold + p * push


def default_dt(e: Ewf1D) -> float:
    return 1e-3 * e.variance / e.gamma


def default_horizon(gamma: float) -> float:
    """Smallest T with exp(-gamma T) < 1e-6."""
    return math.log(1e6) / gamma * 1.01


@dataclass(frozen=True)
class CrossCheck:
    w: float
    ode_value: float
    mc_mean: float
    mc_se: float
    mc_mean_half_dt: float
    mc_se_half_dt: float
    paths: int
    dt: float

    @property
    def z(self) -> float:
        return (self.mc_mean - self.ode_value) / self.mc_se if self.mc_se > 0 else 0.0

    @property
    def richardson(self) -> float:
        """Extrapolated estimate ``2 m(dt/2) - m(dt)`` (first-order bias removed)."""
        return 2 * self.mc_mean_half_dt - self.mc_mean

    def agrees(self, ses: float = 3.0) -> bool:
        return abs(self.z) <= ses


def cross_check(e: Ewf1D, w: float, paths: int = 10_000, dt: Optional[float] = None, seed: int = 0,
                T: Optional[float] = None) -> CrossCheck:
    """ODE value against reflected-BM Monte Carlo at step dt and dt/2."""
    dt = default_dt(e) if dt is None else dt
    T = default_horizon(e.gamma) if T is None else T
    ss = np.random.SeedSequence(seed).spawn(2)
    a = rbm_simulate(w, e.drift, e.variance, e.gamma, e.hhat, e.push_cost, T, dt, ss[0], paths)
    b = rbm_simulate(w, e.drift, e.variance, e.gamma, e.hhat, e.push_cost, T, dt / 2, ss[1], paths)
    return CrossCheck(float(w), float(ewf_value_1d(e, w)), float(a.mean()), float(a.std(ddof=1) / math.sqrt(paths)),
                      float(b.mean()), float(b.std(ddof=1) / math.sqrt(paths)), paths, dt)


@dataclass
class BoundReport:
    bound: float
    per_r: List[Dict[str, float]]
    trend: bool
    passed: bool
    w: Optional[float] = None
    violations: List[float] = field(default_factory=list)

    def to_json(self) -> str:
        d = {"w": self.w, "bound": self.bound, "per_r": self.per_r, "trend": self.trend}
        return json.dumps(d, indent=2, sort_keys=True)


def verify_lower_bound(estimates, bound: float, slack_ses: float = 3.0, w: Optional[float] = None,
                       raise_on_violation: bool = True) -> BoundReport:
    """Check ``mean + slack_ses * SE >= bound`` for each r.

    ``estimates`` maps r to an object with ``mean`` and ``std_error``.
    ``trend`` records whether the gap at the largest r is no larger than at
    the smallest r.
    """
    if len(estimates) < 2:
        raise ValueError("need estimates for at least two values of r")
    rs = sorted(estimates)
    per_r, bad = [], []
    for r in rs:
        est = estimates[r]
        gap = est.mean - bound
        per_r.append({"r": float(r), "mean": float(est.mean), "se": float(est.std_error), "gap": float(gap)})
        if est.mean + slack_ses * est.std_error < bound:
            bad.append(float(r))
    trend = per_r[-1]["gap"] <= per_r[0]["gap"]
    report = BoundReport(float(bound), per_r, bool(trend), not bad, None if w is None else float(w), bad)
    if bad and raise_on_violation:
        raise BoundViolated(f"lower bound {bound:.6g} violated at r = {bad}", report=report)
    return report
