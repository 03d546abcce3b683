"""Discounted holding-plus-idleness cost of scaled trajectories and its Monte Carlo estimate."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import HorizonTooShort
from .network import HeavyTrafficData, Network
from .policy import Policy
from .primitives import replication_seed
from .simulator import Trajectory, simulate

TAIL_REL = 1e-4


@dataclass(frozen=True)
class CostConfig:
    """Discount ``gamma``, holding costs ``h`` (I), idleness costs ``p`` (K + J - B).

    ``p`` follows the control ordering: servers first, then nonbasic
    activities in increasing original index.  ``tail_tol=None`` means
    ``1e-4`` times the estimated cost.
    """

    gamma: float
    h: np.ndarray
    p: np.ndarray
    horizon_scaled: float
    tail_tol: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "h", np.atleast_1d(np.asarray(self.h, dtype=float)))
        object.__setattr__(self, "p", np.atleast_1d(np.asarray(self.p, dtype=float)))
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if np.any(self.h <= 0):
            raise ValueError("holding costs h must be strictly positive")
        if np.any(self.p < 0):
            raise ValueError("idleness costs p must be nonnegative")
        if not self.horizon_scaled > 0:
            raise ValueError("horizon_scaled must be positive")
        if self.tail_tol is not None and not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")


@dataclass(frozen=True)
class PathCost:
    holding: float
    idleness: float
    truncation_bound: float

    @property
    def total(self) -> float:
        return self.holding + self.idleness

    def __float__(self):
        return self.total


@dataclass(frozen=True)
class CostEstimate:
    mean: float
    std_error: float
    replications: int
    truncation_bound: float
    holding_term: float
    idleness_term: float
    samples: np.ndarray = field(default=None, repr=False, compare=False)


def discount_weights(t0, t1, gamma: float) -> np.ndarray:
    """``int_{t0}^{t1} exp(-gamma t) dt`` elementwise, without cancellation."""
    t0 = np.asarray(t0, dtype=float)
    t1 = np.asarray(t1, dtype=float)
    return np.exp(-gamma * t0) * -np.expm1(-gamma * (t1 - t0)) / gamma


def tail_bound(a: float, b: float, gamma: float, H: float) -> float:
    """``int_H^inf exp(-gamma t) (a + b t) dt`` for a, b >= 0."""
    return math.exp(-gamma * H) * ((a + b * H) / gamma + b / gamma ** 2)


def pathwise_cost(path, cc: CostConfig, analysis: Optional[HeavyTrafficData] = None,
                  check_tail: bool = True) -> PathCost:
    """Exact discounted cost of one path on ``[0, cc.horizon_scaled]`` plus a tail bound.

    ``path`` is a :class:`~bcplab.simulator.Trajectory` or a scaled
    trajectory.  Queue lengths are constant and controls linear between
    events, so each segment integrates in closed form.  The tail beyond the
    horizon is bounded with a linear envelope ``a + b t`` of
    ``h.Qhat + gamma p.Uhat`` fitted over the path.
    """
    traj: Trajectory = getattr(path, "trajectory", path)
    if analysis is None:
        analysis = getattr(path, "analysis", None) or traj.network.analyze()
    H = cc.horizon_scaled
    if H > traj.horizon_scaled * (1 + 1e-12):
        raise ValueError(f"trajectory covers [0, {traj.horizon_scaled}], cost needs [0, {H}]")
    top = traj.topology
    if cc.h.size != top.num_buffers:
        raise ValueError(f"h must have length {top.num_buffers}")
    if cc.p.size != analysis.num_controls:
        raise ValueError(f"p must have length {analysis.num_controls}")
    r, g = traj.r, cc.gamma

    t = traj.times / r ** 2
    keep = t <= H
    t = t[keep]
    t_next = np.append(t[1:], H)
    w = discount_weights(t, t_next, g)
    alloc = traj.alloc[keep].astype(float)
    hq = traj.Q[keep] @ cc.h / r
    nonbasic = analysis.perm[analysis.num_basic:]
    # dUhat/dt in scaled time is r times the unscaled slope
    slopes = np.hstack([1.0 - alloc @ top.A.T, alloc[:, nonbasic]]) * r
    pu_rate = slopes @ cc.p
    holding = math.fsum(w * hq)
    idleness = math.fsum(w * pu_rate)

    # Uhat at segment ends, for the envelope
    U_end = np.cumsum(pu_rate * (t_next - t))
    f = hq + g * U_end
    knots = np.concatenate([t, t_next])
    vals = np.concatenate([f, f])
    if knots.size > 1 and np.ptp(knots) > 0:
        b = max(0.0, float(np.polyfit(knots, vals, 1)[0]))
    else:
        b = 0.0
    a = max(0.0, float(np.max(vals - b * knots)))
    bound = tail_bound(a, b, g, H)
    out = PathCost(holding, idleness, bound)
    if check_tail:
        tol = cc.tail_tol if cc.tail_tol is not None else TAIL_REL * abs(out.total)
        if bound > tol:
            raise HorizonTooShort(f"tail bound {bound:.3e} exceeds tolerance {tol:.3e}; increase horizon_scaled")
    return out


def monte_carlo_cost(network: Network, policy: Policy, r: float, cc: CostConfig, reps: int,
                     base_seed: int, analysis: Optional[HeavyTrafficData] = None,
                     check_tail: bool = True) -> CostEstimate:
    """Average path cost over ``reps`` independent replications.

    Replication k uses :func:`~bcplab.primitives.replication_seed` of
    ``(base_seed, k)``; sums use :func:`math.fsum`, so the result does not
    depend on evaluation order.
    """
    if reps < 2:
        raise ValueError("reps must be at least 2")
    if analysis is None:
        analysis = network.analyze()
    costs = []
    for k in range(reps):
        traj = simulate(network, policy, r, cc.horizon_scaled, replication_seed(base_seed, k))
        costs.append(pathwise_cost(traj, cc, analysis, check_tail=False))
    return aggregate(costs, cc, check_tail)


def aggregate(costs, cc: CostConfig, check_tail: bool = True) -> CostEstimate:
    n = len(costs)
    totals = np.array([c.total for c in costs])
    mean = math.fsum(totals) / n
    var = math.fsum((totals - mean) ** 2) / (n - 1)
    bound = math.fsum(c.truncation_bound for c in costs) / n
    est = CostEstimate(mean=mean, std_error=math.sqrt(var / n), replications=n, truncation_bound=bound,
                       holding_term=math.fsum(c.holding for c in costs) / n,
                       idleness_term=math.fsum(c.idleness for c in costs) / n, samples=totals)
    if check_tail:
        tol = cc.tail_tol if cc.tail_tol is not None else TAIL_REL * abs(mean)
        if bound > tol:
            raise HorizonTooShort(f"mean tail bound {bound:.3e} exceeds tolerance {tol:.3e}")
    return est


COST_COLUMNS = ("r", "policy", "reps", "mean", "se", "holding_term", "idleness_term", "truncation_bound")


def write_cost_csv(path, rows) -> None:
    """``rows``: iterable of ``(r, policy_name, CostEstimate)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COST_COLUMNS)
        for r, name, est in rows:
            w.writerow([f"{r:.17g}", name, est.replications, f"{est.mean:.17g}", f"{est.std_error:.17g}",
                        f"{est.holding_term:.17g}", f"{est.idleness_term:.17g}", f"{est.truncation_bound:.17g}"])
