"""Fluid and diffusion scalings of a trajectory, the free process, and the time change.

Everything is evaluated exactly from the event log: counts are piecewise
constant and cumulative allocations piecewise linear between events, so no
interpolation is involved.  Grid times are scaled (unscaled time is
``r**2 * t``).  J-indexed outputs are in the network's original activity
order.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import BcpLabError, GridOutOfRange, NotMonotone
from .network import HeavyTrafficData
from .simulator import Trajectory
from .workload import WorkloadData, build_workload

GRID_POINTS = 1000
MONO_TOL = 1e-9


def _original_order(htd: HeavyTrafficData):
    """x*, K and perm mapped back to the original activity labels."""
    J = htd.perm.size
    x = np.zeros(J)
    x[htd.perm] = htd.x_star
    K = np.zeros_like(htd.K_mat)
    K[:, htd.perm] = htd.K_mat
    return x, K


@dataclass(frozen=True, eq=False)
class ScaledTrajectory:
    """Scaled processes of one trajectory on a grid of scaled times.

    Fluid: ``Qbar, Ibar, Tbar, Ebar, Sbar`` (completions, ``S(T)``) and
    ``Phibar`` (routed counts).  Diffusion: ``Ehat``, ``Shat`` (service
    process at the busy time), ``Phihat`` (I x J per point), ``Qhat``,
    ``What``, ``Yhat``, ``Uhat`` and the free process ``Xhat``.  ``drift``
    is ``theta1^r t - (C - P') diag(theta2^r) Tbar``.
    """

    r: float
    grid: np.ndarray
    Qbar: np.ndarray
    Ibar: np.ndarray
    Tbar: np.ndarray
    Ebar: np.ndarray
    Sbar: np.ndarray
    Phibar: np.ndarray
    Ehat: np.ndarray
    Shat: np.ndarray
    Phihat: np.ndarray
    Qhat: np.ndarray
    What: Optional[np.ndarray]
    Yhat: np.ndarray
    Uhat: np.ndarray
    Xhat: np.ndarray
    drift: np.ndarray
    qhat0: np.ndarray
    counts_plus_one: np.ndarray
    trajectory: Trajectory = field(repr=False)
    analysis: HeavyTrafficData = field(repr=False)
    workload: Optional[WorkloadData] = field(repr=False, default=None)

    def at(self, grid) -> "ScaledTrajectory":
        return scale(self.trajectory, grid, self.analysis, self.workload)

    # identities ---------------------------------------------------------
    def queue_identity_residual(self) -> float:
        """max |Qhat - (qhat + Xhat + drift + R Yhat)|."""
        t = self.trajectory.topology
        R = (t.C - t.P) @ np.diag(self.trajectory.network.params.beta)
        rhs = self.qhat0 + self.Xhat + self.drift + self.Yhat @ R.T
        return float(np.abs(self.Qhat - rhs).max(initial=0.0))

    def control_identity_residual(self) -> float:
        """max |Uhat - K Yhat| with Uhat built from idleness and nonbasic busy time."""
        _, K = _original_order(self.analysis)
        return float(np.abs(self.Uhat - self.Yhat @ K.T).max(initial=0.0))

    def workload_identity_residual(self) -> float:
        """max |What - (Lambda qhat + Lambda Xhat + Lambda drift + G Uhat)|."""
        if self.What is None:
            raise ValueError("no workload matrix attached")
        L, G = self.workload.Lambda, self.workload.G
        rhs = (L @ self.qhat0) + (self.Xhat + self.drift) @ L.T + self.Uhat @ G.T
        return float(np.abs(self.What - rhs).max(initial=0.0))

    def to_csv(self, path) -> None:
        cols = [("time", self.grid[:, None])]
        for name in ("Qhat", "What", "Uhat", "Xhat", "Yhat", "Ehat", "Shat", "Qbar", "Tbar", "Ibar"):
            arr = getattr(self, name)
            if arr is not None:
                cols.append((name, arr))
        header, blocks = [], []
        for name, arr in cols:
            header += [name] if name == "time" else [f"{name}_{k + 1}" for k in range(arr.shape[1])]
            blocks.append(arr)
        data = np.hstack(blocks)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in data:
                w.writerow([f"{x:.17g}" for x in row])


def default_grid(traj: Trajectory) -> np.ndarray:
    """Scaled event times together with a uniform grid on [0, horizon_scaled]."""
    H = traj.horizon_scaled
    ev = traj.times / traj.r ** 2
    return np.union1d(ev[ev <= H], np.linspace(0.0, H, GRID_POINTS))


def scale(traj: Trajectory, grid=None, analysis: Optional[HeavyTrafficData] = None,
          workload: Optional[WorkloadData] = "auto") -> ScaledTrajectory:
    if analysis is None:
        analysis = traj.network.analyze()
    if isinstance(workload, str):
        try:
            workload = build_workload(analysis)
        except BcpLabError:
            workload = None
    g = default_grid(traj) if grid is None else np.atleast_1d(np.asarray(grid, dtype=float))
    H = traj.horizon_scaled
    if np.any(g < 0) or np.any(g > H * (1 + 1e-12)):
        raise GridOutOfRange(f"grid must lie in [0, {H}]")
    r = traj.r
    top = traj.topology
    params = traj.network.params
    A, C, P = top.A, top.C, top.P
    CmP = C - P

    s = r * r * g
    # search in scaled time so grid points taken from event times see the post-event state
    idx = np.searchsorted(traj.times / (r * r), g, side="right") - 1
    T = traj.T[idx] + traj.alloc[idx] * (s - traj.times[idx])[:, None]
    E = traj.E[idx].astype(float)
    S = traj.S[idx].astype(float)
    Phi = traj.Phi[idx].astype(float)
    Q = traj.Q[idx].astype(float)
    idle = s[:, None] - T @ A.T

    r2 = r * r
    alpha_r = traj.alpha_r
    beta_r = traj.beta_r
    Ehat = (E - alpha_r * s[:, None]) / r
    Shat = (S - beta_r * T) / r
    Phihat = (Phi - P[None, :, :] * S[:, None, :]) / r
    Xhat = Ehat - Shat @ CmP.T + Phihat.sum(axis=2)

    x_star, _ = _original_order(analysis)
    Yhat = (x_star * s[:, None] - T) / r
    nonbasic = analysis.perm[analysis.num_basic:]
    Uhat = np.hstack([idle, T[:, nonbasic]]) / r

    theta1_r = r * (alpha_r - params.alpha)
    theta2_r = r * (beta_r - params.beta)
    Tbar = T / r2
    drift = theta1_r * g[:, None] - (Tbar * theta2_r) @ CmP.T
    Qhat = Q / r
    What = Qhat @ workload.Lambda.T if workload is not None else None
    counts = np.hstack([E + 1, S + 1])

    return ScaledTrajectory(
        r=r, grid=g, Qbar=Q / r2, Ibar=idle / r2, Tbar=Tbar, Ebar=E / r2, Sbar=S / r2, Phibar=Phi / r2,
        Ehat=Ehat, Shat=Shat, Phihat=Phihat, Qhat=Qhat, What=What, Yhat=Yhat, Uhat=Uhat, Xhat=Xhat,
        drift=drift, qhat0=traj.q_init / r, counts_plus_one=counts, trajectory=traj, analysis=analysis,
        workload=workload)


def event_counts(traj: Trajectory, t: float) -> np.ndarray:
    """``(E_i(r^2 t) + 1, S_j(T_j(r^2 t)) + 1)`` for scaled time t."""
    if not 0 <= t <= traj.horizon_scaled * (1 + 1e-12):
        raise GridOutOfRange(f"t={t} outside [0, {traj.horizon_scaled}]")
    ell = int(np.searchsorted(traj.times / traj.r ** 2, t, side="right") - 1)
    return np.concatenate([traj.E[ell] + 1, traj.S[ell] + 1]).astype(np.int64)


@dataclass(frozen=True, eq=False)
class TimeTransform:
    """``tau(t) = t + sum_m Uhat_m(t)`` and its inverse, both piecewise linear.

    ``knots`` are scaled times where the slope of ``tau`` may change and
    ``tau_knots`` the values there.
    """

    knots: np.ndarray
    tau_knots: np.ndarray
    scaled: ScaledTrajectory = field(repr=False)

    def tau(self, t) -> np.ndarray:
        return np.interp(t, self.knots, self.tau_knots)

    def tau_inv(self, s) -> np.ndarray:
        return np.interp(s, self.tau_knots, self.knots)

    @property
    def end(self) -> float:
        return float(self.tau_knots[-1])

    def transformed(self, s_grid):
        """``(W, X, U)`` evaluated at ``tau_inv(s_grid)`` (W is None without a workload matrix)."""
        st = self.scaled.at(np.minimum(self.tau_inv(s_grid), self.scaled.trajectory.horizon_scaled))
        return st.What, st.Xhat, st.Uhat


def time_transform(st: ScaledTrajectory) -> TimeTransform:
    traj = st.trajectory
    H = traj.horizon_scaled
    ev = traj.times / traj.r ** 2
    knots = np.union1d(ev[ev <= H], [0.0, H])
    U = st.at(knots).Uhat
    if U.shape[0] > 1 and np.diff(U, axis=0).min(initial=0.0) < -MONO_TOL:
        raise NotMonotone(f"Uhat decreases by {-np.diff(U, axis=0).min():.3e}")
    tau = knots + U.sum(axis=1)
    if knots.size > 1 and not np.all(np.diff(tau) > 0):
        raise NotMonotone("tau is not strictly increasing")
    return TimeTransform(knots, tau, st)


def lipschitz_excess(tt: TimeTransform, s_grid) -> float:
    """Largest amount by which tau_inv or any transformed control moves faster than the clock."""
    s = np.sort(np.asarray(s_grid, dtype=float))
    ds = np.diff(s)
    t_inv = tt.tau_inv(s)
    _, _, U = tt.transformed(s)
    excess = np.diff(t_inv) - ds
    excess_u = np.diff(U, axis=0) - ds[:, None]
    return float(max(excess.max(initial=-np.inf), excess_u.max(initial=-np.inf)))


@dataclass(frozen=True)
class SumDiagnostics:
    """Centered partial sums of one primitive family.

    Arrays are indexed by stream (buffer, activity, or (buffer, activity)
    pair flattened buffer-major for routing).
    """

    steps: np.ndarray
    final: np.ndarray
    mean_increment: np.ndarray
    se_increment: np.ndarray
    qv_empirical: np.ndarray
    qv_predicted: np.ndarray


@dataclass(frozen=True)
class MartingaleReport:
    arrivals: SumDiagnostics
    services: SumDiagnostics
    routing: SumDiagnostics


def _summarise(increments, predicted):
    n = np.array([x.size for x in increments])
    final = np.array([x.sum() for x in increments])
    mean = np.array([x.mean() if x.size else 0.0 for x in increments])
    se = np.array([x.std(ddof=1) / np.sqrt(x.size) if x.size > 1 else 0.0 for x in increments])
    qv = np.array([np.sum(x * x) for x in increments])
    return SumDiagnostics(n, final, mean, se, qv, np.asarray(predicted, dtype=float))


def martingale_diagnostics(streams, counts, r: float) -> MartingaleReport:
    """Centered sums of interarrival, service and routing variates.

    ``counts`` is ``(m, n)``: numbers of terms per exogenous buffer and per
    activity.  Quadratic variations are compared with
    ``m (alpha^r sigma^{u,r})^2 / r^2``, ``n (beta^r sigma^{v,r})^2 / r^2`` and
    ``sum_j n_j sigma^{phi_j}_{ii} / r^2``.
    """
    m, n = counts
    m = np.atleast_1d(np.asarray(m, dtype=np.int64))
    n = np.atleast_1d(np.asarray(n, dtype=np.int64))
    I, Ip, J = streams.num_buffers, streams.num_exogenous, streams.num_activities
    if m.size != Ip or n.size != J:
        raise ValueError(f"counts must have sizes ({Ip}, {J})")

    inc_u, pred_u = [], []
    for i in range(Ip):
        law = streams.arrival_laws[i]
        a = 1.0 / law.mean
        inc_u.append((1.0 - a * streams.interarrivals(i, int(m[i]))) / r)
        pred_u.append(m[i] * (a * law.sd) ** 2 / r ** 2)
    inc_v, pred_v = [], []
    for j in range(J):
        law = streams.service_laws[j]
        b = 1.0 / law.mean
        inc_v.append((1.0 - b * streams.services(j, int(n[j]))) / r)
        pred_v.append(n[j] * (b * law.sd) ** 2 / r ** 2)
    inc_p, pred_p = [], []
    p = streams.routing[:, 1:]
    for i in range(I):
        # one martingale per buffer: the routing sums of all activities combined
        parts = []
        for j in range(J):
            dest = streams.routes(j, int(n[j]))
            parts.append(((dest == i + 1).astype(float) - p[j, i]) / r)
        inc_p.append(np.concatenate(parts) if parts else np.zeros(0))
        pred_p.append(sum(n[j] * p[j, i] * (1 - p[j, i]) for j in range(J)) / r ** 2)
    return MartingaleReport(_summarise(inc_u, pred_u), _summarise(inc_v, pred_v), _summarise(inc_p, pred_p))


def sup_abs_ehat(traj: Trajectory, t: float) -> float:
    """sup over s <= t of max_i |Ehat_i(s)|, exact over the piecewise-linear path."""
    r = traj.r
    s_end = r * r * t
    best = 0.0
    for i in range(traj.topology.num_exogenous):
        a = traj.alpha_r[i]
        ev = np.flatnonzero(traj.fired_arrivals[:, i] & (traj.times <= s_end))
        times = traj.times[ev]
        k = traj.E[ev, i].astype(float)
        # each arrival instant: value just before and just after the jump
        before = np.abs(k - 1 - a * times)
        after = np.abs(k - a * times)
        end = abs(traj.E[traj.index_at(s_end), i] - a * s_end)
        best = max(best, before.max(initial=0.0) / r, after.max(initial=0.0) / r, end / r)
    return best
