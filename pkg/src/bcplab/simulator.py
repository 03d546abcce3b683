"""Event-driven simulation of a unitary network under an admissible policy.

Service is preemptive-resume: an inactive activity's residual clock is
frozen.  Simultaneous events are handled in one batch (arrivals by buffer
index, then completions by activity index) before a single policy decision.
Times are unscaled; ``horizon_scaled`` is multiplied by ``r**2``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernel
from .errors import NegativeQueue
from .network import Network, NetworkTopology
from .policy import History, Policy, activity_table, decide
from .primitives import PrimitiveStreams


def tie_tol(t: float) -> float:
    return 1e-12 * max(1.0, abs(t))


@dataclass
class SimState:
    """Mutable state between events.

    Active service clocks are kept as absolute completion times
    (``svc_abs``), inactive ones as remaining work (``svc_rem``); arrival
    clocks are absolute times.
    """

    time: float
    Q: np.ndarray
    T: np.ndarray
    E: np.ndarray
    S: np.ndarray
    Phi: np.ndarray
    arr_abs: np.ndarray
    svc_abs: np.ndarray
    svc_rem: np.ndarray
    alloc: np.ndarray
    buffer_of: np.ndarray

    @classmethod
    def initial(cls, topology: NetworkTopology, q, u0, v0) -> "SimState":
        I, J = topology.num_buffers, topology.num_activities
        return cls(0.0, np.array(q, dtype=np.int64), np.zeros(J), np.zeros(I, np.int64),
                   np.zeros(J, np.int64), np.zeros((I, J), np.int64),
                   np.array(u0, dtype=float), np.full(J, np.inf), np.array(v0, dtype=float),
                   np.zeros(J, np.int8), topology.buffer_of.astype(np.int64))

    @property
    def residual_u(self) -> np.ndarray:
        return self.arr_abs - self.time

    @property
    def residual_v(self) -> np.ndarray:
        return np.where(self.alloc == 1, self.svc_abs - self.time, self.svc_rem)

    def set_allocation(self, a) -> None:
        a = np.asarray(a, dtype=np.int8)
        for j in range(a.size):
            if a[j] == 1 and self.alloc[j] == 0:
                self.svc_abs[j] = self.time + self.svc_rem[j]
            elif a[j] == 0 and self.alloc[j] == 1:
                self.svc_rem[j] = self.svc_abs[j] - self.time
        self.alloc = a.copy()


@dataclass(frozen=True)
class EventSet:
    dt: float
    time: float
    arrivals: np.ndarray
    completions: np.ndarray


def next_event(state: SimState, allocation=None) -> EventSet:
    """Time to the next event under ``allocation`` and which clocks fire."""
    a = state.alloc if allocation is None else np.asarray(allocation, dtype=np.int8)
    svc = np.where(state.alloc == 1, state.svc_abs, state.time + state.svc_rem)
    svc = np.where(a == 1, svc, np.inf)
    t_next = min(state.arr_abs.min(initial=np.inf), svc.min(initial=np.inf))
    if t_next == np.inf:
        return EventSet(np.inf, np.inf, np.zeros(state.arr_abs.size, bool), np.zeros(a.size, bool))
    tol = tie_tol(t_next)
    return EventSet(t_next - state.time, t_next, state.arr_abs <= t_next + tol, (a == 1) & (svc <= t_next + tol))


def apply_event(state: SimState, ev: EventSet, streams: PrimitiveStreams) -> SimState:
    """Advance ``state`` to ``ev.time`` and process the fired events in place."""
    a = state.alloc
    for j in range(a.size):
        if a[j] == 1:
            state.T[j] = state.T[j] + ev.dt
    state.time = ev.time
    for i in np.flatnonzero(ev.arrivals):
        state.E[i] += 1
        state.Q[i] += 1
        state.arr_abs[i] = state.arr_abs[i] + streams.interarrivals(i, state.E[i] + 1)[state.E[i]]
    for j in np.flatnonzero(ev.completions):
        n = state.S[j]
        dest = int(streams.routes(j, n + 1)[n])
        state.S[j] += 1
        b = state.buffer_of[j]
        state.Q[b] -= 1
        if state.Q[b] < 0:
            raise NegativeQueue(f"buffer {b} went negative at t={state.time}")
        if dest > 0:
            state.Q[dest - 1] += 1
            state.Phi[dest - 1, j] += 1
        state.svc_abs[j] = state.time + streams.services(j, state.S[j] + 1)[state.S[j]]
    return state


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Event log of one run.

    Row ``ell`` holds the state right after the events at ``times[ell]``
    were processed, the residual clocks at that epoch, the allocation used
    on ``[times[ell], times[ell+1])`` and which clocks fired at ``times[ell]``.
    """

    topology: NetworkTopology
    r: float
    q_init: np.ndarray
    horizon_scaled: float
    alpha_r: np.ndarray
    beta_r: np.ndarray
    seed: int
    policy: str
    deadlocked: bool
    times: np.ndarray
    Q: np.ndarray
    T: np.ndarray
    E: np.ndarray
    S: np.ndarray
    Phi: np.ndarray
    alloc: np.ndarray
    residual_u: np.ndarray
    residual_v: np.ndarray
    fired_arrivals: np.ndarray
    fired_completions: np.ndarray
    network: Optional[Network] = field(default=None, repr=False)
    streams: Optional[PrimitiveStreams] = field(default=None, repr=False)

    @property
    def horizon(self) -> float:
        return self.r ** 2 * self.horizon_scaled

    @property
    def num_records(self) -> int:
        return self.times.size

    @property
    def idle(self) -> np.ndarray:
        return self.times[:, None] - self.T @ self.topology.A.T

    def index_at(self, t) -> np.ndarray:
        """Index of the record in force at unscaled time(s) t."""
        return np.searchsorted(self.times, t, side="right") - 1

    def T_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        idx = self.index_at(t)
        return self.T[idx] + self.alloc[idx] * (t - self.times[idx])[..., None]

    def kinds(self):
        """Per record, a list of ``(kind, index)`` for the events fired there."""
        out = []
        for ell in range(self.num_records):
            ev = [("arrival", int(i)) for i in np.flatnonzero(self.fired_arrivals[ell])]
            ev += [("completion", int(j)) for j in np.flatnonzero(self.fired_completions[ell])]
            out.append(ev if ell else [("init", -1)])
        return out

    def to_csv(self, path) -> None:
        I, J = self.Q.shape[1], self.T.shape[1]
        K = self.topology.num_servers
        idle = self.idle
        header = (["ell", "time", "kind", "index"] + [f"Q_{i + 1}" for i in range(I)]
                  + [f"T_{j + 1}" for j in range(J)] + [f"I_{k + 1}" for k in range(K)])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for ell, events in enumerate(self.kinds()):
                state = ([str(int(x)) for x in self.Q[ell]] + [f"{x:.17g}" for x in self.T[ell]]
                         + [f"{x:.17g}" for x in idle[ell]])
                for kind, idx in events:
                    w.writerow([ell, f"{self.times[ell]:.17g}", kind, idx] + state)


def state_equation_residual(traj: Trajectory) -> int:
    """max |Q - (q + E - C S + sum_j Phi^j)| over all records (integers)."""
    C = traj.topology.C.astype(np.int64)
    direct = traj.q_init[None, :] + traj.E - traj.S @ C.T + traj.Phi.sum(axis=2)
    return int(np.abs(traj.Q - direct).max(initial=0))


def _check(traj: Trajectory) -> Trajectory:
    if np.any(traj.Q < 0):
        raise NegativeQueue("negative queue length in trajectory")
    if state_equation_residual(traj) != 0:
        raise NegativeQueue("queue state disagrees with the count representation")
    return traj


def _python_engine(network, policy, r, H, streams, q):
    t = network.topology
    Ip, J = t.num_exogenous, t.num_activities
    u0 = np.array([streams.interarrivals(i, 1)[0] for i in range(Ip)])
    v0 = np.array([streams.services(j, 1)[0] for j in range(J)])
    st = SimState.initial(t, q, u0, v0)
    hist = History(t)
    policy.bind(t)
    rows = {k: [] for k in ("times", "Q", "T", "E", "S", "Phi", "alloc", "ru", "rv", "fa", "fc")}
    fa = np.zeros(Ip, bool)
    fc = np.zeros(J, bool)
    deadlocked = False
    while True:
        rows["ru"].append(st.residual_u)
        rows["rv"].append(st.residual_v)
        hist.append(st.time, rows["ru"][-1], rows["rv"][-1], st.Q, st.alloc)
        a = decide(policy, hist)
        st.set_allocation(a)
        for key, val in (("times", st.time), ("Q", st.Q.copy()), ("T", st.T.copy()), ("E", st.E.copy()),
                         ("S", st.S.copy()), ("Phi", st.Phi.copy()), ("alloc", a), ("fa", fa), ("fc", fc)):
            rows[key].append(val)
        ev = next_event(st)
        if ev.time == np.inf:
            deadlocked = True
            break
        if ev.time > H:
            break
        apply_event(st, ev, streams)
        fa, fc = ev.arrivals.copy(), ev.completions.copy()
    I = t.num_buffers
    return dict(
        times=np.array(rows["times"]), Q=np.array(rows["Q"]).reshape(-1, I), T=np.array(rows["T"]).reshape(-1, J),
        E=np.array(rows["E"]).reshape(-1, I), S=np.array(rows["S"]).reshape(-1, J),
        Phi=np.array(rows["Phi"]).reshape(-1, I, J), alloc=np.array(rows["alloc"]).reshape(-1, J),
        residual_u=np.array(rows["ru"]).reshape(-1, Ip), residual_v=np.array(rows["rv"]).reshape(-1, J),
        fired_arrivals=np.array(rows["fa"]).reshape(-1, Ip), fired_completions=np.array(rows["fc"]).reshape(-1, J),
    ), deadlocked


def _padded(rows):
    n = max((x.size for x in rows), default=0)
    out = np.zeros((len(rows), max(n, 1)), dtype=rows[0].dtype if rows else float)
    for k, x in enumerate(rows):
        out[k, : x.size] = x
    return out


def _compiled_engine(network, policy, r, H, streams, q, order, levels):
    t = network.topology
    I, Ip, J = t.num_buffers, t.num_exogenous, t.num_activities
    table = activity_table(t)
    alpha_r, beta_r = network.rates(r)
    cv_u = np.array([d.cv for d in network.arrivals])
    n_u = np.ceil(alpha_r[:Ip] * H * 1.05 + 8 * np.sqrt(alpha_r[:Ip] * H * (1 + cv_u ** 2)) + 64).astype(np.int64)
    n_v = np.ceil(beta_r * H * 1.05 + 8 * np.sqrt(beta_r * H * 2) + 64).astype(np.int64)
    while True:
        U = _padded([streams.interarrivals(i, int(n_u[i])) for i in range(Ip)])
        V = _padded([streams.services(j, int(n_v[j])) for j in range(J)])
        D = _padded([streams.routes(j, int(n_v[j])) for j in range(J)])
        cap = int(n_u.sum() + n_v.sum() + 2)
        out = dict(times=np.empty(cap), Q=np.empty((cap, I), np.int64), T=np.empty((cap, J)),
                   E=np.empty((cap, I), np.int64), S=np.empty((cap, J), np.int64),
                   Phi=np.empty((cap, I, J), np.int64), alloc=np.empty((cap, J), np.int8),
                   residual_u=np.empty((cap, Ip)), residual_v=np.empty((cap, J)),
                   fired_arrivals=np.zeros((cap, Ip), np.bool_), fired_completions=np.zeros((cap, J), np.bool_))
        n, status = _kernel.run_priority(
            q.astype(np.int64), float(H), table, order, levels, t.buffer_of.astype(np.int64),
            U, n_u, V, n_v, D, n_v,
            out["times"], out["Q"], out["T"], out["E"], out["S"], out["Phi"], out["alloc"],
            out["residual_u"], out["residual_v"], out["fired_arrivals"], out["fired_completions"])
        if status in (_kernel.EXHAUSTED, _kernel.FULL):
            n_u, n_v = 2 * n_u, 2 * n_v
            continue
        return {k: v[:n].copy() for k, v in out.items()}, status == _kernel.DEADLOCK


def simulate(network: Network, policy: Policy, r: float, horizon_scaled: float, seed: int,
             q_init=None, engine: str = "auto", streams: Optional[PrimitiveStreams] = None) -> Trajectory:
    """Simulate the r-th network up to unscaled time ``r**2 * horizon_scaled``.

    ``engine`` is ``"python"``, ``"compiled"`` (priority/threshold policies
    only) or ``"auto"``.  Both engines give identical trajectories.
    """
    if not horizon_scaled >= 0:
        raise ValueError("horizon_scaled must be nonnegative")
    if not r > 0:
        raise ValueError("r must be positive")
    t = network.topology
    q = network.initial_queue(r) if q_init is None else np.array(q_init, dtype=np.int64)
    if q.shape != (t.num_buffers,) or np.any(q < 0):
        raise ValueError("q_init must be a nonnegative integer vector, one entry per buffer")
    if streams is None:
        streams = PrimitiveStreams(network, r, seed)
    H = r ** 2 * float(horizon_scaled)
    kp = policy.kernel_params(t)
    if engine == "auto":
        engine = "compiled" if kp is not None else "python"
    if engine == "compiled":
        if kp is None:
            raise ValueError(f"policy {policy!r} has no compiled implementation")
        data, dead = _compiled_engine(network, policy, r, H, streams, q, *kp)
    elif engine == "python":
        data, dead = _python_engine(network, policy, r, H, streams, q)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    alpha_r, beta_r = network.rates(r)
    traj = Trajectory(topology=t, r=float(r), q_init=q, horizon_scaled=float(horizon_scaled),
                      alpha_r=alpha_r, beta_r=beta_r, seed=int(seed), policy=repr(policy),
                      deadlocked=bool(dead), network=network, streams=streams, **data)
    return _check(traj)
