"""Admissible allocation policies: deterministic maps from event history to a 0/1 allocation.

A policy sees only the :class:`History` built by the simulator, so it
cannot look at future variates.  The chosen allocation is held until the
next event.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .errors import BadRanking, InfeasibleAllocation
from .network import NetworkTopology


@dataclass(frozen=True)
class EventRecord:
    """State seen by the policy at one event epoch.

    ``prev_alloc`` is the allocation used on the interval ending at ``time``
    (all zeros at the first record).
    """

    time: float
    residual_u: np.ndarray
    residual_v: np.ndarray
    queue: np.ndarray
    prev_alloc: np.ndarray


class History:
    """Append-only event history.

    Besides the records it keeps two summaries that are functions of the
    records alone: a chained blake2b digest and, per buffer, the time at
    which the buffer last became nonempty (``inf`` while empty).
    """

    def __init__(self, topology: NetworkTopology):
        self.topology = topology
        self.records: List[EventRecord] = []
        self._digest = b"\x00" * 16
        self.nonempty_since = np.full(topology.num_buffers, np.inf)

    def append(self, time, residual_u, residual_v, queue, prev_alloc) -> EventRecord:
        rec = EventRecord(float(time), np.array(residual_u, dtype=float), np.array(residual_v, dtype=float),
                          np.array(queue, dtype=np.int64), np.array(prev_alloc, dtype=np.int8))
        if self.records and not rec.time >= self.records[-1].time:
            raise ValueError("event times must be nondecreasing")
        h = hashlib.blake2b(self._digest, digest_size=16)
        for part in (np.float64(rec.time), rec.residual_u, rec.residual_v, rec.queue, rec.prev_alloc):
            h.update(np.ascontiguousarray(part).tobytes())
        self._digest = h.digest()
        busy = rec.queue > 0
        self.nonempty_since = np.where(busy, np.minimum(self.nonempty_since, rec.time), np.inf)
        self.records.append(rec)
        return rec

    def __len__(self):
        return len(self.records)

    @property
    def latest(self) -> EventRecord:
        return self.records[-1]

    @property
    def digest(self) -> bytes:
        return self._digest

    def clone(self) -> "History":
        h = History(self.topology)
        for rec in self.records:
            h.append(rec.time, rec.residual_u, rec.residual_v, rec.queue, rec.prev_alloc)
        return h


def check_allocation(a, topology: NetworkTopology, queue) -> np.ndarray:
    """Return ``a`` as an int8 vector or raise :class:`InfeasibleAllocation`."""
    a = np.asarray(a)
    J = topology.num_activities
    if a.shape != (J,):
        raise InfeasibleAllocation(f"allocation has shape {a.shape}, expected ({J},)")
    if not np.all((a == 0) | (a == 1)):
        raise InfeasibleAllocation(f"allocation {a} is not 0/1")
    a = a.astype(np.int8)
    load = topology.A @ a
    if np.any(load > 1):
        raise InfeasibleAllocation(f"server capacity exceeded: A a = {load}")
    need = topology.C @ a
    if np.any(need > np.asarray(queue)):
        raise InfeasibleAllocation(f"activities on empty buffers: C a = {need}, Q = {queue}")
    return a


class Policy:
    """Base class.  Subclasses implement :meth:`allocate`."""

    name = "policy"

    def bind(self, topology: NetworkTopology) -> None:
        """Validate parameters against a topology (called once per run)."""

    def _ensure_bound(self, topology: NetworkTopology) -> None:
        if getattr(self, "_bound_to", None) is not topology:
            self.bind(topology)
            self._bound_to = topology

    def allocate(self, history: History) -> np.ndarray:
        raise NotImplementedError

    def kernel_params(self, topology: NetworkTopology):
        """``(order, levels)`` if the compiled engine can run this policy, else None."""
        return None


def decide(policy: Policy, history: History) -> np.ndarray:
    if not len(history):
        raise ValueError("history is empty")
    a = policy.allocate(history)
    return check_allocation(a, history.topology, history.latest.queue)


def activity_table(topology: NetworkTopology) -> np.ndarray:
    """``table[i, k]`` = activity linking buffer i to server k, or -1."""
    table = np.full((topology.num_buffers, topology.num_servers), -1, dtype=np.int64)
    for j, (i, k) in enumerate(zip(topology.buffer_of, topology.server_of)):
        if table[i, k] < 0:
            table[i, k] = j
    return table


def _check_ranking(ranking, size=None) -> np.ndarray:
    arr = np.asarray(ranking)
    if arr.ndim != 1 or arr.size == 0 or not np.issubdtype(arr.dtype, np.integer):
        raise BadRanking(f"ranking {ranking!r} is not a list of buffer indices")
    if sorted(arr.tolist()) != list(range(arr.size)):
        raise BadRanking(f"ranking {ranking!r} is not a permutation of 0..{arr.size - 1}")
    if size is not None and arr.size != size:
        raise BadRanking(f"ranking has {arr.size} entries, network has {size} buffers")
    return arr.astype(np.int64)


def priority_allocation(table, order, levels, queue, num_activities) -> np.ndarray:
    """Servers in index order each take the best-ranked buffer with a spare job above its level."""
    K = table.shape[1]
    a = np.zeros(num_activities, dtype=np.int8)
    spare = np.array(queue, dtype=np.int64)
    for k in range(K):
        for i in order:
            j = table[i, k]
            if j >= 0 and queue[i] > levels[i] and spare[i] > 0:
                a[j] = 1
                spare[i] -= 1
                break
    return a


class StaticPriority(Policy):
    """Preemptive static priority; ``ranking[0]`` is the most important buffer."""

    name = "static_priority"

    def __init__(self, ranking):
        self.ranking = _check_ranking(ranking)

    def bind(self, topology):
        _check_ranking(self.ranking, topology.num_buffers)
        self._table = activity_table(topology)

    def _levels(self):
        return np.zeros(self.ranking.size, dtype=np.int64)

    def allocate(self, history):
        self._ensure_bound(history.topology)
        return priority_allocation(self._table, self.ranking, self._levels(), history.latest.queue,
                                   history.topology.num_activities)

    def kernel_params(self, topology):
        self.bind(topology)
        return self.ranking.copy(), self._levels()

    def __repr__(self):
        return f"{type(self).__name__}({self.ranking.tolist()})"


class Threshold(StaticPriority):
    """Static priority where buffer i is eligible only while ``Q_i > levels[i]``.

    ``threshold([1, 0], levels=[0, 5])`` gives buffer 1 priority and serves
    buffer 0 only when it holds more than 5 jobs.
    """

    name = "threshold"

    def __init__(self, ranking, levels):
        super().__init__(ranking)
        lv = np.atleast_1d(np.asarray(levels))
        if lv.size != self.ranking.size or np.any(lv < 0) or np.any(lv != np.floor(lv)):
            raise ValueError("levels must be nonnegative integers, one per buffer")
        self.levels = lv.astype(np.int64)

    def _levels(self):
        return self.levels.copy()

    def __repr__(self):
        return f"Threshold({self.ranking.tolist()}, levels={self.levels.tolist()})"


class LongestNonemptyFirst(Policy):
    """Each server serves the eligible buffer that has been nonempty the longest.

    Needs one activity per buffer.  Ties go to the lower buffer index.
    """

    name = "fifo_within_class_single_activity"

    def bind(self, topology):
        counts = topology.C.sum(axis=1)
        if np.any(counts != 1):
            raise ValueError("fifo_within_class_single_activity needs exactly one activity per buffer")
        self._table = activity_table(topology)

    def allocate(self, history):
        t = history.topology
        self._ensure_bound(t)
        since = history.nonempty_since
        order = np.lexsort((np.arange(since.size), since))
        order = order[np.isfinite(since[order])]
        return priority_allocation(self._table, order, np.zeros(since.size, dtype=np.int64),
                                   history.latest.queue, t.num_activities)

    def __repr__(self):
        return "LongestNonemptyFirst()"


class RandomFeasible(Policy):
    """Uniformly random feasible choice per server, seeded by the history digest.

    Servers are visited in index order; each picks uniformly among idling and
    its activities whose buffer still has an unassigned job.
    """

    name = "random_feasible"

    def __init__(self, seed: int = 0):
        self.seed = int(seed)

    def allocate(self, history):
        t = history.topology
        key = np.frombuffer(history.digest, dtype=np.uint32)
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, *key.tolist()])))
        spare = history.latest.queue.copy()
        a = np.zeros(t.num_activities, dtype=np.int8)
        for k in range(t.num_servers):
            options = [j for j in np.flatnonzero(t.A[k] > 0) if spare[t.buffer_of[j]] > 0]
            pick = int(rng.integers(len(options) + 1))
            if pick < len(options):
                j = options[pick]
                a[j] = 1
                spare[t.buffer_of[j]] -= 1
        return a

    def __repr__(self):
        return f"RandomFeasible(seed={self.seed})"


def static_priority(ranking) -> StaticPriority:
    return StaticPriority(ranking)


def threshold(ranking, levels) -> Threshold:
    return Threshold(ranking, levels)


def fifo_within_class_single_activity() -> LongestNonemptyFirst:
    return LongestNonemptyFirst()


def random_feasible(seed: int = 0) -> RandomFeasible:
    return RandomFeasible(seed)


def builtin_policies():
    return {
        "static_priority": static_priority,
        "fifo_within_class_single_activity": fifo_within_class_single_activity,
        "random_feasible": random_feasible,
        "threshold": threshold,
    }


def c_mu_ranking(h, beta_of_buffer) -> np.ndarray:
    """Buffers sorted by ``h_i * beta_i`` descending (ties by index)."""
    score = np.asarray(h, dtype=float) * np.asarray(beta_of_buffer, dtype=float)
    return np.lexsort((np.arange(score.size), -score)).astype(np.int64)


def make_policy(spec: dict) -> Policy:
    """Build a policy from ``{"name": ..., **params}``."""
    spec = dict(spec)
    name = spec.pop("name", None)
    table = builtin_policies()
    if name not in table:
        raise ValueError(f"unknown policy {name!r}; expected one of {sorted(table)}")
    return table[name](**spec)


def policy_spec(policy: Policy) -> Optional[dict]:
    """Inverse of :func:`make_policy` for the built-ins."""
    if isinstance(policy, Threshold):
        return {"name": "threshold", "ranking": policy.ranking.tolist(), "levels": policy.levels.tolist()}
    if isinstance(policy, StaticPriority):
        return {"name": "static_priority", "ranking": policy.ranking.tolist()}
    if isinstance(policy, LongestNonemptyFirst):
        return {"name": "fifo_within_class_single_activity"}
    if isinstance(policy, RandomFeasible):
        return {"name": "random_feasible", "seed": policy.seed}
    return None
