"""Interarrival, service and routing randomness with exact replay.

Every primitive sequence lives in its own stream keyed by
``(base_seed, kind, index)``; streams are derived with
:class:`numpy.random.SeedSequence` spawn keys so distinct keys are
statistically independent and the same key always replays the same
variates.  Sequence positions ``n`` are 0-based.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import NoExogenousArrivals

FAMILIES = ("exponential", "deterministic", "uniform", "gamma")
ARRIVAL, SERVICE, ROUTING = 0, 1, 2
CHUNK = 4096


@dataclass(frozen=True)
class DistributionSpec:
    """Law of a strictly positive i.i.d. sequence, given by family, mean and SD.

    ``sd`` may be omitted for the one-parameter families (exponential,
    deterministic).  Uniform and gamma laws are re-parameterised to hit
    ``(mean, sd)`` exactly; a uniform law must stay bounded away from 0.
    """

    family: str
    mean: float
    sd: float = None

    def __post_init__(self):
        fam = str(self.family).lower()
        object.__setattr__(self, "family", fam)
        if fam not in FAMILIES:
            raise ValueError(f"unknown distribution family {self.family!r}; expected one of {FAMILIES}")
        mean = float(self.mean)
        if not mean > 0 or not math.isfinite(mean):
            raise ValueError("mean must be positive and finite")
        sd = self.sd
        if sd is None:
            if fam == "exponential":
                sd = mean
            elif fam == "deterministic":
                sd = 0.0
            else:
                raise ValueError(f"{fam} distribution needs an explicit sd")
        sd = float(sd)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "sd", sd)
        if sd < 0:
            raise ValueError("sd must be nonnegative")
        if fam == "deterministic" and sd != 0:
            raise ValueError("deterministic distribution must have sd = 0")
        if fam == "exponential" and abs(sd - mean) > 1e-12 * mean:
            raise ValueError("exponential distribution must have sd equal to its mean")
        if fam == "gamma" and sd <= 0:
            raise ValueError("gamma distribution needs sd > 0")
        if fam == "uniform" and mean - math.sqrt(3.0) * sd <= 0:
            raise ValueError("uniform distribution must be bounded away from 0 (mean > sqrt(3) sd)")

    @property
    def cv(self) -> float:
        return self.sd / self.mean

    def with_mean(self, mean: float) -> "DistributionSpec":
        """Same family and coefficient of variation, new mean."""
        return DistributionSpec(self.family, mean, self.cv * mean)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        fam, m, s = self.family, self.mean, self.sd
        if fam == "exponential":
            return rng.standard_exponential(size) * m
        if fam == "deterministic":
            return np.full(size, m)
        if fam == "uniform":
            half = math.sqrt(3.0) * s
            return rng.uniform(m - half, m + half, size)
        shape = (m / s) ** 2
        return rng.standard_gamma(shape, size) * (s * s / m)

    def to_dict(self):
        return {"family": self.family, "mean": self.mean, "sd": self.sd}


def stream_rng(base_seed: int, kind: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(kind), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


class _Stream:
    """Lazily extended cache of one primitive sequence."""

    def __init__(self, rng, sampler):
        self._rng = rng
        self._sampler = sampler
        self.values = np.zeros(0)

    def ensure(self, count: int) -> np.ndarray:
        if self.values.size < count:
            n_chunks = -(-(count - self.values.size) // CHUNK)
            new = [self._sampler(self._rng, CHUNK) for _ in range(n_chunks)]
            self.values = np.concatenate([self.values] + new)
        return self.values


class PrimitiveStreams:
    """All random primitives of the r-th network for one replication.

    Parameters
    ----------
    network : object with ``topology``, ``arrival_law(i, r)``,
        ``service_law(j, r)`` (see :class:`bcplab.network.Network`).
    r : scaling parameter.
    base_seed : replication seed.
    """

    def __init__(self, network, r: float, base_seed: int):
        self.network = network
        self.r = float(r)
        self.base_seed = int(base_seed)
        t = network.topology
        self.num_buffers = t.num_buffers
        self.num_exogenous = t.num_exogenous
        self.num_activities = t.num_activities
        self.arrival_laws = [network.arrival_law(i, r) for i in range(t.num_exogenous)]
        self.service_laws = [network.service_law(j, r) for j in range(t.num_activities)]
        self.routing = np.asarray(t.routing, dtype=float)
        cum = np.cumsum(self.routing, axis=1)
        cum[:, -1] = 1.0
        self._route_cum = cum
        self._streams: Dict[Tuple[int, int], _Stream] = {}

    def _stream(self, kind: int, index: int) -> _Stream:
        key = (kind, index)
        s = self._streams.get(key)
        if s is None:
            if kind == ARRIVAL:
                sampler = self.arrival_laws[index].sample
            elif kind == SERVICE:
                sampler = self.service_laws[index].sample
            else:
                sampler = _uniform
            s = _Stream(stream_rng(self.base_seed, kind, index), sampler)
            self._streams[key] = s
        return s

    # bulk access -------------------------------------------------------
    def interarrivals(self, i: int, count: int) -> np.ndarray:
        if not 0 <= i < self.num_exogenous:
            raise NoExogenousArrivals(f"buffer {i} has no exogenous arrivals")
        return self._stream(ARRIVAL, i).ensure(count)[:count]

    def services(self, j: int, count: int) -> np.ndarray:
        return self._stream(SERVICE, j).ensure(count)[:count]

    def routes(self, j: int, count: int) -> np.ndarray:
        """Destinations of the first ``count`` jobs finished by activity j (0 = exit, i+1 = buffer i)."""
        u = self._stream(ROUTING, j).ensure(count)[:count]
        idx = np.searchsorted(self._route_cum[j], u, side="right")
        return np.minimum(idx, self.num_buffers).astype(np.int64)

    def arrival_rate(self, i: int) -> float:
        return 1.0 / self.arrival_laws[i].mean

    def service_rate(self, j: int) -> float:
        return 1.0 / self.service_laws[j].mean


def _uniform(rng, size):
    return rng.random(size)


def draw_interarrival(streams: PrimitiveStreams, i: int, n: int) -> float:
    """The n-th interarrival time of buffer i (n = 0, 1, ...)."""
    return float(streams.interarrivals(i, n + 1)[n])


def draw_service(streams: PrimitiveStreams, j: int, n: int) -> float:
    return float(streams.services(j, n + 1)[n])


def draw_routing(streams: PrimitiveStreams, j: int, n: int):
    """Destination of the n-th job completed by activity j.

    Returns ``(dest, phi)`` where ``dest`` is 0 for exit and ``i + 1`` for
    buffer i, and ``phi`` is the one-hot vector over buffers (all zeros on exit).
    """
    dest = int(streams.routes(j, n + 1)[n])
    phi = np.zeros(streams.num_buffers, dtype=np.int64)
    if dest > 0:
        phi[dest - 1] = 1
    return dest, phi


def renewal_count(partial_sums, t: float) -> int:
    """max{m >= 0 : xi(m) <= t} for partial sums (xi(1), xi(2), ...)."""
    return int(np.searchsorted(np.asarray(partial_sums, dtype=float), t, side="right"))


def replication_seed(base_seed: int, rep: int) -> int:
    """Seed of replication ``rep`` in the block started by ``base_seed``."""
    state = np.random.SeedSequence([int(base_seed), int(rep)]).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])
