"""Replicated experiments shared by the command line, the demos and the acceptance suite."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .cost import CostConfig, CostEstimate, aggregate, pathwise_cost
from .ewf import BoundReport, Ewf1D, ewf_from_network, ewf_value_1d, verify_lower_bound
from .network import HeavyTrafficData, Network
from .policy import Policy
from .primitives import replication_seed
from .scaling import scale
from .simulator import simulate
from .workload import WorkloadData, build_workload


def sup_fluid_queue(network: Network, policy: Policy, r: float, reps: int, base_seed: int,
                    t: float = 1.0) -> np.ndarray:
    """Per replication, ``sup_{s <= t} max_i Qbar_i(s)`` (exact: queues only jump at events)."""
    out = np.empty(reps)
    for k in range(reps):
        traj = simulate(network, policy, r, t, replication_seed(base_seed, k))
        out[k] = traj.Q.max() / r ** 2
    return out


def free_process_samples(network: Network, policy: Policy, r: float, reps: int, base_seed: int,
                         t: float = 1.0, analysis: Optional[HeavyTrafficData] = None) -> np.ndarray:
    """``Xhat(t)`` for each replication, shape ``(reps, I)``."""
    analysis = network.analyze() if analysis is None else analysis
    out = np.empty((reps, network.topology.num_buffers))
    for k in range(reps):
        traj = simulate(network, policy, r, t, replication_seed(base_seed, k))
        out[k] = scale(traj, [t], analysis, workload=None).Xhat[0]
    return out


def cost_block(network: Network, policy: Policy, r: float, cc: CostConfig, reps: int, base_seed: int,
               analysis: HeavyTrafficData) -> CostEstimate:
    costs = [pathwise_cost(simulate(network, policy, r, cc.horizon_scaled, replication_seed(base_seed, k)),
                           cc, analysis, check_tail=False) for k in range(reps)]
    return aggregate(costs, cc, check_tail=True)


@dataclass
class BoundExperiment:
    w: float
    bound: float
    ewf: Ewf1D
    blocks: List[Dict[float, CostEstimate]]
    pooled: Dict[float, CostEstimate]
    report: BoundReport

    @property
    def trend_fraction(self) -> float:
        """Share of blocks where the gap at the largest r is at most the gap at the smallest r."""
        r_lo, r_hi = min(self.pooled), max(self.pooled)
        hits = [b[r_hi].mean <= b[r_lo].mean for b in self.blocks]
        return sum(hits) / len(hits)

    def payload(self) -> dict:
        rs = sorted(self.pooled)
        return {
            "w": self.w, "bound": self.bound, "per_r": self.report.per_r, "trend": self.report.trend,
            "passed": self.report.passed, "trend_fraction": self.trend_fraction,
            "blocks": [[{"r": r, "mean": b[r].mean, "se": b[r].std_error, "gap": b[r].mean - self.bound}
                        for r in rs] for b in self.blocks],
        }


def pool(estimates: List[CostEstimate], cc: CostConfig) -> CostEstimate:
    samples = np.concatenate([e.samples for e in estimates])
    n = samples.size
    mean = math.fsum(samples) / n
    var = math.fsum((samples - mean) ** 2) / (n - 1)
    w = [e.replications / n for e in estimates]
    return CostEstimate(mean, math.sqrt(var / n), n,
                        math.fsum(wi * e.truncation_bound for wi, e in zip(w, estimates)),
                        math.fsum(wi * e.holding_term for wi, e in zip(w, estimates)),
                        math.fsum(wi * e.idleness_term for wi, e in zip(w, estimates)), samples)


def bound_experiment(network: Network, policy: Policy, cc: CostConfig, r_list, reps: int, blocks: int,
                     base_seed: int, Lambda="auto", slack_ses: float = 3.0,
                     raise_on_violation: bool = True) -> BoundExperiment:
    """Simulated costs per r and seed block against the workload value at ``w = Lambda q0``."""
    htd = network.analyze()
    wd: WorkloadData = build_workload(htd, Lambda)
    ewf = ewf_from_network(htd, wd, cc.h, cc.p, cc.gamma)
    w = float(wd.workload(network.q0)[0])
    bound = float(ewf_value_1d(ewf, w))
    per_block = []
    for b in range(blocks):
        seed = replication_seed(base_seed, 1_000_000 + b)
        # the same seeds for every r within a block
        per_block.append({float(r): cost_block(network, policy, r, cc, reps, seed, htd) for r in r_list})
    pooled = {float(r): pool([blk[float(r)] for blk in per_block], cc) for r in r_list}
    report = verify_lower_bound(pooled, bound, slack_ses, w=w, raise_on_violation=raise_on_violation)
    return BoundExperiment(w, bound, ewf, per_block, pooled, report)
