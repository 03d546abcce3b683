"""Simulated discounted cost against the workload lower bound on N2.

The c-mu rule should approach the bound from above as r grows; inverting
the priority leaves a visibly larger gap.  Pass a replication count on the
command line to trade time for precision (the acceptance run uses 10
blocks of 400).
"""
# %%
import sys

from bcplab.cost import CostConfig
from bcplab.experiments import bound_experiment
from bcplab.instances import n2
from bcplab.policy import static_priority

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 100
cc = CostConfig(gamma=1.0, h=[1.0, 3.0], p=[0.0], horizon_scaled=16.0)
r_list = [5.0, 10.0, 20.0]

# %%
for ranking in ([1, 0], [0, 1]):
    ex = bound_experiment(n2(), static_priority(ranking), cc, r_list, reps, 1, base_seed=3,
                          raise_on_violation=False)
    print(f"priority {ranking}: bound {ex.bound:.4f}")
    for row in ex.report.per_r:
        print(f"  r={row['r']:>4g}: cost {row['mean']:.4f} +- {row['se']:.4f}, gap {row['gap']:+.4f}")
