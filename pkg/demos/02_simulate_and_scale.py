"""Simulating N2 under the c-mu priority rule and looking at the scaled paths.

The scaled queue should shrink like 1/r in fluid scale while the
diffusion-scaled identities hold to rounding on every path.
"""
# %%
import numpy as np

from bcplab.experiments import sup_fluid_queue
from bcplab.instances import n2
from bcplab.policy import c_mu_ranking, static_priority
from bcplab.scaling import lipschitz_excess, scale, time_transform
from bcplab.simulator import simulate

net = n2()
policy = static_priority(c_mu_ranking([1.0, 3.0], [2.0, 1.0]))
print(policy)

# %% One path at r = 10 over one unit of scaled time (r^2 = 100 time units)
traj = simulate(net, policy, 10.0, 1.0, seed=1)
print(traj.num_records, "event records; final queue", traj.Q[-1])

st = scale(traj)
print("queue identity residual   ", st.queue_identity_residual())
print("control identity residual ", st.control_identity_residual())
print("workload identity residual", st.workload_identity_residual())

# %% Time transformation: stretching the clock by the cumulative control
tt = time_transform(st)
print("tau(1) =", tt.end, " Lipschitz excess:", lipschitz_excess(tt, tt.tau_knots))

# %% Fluid scale: the largest scaled queue over [0, 1] shrinks with r
for r in (5.0, 10.0, 20.0, 40.0):
    sups = sup_fluid_queue(net, policy, r, 50, base_seed=2)
    print(f"r={r:>4g}: median sup Qbar = {np.median(sups):.4f}")
