"""Heavy-traffic structure of the two reference networks.

Solves the allocation LP, builds the workload matrix and evaluates the
effective holding cost.  Everything here is exact arithmetic on small
matrices, so the printed numbers are the hand values.
"""
# %%
import numpy as np

from bcplab.instances import n1, n2
from bcplab.workload import build_workload, effective_cost, lift

np.set_printoptions(precision=4, suppress=True)

# %% N1: one class, one server, arrivals and services at rate 1
htd = n1().analyze()
print("N1 x* =", htd.x_star, " rho* =", htd.rho_star)
print("N1 Sigma =", htd.Sigma)

# %% N2: two classes share a server; class rates alpha=(1, .5), beta=(2, 1)
htd = n2().analyze()
wd = build_workload(htd)
print("N2 x* =", htd.x_star, " R =\n", htd.R)
print("Lambda =", wd.Lambda, " G =", wd.G)

# %% The effective cost: cheapest queue configuration carrying workload w.
# Holding cost h=(1, 3) per job; per unit of workload buffer 1 costs 1/.5 = 2
# and buffer 2 costs 3/1 = 3, so all workload sits in buffer 1.
h = np.array([1.0, 3.0])
for w in (0.5, 1.0, 2.0):
    print(f"w={w}: hhat={effective_cost(wd, h, [w]):.4f}, minimiser q={lift(wd, h, [w])}")

# %% Any other configuration with the same workload costs more
q = np.array([1.0, 1.0])
print("h.q =", h @ q, ">= hhat(Lambda q) =", effective_cost(wd, h, wd.Lambda @ q))
