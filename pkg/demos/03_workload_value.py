"""The one-dimensional workload control problem, solved two ways.

The value function comes from a piecewise-linear ODE with matched
derivatives; a reflected Brownian motion simulation gives an independent
Monte Carlo estimate of the same number.
"""
# %%
import numpy as np

from bcplab.ewf import Ewf1D, PiecewiseLinear, cross_check, ewf_from_network, ewf_value_1d
from bcplab.instances import n2
from bcplab.workload import build_workload

# %% Linear cost, drift -1, variance 2, discount 1: the value at 0 is (sqrt5 - 1)/2
e = Ewf1D(drift=-1.0, variance=2.0, hhat=PiecewiseLinear.linear(1.0), push_cost=0.0, gamma=1.0)
print("V(0) =", ewf_value_1d(e, 0.0), " (sqrt5-1)/2 =", (np.sqrt(5) - 1) / 2)

# %% A convex cost with a kink, and a push cost at the boundary
kinked = Ewf1D(-0.5, 1.0, PiecewiseLinear([0.0, 1.0], [0.5, 2.0]), push_cost=1.0, gamma=1.0)
ws = np.linspace(0, 3, 7)
print("V on", ws, "\n ", ewf_value_1d(kinked, ws))

# %% The N2 instance: workload starts at Lambda q0 = 1.5
htd = n2().analyze()
e2 = ewf_from_network(htd, build_workload(htd), [1.0, 3.0], [0.0], 1.0)
print("N2 drift, variance:", e2.drift, e2.variance)

# %% Monte Carlo check with fewer paths than the acceptance run
cc = cross_check(e2, 1.5, paths=2000, seed=5)
print(f"ODE {cc.ode_value:.5f}  MC {cc.mc_mean:.5f} +- {cc.mc_se:.5f}  "
      f"(dt/2: {cc.mc_mean_half_dt:.5f}, Richardson {cc.richardson:.5f})")
