"""The two reference networks used throughout the tests and demos.

N1 is a single-class single-server queue.  N2 is two classes sharing one
server with no rerouting.
"""
import numpy as np

from .network import Network, NetworkTopology
from .primitives import DistributionSpec


def _law(family, mean, cv):
    if family == "exponential":
        return DistributionSpec("exponential", mean)
    if family == "deterministic":
        return DistributionSpec("deterministic", mean)
    return DistributionSpec(family, mean, cv * mean)


def n1(alpha=1.0, beta=1.0, theta1=0.0, theta2=0.0, q0=1.0, family="exponential", cv=1.0,
       arrival_family=None, service_family=None):
    topo = NetworkTopology(C=[[1]], A=[[1]], routing=[[1.0, 0.0]], num_exogenous=1)
    return Network(topo,
                   arrivals=[_law(arrival_family or family, 1.0 / alpha, cv)],
                   services=[_law(service_family or family, 1.0 / beta, cv)],
                   theta1=[theta1], theta2=[theta2], q0=[q0], name="N1")


def n2(alpha=(1.0, 0.5), beta=(2.0, 1.0), theta1=(0.0, 0.0), theta2=(0.0, 0.0), q0=(1.0, 1.0),
       family="exponential", cv=1.0):
    topo = NetworkTopology(C=np.eye(2), A=[[1, 1]], routing=[[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]],
                           num_exogenous=2)
    return Network(topo,
                   arrivals=[_law(family, 1.0 / a, cv) for a in alpha],
                   services=[_law(family, 1.0 / b, cv) for b in beta],
                   theta1=theta1, theta2=theta2, q0=q0, name="N2")
