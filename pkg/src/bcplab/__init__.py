"""Heavy-traffic analysis, simulation and lower-bound checks for unitary processing networks."""

__version__ = "0.1.0"

from .errors import BcpLabError  # noqa: E402
from .network import Network, NetworkTopology, heavy_traffic_analysis  # noqa: E402
from .policy import builtin_policies, decide  # noqa: E402
from .simulator import simulate  # noqa: E402
from .workload import build_workload, effective_cost  # noqa: E402

__all__ = ["BcpLabError", "Network", "NetworkTopology", "heavy_traffic_analysis", "builtin_policies",
           "decide", "simulate", "build_workload", "effective_cost", "__version__"]
