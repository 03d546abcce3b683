"""Experiment configuration: YAML documents, environment overrides, validation.

Matrices are row-major nested lists and distributions are mappings
``{family, mean, sd}``.  Any key can be overridden from the environment
with ``BCPLAB_<SECTION>__<KEY>=value`` (values parsed as YAML), e.g.
``BCPLAB_COST__GAMMA=2``.
"""
from __future__ import annotations

import copy
import hashlib
import os
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
import yaml

from .cost import CostConfig
from .errors import ConfigError
from .network import Network, NetworkTopology, validate_topology
from .policy import Policy, make_policy
from .primitives import DistributionSpec

ENV_PREFIX = "BCPLAB_"
MODES = ("analyze", "simulate", "cost", "bound", "validate")
SIGMA_CONVENTIONS = ("classical", "literal")


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    network: Network
    policy: Policy
    policy_spec: Dict[str, Any]
    r_list: List[float]
    replications: int
    cost: Optional[CostConfig]
    base_seed: int
    seed_blocks: int
    output: str
    sigma_convention: str
    mode: str
    workload: Any
    simulate_horizon: float
    slack_ses: float
    raw: Dict[str, Any]

    def digest(self) -> str:
        return config_digest(self.raw)


def dump_config(raw: Dict[str, Any]) -> str:
    return yaml.safe_dump(raw, sort_keys=True, default_flow_style=None)


def config_digest(raw: Dict[str, Any]) -> str:
    return hashlib.sha256(dump_config(raw).encode()).hexdigest()


def apply_env_overrides(raw: Dict[str, Any], environ=None) -> Dict[str, Any]:
    environ = os.environ if environ is None else environ
    out = copy.deepcopy(raw)
    for key, value in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        path = [p.lower() for p in key[len(ENV_PREFIX):].split("__") if p]
        if not path:
            continue
        node = out
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                node[part] = {}
            node = node[part]
        node[path[-1]] = yaml.safe_load(value)
    return out


def read_config(path, environ=None) -> Dict[str, Any]:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at the top level")
    return apply_env_overrides(raw, environ)


def _get(d, dotted, required=True, default=None):
    node = d
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node or node[part] is None:
            if required:
                raise ConfigError(f"{dotted} required")
            return default
        node = node[part]
    return node


def _array(d, dotted, ndim, required=True, default=None):
    val = _get(d, dotted, required, default)
    if val is None:
        return None
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{dotted} must be numeric") from exc
    if arr.ndim != ndim:
        raise ConfigError(f"{dotted} must be a {ndim}-d array")
    return arr


def _law(spec, key):
    if not isinstance(spec, dict):
        raise ConfigError(f"{key} must be a mapping with family, mean and optional sd")
    try:
        return DistributionSpec(spec.get("family"), spec.get("mean"), spec.get("sd"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from exc


def parse_network(raw) -> Network:
    net = _get(raw, "network")
    C = _array(raw, "network.C", 2)
    A = _array(raw, "network.A", 2)
    routing = _array(raw, "network.routing", 2)
    n_exo = int(_get(raw, "network.num_exogenous"))
    arrivals = _get(raw, "network.arrivals")
    services = _get(raw, "network.services")
    if not isinstance(arrivals, list) or not isinstance(services, list):
        raise ConfigError("network.arrivals and network.services must be lists")
    try:
        topo = NetworkTopology(C, A, routing, n_exo)
        report = validate_topology(topo)
        if not report:
            raise ConfigError("network: " + "; ".join(report.violations))
        return Network(topo, [_law(s, f"network.arrivals[{i}]") for i, s in enumerate(arrivals)],
                       [_law(s, f"network.services[{j}]") for j, s in enumerate(services)],
                       theta1=_array(raw, "network.theta1", 1, False), theta2=_array(raw, "network.theta2", 1, False),
                       q0=_array(raw, "network.q0", 1, False), name=str(net.get("name", raw.get("name", ""))))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"network: {exc}") from exc


def parse_cost(raw) -> Optional[CostConfig]:
    if raw.get("cost") is None:
        return None
    gamma = float(_get(raw, "cost.gamma"))
    h = _array(raw, "cost.h", 1)
    p = _array(raw, "cost.p", 1)
    H = float(_get(raw, "cost.horizon_scaled"))
    tol = _get(raw, "cost.tail_tol", required=False)
    try:
        return CostConfig(gamma, h, p, H, None if tol is None else float(tol))
    except ValueError as exc:
        raise ConfigError(f"cost: {exc}") from exc


def parse_config(raw: Dict[str, Any], mode: Optional[str] = None) -> ExperimentConfig:
    raw = copy.deepcopy(raw)
    if mode is not None:
        raw["mode"] = mode
    m = raw.get("mode", "analyze")
    if m not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {m!r}")
    network = parse_network(raw)
    pspec = _get(raw, "policy", required=m in ("simulate", "cost", "bound", "validate"), default=None)
    policy = None
    if pspec is not None:
        if not isinstance(pspec, dict) or "name" not in pspec:
            raise ConfigError("policy.name required")
        try:
            policy = make_policy(pspec)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"policy: {exc}") from exc
    r_list = [float(x) for x in _get(raw, "r_list", required=m != "analyze", default=[])]
    if any(r <= 0 for r in r_list) or any(b <= a for a, b in zip(r_list, r_list[1:])):
        raise ConfigError("r_list must be strictly increasing and positive")
    reps = int(_get(raw, "replications", required=m in ("cost", "bound", "validate"), default=2))
    if reps < 2:
        raise ConfigError("replications must be at least 2")
    cost = parse_cost(raw)
    if cost is None and m in ("cost", "bound"):
        raise ConfigError("cost required")
    if m == "bound" and len(r_list) < 2:
        raise ConfigError("r_list needs at least two values in bound mode")
    sigma = raw.get("sigma_convention", "classical")
    if sigma not in SIGMA_CONVENTIONS:
        raise ConfigError(f"sigma_convention must be one of {SIGMA_CONVENTIONS}")
    seeds = raw.get("seeds") or {}
    return ExperimentConfig(
        name=str(raw.get("name", network.name)), network=network, policy=policy, policy_spec=pspec,
        r_list=r_list, replications=reps, cost=cost, base_seed=int(seeds.get("base", 0)),
        seed_blocks=int(seeds.get("blocks", 1)), output=str(raw.get("output", "out")),
        sigma_convention=sigma, mode=m, workload=raw.get("workload", "auto"),
        simulate_horizon=float(_get(raw, "simulate.horizon_scaled", required=False, default=1.0)),
        slack_ses=float(_get(raw, "bound.slack_ses", required=False, default=3.0)), raw=raw)


def load_config(path, mode: Optional[str] = None, environ=None) -> ExperimentConfig:
    return parse_config(read_config(path, environ), mode)
