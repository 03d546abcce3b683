"""Command line entry point: ``bcplab {analyze,simulate,cost,bound,validate} --config PATH``."""
from __future__ import annotations

import argparse
import json
import os
import platform
import sys
from typing import List, Optional

import numpy as np

from . import __version__
from .config import MODES, ExperimentConfig, config_digest, dump_config, parse_config, read_config
from .cost import write_cost_csv
from .errors import BcpLabError, BoundViolated, ConfigError
from .experiments import bound_experiment, cost_block, free_process_samples, sup_fluid_queue
from .primitives import replication_seed
from .scaling import martingale_diagnostics, scale
from .simulator import simulate
from .workload import build_workload, effective_cost


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_to_plain)


def _to_plain(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    raise TypeError(f"cannot serialise {type(x).__name__}")


def _write(out_dir, name, text) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return name


def run_analyze(cfg: ExperimentConfig, out_dir: str) -> List[str]:
    htd = cfg.network.analyze(cfg.sigma_convention)
    x = np.zeros(htd.perm.size)
    x[htd.perm] = htd.x_star
    table = {"x_star": x, "rho_star": htd.rho_star, "basic_activities": np.sort(htd.basic_set),
             "R": htd.R, "K": htd.K_mat, "activity_order": htd.perm, "theta": htd.theta, "Sigma": htd.Sigma,
             "sigma_convention": htd.sigma_convention}
    wd = build_workload(htd, cfg.workload)
    table.update(Lambda=wd.Lambda, G=wd.G, lower_norm_c=wd.lower_norm_c)
    if cfg.cost is not None and wd.dim == 1:
        table["hhat_slope"] = effective_cost(wd, cfg.cost.h, [1.0])
    for key in ("x_star", "Lambda", "G", "hhat_slope"):
        if key in table:
            print(f"{key:>12}: {np.array2string(np.asarray(table[key]), precision=6)}")
    return [_write(out_dir, "analysis.json", _json(table))]


def run_simulate(cfg: ExperimentConfig, out_dir: str) -> List[str]:
    files = []
    htd = cfg.network.analyze(cfg.sigma_convention)
    for r in cfg.r_list:
        traj = simulate(cfg.network, cfg.policy, r, cfg.simulate_horizon, cfg.base_seed)
        tag = f"r{r:g}"
        traj.to_csv(os.path.join(out_dir, f"events_{tag}.csv"))
        scale(traj, None, htd).to_csv(os.path.join(out_dir, f"scaled_{tag}.csv"))
        files += [f"events_{tag}.csv", f"scaled_{tag}.csv"]
        print(f"r={r:g}: {traj.num_records} records, final Q={traj.Q[-1].tolist()}")
    return files


def run_cost(cfg: ExperimentConfig, out_dir: str) -> List[str]:
    htd = cfg.network.analyze(cfg.sigma_convention)
    rows = []
    for r in cfg.r_list:
        est = cost_block(cfg.network, cfg.policy, r, cfg.cost, cfg.replications, cfg.base_seed, htd)
        rows.append((r, cfg.policy.name, est))
        print(f"r={r:g}: mean {est.mean:.6f} se {est.std_error:.6f}")
    write_cost_csv(os.path.join(out_dir, "cost.csv"), rows)
    return ["cost.csv"]


def run_bound(cfg: ExperimentConfig, out_dir: str) -> List[str]:
    try:
        ex = bound_experiment(cfg.network, cfg.policy, cfg.cost, cfg.r_list, cfg.replications, cfg.seed_blocks,
                              cfg.base_seed, cfg.workload, cfg.slack_ses)
    except BoundViolated as exc:
        _write(out_dir, "bound.json", _json(exc.report.__dict__))
        raise
    print(f"w = {ex.w:.6g}, bound = {ex.bound:.6f}")
    for row in ex.report.per_r:
        print(f"r={row['r']:g}: mean {row['mean']:.6f} se {row['se']:.6f} gap {row['gap']:.6f}")
    return [_write(out_dir, "bound.json", _json(ex.payload()))]


def run_validate(cfg: ExperimentConfig, out_dir: str) -> List[str]:
    net, pol = cfg.network, cfg.policy
    htd = net.analyze(cfg.sigma_convention)
    result = {"lln": [], "fclt": None, "martingale": None}
    for r in cfg.r_list:
        sups = sup_fluid_queue(net, pol, r, cfg.replications, cfg.base_seed)
        result["lln"].append({"r": r, "median_sup_Qbar": float(np.median(sups))})
    r_top = cfg.r_list[-1]
    X = free_process_samples(net, pol, r_top, cfg.replications, cfg.base_seed, analysis=htd)
    cov = np.atleast_2d(np.cov(X, rowvar=False))
    result["fclt"] = {"r": r_top, "empirical_cov": cov, "Sigma": htd.Sigma,
                      "max_rel_err_diag": float(np.max(np.abs(np.diag(cov) / np.diag(htd.Sigma) - 1)))}
    r0 = cfg.r_list[0]
    traj = simulate(net, pol, r0, 1.0, replication_seed(cfg.base_seed, 0))
    rep = martingale_diagnostics(traj.streams, (traj.E[-1, : net.topology.num_exogenous], traj.S[-1]), r0)
    result["martingale"] = {
        name: {"steps": d.steps, "mean_increment": d.mean_increment, "se_increment": d.se_increment,
               "qv_empirical": d.qv_empirical, "qv_predicted": d.qv_predicted}
        for name, d in (("arrivals", rep.arrivals), ("services", rep.services), ("routing", rep.routing))}
    for row in result["lln"]:
        print(f"r={row['r']:g}: median sup |Qbar| = {row['median_sup_Qbar']:.4f}")
    print(f"FCLT r={r_top:g}: max relative error of Var(Xhat(1)) = {result['fclt']['max_rel_err_diag']:.3f}")
    return [_write(out_dir, "validate.json", _json(result))]


RUNNERS = {"analyze": run_analyze, "simulate": run_simulate, "cost": run_cost, "bound": run_bound,
           "validate": run_validate}


def _manifest(cfg: ExperimentConfig, files: List[str]) -> str:
    import numba
    return _json({
        "mode": cfg.mode, "config": cfg.raw, "config_sha256": config_digest(cfg.raw),
        "seeds": {"base": cfg.base_seed, "blocks": cfg.seed_blocks},
        "versions": {"bcplab": __version__, "numpy": np.__version__, "numba": numba.__version__,
                     "python": platform.python_version()},
        "outputs": sorted(files),
    })


def run(config_path: str, mode: Optional[str] = None, out: Optional[str] = None, seed: Optional[int] = None,
        reps: Optional[int] = None, r_list: Optional[List[float]] = None, environ=None) -> int:
    """Execute one mode; return the process exit status."""
    raw = read_config(config_path, environ)
    if seed is not None:
        raw.setdefault("seeds", {})
        raw["seeds"] = dict(raw["seeds"] or {}, base=int(seed))
    if reps is not None:
        raw["replications"] = int(reps)
    if r_list is not None:
        raw["r_list"] = [float(r) for r in r_list]
    if out is not None:
        raw["output"] = out
    cfg = parse_config(raw, mode)
    os.makedirs(cfg.output, exist_ok=True)
    _write(cfg.output, "config.resolved.yaml", dump_config(cfg.raw))
    try:
        files = RUNNERS[cfg.mode](cfg, cfg.output)
        status = 0
    except BoundViolated as exc:
        print(f"bound violated: {exc}", file=sys.stderr)
        files, status = ["bound.json"], 2
    _write(cfg.output, "manifest.json", _manifest(cfg, files + ["config.resolved.yaml"]))
    return status


def _r_list(text: str) -> List[float]:
    try:
        return [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--r expects a comma-separated list of numbers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bcplab", description="Heavy-traffic network experiments.")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, metavar="PATH")
    ap.add_argument("--out", metavar="DIR")
    ap.add_argument("--seed", type=int, metavar="N")
    ap.add_argument("--reps", type=int, metavar="N")
    ap.add_argument("--r", type=_r_list, metavar="LIST", dest="r_list", help="e.g. 10,20,40")
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args.config, args.mode, args.out, args.seed, args.reps, args.r_list)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except BcpLabError as exc:
        print(f"{args.mode} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
