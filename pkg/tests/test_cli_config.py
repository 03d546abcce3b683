import csv
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from bcplab import cli
from bcplab.config import apply_env_overrides, dump_config, load_config, parse_config, read_config
from bcplab.errors import BoundViolated, ConfigError
from bcplab.ewf import BoundReport

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def n2_raw(**updates):
    raw = read_config(CONFIGS / "n2.yaml", environ={})
    raw.update(updates)
    return raw


def write(tmp_path, raw, name="c.yaml"):
    p = tmp_path / name
    p.write_text(dump_config(raw))
    return str(p)


def test_shipped_configs_parse():
    for name in ("n1.yaml", "n2.yaml"):
        cfg = load_config(CONFIGS / name, environ={})
        assert cfg.r_list == sorted(cfg.r_list)


def test_missing_gamma(tmp_path):
    raw = n2_raw()
    del raw["cost"]["gamma"]
    with pytest.raises(ConfigError, match="cost.gamma required"):
        parse_config(raw)
    assert cli.main(["bound", "--config", write(tmp_path, raw)]) == 3


@pytest.mark.parametrize("key, value, fragment", [
    ("r_list", [20, 10], "r_list"),
    ("replications", 1, "replications"),
    ("sigma_convention", "other", "sigma_convention"),
    ("policy", {"ranking": [0, 1]}, "policy.name"),
    ("mode", "plot", "mode"),
])
def test_invalid_keys_named(key, value, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(n2_raw(**{key: value}))


def test_network_error_has_context():
    raw = n2_raw()
    raw["network"]["routing"] = [[0.5, 0.0, 0.0], [1.0, 0.0, 0.0]]
    with pytest.raises(ConfigError, match="network"):
        parse_config(raw)


def test_round_trip():
    raw = n2_raw()
    text = dump_config(parse_config(raw).raw)
    again = parse_config(yaml.safe_load(text))
    assert dump_config(again.raw) == text
    assert again.digest() == parse_config(raw).digest()


def test_env_override():
    raw = apply_env_overrides(n2_raw(), {"BCPLAB_COST__GAMMA": "2", "BCPLAB_SEEDS__BASE": "5", "OTHER": "x"})
    cfg = parse_config(raw)
    assert cfg.cost.gamma == 2.0 and cfg.base_seed == 5


def test_r_flag_parsing():
    assert cli._r_list("10, 20,40") == [10.0, 20.0, 40.0]
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["bound", "--config", "x", "--r", "ten"])


def test_analyze_n2(tmp_path):
    out = tmp_path / "a"
    assert cli.main(["analyze", "--config", str(CONFIGS / "n2.yaml"), "--out", str(out)]) == 0
    table = json.loads((out / "analysis.json").read_text())
    assert table["x_star"] == [0.5, 0.5]
    assert table["Lambda"] == [[0.5, 1.0]]
    assert table["hhat_slope"] == 2.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["outputs"] == ["analysis.json", "config.resolved.yaml"]
    assert set(manifest["versions"]) == {"bcplab", "numpy", "numba", "python"}
    assert manifest["config"]["output"] == str(out)


def small_bound(tmp_path, name):
    raw = n2_raw(r_list=[2, 4], replications=6, seeds={"base": 11, "blocks": 2}, output=str(tmp_path / name))
    return write(tmp_path, raw, f"{name}.yaml")


def test_bound_rerun_byte_identical(tmp_path):
    assert cli.main(["bound", "--config", small_bound(tmp_path, "a")]) == 0
    assert cli.main(["bound", "--config", small_bound(tmp_path, "b")]) == 0
    a = (tmp_path / "a" / "bound.json").read_bytes()
    assert a == (tmp_path / "b" / "bound.json").read_bytes()
    payload = json.loads(a)
    assert len(payload["blocks"]) == 2 and [row["r"] for row in payload["per_r"]] == [2.0, 4.0]
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    # configs differ only in their output directory
    assert ma["seeds"] == mb["seeds"] == {"base": 11, "blocks": 2}


def test_manifest_regenerates_outputs(tmp_path):
    assert cli.main(["cost", "--config", small_bound(tmp_path, "a")]) == 0
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    raw = dict(manifest["config"], output=str(tmp_path / "again"))
    assert cli.main(["cost", "--config", write(tmp_path, raw, "again.yaml")]) == 0
    assert (tmp_path / "a" / "cost.csv").read_bytes() == (tmp_path / "again" / "cost.csv").read_bytes()


def test_flags_override_config(tmp_path):
    out = tmp_path / "f"
    assert cli.main(["cost", "--config", small_bound(tmp_path, "x"), "--out", str(out), "--seed", "3",
                     "--reps", "3", "--r", "2"]) == 0
    rows = list(csv.reader(open(out / "cost.csv")))
    assert len(rows) == 2 and rows[1][2] == "3"
    resolved = yaml.safe_load((out / "config.resolved.yaml").read_text())
    assert resolved["seeds"]["base"] == 3 and resolved["r_list"] == [2.0]


def test_simulate_csv_full_precision(tmp_path):
    raw = n2_raw(r_list=[3], output=str(tmp_path / "s"))
    assert cli.main(["simulate", "--config", write(tmp_path, raw)]) == 0
    rows = list(csv.reader(open(tmp_path / "s" / "events_r3.csv")))
    times = [float(row[1]) for row in rows[1:]]
    # 17 significant digits round-trip every double exactly
    assert all(repr(t) == repr(float(np.format_float_positional(t, unique=True))) for t in times)
    assert all(len(row[1].replace(".", "").lstrip("0")) <= 17 for row in rows[1:])
    assert (tmp_path / "s" / "scaled_r3.csv").exists()


def test_bound_violation_exit_status(tmp_path, monkeypatch):
    def violated(*args, **kwargs):
        rep = BoundReport(5.0, [{"r": 2.0, "mean": 1.0, "se": 0.1, "gap": -4.0}], False, False, 1.5, [2.0])
        raise BoundViolated("mean below bound at r=2", report=rep)

    monkeypatch.setattr(cli, "bound_experiment", violated)
    assert cli.main(["bound", "--config", small_bound(tmp_path, "v")]) == 2
    assert json.loads((tmp_path / "v" / "bound.json").read_text())["violations"] == [2.0]


def test_module_error_exit_status(tmp_path):
    raw = n2_raw(output=str(tmp_path / "o"))
    # overloaded: the allocation LP has load above one
    raw["network"]["arrivals"][0]["mean"] = 0.25
    assert cli.main(["analyze", "--config", write(tmp_path, raw)]) == 1
