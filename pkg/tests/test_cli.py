import json

import pytest

from snmcache import cli
from snmcache import scenarios as sc
from snmcache.quadrature import QuadratureError


@pytest.fixture
def files(tmp_path):
    cfg = tmp_path / "c.json"
    sc.single_class_config(7.0, 3.0, scale=100, horizon=10.0).dump(cfg)
    tree_cfg = tmp_path / "tc.json"
    sc.tree_config(False, scale=20, horizon=10.0).dump(tree_cfg)
    topo = tmp_path / "t.json"
    sc.tree_allocation(1600, 0.5, scale=20).dump(topo)
    return {"config": str(cfg), "tree": str(tree_cfg), "topology": str(topo), "root": tmp_path}


def run(*argv):
    return cli.main([str(a) for a in argv])


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_generate_writes_trace_and_manifest(files):
    out = files["root"] / "g"
    assert run("generate", "--config", files["config"], "--out", out) == 0
    assert (out / "trace.csv").read_text().startswith("time_days,content_id,ingress_id,pre_horizon")
    man = manifest(out)
    assert man["command"] == "generate"
    assert man["outputs"][0]["path"] == "trace.csv"
    assert {"numpy", "scipy", "snmcache"} <= set(man["versions"])
    assert man["inputs"]["config"]["gamma"] == pytest.approx(100.0)


def test_simulate_capacities_and_trace(files):
    out = files["root"] / "s"
    assert run("generate", "--config", files["config"], "--out", out, "--gzip") == 0
    assert run("simulate", "--trace", out / "trace.csv.gz", "--capacities", "5,50", "--out", out) == 0
    lines = (out / "sim.csv").read_text().splitlines()
    assert lines[0] == "replication,node_id,capacity,requests,hits,hit_ratio"
    assert len(lines) == 3


def test_simulate_tree_with_replications(files):
    out = files["root"] / "st"
    assert run("simulate", "--config", files["tree"], "--topology", files["topology"], "--reps", 2,
               "--out", out) == 0
    summary = json.loads((out / "sim.json").read_text())
    assert summary["replication"]["n_runs"] == 2
    assert "global" in (out / "sim.csv").read_text()


def test_solve_curve_columns(files):
    out = files["root"] / "so"
    assert run("solve", "--config", files["config"], "--capacities", "10,100", "--out", out,
               "--format", "csv") == 0
    head = (out / "solve.csv").read_text().splitlines()[0]
    assert head == "capacity,T_C_days,p_hit,p_hit_small_approx,p_hit_large_asymptote"
    assert not (out / "solve.svg").exists()


def test_solve_tree(files):
    out = files["root"] / "sot"
    assert run("solve", "--config", files["tree"], "--topology", files["topology"], "--out", out) == 0
    assert "global" in (out / "solve.csv").read_text()


def test_fit(files):
    out = files["root"] / "f"
    run("generate", "--config", files["config"], "--out", out)
    assert run("fit", "--trace", out / "trace.csv", "--out", out) == 0
    assert (out / "classes.csv").read_text().startswith("class,rule,pct_reqs,pct_videos")
    assert json.loads((out / "fitted_config.json").read_text())["classes"]


def test_shuffle_study(files):
    out = files["root"] / "sh"
    run("generate", "--config", files["config"], "--out", out)
    assert run("shuffle-study", "--trace", out / "trace.csv", "--slice-hours", "inf,24", "--targets", "0.05",
               "--reps", 2, "--out", out) == 0
    rows = (out / "shuffle.csv").read_text().splitlines()
    assert len(rows) == 4
    assert (out / "shuffle.svg").read_text().lstrip().startswith("<?xml")


def test_sweep_is_deterministic(files):
    a, b = files["root"] / "a", files["root"] / "b"
    for out in (a, b):
        assert run("sweep", "--config", files["config"], "--capacities", "5,20", "--reps", 2, "--out", out) == 0
    assert (a / "sweep.csv").read_bytes() == (b / "sweep.csv").read_bytes()
    assert (a / "sweep.svg").read_bytes() == (b / "sweep.svg").read_bytes()


def test_missing_config_is_config_error(files, capsys):
    out = files["root"] / "e"
    assert run("solve", "--config", files["root"] / "nope.json", "--out", out) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "config" and err["exit_code"] == 2
    assert json.loads((out / "error.json").read_text())["type"] == "ConfigError"


def test_malformed_config(files):
    bad = files["root"] / "bad.json"
    bad.write_text("{oops")
    assert run("solve", "--config", bad, "--out", files["root"] / "e2") == 2


def test_invalid_config_values(files):
    bad = files["root"] / "bad2.json"
    doc = json.loads(open(files["config"]).read())
    doc["gamma"] = -1
    bad.write_text(json.dumps(doc))
    assert run("solve", "--config", bad, "--out", files["root"] / "e3") == 2


def test_numerical_failure_exit_code(files, monkeypatch):
    def boom(self, capacity, rtol=1e-8):
        raise QuadratureError("forced", 0.0, 1.0)

    monkeypatch.setattr(cli.CheModel, "solve", boom)
    assert run("solve", "--config", files["config"], "--capacities", "10", "--out", files["root"] / "n") == 3


def test_unreachable_target_is_numerical(files):
    out = files["root"] / "u"
    run("generate", "--config", files["config"], "--out", out)
    assert run("shuffle-study", "--trace", out / "trace.csv", "--targets", "0.999", "--reps", 2,
               "--out", out) == 3


def test_error_json_removed_after_success(files):
    out = files["root"] / "r"
    assert run("simulate", "--config", files["config"], "--out", out) == 2
    assert (out / "error.json").exists()
    assert run("simulate", "--config", files["config"], "--capacities", "3", "--out", out) == 0
    assert not (out / "error.json").exists()


def test_out_from_environment(files, monkeypatch):
    out = files["root"] / "env"
    monkeypatch.setenv(cli.OUT_ENV, str(out))
    assert run("solve", "--config", files["config"], "--capacities", "10", "--format", "csv") == 0
    assert (out / "solve.csv").exists()


def test_fig6_preset_small(files):
    out = files["root"] / "f6"
    assert run("fig6", "--scale", 100, "--reps", 2, "--horizon", 10, "--out", out) == 0
    for tag in "abc":
        assert (out / f"fig6{tag}.csv").exists() and (out / f"fig6{tag}.svg").exists()
    man = manifest(out)
    assert len(man["seeds"]["replications"]) == 2
    assert "a/L=7" in man["inputs"]
