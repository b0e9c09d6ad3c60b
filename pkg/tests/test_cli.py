import csv
import json
import math
import subprocess
import sys

import pytest

from hqwillmore.cli import (DEFAULT_TOL, RunConfig, main, parse_config, richardson_orders, write_corpus)
from hqwillmore.errors import ConfigError


@pytest.fixture(scope="module")
def specs(tmp_path_factory):
    d = tmp_path_factory.mktemp("specs")
    write_corpus(d)
    return d


def run(*argv):
    return main([str(a) for a in argv])


def test_malformed_json_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("report", "--spec", bad, "--depth", 2) == 2


def test_missing_spec_exit_2(tmp_path):
    assert run("report", "--spec", tmp_path / "nope.json") == 2


def test_depth_zero_exit_2(specs):
    assert run("report", "--spec", specs / "twistor_cubic.json", "--depth", 0) == 2


def test_single_depth_sweep_exit_2(specs):
    assert run("sweep", "--spec", specs / "twistor_cubic.json", "--depths", "4") == 2


@pytest.mark.parametrize("tol", ["square", "square=abc", "nosuch=1", "square=-1", "square=inf"])
def test_bad_tolerance_exit_2(specs, tol):
    assert run("report", "--spec", specs / "twistor_cubic.json", "--tol", tol) == 2


def test_unknown_command_exit_2():
    assert run("plot") == 2


def test_config_overrides(specs):
    cfg = parse_config(["report", "--spec", str(specs / "ramified.json"), "--tol", "pluecker=0.2", "--depth", "3"])
    assert cfg.tol["pluecker"] == 0.2 and cfg.tol["square"] == DEFAULT_TOL["square"] and cfg.depth == 3
    with pytest.raises(ConfigError):
        RunConfig("report", specs / "ramified.json", depth=11).validate()


def test_richardson_orders():
    orders = richardson_orders([1.0, 1 / 16, 1 / 256, 0.0])
    assert math.isnan(orders[0]) and orders[1:3] == pytest.approx([4.0, 4.0]) and math.isnan(orders[3])


def test_report_twistor_cubic(specs, tmp_path):
    out = tmp_path / "r.json"
    assert run("report", "--spec", specs / "twistor_cubic.json", "--depth", 5, "--out", out) == 0
    rep = json.loads(out.read_text())
    assert rep["schema"] == 1
    assert abs(rep["W_f"]) <= 1e-8
    assert rep["quantization_multiple_dual"] == rep["deg_VS_abs"] == 4
    assert rep["quantization_offset_dual"] <= 0.005 * rep["W_dual"]
    assert all(rep["checks"].values())
    assert rep["provenance"]["depth"] == 5 and len(rep["provenance"]["content_hash"]) > 0


def test_report_is_deterministic(specs, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for p in (a, b):
        run("report", "--spec", specs / "round_sphere.json", "--depth", 3, "--out", p)
    assert a.read_bytes() == b.read_bytes()


@pytest.mark.parametrize("name", ["osculant", "not_full"])
def test_unbuildable_curves_exit_1(specs, name):
    assert run("report", "--spec", specs / f"{name}.json", "--depth", 2) == 1


def test_sweep_twistor_cubic(specs, tmp_path):
    out = tmp_path / "s.csv"
    run("sweep", "--spec", specs / "twistor_cubic.json", "--depths", "3,4,5,6", "--out", out)
    data = list(csv.DictReader(out.open()))
    assert [int(r["depth"]) for r in data] == [3, 4, 5, 6]
    # A vanishes identically, so the converging residual is the Q column
    orders = [float(r["harmonicity_residual_Q_order"]) for r in data[1:]]
    assert all(o >= 2 for o in orders), orders


def test_sweep_round_sphere(specs, tmp_path):
    out = tmp_path / "s.csv"
    assert run("sweep", "--spec", specs / "round_sphere.json", "--depths", "3,4,5", "--out", out) == 0
    data = list(csv.DictReader(out.open()))
    for col in ("harmonicity_residual", "bookkeeping_residual", "reconstruction_residual",
                "curvature_residual", "flatness_residual", "W_f"):
        assert all(abs(float(r[col])) <= 1e-9 for r in data), col


def test_backlund_forward_of_dual(specs, tmp_path):
    out = tmp_path / "b.json"
    rc = run("backlund", "--spec", specs / "dual_cubic.json", "--direction", "fwd", "--depth", 3, "--out", out)
    doc = json.loads(out.read_text())
    assert doc["transform"]["kind"] == "backlund-of" and doc["transform"]["direction"] == "forward"
    for name in ("minus_S", "fQ", "energy", "involution"):
        assert doc["checks"][name]["pass"], name
    # the only check that can fail at this depth is the finite-difference harmonicity
    assert rc == (0 if doc["checks"]["harmonicity"]["pass"] else 1)


def test_backlund_forward_of_twistor_exit_3(specs, capsys):
    assert run("backlund", "--spec", specs / "twistor_cubic.json", "--direction", "fwd", "--depth", 3) == 3
    assert "NoForwardTransform" in capsys.readouterr().err


def test_backlund_backward_of_twistor(specs, tmp_path):
    out = tmp_path / "b.json"
    run("backlund", "--spec", specs / "twistor_cubic.json", "--direction", "bwd", "--depth", 3, "--out", out)
    doc = json.loads(out.read_text())
    assert doc["transform"]["transform_kind"] == "curve"
    assert doc["checks"]["bA"]["pass"] and doc["checks"]["minus_S"]["pass"]


def test_verify_round_sphere(specs, tmp_path):
    out = tmp_path / "v.json"
    assert run("verify", "--spec", specs / "round_sphere.json", "--depth", 3, "--out", out) == 0
    doc = json.loads(out.read_text())
    assert doc["pass"] and doc["sphere_sequence"]["length"] == 0
    assert not doc["backward"]["defined"] and not doc["forward"]["defined"]


def test_synth(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run("synth", "--out", a) == 0 and run("synth", "--out", b) == 0
    files = sorted(p.name for p in a.glob("*.json"))
    assert len(files) >= 3 and "twistor_cubic.json" in files
    for f in files:
        assert (a / f).read_bytes() == (b / f).read_bytes()
    assert json.loads((a / "dual_cubic.json").read_text())["parent"] == "twistor_cubic.json"


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "hqwillmore.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "Exit codes" in r.stdout


def test_version():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
