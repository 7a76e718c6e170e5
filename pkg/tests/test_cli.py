import json
import math
import subprocess
import sys

import pytest

from levymix import __version__, cli, config

STABLE_HALF = {"family": {"kind": "stable"}, "measure": {"kind": "dirac", "y": 0.5}}


def write_config(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def run(tmp_path, command, doc, *extra, out="out"):
    cfg = write_config(tmp_path, doc)
    code = cli.main([command, "--config", cfg, "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_exponent_row(tmp_path):
    code, out = run(tmp_path, "exponent", {**STABLE_HALF, "exponent": {"lambda": [4.0]}})
    assert code == 0
    lines = (out / "exponent.csv").read_text().splitlines()
    assert lines == ["lambda,mixed_f", "4.0,2.0"]
    rec = read_json(out / "exponent.json")
    assert rec["tool_version"] == __version__ and len(rec["config_hash"]) == 64


def test_diffuse_gamma_pareto(tmp_path):
    doc = {"family": {"kind": "gamma"}, "measure": {"kind": "pareto", "scale": 1.0, "shape": 2.0}}
    code, out = run(tmp_path, "diffuse", doc)
    assert code == 0
    rec = read_json(out / "diffuse.json")
    assert rec["diffusivity_limit"] == pytest.approx(2.0 / 3.0, rel=1e-4)
    assert (out / "q.csv").read_text().startswith("point,value\n")
    assert (out / "msd.csv").read_text().startswith("t,msd,asymptote\n")


def test_diffuse_reports_infinite_limit_as_string(tmp_path):
    code, out = run(tmp_path, "diffuse", STABLE_HALF)
    assert code == 0
    assert read_json(out / "diffuse.json")["diffusivity_limit"] == "inf"


def test_simulate_is_deterministic(tmp_path):
    doc = {**STABLE_HALF, "numerics": {"paths": 4000, "seed": 3, "stream_stride": 1000},
           "simulate": {"lambda": [1.0, 4.0], "inverse_t": [1.0], "export_paths": 2}}
    _, a = run(tmp_path, "simulate", doc, "--workers", "1", out="a")
    _, b = run(tmp_path, "simulate", doc, "--workers", "4", out="b")
    for name in ("laplace.csv", "inverse.csv", "paths/path_0000.csv", "paths/path_0001.csv", "laplace.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    header = (a / "laplace.csv").read_text().splitlines()[0]
    assert header == "lambda,t,estimate,se,exact"
    rec = read_json(a / "laplace.json")["records"][0]
    assert set(rec) >= {"lambda", "t", "estimate", "se", "n_paths", "epsilon"}


def test_seed_changes_output(tmp_path):
    doc = {**STABLE_HALF, "numerics": {"paths": 2000}, "simulate": {"export_paths": 0}}
    _, a = run(tmp_path, "simulate", doc, "--set", "numerics.seed=1", out="a")
    _, b = run(tmp_path, "simulate", doc, "--set", "numerics.seed=2", out="b")
    assert (a / "laplace.csv").read_bytes() != (b / "laplace.csv").read_bytes()


def test_invert_outputs(tmp_path):
    code, out = run(tmp_path, "invert", STABLE_HALF)
    assert code == 0
    for name in ("mu.csv", "l.csv", "U.csv", "invert.json"):
        assert (out / name).exists()
    rows = (out / "U.csv").read_text().splitlines()
    t, u = map(float, rows[2].split(","))
    assert u == pytest.approx(math.sqrt(t) / math.gamma(1.5), rel=1e-8)


def test_operator_outputs(tmp_path):
    code, out = run(tmp_path, "operator", {**STABLE_HALF, "operator": {"lambda": [1.0]}})
    assert code == 0
    rec = read_json(out / "operator.json")
    assert rec["symbol_residual"] <= 1e-2 and rec["constant_annihilation"] == 0.0
    assert (out / "kernel.csv").read_text().startswith("k,s_low,s_high,weight,moment\n")


def test_certify_outputs(tmp_path):
    doc = {"family": {"kind": "gamma"}, "measure": {"kind": "atoms", "points": [0.5, 2.0]}}
    code, out = run(tmp_path, "certify", doc)
    assert code == 0
    certs = read_json(out / "certify.json")["certificates"]
    assert all(certs[k]["mixed"]["verdict"] == "pass" for k in ("CBF", "SBF", "TBF", "ME"))


def test_conjugate_outputs(tmp_path):
    code, out = run(tmp_path, "conjugate", STABLE_HALF)
    assert code == 0
    rows = (out / "conjugate.csv").read_text().splitlines()
    assert rows[0] == "lambda,mixed_f_star,inverse_local_time_exponent"
    lam, fstar, _ = map(float, rows[2].split(","))
    assert fstar == pytest.approx(math.sqrt(lam), rel=1e-12)
    assert read_json(out / "conjugate.json")["potential_atom"] == 0.0


def test_killed_family_config(tmp_path):
    doc = {"family": {"kind": "killed", "rate": 0.5, "base": {"kind": "stable"}},
           "measure": {"kind": "dirac", "y": 0.5}, "exponent": {"lambda": [4.0]}}
    code, out = run(tmp_path, "exponent", doc)
    assert code == 0
    assert (out / "exponent.csv").read_text().splitlines()[1] == "4.0,2.5"


def test_unknown_family_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "exponent", {"family": {"kind": "nope"}, "measure": {"kind": "dirac", "y": 0.5}})
    assert code == 2
    err = capsys.readouterr().err
    assert "registry" in err and "stable" in err


def test_unknown_measure_exit_2(tmp_path, capsys):
    code, _ = run(tmp_path, "exponent", {"family": {"kind": "stable"}, "measure": {"kind": "nope"}})
    assert code == 2 and "registry" in capsys.readouterr().err


def test_assumption_failure_exit_2(tmp_path):
    doc = {"family": {"kind": "drift"}, "measure": {"kind": "pareto", "scale": 1.0, "shape": 0.5}}
    code, out = run(tmp_path, "exponent", doc)
    assert code == 2
    assert read_json(out / "exponent.json")["assumptions"]["A1"] == "fail"


def test_bad_keys_exit_2(tmp_path):
    assert run(tmp_path, "exponent", {**STABLE_HALF, "numerics": {"bogus": 1}})[0] == 2
    assert run(tmp_path, "exponent", {**STABLE_HALF, "exponent": {"bogus": 1}})[0] == 2
    assert run(tmp_path, "exponent", STABLE_HALF, "--set", "novalue")[0] == 2
    assert cli.main(["exponent", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exit_3(tmp_path):
    doc = {"family": {"kind": "drift"}, "measure": {"kind": "dirac", "y": 1e-3},
           "numerics": {"paths": 10}, "simulate": {"inverse_t": [10.0], "export_paths": 0}}
    assert run(tmp_path, "simulate", doc)[0] == 3
    lattice = {"family": {"kind": "compound-poisson"}, "measure": {"kind": "dirac", "y": 1.0},
               "invert": {"mu_t": [], "l_x": [], "U_t": [0.01]}}
    assert run(tmp_path, "invert", lattice, out="b")[0] == 3


def test_overrides_change_results_and_hash(tmp_path):
    _, a = run(tmp_path, "exponent", STABLE_HALF, out="a")
    _, b = run(tmp_path, "exponent", STABLE_HALF, "--set", "measure.y=0.25", "--set", "exponent.lambda=[16]", out="b")
    assert (b / "exponent.csv").read_text().splitlines()[1] == "16.0,2.0"
    assert read_json(a / "exponent.json")["config_hash"] != read_json(b / "exponent.json")["config_hash"]


def test_hash_ignores_output_and_workers():
    doc = dict(STABLE_HALF)
    h = config.config_hash(doc)
    assert config.config_hash({**doc, "output": {"dir": "x"}}) == h
    assert config.config_hash({**doc, "numerics": {"workers": 8}}) == config.config_hash({**doc, "numerics": {}})
    assert config.config_hash({**doc, "numerics": {"seed": 1}}) != h


def test_output_dir_precedence(monkeypatch):
    monkeypatch.setenv(config.ENV_OUTPUT_DIR, "from-env")
    assert config.output_dir({}, None) == "from-env"
    assert config.output_dir({"output": {"dir": "from-doc"}}, None) == "from-doc"
    assert config.output_dir({"output": {"dir": "from-doc"}}, "from-flag") == "from-flag"
    monkeypatch.delenv(config.ENV_OUTPUT_DIR)
    assert config.output_dir({}, None) == config.DEFAULT_OUTPUT_DIR


def test_env_output_dir_end_to_end(tmp_path, monkeypatch):
    monkeypatch.setenv(config.ENV_OUTPUT_DIR, str(tmp_path / "envout"))
    cfg = write_config(tmp_path, STABLE_HALF)
    assert cli.main(["exponent", "--config", cfg]) == 0
    assert (tmp_path / "envout" / "exponent.csv").exists()


def test_console_entry_point(tmp_path):
    cfg = write_config(tmp_path, STABLE_HALF)
    proc = subprocess.run(
        [sys.executable, "-m", "levymix.cli", "exponent", "--config", cfg, "--out", str(tmp_path / "o")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.strip().splitlines()[0].endswith("exponent.csv")


@pytest.mark.parametrize("command", sorted(cli.COMMANDS))
def test_every_command_runs(tmp_path, command):
    doc = {"family": {"kind": "stable"}, "measure": {"kind": "uniform", "low": 0.1, "high": 0.9},
           "numerics": {"paths": 500, "seed": 1}, "simulate": {"export_paths": 1}}
    assert run(tmp_path, command, doc)[0] == 0
