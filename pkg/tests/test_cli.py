import json
import textwrap

import pytest

from der_lab import cli
from der_lab.cli import ConfigError, load_config, main, parse_config, run_suite, threads
from der_lab.report import to_json


def write(tmp_path, body):
    p = tmp_path / "cfg.toml"
    p.write_text(textwrap.dedent(body))
    return p


def test_parse_config():
    cfg = parse_config({"suite": "critical", "seed": 3, "lambda": 3.0, "grids": [8, 16],
                        "output": {"dir": "o", "format": "csv"}})
    assert cfg.lam == 3.0 and cfg.grids == (8, 16) and cfg.format == "csv" and str(cfg.out_dir) == "o"


@pytest.mark.parametrize("data", [
    {"suite": "nope"},
    {"suite": "critical"},
    {"suite": "clifford", "tolerances": {"clifford": 0.0}},
    {"suite": "clifford", "tolerances": {"made_up": 1.0}},
    {"suite": "clifford", "colour": "red"},
    {"suite": "clifford", "grid": 4},
    {"suite": "clifford", "backend": "gpu"},
    {"suite": "firstvar", "seed": -1},
])
def test_config_errors(data):
    with pytest.raises(ConfigError):
        parse_config(data)


def test_cli_config_error_exit(tmp_path, capsys):
    assert main(["run", "--config", str(write(tmp_path, 'suite = "critical"\n'))]) == 2
    assert "seed" in capsys.readouterr().err
    assert main(["run", "--config", str(write(tmp_path, "suite = [\n"))]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.toml")]) == 2
    with pytest.raises(SystemExit):
        main(["run", "--config", str(write(tmp_path, "seed = 1\n")), "--suite", "unknown"])


def test_cli_clifford_pass(tmp_path, capsys):
    cfg = write(tmp_path, 'suite = "clifford"\n')
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["passed"] and doc["summary"]["failed"] == 0 and doc["summary"]["checks"] > 0
    assert all(r["anchor"] for r in doc["records"])
    assert "[PASS]" in capsys.readouterr().out


def test_cli_backend_failure(tmp_path):
    cfg = write(tmp_path, """
        suite = "firstvar"
        backend = "lattice"
        seed = 1
        grid = 8
        [metric]
        kind = "diagonal"
        modes = [[{k = [1, 0, 0], amplitude = 2.0}], [], []]
    """)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 4


def test_curvature_csv(tmp_path):
    cfg = write(tmp_path, 'suite = "curvature"\n')
    out = tmp_path / "csv"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--format", "csv", "--quiet"]) == 0
    lines = (out / "curvature_conformal.csv").read_text().strip().splitlines()
    assert lines[0] == "grid,error,order" and len(lines) == 4


def test_critical_records(tmp_path):
    cfg = load_config(write(tmp_path, 'suite = "critical"\nseed = 5\nlambda = 1.5\n'))
    rep = run_suite(cfg)
    recs = {r.name: r for r in rep.records}
    assert recs["critical.R"].oracle == pytest.approx(6.0)
    assert recs["critical.psi_norm2"].oracle == pytest.approx(4.0)
    assert rep.passed


def _strip(rep):
    doc = json.loads(to_json(rep))
    doc.pop("timestamp")
    return json.dumps(doc, sort_keys=True)


def test_determinism_modulo_timestamp(tmp_path):
    cfg = load_config(write(tmp_path, 'suite = "lichnerowicz"\nseed = 11\nsl_grids = [8, 16]\n'))
    a, b = run_suite(cfg), run_suite(cfg)
    assert a.timestamp != {} and _strip(a) == _strip(b)


def test_concurrent_matches_sequential(tmp_path, monkeypatch):
    monkeypatch.setenv("DER_LAB_THREADS", "3")
    assert threads() == 3
    cfg = parse_config({"suite": "all", "seed": 2})
    cfg2 = parse_config({"suite": "all", "seed": 2, "concurrent": True})
    picked = ("clifford", "critical", "examples", "scaling")
    monkeypatch.setattr(cli, "SUITES", picked)
    monkeypatch.setattr(cli, "selected", lambda c: list(picked))
    a, b = run_suite(cfg), run_suite(cfg2)
    assert _strip(a) == _strip(b)
    assert [r.name for r in a.records] == [r.name for r in b.records]
    monkeypatch.setenv("DER_LAB_THREADS", "zero")
    assert threads() == 1
