import csv
import json
import subprocess
import sys

import pytest

from moyal_dirac import dirac as D
from moyal_dirac.cli import HEADER, main

FOCK = {"experiment": "fock-check", "record_timing": False}
NCT_SMALL = {"experiment": "scatter-nct", "cross_check": False,
             "grid": {"points": [32], "lengths": [16.0], "time_samples": 128, "tau": 8.0}}


def write(tmp_path, data, name="c.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def rows(out):
    with open(out / "results.csv") as fh:
        return list(csv.reader(fh))


def test_conventions_command(capsys):
    assert main(["conventions"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["conventions_hash"] == D.conventions_hash()
    assert doc["BACKEND"] in ("compiled", "python")


def test_run_writes_results_and_meta(tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", write(tmp_path, FOCK), "--output", str(out)]) == 0
    r = rows(out)
    assert tuple(r[0]) == HEADER
    names = [x[1] for x in r[1:]]
    assert len(names) == len(set(names))
    assert all(x[4] == "true" for x in r[1:])
    meta = json.loads((out / "meta.json").read_text())
    assert meta["config"] == FOCK and len(meta["config_hash"]) == 16
    assert meta["conventions_hash"] == D.conventions_hash()
    assert {"numpy", "scipy", "python", "moyal_dirac"} <= set(meta["versions"])
    assert meta["BACKEND"] in ("compiled", "python")
    assert (out / "implementer.bin").exists() and (out / "implementer.json").exists()


@pytest.mark.parametrize("data", [{"experiment": "nope"},
                                  {"experiment": "dirac-check", "grid": {"points": [30]}},
                                  {"experiment": "fock-check", "modes": 0}])
def test_schema_error_exit_2(tmp_path, data, capsys):
    assert main(["run", "--config", write(tmp_path, data)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_missing_file_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 2


def test_gate_failure_exit_3(tmp_path, capsys):
    data = dict(NCT_SMALL, potential={"lambdas": [50.0]})
    assert main(["run", "--config", write(tmp_path, data), "--output", str(tmp_path / "o")]) == 3
    assert "q =" in capsys.readouterr().err


def test_metric_failure_exit_1(tmp_path, capsys):
    data = dict(FOCK, tolerances={"car": 1e-30})
    assert main(["run", "--config", write(tmp_path, data), "--output", str(tmp_path / "o")]) == 1
    assert "FAIL car" in capsys.readouterr().err
    assert [x for x in rows(tmp_path / "o") if x[1] == "car"][0][4] == "false"


def test_deterministic_csv(tmp_path):
    cfg = write(tmp_path, dict(FOCK, record_timing=True))
    for o in ("a", "b"):
        assert main(["run", "--config", cfg, "--output", str(tmp_path / o)]) == 0
    strip = lambda r: [x[:5] for x in r]
    assert strip(rows(tmp_path / "a")) == strip(rows(tmp_path / "b"))
    cfg = write(tmp_path, FOCK, "d.json")
    for o in ("c", "d"):
        assert main(["run", "--config", cfg, "--output", str(tmp_path / o)]) == 0
    assert (tmp_path / "c" / "results.csv").read_bytes() == (tmp_path / "d" / "results.csv").read_bytes()


def test_lambda_sweep_appends_slope(tmp_path, monkeypatch):
    monkeypatch.setenv("MOYAL_DIRAC_THREADS", "2")
    out = tmp_path / "s"
    code = main(["sweep", "--config", write(tmp_path, FOCK), "--param", "lambda",
                 "--values", "0.1,0.01,0.001", "--output", str(out)])
    assert code == 0
    r = rows(out)
    slope = [x for x in r if x[1] == "sweep:bogoliubov_residual_slope"]
    assert len(slope) == 1 and 0.8 <= float(slope[0][2]) <= 1.2
    assert sum(x[1].startswith("lambda=0.01/") for x in r) > 5
    meta = json.loads((out / "meta.json").read_text())
    assert meta["sweep"]["values"] == [0.1, 0.01, 0.001]


def test_resolution_sweep_order(tmp_path):
    data = {"experiment": "dirac-check", "record_timing": False}
    out = tmp_path / "r"
    main(["sweep", "--config", write(tmp_path, data), "--param", "resolution", "--values", "64,128",
          "--output", str(out)])
    order = [x for x in rows(out) if x[1] == "sweep:residual_retarded_slope"]
    assert len(order) == 1 and float(order[0][2]) >= 1 and order[0][4] == "true"


def test_tau_sweep_stabilisation(tmp_path):
    out = tmp_path / "t"
    code = main(["sweep", "--config", write(tmp_path, NCT_SMALL), "--param", "tau", "--values", "10,12",
                 "--output", str(out)])
    stab = [x for x in rows(out) if x[1] == "sweep:tau_stabilization"]
    assert len(stab) == 1 and float(stab[0][2]) < 1e-6
    assert code == 0


def test_sweep_rejects_bad_values(tmp_path):
    cfg = write(tmp_path, FOCK)
    assert main(["sweep", "--config", cfg, "--param", "mass", "--values", "1"]) == 2
    assert main(["sweep", "--config", cfg, "--param", "lambda", "--values", "a,b"]) == 2


def test_thread_cap_validation(tmp_path, monkeypatch):
    monkeypatch.setenv("MOYAL_DIRAC_THREADS", "many")
    assert main(["sweep", "--config", write(tmp_path, FOCK), "--param", "lambda", "--values", "0.1",
                 "--output", str(tmp_path / "x")]) == 2


@pytest.mark.slow
def test_theta_zero_moyal_check_passes(tmp_path):
    out = tmp_path / "m"
    assert main(["run", "--config", write(tmp_path, {"experiment": "moyal-check", "theta": 0}),
                 "--output", str(out)]) == 0
    assert {"theta0_collapse", "commutator_theta0"} <= {x[1] for x in rows(out)}


def test_console_script_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "moyal_dirac.cli", "conventions"], capture_output=True,
                         text=True)
    assert out.returncode == 0 and "conventions_hash" in out.stdout
