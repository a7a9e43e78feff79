"""Acceptance criteria 1-7 at desk scale.

Each criterion runs through the same ``run_experiment`` entry point as the
CLI and prints one ``CRITERION n ... PASS|FAIL`` line. Run directly with
``python3 tests/test_acceptance.py`` or through pytest; the lines are
repeated in the terminal summary.
"""
import functools
import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent))

from moyal_dirac.cli import main  # noqa: E402
from moyal_dirac.config import ExperimentConfig  # noqa: E402
from moyal_dirac.experiments import run_experiment  # noqa: E402

TITLES = {
    1: "Moyal engine: algebra laws, FFT vs quadrature oracle, Theta=0 collapse",
    2: "Dirac kernel: fundamental-solution residual, convergence order, causal support",
    3: "Solution form: positivity on 100 random spinors, (Dg, h)_R = 0",
    4: "HT scattering: unitarity, saturation, Born residual linear in lambda for all kinds",
    5: "NCT scattering: Neumann identity under the gate, cross-module oracle, tau stabilisation",
    6: "Fock layer: CAR, self-duality, implementer, commutator identity, Bogoliubov residual",
    7: "Determinism: repeated seeded runs bitwise identical, one run per suite",
}

CRITERION_METRICS = {
    2: ("residual_retarded", "residual_advanced", "residual_order", "leakage_retarded", "leakage_advanced",
        "anticommutator_defect", "h0_hermiticity"),
    3: ("positivity_min", "positivity_imaginary", "kernel_pairing", "causal_kernel", "form_identity"),
}


@functools.lru_cache(maxsize=None)
def outcome(experiment):
    t0 = time.perf_counter()
    res = run_experiment(ExperimentConfig.from_dict({"experiment": experiment}))
    res.diagnostics["wall_s"] = time.perf_counter() - t0
    return res


def report(n, metrics, sink, extra=""):
    failed = [m for m in metrics if not m.passed]
    worst = ", ".join(f"{m.name}={m.value:.3g} (need {m.tolerance})" for m in failed[:4])
    status = "PASS" if not failed and metrics else "FAIL"
    line = f"CRITERION {n} {status}: {TITLES[n]} [{len(metrics)} checks{extra}]" + \
        (f" failing: {worst}" if failed else "")
    print(line)
    sink.append(line)
    return status == "PASS", line


def select(res, names=None):
    return [m for m in res.metrics if names is None or m.name in names]


def check(n, sink, experiment, names=None):
    res = outcome(experiment)
    ms = select(res, names)
    if names is not None:
        assert {m.name for m in ms} == set(names), "a criterion metric is missing"
    ok, line = report(n, ms, sink, f", {res.diagnostics['wall_s']:.0f} s")
    assert ok, line


def test_criterion_1_moyal(acceptance_lines):
    check(1, acceptance_lines, "moyal-check")


def test_criterion_2_dirac_kernel(acceptance_lines):
    check(2, acceptance_lines, "dirac-check", CRITERION_METRICS[2])


def test_criterion_3_solution_form(acceptance_lines):
    check(3, acceptance_lines, "dirac-check", CRITERION_METRICS[3])


def test_criterion_4_ht_scattering(acceptance_lines):
    check(4, acceptance_lines, "scatter-ht")


def test_criterion_5_nct_scattering(acceptance_lines):
    check(5, acceptance_lines, "scatter-nct")


def test_criterion_6_fock(acceptance_lines):
    check(6, acceptance_lines, "fock-check")


def test_criterion_7_determinism(tmp_path, acceptance_lines):
    from moyal_dirac.experiments import EXPERIMENTS, Metric
    checks = []
    for exp in ("fock-check", "dirac-check", "conventions"):
        cfg = tmp_path / f"{exp}.json"
        cfg.write_text(f'{{"experiment": "{exp}", "record_timing": false, "seed": 7}}')
        bodies = []
        for run in ("a", "b"):
            out = tmp_path / f"{exp}-{run}"
            code = main(["run", "--config", str(cfg), "--output", str(out)])
            bodies.append((code, (out / "results.csv").read_bytes()))
        same = bodies[0] == bodies[1]
        checks.append(Metric(f"identical[{exp}]", float(same), "eq", (1.0,), 0.0))
    for exp in ("moyal-check", "dirac-check", "scatter-ht", "scatter-nct", "fock-check"):
        names = [m.name for m in outcome(exp).metrics]
        checks.append(Metric(f"single_run[{exp}]", float(len(names) == len(set(names)) > 0), "eq", (1.0,), 0.0))
    checks.append(Metric("registry", float(len(EXPERIMENTS) == 6), "eq", (1.0,), 0.0))
    ok, line = report(7, checks, acceptance_lines)
    assert ok, line


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
