"""``moyal-dirac`` command line: ``run``, ``sweep`` and ``conventions``.

Exit codes: 0 all metrics pass, 1 a metric failed, 2 configuration error,
3 the Neumann-series norm gate refused the coupling.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import platform
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from . import dirac as D
from .config import SWEEP_PARAMS, ConfigError, ExperimentConfig, load_config
from .experiments import Metric, run_experiment
from .fock import export_matrix
from .kernels import BACKEND
from .scattering_ht import fit_slope
from .scattering_nct import GateError

HEADER = ("experiment", "metric", "value", "tolerance", "pass", "runtime_ms")
EXIT_OK, EXIT_METRIC, EXIT_CONFIG, EXIT_GATE = 0, 1, 2, 3
SLOPE_RULES = {"lambda": ("range", 0.8, 1.2), "resolution": ("min", 1.0)}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": float(x.real), "im": float(x.imag)}
    if isinstance(x, np.generic):
        return x.item()
    return x


def _meta(cfg: ExperimentConfig, **extra) -> dict:
    return {
        "config": cfg.to_dict(),
        "config_hash": cfg.digest(),
        "conventions_hash": D.conventions_hash(),
        "versions": {"moyal_dirac": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "BACKEND": BACKEND,
        **_jsonable(extra),
    }


def _row(experiment: str, m: Metric) -> list:
    return [experiment, m.name, format(m.value, ".17g"), m.tolerance, str(m.passed).lower(),
            format(m.runtime_ms, ".3f")]


def _write(out: Path, rows, meta: dict):
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HEADER)
        w.writerows(rows)
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def _out_dir(args, cfg: ExperimentConfig) -> Path:
    return Path(args.output or cfg.output or f"results/{cfg.experiment}")


def _export(out: Path, artifacts: dict, prefix: str = ""):
    files = []
    for name, mat in artifacts.get("matrices", {}).items():
        out.mkdir(parents=True, exist_ok=True)
        files += [str(p.name) for p in export_matrix(out / f"{prefix}{name}", mat)]
    return files


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    res = run_experiment(cfg)
    out = _out_dir(args, cfg)
    files = _export(out, res.artifacts)
    _write(out, [_row(cfg.experiment, m) for m in res.metrics],
           _meta(cfg, diagnostics=res.diagnostics, exports=files))
    failed = [m.name for m in res.metrics if not m.passed]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    return EXIT_METRIC if failed else EXIT_OK


def _parse_values(param: str, text: str) -> list:
    try:
        vals = [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"--values must be numbers, got {text!r}") from None
    if not vals:
        raise ConfigError("--values is empty")
    if param == "resolution":
        if any(v != int(v) for v in vals):
            raise ConfigError("resolution values must be integers")
        vals = [int(v) for v in vals]
    return vals


def _workers(n: int) -> int:
    env = os.environ.get("MOYAL_DIRAC_THREADS")
    cap = os.cpu_count() or 1
    if env:
        try:
            cap = max(1, int(env))
        except ValueError:
            raise ConfigError(f"MOYAL_DIRAC_THREADS must be an integer, got {env!r}") from None
    return max(1, min(n, cap))


def _post_process(param: str, values, outcomes) -> list[Metric]:
    """Scaling rows across sweep points: slopes of each series and tau stabilisation."""
    extra = []
    rule = SLOPE_RULES.get(param)
    names = sorted({k for o in outcomes for k in o.artifacts.get("series", {})})
    if rule and len(values) >= 2:
        for name in names:
            pts = sorted(p for o in outcomes for p in o.artifacts.get("series", {}).get(name, []))
            if len({x for x, _ in pts}) >= 2:
                extra.append(Metric(f"sweep:{name}_slope", fit_slope(*zip(*pts)), rule[0], rule[1:], 0.0))
    if param == "tau" and len(values) >= 2:
        oracles = sorted((t, v) for o in outcomes for t, v in o.artifacts.get("oracle", {}).items())
        if len(oracles) >= 2:
            (_, a), (_, b) = oracles[-2:]
            extra.append(Metric("sweep:tau_stabilization",
                                float(np.linalg.norm(b - a) / np.linalg.norm(b)), "max", (1e-6,), 0.0))
    return extra


def cmd_sweep(args) -> int:
    base = load_config(args.config)
    if args.param not in SWEEP_PARAMS:
        raise ConfigError(f"unknown sweep parameter {args.param!r}; choose from {', '.join(SWEEP_PARAMS)}")
    values = _parse_values(args.param, args.values)
    cfgs = [base.with_value(args.param, v) for v in values]
    with ThreadPoolExecutor(max_workers=_workers(len(cfgs))) as pool:
        outcomes = list(pool.map(run_experiment, cfgs))   # order preserved; writing stays serial
    rows, diags = [], {}
    out = _out_dir(args, base)
    files = []
    for v, cfg, res in zip(values, cfgs, outcomes):
        tag = f"{args.param}={v:g}"
        rows += [_row(cfg.experiment, Metric(f"{tag}/{m.name}", m.value, m.rule, m.bound, m.runtime_ms))
                 for m in res.metrics]
        diags[tag] = res.diagnostics
        files += _export(out, res.artifacts, prefix=f"{tag}_")
    extra = _post_process(args.param, values, outcomes)
    rows += [_row(base.experiment, m) for m in extra]
    _write(out, rows, _meta(base, sweep={"param": args.param, "values": values,
                                         "config_hashes": [c.digest() for c in cfgs]},
                            diagnostics=diags, exports=files))
    failed = [r[1] for r in rows if r[4] != "true"]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    return EXIT_METRIC if failed else EXIT_OK


def cmd_conventions(args) -> int:
    doc = {"conventions": D.conventions(), "conventions_hash": D.conventions_hash(), "BACKEND": BACKEND}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="moyal-dirac", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--output", help="output directory (overrides the config)")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="run one experiment over a parameter list")
    s.add_argument("--config", required=True)
    s.add_argument("--param", required=True, help=f"one of {', '.join(SWEEP_PARAMS)}")
    s.add_argument("--values", required=True, help="comma or space separated values")
    s.add_argument("--output", help="output directory (overrides the config)")
    s.set_defaults(func=cmd_sweep)
    c = sub.add_parser("conventions", help="print the conventions document")
    c.add_argument("--output", help="write to a file instead of stdout")
    c.set_defaults(func=cmd_conventions)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GateError as exc:
        print(f"gate failure: q = {exc.q:.6g} >= {exc.gate:g}", file=sys.stderr)
        return EXIT_GATE
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
