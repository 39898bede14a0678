"""Command-line front end.

Usage::

    eitqnd <command> [--config PATH] [--out DIR] [--jobs N] [--seed S] [--format csv|json]

Every command writes its data files, a ``<command>_manifest.json`` and a
``<command>_resolved.ini`` that reproduces the run when passed back via
``--config``.  Exit codes: 0 success, 2 configuration error, 3 numerical
invariant or post-condition failure, 4 calibration failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import platform
import sys
import time
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import EXPERIMENTS, FORMATS, ExperimentConfig, load_config
from .errors import CalibrationError, ConfigError, EITError, NumericalFailure, StiffnessError
from .evolve import HERMITIAN_DRIFT_TOL, POSITIVITY_SLACK, TRACE_DRIFT_TOL
from .experiments import FIG2_G, FIG4_KAPPA, FIG5_DELTA, FOCK_N, strictly_increasing, sweep
from .herald import calibrate, run_protocol, verdict_probability
from .observables import TransmissionParams, susceptibility, transmission_change
from .steadystate import POSITIVITY_TOL, TRACE_TOL, steady_state_atom
from .trajectories import RNG_ALGORITHM

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CALIBRATION = 0, 2, 3, 4
BASELINE_FLATNESS = 1e-7


class ClaimFailure(EITError):
    """A post-condition asserted on the run's output did not hold."""


def _num(x) -> str:
    """Shortest round-trip decimal."""
    return repr(float(x))


class _Run:
    """Collects output files, invariant checks and claims for one command."""

    def __init__(self, cfg: ExperimentConfig, command: str):
        self.cfg = cfg
        self.command = command
        self.out = Path(cfg.output_dir)
        self.files = []
        self.claims = []
        self.checks = {"trace_drift": 0.0, "hermiticity": 0.0, "min_eigenvalue": None, "propagations": 0}

    def absorb(self, runs):
        for run in runs:
            c = run.checks
            self.checks["propagations"] += 1
            self.checks["trace_drift"] = max(self.checks["trace_drift"], c.get("trace_drift", 0.0))
            self.checks["hermiticity"] = max(self.checks["hermiticity"], c.get("hermiticity", 0.0))
            lam = c.get("min_eigenvalue")
            if lam is not None and np.isfinite(lam):
                cur = self.checks["min_eigenvalue"]
                self.checks["min_eigenvalue"] = lam if cur is None else min(cur, lam)

    def claim(self, name, passed, detail=""):
        self.claims.append({"claim": name, "passed": bool(passed), "detail": detail})

    def table(self, stem, columns: dict):
        """Write named equal-length columns as CSV or JSON."""
        path = self.out / f"{stem}.{self.cfg.output_format}"
        names = list(columns)
        if self.cfg.output_format == "csv":
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(names)
                for row in zip(*(columns[k] for k in names)):
                    w.writerow([v if isinstance(v, str) else _num(v) if isinstance(v, float) else v for v in row])
        else:
            payload = {"columns": names, "data": {k: [_jsonable(v) for v in columns[k]] for k in names}}
            path.write_text(json.dumps(payload, indent=1) + "\n", encoding="utf-8")
        self.files.append(path.name)
        return path

    def document(self, stem, payload: dict):
        path = self.out / f"{stem}.json"
        path.write_text(json.dumps(_jsonable(payload), indent=1) + "\n", encoding="utf-8")
        self.files.append(path.name)
        return path

    def finish(self, wall_time, error=None):
        cfg = self.cfg
        ini = self.out / f"{self.command}_resolved.ini"
        ini.write_text(replace(cfg, experiment=self.command).to_ini(), encoding="utf-8")
        manifest = {
            "command": self.command,
            "code_version": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "config_source": cfg.source,
            "resolved_config_file": ini.name,
            "resolved_config": {
                "params": asdict(cfg.params), "grid": asdict(cfg.grid), "solver": asdict(cfg.solver),
                "herald": asdict(cfg.herald),
                "transmission": asdict(cfg.transmission) if cfg.transmission else None,
                "seed": cfg.seed, "jobs": cfg.jobs, "format": cfg.output_format,
            },
            "tolerances": {
                "rtol": cfg.solver.rtol, "atol": cfg.solver.atol, "trace_drift": TRACE_DRIFT_TOL,
                "hermiticity": HERMITIAN_DRIFT_TOL, "positivity_slack": POSITIVITY_SLACK,
                "steady_trace": TRACE_TOL, "steady_positivity": POSITIVITY_TOL,
            },
            "wall_time_s": wall_time,
            "invariant_checks": self.checks,
            "claims": self.claims,
            "outputs": self.files,
            "error": error,
        }
        if self.command == "herald":
            manifest["rng_algorithm"] = RNG_ALGORITHM
        (self.out / f"{self.command}_manifest.json").write_text(
            json.dumps(_jsonable(manifest), indent=1) + "\n", encoding="utf-8")


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, complex):
        return [v.real, v.imag]
    if isinstance(v, (np.floating, float)):
        return float(v) if np.isfinite(v) else None
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _label(name, value):
    return f"{name}={value!r}" if isinstance(value, float) else f"{name}={value}"


def _transmission(cfg, area, imx=None):
    if cfg.transmission is None or area < 0:
        return None
    tp = TransmissionParams(cfg.transmission.length, cfg.transmission.wavelength)
    return transmission_change(area, tp, imx, cfg.solver.t_end)


def _time_panel(run: _Run, stem, curves: dict):
    """``curves`` maps column label -> FockRun; all share the sample grid."""
    first = next(iter(curves.values()))
    cols = {"time_gamma": first.imx.times}
    cols.update({lab: r.imx.values for lab, r in curves.items()})
    run.table(stem, cols)


def cmd_fig2(cfg: ExperimentConfig, run: _Run):
    g_list = cfg.grid.g_list or FIG2_G
    n_list = cfg.grid.n_list or FOCK_N
    points, runs = sweep(cfg.params, g_list, [cfg.params.kappa], None, n_list, cfg.solver, cfg.jobs)
    run.absorb(runs)
    it = iter(zip(points, runs))
    summary = {"g_disp": [], "n": [], "area": [], "peak_time": [], "peak_value": []}
    for g in g_list:
        panel = {n: next(it) for n in n_list}
        _time_panel(run, f"fig2_{_label('G', g)}", {f"n={n}": r for n, (_, r) in panel.items()})
        for n, (pt, _) in panel.items():
            for key, val in (("g_disp", g), ("n", n), ("area", pt.area),
                             ("peak_time", pt.peak_time), ("peak_value", pt.peak_value)):
                summary[key].append(val)
        peaks = [panel[n][0].peak_value for n in n_list]
        run.claim(f"peaks increase with n at G={g!r}", strictly_increasing(peaks), peaks)
        if 0 in panel:
            r0 = panel[0][1]
            baseline = susceptibility(steady_state_atom(r0.params), r0.params).imag
            dev = float(np.max(np.abs(r0.imx.values - baseline)))
            run.claim(f"n=0 flat at steady baseline at G={g!r}", dev < BASELINE_FLATNESS, dev)
    run.table("fig2_summary", summary)


def cmd_fig3(cfg: ExperimentConfig, run: _Run):
    g_list = cfg.grid.g_list or FIG2_G
    n_list = cfg.grid.n_list or FOCK_N
    points, runs = sweep(cfg.params, g_list, [cfg.params.kappa], None, n_list, cfg.solver, cfg.jobs)
    run.absorb(runs)
    cols, diffs = {"n": list(n_list)}, {}
    it = iter(points)
    for g in g_list:
        areas = [next(it).area for _ in n_list]
        cols[_label("G", g)] = areas
        diffs[f"dS[{_label('G', g)}]"] = [a - areas[0] for a in areas]
        run.claim(f"S strictly increasing in n at G={g!r}", strictly_increasing(areas), areas)
    cols.update(diffs)
    run.table("fig3", cols)


def _scan(cfg, run: _Run, name, values, key, stem):
    """Shared body of the kappa and detuning scans."""
    n_list = cfg.grid.n_list or (0, 1)
    if key == "kappa":
        points, runs = sweep(cfg.params, [cfg.params.g_disp], values, None, n_list, cfg.solver, cfg.jobs)
    else:
        points, runs = sweep(cfg.params, [cfg.params.g_disp], [cfg.params.kappa], values, n_list,
                             cfg.solver, cfg.jobs)
    run.absorb(runs)
    table = {}
    it = iter(zip(points, runs))
    for v in values:
        for n in n_list:
            table[v, n] = next(it)
    for n in n_list:
        _time_panel(run, f"{stem}_n={n}", {_label(name, v): table[v, n][1] for v in values})
    cols = {name: list(values)}
    for n in n_list:
        cols[f"S(n={n})"] = [table[v, n][0].area for v in values]
        cols[f"peak(n={n})"] = [table[v, n][0].peak_value for v in values]
    if cfg.transmission is not None:
        for n in n_list:
            tc = [_transmission(cfg, table[v, n][0].area, table[v, n][1].imx) for v in values]
            cols[f"P_linear(n={n})"] = [t.linearized if t else float("nan") for t in tc]
            cols[f"P_exact(n={n})"] = [t.exact if t else float("nan") for t in tc]
    run.table(f"{stem}_area", cols)
    return {k: pt.area for k, (pt, _) in table.items()}


def cmd_fig4(cfg: ExperimentConfig, run: _Run):
    values = cfg.grid.kappa_list or FIG4_KAPPA
    areas = _scan(cfg, run, "kappa", values, "kappa", "fig4")
    n_list = cfg.grid.n_list or (0, 1)
    if 0 in n_list and 1 in n_list:
        for k in values:
            gap = areas[k, 1] - areas[k, 0]
            run.claim(f"S(1) - S(0) > 0 at kappa={k!r}", gap > 0, gap)


def cmd_fig5(cfg: ExperimentConfig, run: _Run):
    values = cfg.grid.delta_list or FIG5_DELTA
    areas = _scan(cfg, run, "delta", values, "delta", "fig5")
    n_list = cfg.grid.n_list or (0, 1)
    if 1 in n_list and -1.0 in values and 0.0 in values:
        a, b = areas[-1.0, 1], areas[0.0, 1]
        run.claim("S(n=1, delta=-1) > S(n=1, delta=0)", a > b, [a, b])


def cmd_sweep(cfg: ExperimentConfig, run: _Run):
    g = cfg.grid
    points, runs = sweep(cfg.params, g.g_list or FIG2_G, g.kappa_list or [cfg.params.kappa],
                         g.delta_list, g.n_list or FOCK_N, cfg.solver, cfg.jobs)
    run.absorb(runs)
    cols = {k: [getattr(p, k) for p in points]
            for k in ("g_disp", "kappa", "delta", "n", "area", "peak_time", "peak_value")}
    if cfg.transmission is not None:
        tc = [_transmission(cfg, p.area, r.imx) for p, r in zip(points, runs)]
        cols["P_linear"] = [t.linearized if t else float("nan") for t in tc]
        cols["P_exact"] = [t.exact if t else float("nan") for t in tc]
    run.table("sweep", cols)


def cmd_steady(cfg: ExperimentConfig, run: _Run):
    rho = steady_state_atom(cfg.params)
    chi = complex(susceptibility(rho, cfg.params)) if cfg.params.omega_p != 0 else complex("nan")
    levels = ("a", "b", "e")
    rows = [(levels[i], levels[j], rho.matrix[i, j]) for i in range(3) for j in range(3)]
    run.table("steady_rho", {
        "row": [r[0] for r in rows], "col": [r[1] for r in rows],
        "real": [float(r[2].real) for r in rows], "imag": [float(r[2].imag) for r in rows],
    })
    lam = float(np.linalg.eigvalsh(rho.matrix)[0])
    run.checks["min_eigenvalue"] = lam
    run.checks["trace_drift"] = abs(float(np.trace(rho.matrix).real) - 1)
    run.document("steady_summary", {
        "populations": {x: float(rho.matrix[i, i].real) for i, x in enumerate(levels)},
        "rho_ea": complex(rho.matrix[2, 0]),
        "chi": chi,
        "im_chi": chi.imag,
        "re_chi": chi.real,
    })


def cmd_herald(cfg: ExperimentConfig, run: _Run):
    h = cfg.herald
    n_list = cfg.grid.n_list or FOCK_N
    model = calibrate(cfg.params, n_list, solver=cfg.solver)
    if h.noise_gap_fraction is not None:
        s = [model.calibration[n] for n in model.n_list]
        model = model.with_noise(h.noise_gap_fraction * (s[1] - s[0]) if len(s) > 1 else 0.0)
    else:
        model = model.with_noise(h.noise_sigma)
    ns = model.n_list
    run.table("herald_calibration", {
        "n": list(ns),
        "S": [model.calibration[n] for n in ns],
        "upper_threshold": list(model.thresholds) + [float("inf")],
    })
    records, summary = run_protocol(h.alpha, model, h.shots, cfg.seed, h.mode, h.target)
    run.table("herald_shots", {
        "shot": [r.shot for r in records],
        "true_n": [r.true_n for r in records],
        "measured_S": [r.measured_s for r in records],
        "verdict_n": [r.verdict_n for r in records],
        "accept": [int(r.accept) for r in records],
    })
    expected = verdict_probability(h.alpha, model, h.target)
    run.document("herald_summary", {
        **asdict(summary),
        "alpha": complex(h.alpha),
        "mean_photon_number": abs(h.alpha) ** 2,
        "noise_sigma": model.noise_sigma,
        "mode": h.mode,
        "seed": cfg.seed,
        "expected_heralding_rate": expected,
    })


COMMANDS = {
    "fig2": cmd_fig2, "fig3": cmd_fig3, "fig4": cmd_fig4, "fig5": cmd_fig5,
    "steady": cmd_steady, "herald": cmd_herald, "sweep": cmd_sweep,
}

_HELP = {
    "fig2": "Im[X(t)] after Fock injection, one panel per dispersive coupling G",
    "fig3": "area S(n) per dispersive coupling G",
    "fig4": "Im[X(t)] and S versus cavity decay kappa",
    "fig5": "Im[X(t)] and S versus common detuning",
    "steady": "steady-state atomic density matrix and susceptibility",
    "herald": "calibrate S(n) and run the heralded-source protocol",
    "sweep": "Cartesian product over (G, kappa, delta, n) emitting S and peaks",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="INI configuration file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
    common.add_argument("--jobs", type=int, metavar="N", help="worker processes for independent runs")
    common.add_argument("--seed", type=int, metavar="S", help="random seed (overrides [run] seed)")
    common.add_argument("--format", choices=FORMATS, help="output table format")
    common.add_argument("--no-claims", action="store_true",
                        help="record post-condition claims without failing the run")
    parser = argparse.ArgumentParser(prog="eitqnd", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name in EXPERIMENTS:
        sub.add_parser(name, parents=[common], help=_HELP[name], description=_HELP[name])
    return parser


def resolve(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if cfg.experiment is not None and cfg.experiment != args.command:
        raise ConfigError(f"config is for experiment {cfg.experiment!r}, not {args.command!r}")
    if args.jobs is not None and args.jobs < 1:
        raise ConfigError("--jobs must be >= 1")
    overrides = {"experiment": args.command}
    if args.out is not None:
        overrides["output_dir"] = args.out
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.format is not None:
        overrides["output_format"] = args.format
    cfg = replace(cfg, **overrides)
    if args.command == "herald":
        n_list = cfg.grid.n_list or FOCK_N
        if cfg.herald.target not in n_list:
            raise ConfigError(f"herald.target {cfg.herald.target} is not in the calibrated n_list {list(n_list)}")
    if args.command in ("fig2", "fig3", "fig4", "fig5", "sweep", "herald") and cfg.params.omega_p == 0:
        raise ConfigError("params.omega_p = 0 leaves the susceptibility undefined")
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve(args)
    except ConfigError as exc:
        print(f"eitqnd: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    Path(cfg.output_dir).mkdir(parents=True, exist_ok=True)
    run = _Run(cfg, args.command)
    start = time.perf_counter()
    code, error = EXIT_OK, None
    try:
        COMMANDS[args.command](cfg, run)
        failed = [c["claim"] for c in run.claims if not c["passed"]]
        if failed and not args.no_claims:
            raise ClaimFailure("post-condition failed: " + "; ".join(failed))
    except CalibrationError as exc:
        code, error = EXIT_CALIBRATION, f"calibration failure: {exc}"
    except (NumericalFailure, StiffnessError, ClaimFailure) as exc:
        code, error = EXIT_NUMERICAL, f"numerical failure: {exc}"
    except EITError as exc:
        # remaining library errors stem from parameter values the config supplied
        code, error = EXIT_CONFIG, f"config error: {exc}"
    run.finish(time.perf_counter() - start, error)
    if error:
        print(f"eitqnd: {error}", file=sys.stderr)
    else:
        print(f"eitqnd {args.command}: wrote {len(run.files)} file(s) to {run.out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
