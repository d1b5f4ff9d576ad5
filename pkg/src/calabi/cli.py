"""Command-line entry point ``calabi``.

Exit codes: 0 success, 1 ``check`` found a failing invariant, 2 bad
command line or configuration, 3 the metric degenerated or a step failed,
4 an iterative solver did not converge.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__
from .config import initial_potential, load_scenario
from .diagnostics import decay_rate_fit, dissipation_identity_check
from .disc import DiscGrid, chart_potential, desingularize
from .errors import (
    EllipticityLost,
    IndefiniteForm,
    InsufficientData,
    NoConvergence,
    NonAdmissible,
    NonPositiveEnergy,
    StepFailure,
)
from .flow import run
from .geometry import VOLUME_CONVENTION, assemble_metric, global_integrals, ricci, scalar_curvature
from .grid import set_workers
from .io import SeriesWriter, read_series, write_json, write_snapshot
from .monitor import jensen_check, report
from .operators import futaki, green_solve, lowest_eigenvalue

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_HALT, EXIT_SOLVER = 0, 1, 2, 3, 4


class ConfigError(Exception):
    pass


def _parser():
    p = argparse.ArgumentParser(prog="calabi", description="Calabi flow on flat complex tori.")
    p.add_argument("--version", action="version", version=f"calabi {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "run": "integrate the flow and write the diagnostic series",
        "curvature": "one-shot geometry and compactness report",
        "spectrum": "lowest nonzero eigenvalue of the Lichnerowicz operator",
        "futaki": "Futaki character on the coordinate vector fields",
        "desing": "puncture removal on the unit disc",
        "check": "evaluate the invariant suite on a run",
    }
    for name, text in helps.items():
        s = sub.add_parser(name, help=text)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--out", default=".", metavar="DIR")
        s.add_argument("--threads", type=int, default=None, metavar="K")
        if name == "check":
            s.add_argument("--series", default=None, metavar="CSV",
                           help="analyse an existing series instead of running the scenario")
    return p


def _threads(arg):
    if arg is not None:
        return arg
    env = os.environ.get("CALABI_THREADS")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"CALABI_THREADS must be an integer, got {env!r}") from exc


def _load(path):
    try:
        return load_scenario(path)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"invalid scenario:\n{exc}") from exc


def _initial(sc, cfg_path):
    try:
        return initial_potential(sc, Path(cfg_path).parent)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot build initial potential: {exc}") from exc


def _flow(sc, cfg_path, out):
    g = sc.grid.build()
    phi0 = _initial(sc, cfg_path)
    prefix = sc.output.snapshot_prefix

    def snap(t, phi):
        write_snapshot(out / f"{prefix}_t{t:.6g}.cfsf", phi, g.n)

    with SeriesWriter(out / sc.output.series) as w:
        res = run(g, phi0, sc.integrator.build(), on_record=w, snapshot_times=sc.output.snapshot_times,
                  on_snapshot=snap, k_cut=sc.monitors.tail_k_cut)
    status = {
        "cause": res.cause,
        "message": str(res.error) if res.error else "",
        "t": res.state.t,
        "steps": res.steps,
        "rejected_steps": res.rejected,
        "monotonicity_violations": len(res.violations),
        "volume_convention": VOLUME_CONVENTION,
    }
    write_snapshot(out / f"{prefix}_final.cfsf", res.state.phi, g.n)
    if sc.monitors.compactness:
        status["compactness"] = report(res.state.metric).__dict__
    write_json(out / sc.output.status, status)
    return res


def cmd_run(sc, cfg_path, out):
    res = _flow(sc, cfg_path, out)
    return EXIT_HALT if res.cause in ("non_admissible", "step_failure") else EXIT_OK


def _metric(sc, cfg_path):
    g = sc.grid.build()
    return g, assemble_metric(g, _initial(sc, cfg_path))


def cmd_curvature(sc, cfg_path, out):
    g, m = _metric(sc, cfg_path)
    R = scalar_curvature(m, ricci(m))
    ok, margin = jensen_check(m)
    integ = global_integrals(m, R)
    write_snapshot(out / "scalar_curvature.cfsf", R, g.n)
    write_json(out / "curvature.json", {
        "integrals": integ.__dict__,
        "compactness": report(m).__dict__,
        "jensen": {"ok": ok, "margin": margin},
        "volume_convention": VOLUME_CONVENTION,
    })
    return EXIT_OK


def cmd_spectrum(sc, cfg_path, out):
    _, m = _metric(sc, cfg_path)
    rep = lowest_eigenvalue(m, tol=sc.solver.eig_tol, maxiter=sc.solver.eig_maxiter, seed=sc.seed)
    write_json(out / "spectrum.json", {
        "eigenvalue": rep.eigenvalue,
        "rayleigh_residual": rep.rayleigh_residual,
        "iterations": rep.iterations,
    })
    return EXIT_OK


def cmd_futaki(sc, cfg_path, out):
    g, m = _metric(sc, cfg_path)
    R = scalar_curvature(m)
    green = green_solve(m, R, tol=sc.solver.green_tol)
    integ = global_integrals(m, R)
    vals = [futaki(m, j, R, green) for j in range(g.n)]
    write_json(out / "futaki.json", {
        "values": [[v.real, v.imag] for v in vals],
        "scale": float(np.sqrt(integ.calabi * integ.volume)),
        "green_residual": green.residual_norm,
        "green_iterations": green.iterations,
    })
    return EXIT_OK


def cmd_desing(sc, cfg_path, out):
    d = sc.disc
    try:
        dg = DiscGrid(d.N_d, d.puncture)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    x, y = dg.xy
    kind = d.potential.kind
    if kind == "zero":
        phi = np.zeros(dg.shape)
    elif kind == "quartic":
        phi = (x * x + y * y) ** 2 / 16.0
    else:
        if sc.grid.n != 1:
            raise ConfigError("torus charts need a grid with n = 1")
        tphi = run(sc.grid.build(), _initial(sc, cfg_path), sc.integrator.build()).state.phi \
            if d.potential.flow_first else _initial(sc, cfg_path)
        phi = chart_potential(sc.grid.build(), tphi, dg, d.potential.centre)
    res = desingularize(dg, phi, d.Rbar, tol=d.tol)
    threshold = 10.0 * (d.tol + dg.h)
    # padded disc grid, values outside the disc are zero
    write_snapshot(out / "u0.cfsf", res.u0, 1)
    write_json(out / "desing.json", {
        "energy": res.solution.energy,
        "residual": res.solution.residual,
        "iterations": res.solution.iterations,
        "sup_v": res.sup_v,
        "threshold": threshold,
        "removable": bool(res.sup_v <= threshold),
        "h": dg.h,
    })
    return EXIT_OK


def cmd_check(sc, cfg_path, out, series_path):
    checks = {}
    if series_path is not None:
        try:
            recs = read_series(series_path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read series: {exc}") from exc
        violations = None
    else:
        res = _flow(sc, cfg_path, out)
        recs = res.records
        violations = len(res.violations)
        checks["halt"] = {"pass": res.cause in ("t_end", "stationary"), "cause": res.cause}
    c = sc.check
    V0, S0 = recs[0].V, recs[0].S
    dV = max(abs(r.V - V0) for r in recs) / abs(V0)
    dS = max(abs(r.S - S0) for r in recs) / max(abs(S0), abs(V0))
    checks["conservation"] = {"pass": bool(dV <= c.conservation_rtol and dS <= c.conservation_rtol),
                              "volume": dV, "total_scalar": dS}
    cam0 = recs[0].Cam
    rises = [b.Cam - a.Cam for a, b in zip(recs, recs[1:])]
    worst = max(rises, default=0.0)
    checks["monotonicity"] = {"pass": bool(worst <= 1e-10 * cam0 and not violations),
                              "max_increase": worst, "step_violations": violations}
    if c.expected_decay_rate is not None:
        try:
            delta, resid = decay_rate_fit(recs, c.decay_window)
            rel = abs(delta - c.expected_decay_rate) / c.expected_decay_rate
            checks["decay_rate"] = {"pass": bool(rel <= c.decay_rtol), "delta": delta,
                                    "relative_error": rel, "fit_residual": resid}
        except (InsufficientData, NonPositiveEnergy) as exc:
            checks["decay_rate"] = {"pass": False, "error": str(exc)}
    if c.identity_tol is not None:
        try:
            ic = dissipation_identity_check(recs)
            checks["dissipation_identity"] = {"pass": bool(ic.defect <= c.identity_tol),
                                              "defect": ic.defect, "degenerate": ic.degenerate}
        except InsufficientData as exc:
            checks["dissipation_identity"] = {"pass": False, "error": str(exc)}
    ok = all(v["pass"] for v in checks.values())
    write_json(out / "check.json", {"pass": ok, "checks": checks})
    for name, v in checks.items():
        print(f"{'PASS' if v['pass'] else 'FAIL'} {name}")
    return EXIT_OK if ok else EXIT_CHECK


COMMANDS = {
    "run": cmd_run,
    "curvature": cmd_curvature,
    "spectrum": cmd_spectrum,
    "futaki": cmd_futaki,
    "desing": cmd_desing,
}


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        set_workers(_threads(args.threads))
        sc = _load(args.config)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "check":
            return cmd_check(sc, args.config, out, args.series)
        return COMMANDS[args.command](sc, args.config, out)
    except ConfigError as exc:
        print(f"calabi: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonAdmissible, StepFailure, EllipticityLost) as exc:
        print(f"calabi: halted: {exc}", file=sys.stderr)
        return EXIT_HALT
    except (NoConvergence, IndefiniteForm) as exc:
        print(f"calabi: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
