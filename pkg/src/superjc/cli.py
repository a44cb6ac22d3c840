"""Command-line entry points.

Exit codes: 0 success, 1 invalid configuration, 2 convergence-audit failure,
3 I/O error.
"""
from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import yaml

from . import dynamics, io, observables, scenarios
from .errors import ParseError, UnknownPreset, ValidationError, WindowTooSmall

EXIT_OK, EXIT_INVALID, EXIT_AUDIT, EXIT_IO = 0, 1, 2, 3


def _windows(basis) -> dict:
    return {"window1": [basis.window1.n_min, basis.window1.n_max],
            "window2": [basis.window2.n_min, basis.window2.n_max],
            "dimension": basis.dimension}


def _audit_dict(audit: dynamics.AuditResult) -> dict:
    r = audit.report
    return {"passed": audit.passed,
            "max_norm_drift_per_step": r.max_norm_drift_per_step,
            "max_excitation_drift": r.max_excitation_drift,
            "max_boundary_occupancy": r.max_boundary_occupancy,
            "edge_occupancy": r.edge_occupancy,
            "failures": list(audit.failures)}


def _comments(spec: io.RunSpec, audit: dynamics.AuditResult, basis) -> list[str]:
    lines = [f"{k}: {v}" for k, v in io.config_echo(spec).items()]
    lines.append(f"windows: {basis.window1} x {basis.window2}")
    lines.append(f"audit: {audit.summary()}")
    return lines


def _output_path(spec: io.RunSpec, override, suffix: str) -> Path:
    if override:
        return Path(override)
    if spec.output:
        return Path(spec.output)
    stem = Path(spec.source).stem if spec.source else "run"
    return Path(f"{stem}{suffix}")


def cmd_evolve(args) -> int:
    spec = io.parse_config(args.config)
    start = time.perf_counter()
    traj = dynamics.evolve(spec.config)
    audit = dynamics.convergence_audit(traj, *spec.tolerances)
    elapsed = time.perf_counter() - start
    out = _output_path(spec, args.output, ".csv")
    basis = traj.final_state.basis
    io.write_trajectory(traj, out, _comments(spec, audit, basis))
    mpath = Path(spec.manifest) if spec.manifest else out.with_suffix(".json")
    io.write_manifest(io.manifest(spec, _windows(basis), _audit_dict(audit), [str(out)], elapsed),
                      mpath)
    print(f"P_X = {traj.p_x[-1]:.6f}  <dn1> = {traj.delta_n1[-1]:+.6f}  "
          f"<dn2> = {traj.delta_n2[-1]:+.6f}  -> {out}")
    print(audit.summary())
    return EXIT_OK if audit.passed else EXIT_AUDIT


def cmd_sweep(args) -> int:
    spec = io.parse_config(args.config)
    if not spec.is_sweep:
        raise ValidationError(f"{args.config}: no sweep axes (set sweep_x and sweep_y)")
    workers = args.workers or spec.workers
    start = time.perf_counter()
    progress = None
    if not args.quiet:
        def progress(done, total):
            if done == total or done % max(1, total // 20) == 0:
                print(f"  {done}/{total} cells", file=sys.stderr)
    grid = scenarios.run_sweep(spec.config, spec.axis_x, spec.axis_y, workers=workers,
                               tolerances=spec.tolerances, progress=progress)
    elapsed = time.perf_counter() - start
    out = _output_path(spec, args.output, ".csv")
    failed = int((~grid.audit_pass).sum())
    audit = {"cells": grid.p_x.size, "failed_cells": failed,
             "retried_cells": int(grid.retried.sum()),
             "errors": {f"{iy},{ix}": msg for (iy, ix), msg in grid.errors.items()}}
    data = io.manifest(spec, {"base": _windows(spec.config.basis())}, audit,
                       [str(out), str(out.with_suffix(".json"))], elapsed)
    io.write_grid(grid, out, data)
    best = scenarios.locate_maxima(grid)
    if best:
        m = best[0]
        print(f"max P_X = {m.p_x:.6f} at {grid.axis_x.parameter}={m.x}, "
              f"{grid.axis_y.parameter}={m.y}")
    print(f"{grid.p_x.size} cells, {failed} failed the convergence audit -> {out}")
    return EXIT_OK if failed == 0 else EXIT_AUDIT


def cmd_oracle(args) -> int:
    spec = io.parse_config(args.config)
    substeps = args.substeps or spec.oracle_substeps
    traj = dynamics.evolve(spec.config)
    ref = dynamics.oracle_propagate(spec.config, substeps, order=args.order or spec.oracle_order)
    fid = observables.fidelity(traj.final_state, ref)
    print(f"RK4 P_X = {traj.p_x[-1]:.12f}")
    print(f"oracle P_X = {observables.exciton_population(ref):.12f}")
    print(f"fidelity = {fid:.15f}  (1 - F = {1 - fid:.3e})")
    return EXIT_OK


def cmd_audit(args) -> int:
    spec = io.parse_config(args.config)
    traj = dynamics.evolve(spec.config)
    audit = dynamics.convergence_audit(traj, *spec.tolerances)
    basis = traj.final_state.basis
    print(f"windows {basis.window1} x {basis.window2} (dimension {basis.dimension})")
    print(audit.summary())
    for name, v in audit.report.edge_occupancy.items():
        print(f"  {name}: {v:.3e}")
    for f in audit.failures:
        print(f"  failed: {f}")
    if not audit.passed and args.widen:
        traj, audit = dynamics.evolve_converged(spec.config, spec.tolerances, args.widen)
        b = traj.final_state.basis
        print(f"after widening: windows {b.window1} x {b.window2}: {audit.summary()}")
    return EXIT_OK if audit.passed else EXIT_AUDIT


def cmd_preset(args) -> int:
    if args.action == "list":
        for name, text in scenarios.PRESET_DESCRIPTIONS.items():
            kind = "sweep" if scenarios.is_sweep_preset(name) else "run"
            print(f"{name:18s} {kind:5s}  {text}")
        return EXIT_OK
    if not args.name:
        raise ValidationError("preset show needs a preset name")
    spec = io.spec_from_mapping({"preset": args.name}, args.name)
    print(yaml.safe_dump(io.config_echo(spec), sort_keys=False, default_flow_style=None), end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superjc", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("evolve", help="integrate one configuration and write its trajectory CSV")
    e.add_argument("config")
    e.add_argument("-o", "--output")
    e.set_defaults(func=cmd_evolve)

    s = sub.add_parser("sweep", help="run a 2D parameter sweep and write the grid CSV")
    s.add_argument("config")
    s.add_argument("-o", "--output")
    s.add_argument("-j", "--workers", type=int)
    s.add_argument("-q", "--quiet", action="store_true")
    s.set_defaults(func=cmd_sweep)

    o = sub.add_parser("oracle", help="compare RK4 with the dense exact-unitary propagator")
    o.add_argument("config")
    o.add_argument("--substeps", type=int)
    o.add_argument("--order", type=int, choices=(2, 4))
    o.set_defaults(func=cmd_oracle)

    a = sub.add_parser("audit", help="window-convergence report for one configuration")
    a.add_argument("config")
    a.add_argument("--widen", type=int, default=0, metavar="N",
                   help="on failure, retry with up to N window doublings")
    a.set_defaults(func=cmd_audit)

    pr = sub.add_parser("preset", help="list or show the pinned presets")
    pr.add_argument("action", choices=("list", "show"))
    pr.add_argument("name", nargs="?")
    pr.set_defaults(func=cmd_preset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, ValidationError, UnknownPreset, WindowTooSmall) as exc:
        msg = exc.args[0] if isinstance(exc, UnknownPreset) else str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
