"""Configuration files, CSV output and run manifests.

A configuration is a flat YAML mapping; every key is optional and a
``preset`` key supplies defaults that the remaining keys override::

    preset: vacuum_fig3c
    dt: 2.0e-3
    output: fig3c.csv

Sweep ranges for occupation axes are given in sqrt(n), matching how the
maps are plotted; occupations are rounded to integers.
"""
from __future__ import annotations

import json
import math
import platform
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from .dynamics import DEFAULT_TOLERANCES, SimConfig, Trajectory
from .errors import ParseError, UnknownPreset, ValidationError
from .hilbert import Coherent, EmitterLevel, Fock, TruncationWindow
from .scenarios import (OCCUPATION_PARAMETERS, SweepAxis, SweepGrid, preset,
                        sqrt_occupation_axis)

TRAJECTORY_HEADER = "tau,p_x,n1,n2,delta_n1,delta_n2,excitation,norm_drift"
GRID_HEADER = "x_value,y_value,p_x,delta_n1,delta_n2,audit_pass"

_SCALAR_FLOAT = ("delta1", "delta2", "g1", "g2", "dt", "span_sigma", "coherent_eps",
                 "tol_norm", "tol_excitation", "tol_boundary", "alpha1_sq", "alpha2_sq")
_SCALAR_INT = ("n1_init", "n2_init", "record_stride", "half_width", "workers",
               "oracle_substeps", "oracle_order")
_STRINGS = ("preset", "emitter", "output", "manifest", "sweep_x", "sweep_y")
_OTHER = ("alpha1", "alpha2", "window1", "window2", "sweep_x_values", "sweep_y_values",
          "sweep_x_range", "sweep_y_range")
KNOWN_KEYS = frozenset(_SCALAR_FLOAT + _SCALAR_INT + _STRINGS + _OTHER)


@dataclass(frozen=True)
class RunSpec:
    """Everything one CLI job needs: a config, optional sweep axes, outputs."""

    config: SimConfig
    axis_x: Optional[SweepAxis] = None
    axis_y: Optional[SweepAxis] = None
    output: Optional[str] = None
    manifest: Optional[str] = None
    workers: int = 1
    tolerances: tuple = DEFAULT_TOLERANCES
    oracle_substeps: int = 4
    oracle_order: int = 4
    source: Optional[str] = field(default=None, compare=False)

    @property
    def is_sweep(self) -> bool:
        return self.axis_x is not None


def _load_mapping(text: str, name: str) -> tuple[dict, dict]:
    """Parse a flat YAML mapping, returning values and the line of each key."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}" if mark is not None else "unknown line"
        raise ParseError(f"{name}: {where}: {getattr(exc, 'problem', exc)}") from None
    if root is None:
        return {}, {}
    if not isinstance(root, yaml.MappingNode):
        raise ParseError(f"{name}: line {root.start_mark.line + 1}: top level must be a mapping")
    values, lines = {}, {}
    for key_node, value_node in root.value:
        key = key_node.value
        line = key_node.start_mark.line + 1
        if key in values:
            raise ParseError(f"{name}: line {line}: duplicate key {key!r}")
        if key not in KNOWN_KEYS:
            raise ParseError(f"{name}: line {line}: unknown key {key!r}")
        if isinstance(value_node, yaml.MappingNode):
            raise ParseError(f"{name}: line {line}: key {key!r} must not be a nested mapping")
        values[key] = yaml.safe_load(yaml.serialize(value_node))
        lines[key] = line
    return values, lines


def _window(value) -> Optional[TruncationWindow]:
    if value is None or value == "auto":
        return None
    if isinstance(value, str):
        lo, sep, hi = value.partition("..")
        if not sep:
            raise ValueError(f"window {value!r} must look like 'lo..hi' or [lo, hi]")
        return TruncationWindow(int(lo), int(hi))
    lo, hi = value
    return TruncationWindow(int(lo), int(hi))


def _axis(param: str, values, rng) -> SweepAxis:
    if values is not None and rng is not None:
        raise ValueError(f"give either values or range for the {param} axis, not both")
    if values is not None:
        return SweepAxis(param, tuple(values))
    if rng is None:
        raise ValueError(f"sweep axis {param} needs values or range")
    start, stop, num = rng
    if param in OCCUPATION_PARAMETERS:
        return sqrt_occupation_axis(param, float(stop), rows=int(num), sqrt_min=float(start))
    return SweepAxis(param, tuple(np.linspace(float(start), float(stop), int(num))))


def spec_from_mapping(values: dict, name: str = "<config>", lines: Optional[dict] = None) -> RunSpec:
    """Build a validated :class:`RunSpec` from already-parsed key/value pairs."""
    lines = lines or {}

    def where(key):
        return f"{name}: line {lines[key]}: " if key in lines else f"{name}: "

    def get(key, kind):
        raw = values[key]
        try:
            if kind is float:
                if isinstance(raw, bool):
                    raise TypeError
                return float(raw)
            if kind is int:
                if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                    raise TypeError
                return int(raw)
            return str(raw)
        except (TypeError, ValueError):
            raise ParseError(f"{where(key)}key {key!r}: expected {kind.__name__}, got {raw!r}") from None

    for key in values:
        if key in _SCALAR_FLOAT:
            get(key, float)
        elif key in _SCALAR_INT:
            get(key, int)

    cfg, ax, ay = SimConfig(), None, None
    if "preset" in values:
        try:
            base = preset(get("preset", str))
        except UnknownPreset as exc:
            raise ParseError(f"{where('preset')}{exc.args[0]}") from None
        cfg, ax, ay = base if isinstance(base, tuple) else (base, None, None)

    changes = {}
    for key in ("delta1", "delta2", "g1", "g2", "dt", "span_sigma", "coherent_eps"):
        if key in values:
            changes[key] = get(key, float)
    for key in ("record_stride", "half_width"):
        if key in values:
            changes[key] = get(key, int)
    if "emitter" in values:
        try:
            changes["emitter_init"] = EmitterLevel.parse(values["emitter"])
        except ValueError as exc:
            raise ParseError(f"{where('emitter')}{exc}") from None
    problems = []
    for j in (1, 2):
        given = [k for k in (f"n{j}_init", f"alpha{j}", f"alpha{j}_sq") if k in values]
        if len(given) > 1:
            problems.append(f"mode {j}: set only one of {', '.join(given)}")
            continue
        try:
            if f"n{j}_init" in values:
                changes[f"field{j}_init"] = Fock(get(f"n{j}_init", int))
            elif f"alpha{j}" in values:
                changes[f"field{j}_init"] = Coherent(complex(str(values[f"alpha{j}"]).replace(" ", "")))
            elif f"alpha{j}_sq" in values:
                sq = get(f"alpha{j}_sq", float)
                if sq < 0:
                    raise ValueError(f"alpha{j}_sq must be >= 0")
                changes[f"field{j}_init"] = Coherent(math.sqrt(sq))
        except ValueError as exc:
            problems.append(str(exc))
        if f"window{j}" in values:
            try:
                changes[f"window{j}"] = _window(values[f"window{j}"])
            except (TypeError, ValueError) as exc:
                problems.append(f"window{j}: {exc}")
    if problems:
        raise ValidationError([f"{name}: {p}" for p in problems])
    try:
        cfg = cfg.replace(**changes)
    except ValidationError as exc:
        raise ValidationError([f"{name}: {p}" for p in exc.problems]) from None

    try:
        for axis_name in ("x", "y"):
            key = f"sweep_{axis_name}"
            vals = values.get(f"{key}_values")
            rng = values.get(f"{key}_range")
            if key in values:
                axis = _axis(get(key, str), vals, rng)
            elif vals is not None or rng is not None:
                current = ax if axis_name == "x" else ay
                if current is None:
                    raise ValueError(f"{key}_values/{key}_range given without {key}")
                axis = _axis(current.parameter, vals, rng)
            else:
                continue
            if axis_name == "x":
                ax = axis
            else:
                ay = axis
        if (ax is None) != (ay is None):
            raise ValueError("a sweep needs both sweep_x and sweep_y")
        if ax is not None and ax.parameter == ay.parameter:
            raise ValueError("sweep axes must modify distinct parameters")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ValidationError(f"{name}: {exc}") from None

    tol = list(DEFAULT_TOLERANCES)
    for k, key in enumerate(("tol_norm", "tol_excitation", "tol_boundary")):
        if key in values:
            tol[k] = get(key, float)
    workers = get("workers", int) if "workers" in values else 1
    if workers < 1:
        raise ValidationError(f"{name}: workers must be >= 1")
    order = get("oracle_order", int) if "oracle_order" in values else 4
    if order not in (2, 4):
        raise ValidationError(f"{name}: oracle_order must be 2 or 4")
    substeps = get("oracle_substeps", int) if "oracle_substeps" in values else 4
    if substeps < 1:
        raise ValidationError(f"{name}: oracle_substeps must be >= 1")
    return RunSpec(cfg, ax, ay,
                   output=get("output", str) if "output" in values else None,
                   manifest=get("manifest", str) if "manifest" in values else None,
                   workers=workers, tolerances=tuple(tol), oracle_substeps=substeps,
                   oracle_order=order, source=name)


def parse_config(path) -> RunSpec:
    """Read a YAML config, or the ``config`` block of a JSON run manifest."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        try:
            values = json.loads(text)["config"]
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ParseError(f"{path}: not a run manifest ({exc})") from None
        unknown = sorted(set(values) - KNOWN_KEYS)
        if unknown:
            raise ParseError(f"{path}: unknown keys {unknown}")
        return spec_from_mapping(values, str(path))
    values, lines = _load_mapping(text, str(path))
    return spec_from_mapping(values, str(path), lines)


def _field_echo(init) -> tuple[str, object]:
    if isinstance(init, Fock):
        return "n{}_init", init.n
    a = init.amplitude
    return "alpha{}", (a.real if a.imag == 0 else repr(a))


def config_echo(spec: RunSpec) -> dict:
    """Flat mapping with every setting explicit; feeding it back reproduces ``spec``."""
    cfg = spec.config
    out = {
        "delta1": cfg.delta1, "delta2": cfg.delta2, "g1": cfg.g1, "g2": cfg.g2,
        "emitter": cfg.emitter_init.name.lower(),
    }
    for j, init in ((1, cfg.field1_init), (2, cfg.field2_init)):
        key, val = _field_echo(init)
        out[key.format(j)] = val
    for j, win in ((1, cfg.window1), (2, cfg.window2)):
        out[f"window{j}"] = "auto" if win is None else [win.n_min, win.n_max]
    out.update(dt=cfg.dt, record_stride=cfg.record_stride, span_sigma=cfg.span_sigma,
               half_width=cfg.half_width, coherent_eps=cfg.coherent_eps,
               tol_norm=spec.tolerances[0], tol_excitation=spec.tolerances[1],
               tol_boundary=spec.tolerances[2], workers=spec.workers,
               oracle_substeps=spec.oracle_substeps, oracle_order=spec.oracle_order)
    if spec.is_sweep:
        out.update(sweep_x=spec.axis_x.parameter, sweep_x_values=list(spec.axis_x.values),
                   sweep_y=spec.axis_y.parameter, sweep_y_values=list(spec.axis_y.values))
    if spec.output is not None:
        out["output"] = spec.output
    if spec.manifest is not None:
        out["manifest"] = spec.manifest
    return out


def dump_config(spec: RunSpec, path) -> None:
    Path(path).write_text(yaml.safe_dump(config_echo(spec), sort_keys=False,
                                         default_flow_style=None))


def manifest(spec: RunSpec, windows: dict, audit: dict, artifacts: list,
             wall_clock: float) -> dict:
    cfg = spec.config
    return {
        "config": config_echo(spec),
        "integrator": {"method": "rk4", "renormalize_each_step": True, "dt": cfg.dt,
                       "n_steps": cfg.n_steps, "record_stride": cfg.record_stride,
                       "tau_start": -cfg.span_sigma, "tau_end": cfg.span_sigma},
        "windows": windows,
        "audit": audit,
        "wall_clock_seconds": wall_clock,
        "artifacts": artifacts,
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
    }


def write_manifest(data: dict, path) -> None:
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=False) + "\n")


def _num(x) -> str:
    return f"{float(x):.16e}"


def write_trajectory(traj: Trajectory, path, comments=()) -> None:
    """Time series as CSV; ``comments`` become leading ``#`` lines."""
    lines = [f"# {c}" for c in comments]
    lines.append(TRAJECTORY_HEADER)
    dn1, dn2 = traj.delta_n1, traj.delta_n2
    for k in range(traj.times.size):
        lines.append(",".join(_num(v) for v in (
            traj.times[k], traj.p_x[k], traj.n1[k], traj.n2[k], dn1[k], dn2[k],
            traj.excitation[k], traj.norm_drift[k])))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory_csv(path) -> np.ndarray:
    """Numeric block of a trajectory CSV as an array of shape (rows, 8)."""
    return np.loadtxt(path, delimiter=",", comments="#", skiprows=_header_row(path) + 1, ndmin=2)


def _header_row(path) -> int:
    with open(path) as fh:
        for k, line in enumerate(fh):
            if not line.startswith("#"):
                return k
    return 0


def _axis_value(axis: SweepAxis, v) -> str:
    return str(int(v)) if axis.parameter in OCCUPATION_PARAMETERS else _num(v)


def write_grid(grid: SweepGrid, path, manifest_data: Optional[dict] = None) -> Path:
    """Long-format grid CSV (row-major, x fastest) plus a JSON manifest next to it.

    Returns the manifest path.
    """
    path = Path(path)
    lines = [GRID_HEADER]
    ny, nx = grid.shape
    for iy in range(ny):
        for ix in range(nx):
            lines.append(",".join((
                _axis_value(grid.axis_x, grid.axis_x.values[ix]),
                _axis_value(grid.axis_y, grid.axis_y.values[iy]),
                _num(grid.p_x[iy, ix]), _num(grid.delta_n1[iy, ix]), _num(grid.delta_n2[iy, ix]),
                "1" if grid.audit_pass[iy, ix] else "0")))
    path.write_text("\n".join(lines) + "\n")
    mpath = path.with_suffix(".json")
    data = dict(manifest_data or {})
    data.setdefault("grid", {"x": grid.axis_x.parameter, "y": grid.axis_y.parameter,
                             "shape": [ny, nx], "failed_cells": int((~grid.audit_pass).sum())})
    write_manifest(data, mpath)
    return mpath
