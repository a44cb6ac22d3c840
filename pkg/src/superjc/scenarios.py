"""Parameter sweeps, resonance location and pinned preset configurations."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.signal import find_peaks

from .dynamics import DEFAULT_TOLERANCES, SimConfig, evolve, evolve_converged
from .errors import UnknownPreset
from .hilbert import Coherent, EmitterLevel, Fock, TruncationWindow

PARAMETERS = ("delta1", "delta2", "g1", "g2", "n1_init", "n2_init", "alpha1_sq", "alpha2_sq")
OCCUPATION_PARAMETERS = ("n1_init", "n2_init")


@dataclass(frozen=True)
class SweepAxis:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in PARAMETERS:
            raise ValueError(f"unknown sweep parameter {self.parameter!r}; choose from {PARAMETERS}")
        vals = tuple(self.values)
        if not vals:
            raise ValueError("sweep axis needs at least one value")
        if self.parameter in OCCUPATION_PARAMETERS:
            if any(int(v) != v or v < 0 for v in vals):
                raise ValueError(f"{self.parameter} values must be non-negative integers")
            vals = tuple(int(v) for v in vals)
        else:
            vals = tuple(float(v) for v in vals)
        diffs = np.diff(vals)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError(f"{self.parameter} values must be strictly monotone")
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    @property
    def plot_values(self) -> np.ndarray:
        """Axis coordinates as plotted: sqrt(n) for Fock occupations."""
        v = np.asarray(self.values, dtype=float)
        return np.sqrt(v) if self.parameter in OCCUPATION_PARAMETERS else v

    def subsample(self, every: int) -> "SweepAxis":
        return SweepAxis(self.parameter, self.values[::every])


def sqrt_occupation_axis(parameter: str, sqrt_max: float, rows: int = 200,
                         sqrt_min: float = 0.0) -> SweepAxis:
    """Integer occupations evenly spaced in sqrt(n), at most ``rows`` of them."""
    n = np.unique(np.round(np.linspace(sqrt_min, sqrt_max, rows) ** 2).astype(int))
    return SweepAxis(parameter, tuple(n))


def apply_parameter(cfg: SimConfig, parameter: str, value) -> SimConfig:
    """Copy of ``cfg`` with one swept parameter set.

    Changing an initial field state drops that mode's explicit window so it
    is re-derived around the new occupation.
    """
    if parameter in ("delta1", "delta2", "g1", "g2"):
        return cfg.replace(**{parameter: float(value)})
    mode = next(c for c in parameter if c in "12")
    if parameter.startswith("n"):
        init = Fock(int(value))
    else:
        init = Coherent(math.sqrt(float(value)))
    return cfg.replace(**{f"field{mode}_init": init, f"window{mode}": None})


@dataclass(frozen=True, eq=False)
class SweepGrid:
    """Final-state observables on a 2D grid.

    Arrays are indexed ``[iy, ix]``; flattening in C order walks the grid
    row-major with the x axis fastest.
    """

    axis_x: SweepAxis
    axis_y: SweepAxis
    p_x: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    delta_n1: np.ndarray
    delta_n2: np.ndarray
    excitation_drift: np.ndarray
    audit_pass: np.ndarray
    retried: np.ndarray
    errors: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.p_x.shape

    def coordinates(self, ix: int, iy: int) -> tuple:
        return self.axis_x.values[ix], self.axis_y.values[iy]


def _cell_config(base: SimConfig, ax: SweepAxis, ay: SweepAxis, ix: int, iy: int) -> SimConfig:
    cfg = apply_parameter(base, ax.parameter, ax.values[ix])
    return apply_parameter(cfg, ay.parameter, ay.values[iy])


def _run_cell(args):
    base, ax, ay, ix, iy, tolerances, retry = args
    try:
        cfg = _cell_config(base, ax, ay, ix, iy)
        traj, audit = evolve_converged(cfg, tolerances, max_widenings=1 if retry else 0)
    except ValueError as exc:
        nan = math.nan
        return (nan, nan, nan, nan, nan, nan, False, False, f"{type(exc).__name__}: {exc}")
    return (traj.p_x[-1], traj.n1[-1], traj.n2[-1], traj.delta_n1[-1], traj.delta_n2[-1],
            traj.audit.max_excitation_drift, audit.passed,
            traj.final_state.basis != cfg.basis(), None)


def run_sweep(base: SimConfig, ax: SweepAxis, ay: SweepAxis, workers: int = 1,
              tolerances=DEFAULT_TOLERANCES, retry: bool = True,
              progress: Optional[Callable[[int, int], None]] = None) -> SweepGrid:
    """Evolve every grid point and collect final observables.

    Cells are independent; with ``workers > 1`` they run in a process pool
    and the result is bit-identical to the serial sweep.  A cell whose
    convergence audit fails is re-run once on doubled windows; if it still
    fails it is flagged in ``audit_pass``.  Cells that cannot be run at all
    (e.g. an initial state outside its window) are recorded as NaN with the
    error message in ``errors``.
    """
    if ax.parameter == ay.parameter:
        raise ValueError("sweep axes must modify distinct parameters")
    cells = [(iy, ix) for iy in range(len(ay)) for ix in range(len(ax))]
    tasks = [(base, ax, ay, ix, iy, tolerances, retry) for iy, ix in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    else:
        results = []
        for k, task in enumerate(tasks):
            results.append(_run_cell(task))
            if progress is not None:
                progress(k + 1, len(tasks))
    shape = (len(ay), len(ax))
    cols = list(zip(*results))
    arr = lambda k, dtype=float: np.array(cols[k], dtype=dtype).reshape(shape)
    errors = {cells[k]: r[8] for k, r in enumerate(results) if r[8] is not None}
    return SweepGrid(ax, ay, arr(0), arr(1), arr(2), arr(3), arr(4), arr(5),
                     arr(6, bool), arr(7, bool), errors)


@dataclass(frozen=True)
class Maximum:
    ix: int
    iy: int
    x: float
    y: float
    p_x: float


def locate_maxima(grid: SweepGrid, threshold: float = 0.0) -> list[Maximum]:
    """Strict local maxima of P_X over the 8-neighborhood, above ``threshold``.

    Sorted by descending P_X, ties broken in row-major order.
    """
    p = grid.p_x
    ny, nx = p.shape
    found = []
    for iy in range(ny):
        for ix in range(nx):
            v = p[iy, ix]
            if not v > threshold:
                continue
            neighbors = p[max(0, iy - 1):iy + 2, max(0, ix - 1):ix + 2]
            if np.sum(neighbors >= v) == 1:  # only the cell itself
                found.append(Maximum(ix, iy, grid.axis_x.values[ix], grid.axis_y.values[iy],
                                     float(v)))
    found.sort(key=lambda m: (-m.p_x, m.iy, m.ix))
    return found


def count_local_maxima(series: Sequence[float], prominence: float = 0.01) -> int:
    """Number of peaks in a time series that stand out by at least ``prominence``.

    The prominence floor keeps integration ripple on a plateau from counting
    as an oscillation.
    """
    peaks, _ = find_peaks(np.asarray(series, dtype=float), prominence=prominence)
    return int(peaks.size)


def refine_axis(axis: SweepAxis, center, half_span, step) -> SweepAxis:
    """Axis of the same parameter around ``center``.

    Occupation axes are refined in sqrt(n) and rounded to integers.
    """
    if axis.parameter in OCCUPATION_PARAMETERS:
        s = math.sqrt(center)
        grid = np.arange(max(0.0, s - half_span), s + half_span + 1e-9, step)
        return SweepAxis(axis.parameter, tuple(np.unique(np.round(grid ** 2).astype(int))))
    return SweepAxis(axis.parameter, tuple(np.arange(center - half_span,
                                                     center + half_span + 1e-9 * step, step)))


def extend_axis(axis: SweepAxis, at_start: bool) -> SweepAxis:
    """Grow an axis by half its span on one side (used when a maximum sits on an edge)."""
    v = np.asarray(axis.values, dtype=float)
    n = max(2, len(v) // 2)
    step = (v[-1] - v[0]) / max(1, len(v) - 1)
    if at_start:
        new = v[0] - step * np.arange(n, 0, -1)
        vals = np.concatenate([new, v])
    else:
        vals = np.concatenate([v, v[-1] + step * np.arange(1, n + 1)])
    if axis.parameter in OCCUPATION_PARAMETERS or axis.parameter.endswith("_sq"):
        vals = vals[vals >= 0]
    if axis.parameter in OCCUPATION_PARAMETERS:
        vals = np.unique(np.round(vals).astype(int))
    return SweepAxis(axis.parameter, tuple(vals))


def find_resonance(base: SimConfig, ax: SweepAxis, ay: SweepAxis, max_extensions: int = 2,
                   **sweep_kw) -> tuple[SweepGrid, Maximum]:
    """Sweep, and keep extending an axis while the global maximum sits on its edge."""
    for attempt in range(max_extensions + 1):
        grid = run_sweep(base, ax, ay, **sweep_kw)
        iy, ix = np.unravel_index(np.nanargmax(grid.p_x), grid.shape)
        best = Maximum(int(ix), int(iy), ax.values[ix], ay.values[iy], float(grid.p_x[iy, ix]))
        on_edge = []
        if len(ax) > 1 and ix in (0, len(ax) - 1):
            on_edge.append(("x", ix == 0))
        if len(ay) > 1 and iy in (0, len(ay) - 1):
            on_edge.append(("y", iy == 0))
        if not on_edge or attempt == max_extensions:
            return grid, best
        for which, at_start in on_edge:
            if which == "x":
                ax = extend_axis(ax, at_start)
            else:
                ay = extend_axis(ay, at_start)


def minimum_excitation_scan(deltas1: Sequence[float], deltas2: Sequence[float], g: float = 5.0,
                            n1: int = 1, n2: int = 0, dt: float = 1e-3,
                            return_grid: bool = False):
    """Largest final P_X over a detuning grid for the initial state |G, n1, n2>."""
    n_total = n1 + n2
    window = TruncationWindow(0, n_total + 1)
    base = SimConfig(g1=g, g2=g, field1_init=Fock(n1), field2_init=Fock(n2),
                     window1=window, window2=window, dt=dt, record_stride=int(round(6 / dt)))
    grid = run_sweep(base, SweepAxis("delta1", tuple(deltas1)), SweepAxis("delta2", tuple(deltas2)),
                     retry=False)
    best = float(np.nanmax(grid.p_x))
    return (best, grid) if return_grid else best


def fock_counterpart(cfg: SimConfig) -> SimConfig:
    """Same run with each coherent mode replaced by the Fock state of equal mean photon number."""
    changes = {}
    for j in (1, 2):
        init = getattr(cfg, f"field{j}_init")
        if isinstance(init, Coherent):
            changes[f"field{j}_init"] = Fock(int(round(init.mean_photons)))
            changes[f"window{j}"] = None
    return cfg.replace(**changes)


def _few_photon(delta1, delta2, n1, n2, g=5.0, level=EmitterLevel.GROUND) -> SimConfig:
    # both windows cover every occupation the excitation number allows, plus one spare
    top = int(level) + n1 + n2 + 1
    w = TruncationWindow(0, top)
    return SimConfig(delta1=delta1, delta2=delta2, g1=g, g2=g, emitter_init=level,
                     field1_init=Fock(n1), field2_init=Fock(n2), window1=w, window2=w)


def _super_fig1(n1: int):
    base = SimConfig(delta1=-6.0, g1=0.1, g2=0.1, field1_init=Fock(n1))
    ax = SweepAxis("delta2", tuple(np.linspace(-40.0, -2.0, 191)))
    ay = sqrt_occupation_axis("n2_init", 200.0, rows=200)
    return base, ax, ay


def _dichromatic_fig2():
    base = SimConfig(delta1=6.0, delta2=-6.0, g1=0.1, g2=0.1)
    ax = sqrt_occupation_axis("n1_init", 100.0, rows=101)
    ay = sqrt_occupation_axis("n2_init", 100.0, rows=101)
    return base, ax, ay


def _rabi_check():
    base = SimConfig(delta1=0.0, g1=0.1, g2=0.0, field1_init=Fock(100),
                     window2=TruncationWindow(0, 0))
    ax = SweepAxis("n1_init", tuple(range(1, 401)))
    ay = SweepAxis("delta1", (0.0,))
    return base, ax, ay


FIG4A_FOCK = (38, 48)
FIG4A_WINDOW = TruncationWindow(0, 90)

PRESETS: dict[str, Callable] = {
    "super_fig1a": lambda: _super_fig1(3947),
    "super_fig1b": lambda: _super_fig1(24673),
    "dichromatic_fig2": _dichromatic_fig2,
    "vacuum_fig3c": lambda: _few_photon(-7.56, -28.56, 5, 0),
    "vacuum_fig3d": lambda: _few_photon(-4.06, -15.96, 2, 0),
    "entangled_fig3g": lambda: _few_photon(3.12, -3.12, 1, 1),
    "reverse_fig3h": lambda: _few_photon(-15.68, -3.78, 1, 0, level=EmitterLevel.EXCITED),
    "coherent_fig4a": lambda: SimConfig(
        delta1=-6.0, delta2=-20.5, g1=1.0, g2=1.0,
        field1_init=Coherent(math.sqrt(FIG4A_FOCK[0])), field2_init=Coherent(math.sqrt(FIG4A_FOCK[1])),
        window1=FIG4A_WINDOW, window2=FIG4A_WINDOW, coherent_eps=1e-7),
    "coherent_fig4d": lambda: SimConfig(
        delta1=-6.0, delta2=-19.81, g1=5.0, g2=5.0,
        field1_init=Coherent(math.sqrt(2.0)), field2_init=Coherent(1.0)),
    "rabi_check": _rabi_check,
}

PRESET_DESCRIPTIONS = {
    "super_fig1a": "SUPER sweep over (delta2, n2), delta1=-6, n1=3947, G=0.1",
    "super_fig1b": "SUPER sweep over (delta2, n2), delta1=-6, n1=24673, G=0.1",
    "dichromatic_fig2": "red-and-blue sweep over (n1, n2), delta1=-delta2=6, G=0.1",
    "vacuum_fig3c": "|G,5,0>, delta=(-7.56, -28.56), G=5",
    "vacuum_fig3d": "|G,2,0>, delta=(-4.06, -15.96), G=5",
    "entangled_fig3g": "|G,1,1>, delta1=-delta2=3.12, G=5",
    "reverse_fig3h": "|X,1,0>, delta=(-15.68, -3.78), G=5",
    "coherent_fig4a": "coherent |alpha|^2=(38, 48), delta=(-6, -20.5), G=1, 91 states per mode",
    "coherent_fig4d": "coherent |alpha|^2=(2, 1), delta=(-6, -19.81), G=5",
    "rabi_check": "resonant single mode, delta1=0, G1=0.1, G2=0, sweep over n1",
}


def preset(name: str):
    """Pinned configuration (or ``(base, axis_x, axis_y)`` for sweep presets)."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown preset {name!r}; available: {', '.join(PRESETS)}") from None
    return factory()


def is_sweep_preset(name: str) -> bool:
    return isinstance(preset(name), tuple)


def _local_step(axis: SweepAxis, i: int) -> float:
    v = axis.plot_values
    if len(v) == 1:
        return 0.0
    j = i + 1 if i + 1 < len(v) else i - 1
    return abs(v[j] - v[i])


def zoom_maximum(base: SimConfig, ax: SweepAxis, ay: SweepAxis, rounds: int = 2,
                 factor: int = 4, **sweep_kw) -> tuple[SweepGrid, Maximum]:
    """Coarse-to-fine search for the global P_X maximum.

    After each sweep both axes are replaced by a grid ``factor`` times finer
    spanning one old step either side of the best cell (in sqrt(n) for
    occupation axes).  Returns the last grid and its best cell.
    """
    for r in range(rounds + 1):
        grid = run_sweep(base, ax, ay, **sweep_kw)
        iy, ix = np.unravel_index(np.nanargmax(grid.p_x), grid.shape)
        best = Maximum(int(ix), int(iy), ax.values[ix], ay.values[iy], float(grid.p_x[iy, ix]))
        if r == rounds:
            return grid, best
        new = []
        for axis, i, center in ((ax, ix, best.x), (ay, iy, best.y)):
            step = _local_step(axis, i)
            new.append(axis if step == 0 else refine_axis(axis, center, step, step / factor))
        ax, ay = new
