"""Interaction-picture dynamics of the pulsed two-mode Jaynes-Cummings model.

Everything is dimensionless: time ``tau = t / t_p``, hbar = 1, detunings
``Delta_j = t_p delta_j`` and couplings ``G_j = t_p g_j``.  The Hamiltonian is

    H(tau) = sum_j G_j exp(-tau^2) (e^{-i Delta_j tau} sigma^dag a_j + h.c.)

and the state is integrated from ``-span_sigma`` to ``+span_sigma``.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _kernels
from .errors import BasisMismatch, DimensionTooLarge, ValidationError
from .hilbert import (
    COHERENT_EPS,
    Coherent,
    EmitterLevel,
    FieldInit,
    Fock,
    ProductBasis,
    StateVector,
    TruncationWindow,
    centered_window,
    coherent_window,
    init_state,
    raising_matrix,
)
from .observables import ObservableSet

DEFAULT_DT = 1e-3
DEFAULT_STRIDE = 100
DEFAULT_HALF_WIDTH = 20
DEFAULT_TOLERANCES = (1e-8, 1e-6, 1e-6)  # norm drift per step, excitation drift, boundary


def envelope(tau):
    """Gaussian pulse envelope ``exp(-tau^2)``."""
    return np.exp(-np.square(tau))


@dataclass(frozen=True)
class SimConfig:
    """Physics parameters, initial state, truncation and integrator settings.

    ``window1``/``window2`` may be left as ``None``; they are then derived
    from the initial field states (a window of ``half_width`` photons either
    side of a Fock occupation, or a Poisson window losing at most
    ``coherent_eps`` for a coherent state).
    """

    delta1: float = 0.0
    delta2: float = 0.0
    g1: float = 0.0
    g2: float = 0.0
    emitter_init: EmitterLevel = EmitterLevel.GROUND
    field1_init: FieldInit = Fock(0)
    field2_init: FieldInit = Fock(0)
    window1: Optional[TruncationWindow] = None
    window2: Optional[TruncationWindow] = None
    dt: float = DEFAULT_DT
    record_stride: int = DEFAULT_STRIDE
    span_sigma: float = 3.0
    half_width: int = DEFAULT_HALF_WIDTH
    coherent_eps: float = COHERENT_EPS

    def __post_init__(self):
        object.__setattr__(self, "emitter_init", EmitterLevel.parse(self.emitter_init))
        problems = self.problems()
        if problems:
            raise ValidationError(problems)

    def problems(self) -> list[str]:
        out = []
        for name in ("delta1", "delta2", "g1", "g2", "dt", "span_sigma"):
            if not math.isfinite(getattr(self, name)):
                out.append(f"{name} must be finite")
        if self.g1 < 0 or self.g2 < 0:
            out.append("couplings g1, g2 must be >= 0")
        if self.span_sigma <= 0:
            out.append("span_sigma must be > 0")
        if not self.dt > 0:
            out.append("dt must be > 0")
        elif self.dt > self.span_sigma / 10:
            out.append(f"dt={self.dt} exceeds span_sigma/10={self.span_sigma / 10}")
        else:
            steps = 2 * self.span_sigma / self.dt
            if abs(steps - round(steps)) > 1e-6 * max(1.0, steps):
                out.append(f"dt={self.dt} does not divide the interval 2*span_sigma")
        if int(self.record_stride) != self.record_stride or self.record_stride < 1:
            out.append("record_stride must be an integer >= 1")
        if int(self.half_width) != self.half_width or self.half_width < 1:
            out.append("half_width must be an integer >= 1")
        if not 0 < self.coherent_eps < 1:
            out.append("coherent_eps must lie in (0, 1)")
        for j, (init, win) in enumerate(((self.field1_init, self.window1),
                                         (self.field2_init, self.window2)), start=1):
            if not isinstance(init, (Fock, Coherent)):
                out.append(f"field{j}_init must be Fock or Coherent")
            elif win is not None and isinstance(init, Fock) and init.n not in win:
                out.append(f"n{j}_init={init.n} lies outside window{j}={win}")
        return out

    @property
    def n_steps(self) -> int:
        return int(round(2 * self.span_sigma / self.dt))

    def resolved_window(self, mode: int) -> TruncationWindow:
        win = self.window1 if mode == 1 else self.window2
        if win is not None:
            return win
        init = self.field1_init if mode == 1 else self.field2_init
        if isinstance(init, Fock):
            return centered_window(init.n, self.half_width)
        return coherent_window(init.amplitude, self.coherent_eps)

    def basis(self) -> ProductBasis:
        return ProductBasis(self.resolved_window(1), self.resolved_window(2))

    def initial_state(self) -> StateVector:
        return init_state(self.basis(), self.emitter_init, self.field1_init,
                          self.field2_init, self.coherent_eps)

    def replace(self, **changes) -> "SimConfig":
        return dataclasses.replace(self, **changes)

    def with_resolved_windows(self) -> "SimConfig":
        return self.replace(window1=self.resolved_window(1), window2=self.resolved_window(2))

    def widened(self) -> "SimConfig":
        """Same run on windows roughly twice as large."""
        return self.replace(window1=self.resolved_window(1).widened(),
                            window2=self.resolved_window(2).widened())


@dataclass(frozen=True)
class ConvergenceReport:
    max_norm_drift_per_step: float
    max_excitation_drift: float
    max_boundary_occupancy: float
    edge_occupancy: dict = field(default_factory=dict)


@dataclass(frozen=True)
class AuditResult:
    passed: bool
    report: ConvergenceReport
    failures: tuple = ()
    saturated_edges: tuple = ()

    def summary(self) -> str:
        r = self.report
        status = "PASS" if self.passed else "FAIL"
        text = (f"{status}: norm drift/step {r.max_norm_drift_per_step:.3e}, "
                f"excitation drift {r.max_excitation_drift:.3e}, "
                f"boundary occupancy {r.max_boundary_occupancy:.3e}")
        if self.saturated_edges:
            text += " (saturated: " + ", ".join(self.saturated_edges) + ")"
        return text


@dataclass(frozen=True, eq=False)
class Trajectory:
    config: SimConfig
    times: np.ndarray
    p_x: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    excitation: np.ndarray
    norm_drift: np.ndarray
    final_state: StateVector
    audit: ConvergenceReport
    states: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def observables(self) -> list[ObservableSet]:
        return [ObservableSet(*row) for row in
                zip(self.p_x, self.n1, self.n2, self.excitation, self.norm_drift)]

    @property
    def delta_n1(self) -> np.ndarray:
        return self.n1 - self.n1[0]

    @property
    def delta_n2(self) -> np.ndarray:
        return self.n2 - self.n2[0]

    def snapshot(self, r: int) -> StateVector:
        if self.states is None:
            raise ValueError("trajectory was recorded without state snapshots")
        return StateVector(self.final_state.basis, self.states[r])


@dataclass(frozen=True)
class _Layout:
    """Neighbor tables for the compiled kernels on a set of active amplitudes."""

    act: np.ndarray
    is_x: np.ndarray
    nb1: np.ndarray
    s1: np.ndarray
    nb2: np.ndarray
    s2: np.ndarray
    n1: np.ndarray
    n2: np.ndarray
    edges: np.ndarray


def _layout(basis: ProductBasis, active: np.ndarray, coupled=(True, True)) -> _Layout:
    level, n1, n2 = (g.reshape(-1) for g in basis.grids())
    m1, m2 = basis.window1.size, basis.window2.size
    act = np.flatnonzero(active.reshape(-1)).astype(np.int64)
    lv, a, b = level[act], n1[act], n2[act]
    k1 = a - basis.window1.n_min
    k2 = b - basis.window2.n_min
    is_x = lv == 1
    # an excited amplitude is fed by (G, n_j + 1), a ground one by (X, n_j - 1)
    x0 = m1 * m2
    nb1 = np.where(is_x, np.where(k1 + 1 < m1, (k1 + 1) * m2 + k2, -1),
                   np.where(k1 >= 1, x0 + (k1 - 1) * m2 + k2, -1))
    nb2 = np.where(is_x, np.where(k2 + 1 < m2, k1 * m2 + k2 + 1, -1),
                   np.where(k2 >= 1, x0 + k1 * m2 + k2 - 1, -1))
    s1 = np.sqrt(np.where(is_x, a + 1, a).astype(float))
    s2 = np.sqrt(np.where(is_x, b + 1, b).astype(float))
    s1[nb1 < 0] = 0.0
    s2[nb2 < 0] = 0.0
    edges = np.zeros(act.size, dtype=np.int64)
    w1, w2 = basis.window1, basis.window2
    if coupled[0]:
        edges |= np.where((a == w1.n_min) & (w1.n_min > 0), 1, 0)
        edges |= np.where(a == w1.n_max, 2, 0)
    if coupled[1]:
        edges |= np.where((b == w2.n_min) & (w2.n_min > 0), 4, 0)
        edges |= np.where(b == w2.n_max, 8, 0)
    return _Layout(act, is_x, nb1.astype(np.int64), s1, nb2.astype(np.int64), s2,
                   a.astype(float), b.astype(float), edges)


def active_mask(state: StateVector) -> np.ndarray:
    """Amplitudes in every excitation-number block the state touches."""
    level, n1, n2 = state.basis.grids()
    exc = level + n1 + n2
    present = np.unique(exc[state.as_array() != 0])
    return np.isin(exc, present)


def _check_state(state: StateVector, cfg: SimConfig) -> None:
    if state.basis != cfg.basis():
        raise BasisMismatch(f"state basis {state.basis} does not match config basis {cfg.basis()}")


def rhs(state: StateVector, tau: float, cfg: SimConfig) -> np.ndarray:
    """``-i H(tau) psi`` as a flat complex array."""
    _check_state(state, cfg)
    lay = _layout(state.basis, np.ones(state.basis.shape, dtype=bool))
    out = np.zeros(state.basis.dimension, dtype=complex)
    psi = np.array(state.amplitudes)
    _kernels.rhs_into(psi, out, float(tau), cfg.g1, cfg.g2, cfg.delta1, cfg.delta2,
                      lay.act, lay.is_x, lay.nb1, lay.s1, lay.nb2, lay.s2)
    return out


def rk4_step(state: StateVector, tau: float, dt: float, cfg: SimConfig,
             return_drift: bool = False):
    """One renormalized RK4 step from ``tau`` to ``tau + dt``.

    With ``return_drift`` also returns ``| ||psi|| - 1 |`` measured before
    renormalization.
    """
    _check_state(state, cfg)
    dim = state.basis.dimension
    lay = _layout(state.basis, np.ones(state.basis.shape, dtype=bool))
    psi = np.array(state.amplitudes)
    work = [np.zeros(dim, dtype=complex) for _ in range(5)]
    drift = _kernels.rk4_into(psi, float(tau), float(dt), cfg.g1, cfg.g2, cfg.delta1,
                              cfg.delta2, lay.act, lay.is_x, lay.nb1, lay.s1, lay.nb2,
                              lay.s2, *work, np.empty(lay.act.size))
    out = StateVector(state.basis, psi)
    return (out, drift) if return_drift else out


def evolve(cfg: SimConfig, keep_states: bool = False,
           initial: Optional[StateVector] = None) -> Trajectory:
    """Integrate ``cfg`` from ``-span_sigma`` to ``+span_sigma`` with fixed-step RK4."""
    state = cfg.initial_state() if initial is None else initial
    _check_state(state, cfg)
    basis = state.basis
    lay = _layout(basis, active_mask(state), coupled=(cfg.g1 != 0, cfg.g2 != 0))
    n_steps, stride = cfg.n_steps, int(cfg.record_stride)
    n_rec = n_steps // stride + 1
    rec = np.zeros((n_rec, 6))
    rec_edges = np.zeros((n_rec, 5))
    snapshots = np.zeros((n_rec if keep_states else 1, basis.dimension), dtype=complex)
    psi = np.array(state.amplitudes)
    max_drift, edge_max = _kernels.evolve_loop(
        psi, -float(cfg.span_sigma), float(cfg.dt), n_steps, stride,
        float(cfg.g1), float(cfg.g2), float(cfg.delta1), float(cfg.delta2),
        lay.act, lay.is_x, lay.nb1, lay.s1, lay.nb2, lay.s2, lay.n1, lay.n2, lay.edges,
        rec, rec_edges, snapshots, keep_states)
    exc = rec[:, 4]
    report = ConvergenceReport(
        max_norm_drift_per_step=float(max_drift),
        max_excitation_drift=float(np.max(np.abs(exc - exc[0]))),
        max_boundary_occupancy=float(edge_max[4]),
        edge_occupancy={name: float(v) for name, v in zip(_kernels.EDGE_NAMES, edge_max)},
    )
    return Trajectory(
        config=cfg, times=rec[:, 0].copy(), p_x=rec[:, 1].copy(), n1=rec[:, 2].copy(),
        n2=rec[:, 3].copy(), excitation=exc.copy(), norm_drift=rec[:, 5].copy(),
        final_state=StateVector(basis, psi), audit=report,
        states=snapshots if keep_states else None)


def convergence_audit(traj: Trajectory, tol_norm: float = DEFAULT_TOLERANCES[0],
                      tol_excitation: float = DEFAULT_TOLERANCES[1],
                      tol_boundary: float = DEFAULT_TOLERANCES[2]) -> AuditResult:
    """Check norm drift, excitation-number drift and window-edge occupancy."""
    r = traj.audit
    failures = []
    if not r.max_norm_drift_per_step < tol_norm:
        failures.append(f"norm drift per step {r.max_norm_drift_per_step:.3e} >= {tol_norm:g}")
    if not r.max_excitation_drift < tol_excitation:
        failures.append(f"excitation drift {r.max_excitation_drift:.3e} >= {tol_excitation:g}")
    if not r.max_boundary_occupancy < tol_boundary:
        failures.append(f"boundary occupancy {r.max_boundary_occupancy:.3e} >= {tol_boundary:g}")
    saturated = tuple(name for name, v in r.edge_occupancy.items() if v >= tol_boundary)
    return AuditResult(not failures, r, tuple(failures), saturated)


def evolve_converged(cfg: SimConfig, tolerances=DEFAULT_TOLERANCES, max_widenings: int = 3,
                     keep_states: bool = False) -> tuple[Trajectory, AuditResult]:
    """Evolve, widening the windows until the audit passes (or giving up)."""
    cfg = cfg.with_resolved_windows()
    for attempt in range(max_widenings + 1):
        traj = evolve(cfg, keep_states=keep_states)
        audit = convergence_audit(traj, *tolerances)
        if audit.passed or attempt == max_widenings:
            return traj, audit
        cfg = cfg.widened()


def dense_hamiltonian_parts(basis: ProductBasis) -> tuple[np.ndarray, np.ndarray]:
    """Dense ``sigma^dag a_1`` and ``sigma^dag a_2``."""
    return raising_matrix(basis, 1), raising_matrix(basis, 2)


def dense_hamiltonian(tau: float, cfg: SimConfig, parts=None) -> np.ndarray:
    a1, a2 = parts if parts is not None else dense_hamiltonian_parts(cfg.basis())
    f = math.exp(-tau * tau)
    h = np.zeros(a1.shape, dtype=complex)
    for g, d, a in ((cfg.g1, cfg.delta1, a1), (cfg.g2, cfg.delta2, a2)):
        term = g * f * np.exp(-1j * d * tau) * a
        h += term + term.conj().T
    return h


def oracle_propagate(cfg: SimConfig, substeps_per_dt: int = 1, order: int = 4,
                     max_dimension: int = 2000,
                     initial: Optional[StateVector] = None) -> StateVector:
    """Exact-unitary reference propagator built from dense matrices.

    On each sub-interval of length ``h = dt / substeps_per_dt`` the
    Hamiltonian is replaced by a constant Hermitian one and
    ``exp(-i H h)`` is applied through ``numpy.linalg.eigh``.  ``order=2``
    samples ``H`` at the sub-interval midpoint; ``order=4`` uses the
    two-point Gauss rule plus the commutator correction, which is still
    Hermitian.  Norm is preserved to round-off without renormalizing.
    """
    basis = cfg.basis()
    if basis.dimension > max_dimension:
        raise DimensionTooLarge(f"dimension {basis.dimension} > {max_dimension}")
    if order not in (2, 4):
        raise ValueError("order must be 2 or 4")
    state = cfg.initial_state() if initial is None else initial
    _check_state(state, cfg)
    parts = dense_hamiltonian_parts(basis)
    psi = np.array(state.amplitudes)
    n_sub = cfg.n_steps * int(substeps_per_dt)
    h = 2 * cfg.span_sigma / n_sub
    for k in range(n_sub):
        psi = _exact_substep(psi, -cfg.span_sigma + k * h, h, cfg, parts, order)
    return StateVector(basis, psi)


def _exact_substep(psi, t0, h, cfg, parts, order):
    if order == 2:
        heff = dense_hamiltonian(t0 + 0.5 * h, cfg, parts)
    else:
        c = math.sqrt(3) / 6
        h1 = dense_hamiltonian(t0 + (0.5 - c) * h, cfg, parts)
        h2 = dense_hamiltonian(t0 + (0.5 + c) * h, cfg, parts)
        heff = 0.5 * (h1 + h2) - 1j * (math.sqrt(3) / 12) * h * (h2 @ h1 - h1 @ h2)
    w, v = np.linalg.eigh(heff)
    return v @ (np.exp(-1j * w * h) * (v.conj().T @ psi))


def oracle_step(state: StateVector, tau: float, dt: float, cfg: SimConfig,
                substeps: int = 1, order: int = 4) -> StateVector:
    """Exact-unitary counterpart of :func:`rk4_step` over ``[tau, tau + dt]``."""
    _check_state(state, cfg)
    parts = dense_hamiltonian_parts(state.basis)
    psi = np.array(state.amplitudes)
    h = dt / substeps
    for k in range(substeps):
        psi = _exact_substep(psi, tau + k * h, h, cfg, parts, order)
    return StateVector(state.basis, psi)
