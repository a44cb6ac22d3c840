import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from superjc import dynamics, observables
from superjc.dynamics import SimConfig, convergence_audit, envelope, evolve, oracle_propagate
from superjc.errors import BasisMismatch, DimensionTooLarge, ValidationError
from superjc.hilbert import (
    Coherent,
    EmitterLevel,
    Fock,
    StateVector,
    TruncationWindow,
    build_basis,
)
from superjc.scenarios import preset

G, X = EmitterLevel.GROUND, EmitterLevel.EXCITED
W = TruncationWindow
RABI_N = 100
RABI_EXACT = math.sin(0.1 * math.sqrt(math.pi * RABI_N)) ** 2  # 0.959882...


def small_cfg(**kw):
    base = dict(delta1=-3.0, delta2=-11.0, g1=2.0, g2=1.5,
                window1=W(0, 3), window2=W(0, 3), field1_init=Fock(1), field2_init=Fock(1))
    base.update(kw)
    return SimConfig(**base)


def random_state(basis, rng):
    v = rng.normal(size=basis.dimension) + 1j * rng.normal(size=basis.dimension)
    return StateVector(basis, v).normalized()


def dense_h_from_labels(basis, tau, cfg):
    """Interaction Hamiltonian assembled element by element from basis labels."""
    h = np.zeros((basis.dimension, basis.dimension), dtype=complex)
    f = math.exp(-tau * tau)
    for i in range(basis.dimension):
        lv, n1, n2 = basis.label(i)
        if lv != G:
            continue
        for g, d, (t1, t2), n in ((cfg.g1, cfg.delta1, (n1 - 1, n2), n1),
                                  (cfg.g2, cfg.delta2, (n1, n2 - 1), n2)):
            if t1 in basis.window1 and t2 in basis.window2:
                j = basis.index(X, t1, t2)
                h[j, i] += g * f * cmath.exp(-1j * d * tau) * math.sqrt(n)
    return h + h.conj().T


def rabi_cfg(window=W(80, 120), **kw):
    return SimConfig(delta1=0.0, g1=0.1, g2=0.0, field1_init=Fock(RABI_N),
                     window1=window, window2=W(0, 0), **kw)


# -- envelope --------------------------------------------------------------

def test_envelope_values():
    assert envelope(0.0) == 1.0
    assert envelope(3.0) == pytest.approx(1.2341e-4, rel=1e-4)
    assert envelope(-1.0) == pytest.approx(0.367879, abs=1e-6)
    assert envelope(3.0) <= 1.3e-4 and envelope(-3.0) == envelope(3.0)


# -- config ----------------------------------------------------------------

def test_config_validation_lists_problems():
    with pytest.raises(ValidationError) as err:
        SimConfig(g1=-1.0, dt=0.5, field1_init=Fock(5), window1=W(0, 3))
    text = str(err.value)
    assert "g1" in text and "dt" in text and "outside window1" in text
    assert len(err.value.problems) == 3


def test_dt_must_divide_interval():
    with pytest.raises(ValidationError, match="divide"):
        SimConfig(dt=0.007)


def test_auto_windows():
    cfg = SimConfig(field1_init=Fock(3947), field2_init=Fock(2), half_width=20)
    assert cfg.resolved_window(1) == W(3927, 3967)
    assert cfg.resolved_window(2) == W(0, 22)
    w = SimConfig(field1_init=Coherent(20.0)).resolved_window(1)
    assert w.n_min > 0 and 400 in w


# -- right-hand side ------------------------------------------------------

def test_rhs_zero_coupling(rng):
    cfg = small_cfg(g1=0.0, g2=0.0)
    psi = random_state(cfg.basis(), rng)
    assert not dynamics.rhs(psi, 0.3, cfg).any()


def test_rhs_dark_vacuum():
    cfg = small_cfg(field1_init=Fock(0), field2_init=Fock(0))
    assert not dynamics.rhs(cfg.initial_state(), 0.0, cfg).any()


@pytest.mark.parametrize("tau", [-2.1, -0.4, 0.0, 0.77, 2.9])
def test_rhs_matches_dense(tau, rng):
    cfg = small_cfg()
    basis = cfg.basis()
    h = dense_h_from_labels(basis, tau, cfg)
    for _ in range(3):
        psi = random_state(basis, rng)
        np.testing.assert_allclose(dynamics.rhs(psi, tau, cfg), -1j * h @ psi.amplitudes,
                                   rtol=0, atol=1e-13)
    np.testing.assert_allclose(dynamics.dense_hamiltonian(tau, cfg), h, rtol=0, atol=1e-15)


def test_rhs_offset_windows(rng):
    cfg = small_cfg(window1=W(4, 7), window2=W(2, 3), field1_init=Fock(5), field2_init=Fock(2))
    h = dense_h_from_labels(cfg.basis(), 0.35, cfg)
    psi = random_state(cfg.basis(), rng)
    np.testing.assert_allclose(dynamics.rhs(psi, 0.35, cfg), -1j * h @ psi.amplitudes,
                               rtol=0, atol=1e-13)


def test_rhs_basis_mismatch():
    cfg = small_cfg()
    other = build_basis(W(0, 2), W(0, 2))
    with pytest.raises(BasisMismatch):
        dynamics.rhs(StateVector.from_labels(other, {(G, 0, 0): 1}), 0.0, cfg)


# -- single RK4 step ------------------------------------------------------

def test_rk4_zero_coupling_exact(rng):
    cfg = small_cfg(g1=0.0, g2=0.0)
    psi = random_state(cfg.basis(), rng)
    out = dynamics.rk4_step(psi, -1.0, 1e-3, cfg)
    np.testing.assert_array_equal(out.amplitudes, psi.amplitudes)


def test_rk4_drift_shrinks_with_dt(rng):
    cfg = small_cfg()
    psi = random_state(cfg.basis(), rng)
    _, d1 = dynamics.rk4_step(psi, 0.1, 0.05, cfg, return_drift=True)
    _, d2 = dynamics.rk4_step(psi, 0.1, 0.025, cfg, return_drift=True)
    assert d1 > 1e-10
    assert d1 / d2 >= 16


def test_rk4_step_matches_exponential(rng):
    # 12-dimensional: windows [0..2] x [0..1]
    cfg = small_cfg(window1=W(0, 2), window2=W(0, 1), field1_init=Fock(0), field2_init=Fock(0))
    basis = cfg.basis()
    assert basis.dimension == 12
    psi = random_state(basis, rng)
    tau, dt = -0.25, 1e-3
    out = dynamics.rk4_step(psi, tau, dt, cfg)
    ref = dynamics.oracle_step(psi, tau, dt, cfg)
    assert observables.fidelity(out, ref) >= 1 - 1e-12
    # the Magnus step itself against a finely sliced product of exact exponentials
    u = np.eye(12, dtype=complex)
    for k in range(200):
        t = tau + (k + 0.5) * dt / 200
        u = expm(-1j * dense_h_from_labels(basis, t, cfg) * dt / 200) @ u
    np.testing.assert_allclose(ref.amplitudes, u @ psi.amplitudes, atol=1e-12)


# -- full evolution --------------------------------------------------------

def test_evolve_fig3c_point():
    traj = evolve(preset("vacuum_fig3c"))
    assert traj.p_x[-1] == pytest.approx(1.00, abs=0.01)


def test_evolve_rabi_matches_pulse_area():
    traj = evolve(rabi_cfg())
    assert abs(traj.p_x[-1] - RABI_EXACT) < 1e-3
    assert convergence_audit(traj, 1e-8, 1e-6, 1e-6).passed


def test_evolve_zero_coupling_is_identity():
    cfg = SimConfig(delta1=-3.0, delta2=4.0, field1_init=Coherent(1.2), field2_init=Fock(2),
                    window2=W(0, 4))
    traj = evolve(cfg)
    assert observables.fidelity(traj.final_state, cfg.initial_state()) >= 1 - 1e-12
    assert np.all(traj.p_x == 0)


def test_trajectory_sampling():
    cfg = small_cfg(dt=2e-3, record_stride=7)
    traj = evolve(cfg)
    assert len(traj.times) == cfg.n_steps // 7 + 1
    assert traj.times[0] == -3.0
    assert np.all(np.diff(traj.times) > 0)
    cfg = small_cfg(dt=2e-3, record_stride=100)
    assert evolve(cfg).times[-1] == pytest.approx(3.0, abs=1e-12)


def test_snapshots_match_final_state():
    cfg = small_cfg(dt=2e-3, record_stride=100)
    traj = evolve(cfg, keep_states=True)
    assert traj.snapshot(len(traj.times) - 1).inner(traj.final_state) == pytest.approx(1.0)
    assert observables.exciton_population(traj.snapshot(10)) == pytest.approx(traj.p_x[10], abs=1e-15)


# -- oracle ----------------------------------------------------------------

def test_oracle_zero_coupling_identity():
    cfg = small_cfg(g1=0.0, g2=0.0)
    out = oracle_propagate(cfg)
    np.testing.assert_allclose(out.amplitudes, cfg.initial_state().amplitudes, atol=1e-15)


def test_oracle_rabi_matches_pulse_area():
    cfg = rabi_cfg(window=W(98, 102), dt=1e-2)
    out = oracle_propagate(cfg, substeps_per_dt=4)
    assert abs(observables.exciton_population(out) - RABI_EXACT) < 1e-4


def test_oracle_order2_agrees():
    cfg = small_cfg(dt=1e-2)
    a = oracle_propagate(cfg, substeps_per_dt=2, order=2)
    b = oracle_propagate(cfg, substeps_per_dt=2, order=4)
    assert observables.fidelity(a, b) >= 1 - 1e-9


def test_oracle_fig3d_agrees_with_rk4():
    cfg = preset("vacuum_fig3d")
    ref = oracle_propagate(cfg)
    assert observables.fidelity(evolve(cfg).final_state, ref) >= 1 - 1e-8


def test_oracle_dimension_guard():
    cfg = SimConfig(field1_init=Fock(0), window1=W(0, 40), window2=W(0, 40))
    with pytest.raises(DimensionTooLarge):
        oracle_propagate(cfg)


# -- convergence audit ----------------------------------------------------

def test_audit_narrow_window_fails():
    traj = evolve(rabi_cfg(window=W(99, 100)))
    audit = convergence_audit(traj, 1e-8, 1e-6, 1e-6)
    assert not audit.passed
    assert traj.audit.max_boundary_occupancy == pytest.approx(1.0, abs=1e-9)
    assert "mode1_lower" in audit.saturated_edges or "mode1_upper" in audit.saturated_edges
    assert any("boundary" in f for f in audit.failures)


def test_audit_report_nonnegative():
    r = evolve(small_cfg(dt=2e-3)).audit
    assert r.max_norm_drift_per_step >= 0 and r.max_excitation_drift >= 0
    assert r.max_boundary_occupancy >= 0


def test_evolve_converged_widens():
    cfg = SimConfig(delta1=-6.0, delta2=-20.5, g1=1.0, g2=1.0, field1_init=Fock(38),
                    field2_init=Fock(48), half_width=1)
    traj, audit = dynamics.evolve_converged(cfg, max_widenings=4)
    assert audit.passed
    assert traj.final_state.basis.window1.size > 3


# -- invariants -----------------------------------------------------------

@settings(max_examples=10, deadline=None)
@given(st.floats(-20, 20), st.floats(-20, 20), st.floats(0, 4), st.floats(0, 4),
       st.integers(0, 3), st.integers(0, 3), st.booleans())
def test_excitation_conserved(d1, d2, g1, g2, n1, n2, excited):
    cfg = SimConfig(delta1=d1, delta2=d2, g1=g1, g2=g2, emitter_init=X if excited else G,
                    field1_init=Fock(n1), field2_init=Fock(n2), window1=W(0, 8),
                    window2=W(0, 8), dt=1e-2, record_stride=10)
    traj = evolve(cfg)
    assert np.max(np.abs(traj.excitation - traj.excitation[0])) < 1e-6


def test_block_invariance():
    cfg = small_cfg(window1=W(0, 5), window2=W(0, 5), field1_init=Fock(2), field2_init=Fock(1),
                    dt=1e-2)
    basis = cfg.basis()
    level, n1, n2 = (g.reshape(-1) for g in basis.grids())
    outside = (level + n1 + n2) != 3
    # the full-basis single step and the exact propagator never leave the block
    psi = cfg.initial_state()
    for k in range(600):
        psi = dynamics.rk4_step(psi, -3.0 + k * 1e-2, 1e-2, cfg)
    assert np.max(np.abs(psi.amplitudes[outside])) < 1e-10
    ref = oracle_propagate(cfg)
    assert np.max(np.abs(ref.amplitudes[outside])) < 1e-10
    assert observables.fidelity(psi, ref) > 1 - 1e-6


@settings(max_examples=8, deadline=None)
@given(st.floats(-25, 25), st.floats(-25, 25), st.floats(0.1, 5), st.floats(0.1, 5),
       st.integers(0, 2), st.integers(0, 2), st.floats(0, 1.5))
def test_detuning_conjugation_symmetry(d1, d2, g1, g2, n1, n2, alpha):
    cfg = SimConfig(delta1=d1, delta2=d2, g1=g1, g2=g2, field1_init=Fock(n1),
                    field2_init=Coherent(alpha), window1=W(0, 6),
                    window2=W(0, 12), dt=1e-2, record_stride=5, coherent_eps=1e-6)
    a = evolve(cfg)
    b = evolve(cfg.replace(delta1=-d1, delta2=-d2))
    for name in ("p_x", "n1", "n2", "excitation"):
        assert np.max(np.abs(getattr(a, name) - getattr(b, name))) < 1e-9


@settings(max_examples=8, deadline=None)
@given(st.floats(-25, 25), st.floats(-25, 25), st.floats(0, 5), st.floats(0, 5),
       st.integers(0, 3), st.integers(0, 3), st.booleans())
def test_mode_swap_exact(d1, d2, g1, g2, n1, n2, excited):
    lv = X if excited else G
    a = evolve(SimConfig(delta1=d1, delta2=d2, g1=g1, g2=g2, emitter_init=lv,
                         field1_init=Fock(n1), field2_init=Fock(n2), window1=W(0, 7),
                         window2=W(0, 7), dt=1e-2, record_stride=10))
    b = evolve(SimConfig(delta1=d2, delta2=d1, g1=g2, g2=g1, emitter_init=lv,
                         field1_init=Fock(n2), field2_init=Fock(n1), window1=W(0, 7),
                         window2=W(0, 7), dt=1e-2, record_stride=10))
    np.testing.assert_array_equal(a.n1, b.n2)
    np.testing.assert_array_equal(a.n2, b.n1)
    np.testing.assert_array_equal(a.p_x, b.p_x)


@pytest.mark.slow
def test_integrator_order():
    cfg = preset("vacuum_fig3d")
    ref = oracle_propagate(cfg.replace(dt=5e-4), substeps_per_dt=4)
    dts = [4e-3, 2e-3, 1e-3, 5e-4]
    errs = [np.linalg.norm(evolve(cfg.replace(dt=dt)).final_state.amplitudes - ref.amplitudes)
            for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    assert abs(slope - 4.0) <= 0.3


def test_concurrent_runs_bit_identical():
    from concurrent.futures import ThreadPoolExecutor
    cfgs = [small_cfg(delta2=-11.0 + k, dt=2e-3) for k in range(4)]
    serial = [evolve(c).final_state.amplitudes for c in cfgs]
    with ThreadPoolExecutor(4) as pool:
        threaded = list(pool.map(lambda c: evolve(c).final_state.amplitudes, cfgs))
    for a, b in zip(serial, threaded):
        np.testing.assert_array_equal(a, b)
