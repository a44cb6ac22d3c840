import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from superjc import scenarios
from superjc.dynamics import SimConfig, evolve
from superjc.errors import UnknownPreset
from superjc.hilbert import Coherent, EmitterLevel, Fock, TruncationWindow
from superjc.scenarios import (
    SweepAxis,
    SweepGrid,
    apply_parameter,
    count_local_maxima,
    locate_maxima,
    minimum_excitation_scan,
    preset,
    refine_axis,
    run_sweep,
    sqrt_occupation_axis,
)

W = TruncationWindow


def synthetic_grid(p):
    ny, nx = p.shape
    z = np.zeros_like(p)
    ones = np.ones_like(p, dtype=bool)
    return SweepGrid(SweepAxis("delta1", tuple(range(nx))), SweepAxis("delta2", tuple(range(ny))),
                     p, z, z, z, z, z, ones, ~ones)


def few_photon_base(**kw):
    args = dict(delta1=-4.0, delta2=-16.0, g1=5.0, g2=5.0, field1_init=Fock(2),
                window1=W(0, 3), window2=W(0, 3), dt=2e-3)
    args.update(kw)
    return SimConfig(**args)


# -- axes --------------------------------------------------------------------

def test_axis_validation():
    with pytest.raises(ValueError):
        SweepAxis("bogus", (1.0,))
    with pytest.raises(ValueError):
        SweepAxis("delta1", ())
    with pytest.raises(ValueError):
        SweepAxis("delta1", (1.0, 1.0, 2.0))
    with pytest.raises(ValueError):
        SweepAxis("n1_init", (1, 2.5))
    assert SweepAxis("delta2", (3, 2, 1)).values == (3.0, 2.0, 1.0)


def test_sqrt_axis_integer_and_plot_values():
    ax = sqrt_occupation_axis("n2_init", 200.0, rows=200)
    assert len(ax) <= 200 and ax.values[0] == 0 and ax.values[-1] == 40000
    assert all(isinstance(v, int) for v in ax.values)
    assert ax.plot_values[-1] == 200.0


def test_refine_occupation_axis_in_sqrt():
    ax = refine_axis(SweepAxis("n2_init", (0, 1)), 3752, 1.0, 0.5)
    s = math.sqrt(3752)
    assert ax.values == tuple(round((s + k) ** 2) for k in (-1.0, -0.5, 0.0, 0.5, 1.0))


def test_apply_parameter_resets_window():
    cfg = SimConfig(field1_init=Fock(3), window1=W(0, 5))
    new = apply_parameter(cfg, "n1_init", 40)
    assert new.window1 is None and new.field1_init == Fock(40)
    new = apply_parameter(cfg, "alpha2_sq", 9.0)
    assert new.field2_init == Coherent(3.0)
    assert apply_parameter(cfg, "g2", 0.5).window1 == W(0, 5)


# -- sweeps --------------------------------------------------------------------

def test_single_cell_sweep_is_evolve():
    base = few_photon_base()
    grid = run_sweep(base, SweepAxis("delta1", (-4.06,)), SweepAxis("delta2", (-15.96,)))
    traj = evolve(base.replace(delta1=-4.06, delta2=-15.96))
    assert grid.shape == (1, 1)
    assert grid.p_x[0, 0] == traj.p_x[-1]
    assert grid.delta_n1[0, 0] == traj.delta_n1[-1]
    assert grid.delta_n2[0, 0] == traj.delta_n2[-1]
    assert grid.audit_pass[0, 0] and not grid.retried[0, 0]


def test_grid_layout_row_major():
    base = few_photon_base()
    ax, ay = SweepAxis("delta1", (-6.0, -4.0, -2.0)), SweepAxis("delta2", (-16.0, -12.0))
    grid = run_sweep(base, ax, ay)
    assert grid.shape == (2, 3)
    traj = evolve(base.replace(delta1=-2.0, delta2=-16.0))
    assert grid.p_x[0, 2] == traj.p_x[-1]
    assert grid.coordinates(2, 0) == (-2.0, -16.0)


def test_serial_and_parallel_identical():
    base = few_photon_base()
    ax = SweepAxis("delta1", (-6.0, -4.0, -2.0))
    ay = SweepAxis("delta2", (-18.0, -16.0, -12.0))
    a = run_sweep(base, ax, ay, workers=1)
    b = run_sweep(base, ax, ay, workers=2)
    for name in ("p_x", "n1", "n2", "delta_n1", "delta_n2", "excitation_drift", "audit_pass"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_same_axis_rejected():
    with pytest.raises(ValueError):
        run_sweep(few_photon_base(), SweepAxis("delta1", (1.0,)), SweepAxis("delta1", (2.0,)))


def test_failed_cell_recorded_and_sweep_continues():
    base = few_photon_base(dt=1e-2)
    grid = run_sweep(base, SweepAxis("g1", (5.0, -1.0)), SweepAxis("delta2", (-16.0,)))
    assert np.isfinite(grid.p_x[0, 0]) and grid.audit_pass[0, 0]
    assert math.isnan(grid.p_x[0, 1]) and not grid.audit_pass[0, 1]
    assert list(grid.errors) == [(0, 1)] and "ValidationError" in grid.errors[(0, 1)]


def test_retry_on_doubled_windows():
    base = SimConfig(delta1=-6.0, delta2=-20.5, g1=1.0, g2=1.0, field1_init=Fock(38),
                     field2_init=Fock(48), half_width=1)
    grid = run_sweep(base, SweepAxis("g1", (1.0,)), SweepAxis("g2", (1.0,)))
    assert grid.retried[0, 0]


# -- maxima --------------------------------------------------------------------

def test_constant_grid_has_no_maxima():
    assert locate_maxima(synthetic_grid(np.full((5, 7), 0.3))) == []


def test_gaussian_bump_single_maximum():
    y, x = np.mgrid[0:9, 0:11]
    p = 0.9 * np.exp(-((x - 6) ** 2 + (y - 3) ** 2) / 4.0)
    found = locate_maxima(synthetic_grid(p))
    assert len(found) == 1 and (found[0].ix, found[0].iy) == (6, 3)
    assert found[0].p_x == pytest.approx(0.9)


def test_maxima_order_and_threshold():
    p = np.zeros((5, 5))
    p[1, 3] = 0.5
    p[3, 1] = 0.5
    p[3, 3] = 0.8
    found = locate_maxima(synthetic_grid(p))
    assert [(m.iy, m.ix) for m in found] == [(3, 3), (1, 3), (3, 1)]
    assert len(locate_maxima(synthetic_grid(p), threshold=0.6)) == 1


def test_plateau_is_not_strict_maximum():
    p = np.zeros((4, 4))
    p[1, 1] = p[1, 2] = 0.7
    assert locate_maxima(synthetic_grid(p)) == []


@given(st.lists(st.floats(0, 1), min_size=9, max_size=40))
def test_maxima_are_strict(values):
    p = np.array(values[: (len(values) // 3) * 3]).reshape(-1, 3)
    for m in locate_maxima(synthetic_grid(p)):
        nb = p[max(0, m.iy - 1):m.iy + 2, max(0, m.ix - 1):m.ix + 2]
        assert np.sum(nb >= m.p_x) == 1


def test_count_local_maxima():
    t = np.linspace(-3, 3, 601)
    assert count_local_maxima(np.sin(t) ** 2 * np.exp(-t * t)) == 2
    assert count_local_maxima(1 - np.exp(-(t + 3))) == 0
    assert count_local_maxima(np.minimum(1, np.exp(t)) + 1e-4 * np.sin(40 * t)) == 0


# -- presets and physics checks ------------------------------------------------

def test_presets_pinned():
    c = preset("vacuum_fig3c")
    assert (c.delta1, c.delta2, c.g1, c.g2) == (-7.56, -28.56, 5.0, 5.0)
    assert (c.field1_init, c.field2_init, c.emitter_init) == (Fock(5), Fock(0),
                                                             EmitterLevel.GROUND)
    c = preset("vacuum_fig3d")
    assert (c.delta1, c.delta2, c.field1_init) == (-4.06, -15.96, Fock(2))
    c = preset("entangled_fig3g")
    assert (c.delta1, c.delta2, c.field1_init, c.field2_init) == (3.12, -3.12, Fock(1), Fock(1))
    c = preset("reverse_fig3h")
    assert (c.delta1, c.delta2, c.emitter_init) == (-15.68, -3.78, EmitterLevel.EXCITED)
    c = preset("coherent_fig4d")
    assert (c.delta1, c.delta2, c.g1) == (-6.0, -19.81, 5.0)
    assert c.field1_init.mean_photons == pytest.approx(2) and c.field2_init.mean_photons == pytest.approx(1)
    base, ax, ay = preset("super_fig1a")
    assert (abs(base.delta1), base.g1, base.g2, base.field1_init) == (6.0, 0.1, 0.1, Fock(3947))
    assert math.sqrt(3947) == pytest.approx(62.83, abs=0.01)
    assert ax.parameter == "delta2" and len(ax) == 191 and ax.values[0] == -40.0
    assert ay.parameter == "n2_init" and len(ay) <= 200
    base, _, _ = preset("super_fig1b")
    assert math.sqrt(base.field1_init.n) == pytest.approx(157.08, abs=0.01)
    base, ax, ay = preset("dichromatic_fig2")
    assert (base.delta1, base.delta2) == (6.0, -6.0)
    base, ax, ay = preset("rabi_check")
    assert (base.delta1, base.g1, base.g2) == (0.0, 0.1, 0.0) and ax.parameter == "n1_init"


def test_unknown_preset():
    with pytest.raises(UnknownPreset, match="available"):
        preset("fig5")


def test_fig3c_and_reverse_examples():
    assert evolve(preset("vacuum_fig3c")).p_x[-1] == pytest.approx(1.0, abs=0.01)
    traj = evolve(preset("reverse_fig3h"))
    assert traj.p_x[-1] <= 0.05 and traj.n2[-1] == pytest.approx(2.0, abs=0.1)


def test_rabi_preset_point():
    base, _, _ = preset("rabi_check")
    traj = evolve(apply_parameter(base, "n1_init", 100))
    assert abs(traj.p_x[-1] - math.sin(0.1 * math.sqrt(100 * math.pi)) ** 2) < 1e-3


def test_minimum_excitation_dark_vacuum():
    grid = np.arange(-30.0, -1.0, 7.0)
    assert minimum_excitation_scan(grid, grid, n1=0) < 1e-10


def test_minimum_excitation_contrast_two_photons():
    p = minimum_excitation_scan([-4.06], [-15.96], n1=2)
    assert p == pytest.approx(0.99, abs=0.01)


def test_fock_counterpart():
    cfg = scenarios.fock_counterpart(preset("coherent_fig4d"))
    assert cfg.field1_init == Fock(2) and cfg.field2_init == Fock(1)
    assert cfg.window1 is None


@pytest.mark.slow
def test_fig1b_has_several_near_unit_resonances():
    base, ax, ay = preset("super_fig1b")
    base = base.replace(half_width=8)
    cax, cay = ax.subsample(5), ay.subsample(4)
    coarse = run_sweep(base, cax, cay)
    strong = []
    for m in locate_maxima(coarse, 0.95)[:4]:
        sx = refine_axis(cax, m.x, 1.0, 0.25)
        sy = refine_axis(cay, m.y, 4.0, 1.0)
        fine, best = scenarios.zoom_maximum(base, sx, sy, rounds=1)
        if best.p_x >= 0.99 and fine.audit_pass[best.iy, best.ix]:
            strong.append(best)
    assert len(strong) >= 2
    # distinct resonances, not one peak found twice
    assert len({(round(b.x), round(math.sqrt(b.y) / 5)) for b in strong}) >= 2
