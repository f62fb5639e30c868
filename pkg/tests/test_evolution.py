import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdlab.drifts import hardy_drift
from sdlab.evolution import (
    EvolutionConfig, NumericalAbort, WeightFunction, conservation_audit, energy_audit, evolve,
    feller_cauchy_diagnostic, gradient_bound_audit, lattice_centers, linfty_bound_audit,
    orlicz_norm, refinement_stable,
)
from sdlab.mollify import MollificationSchedule, mollify_cutoff
from sdlab.spectral import TorusGrid, gradient, laplacian, random_smooth_field


@pytest.fixture(scope="module")
def g2():
    return TorusGrid(2, 16)


def smooth_drift(grid, amp=0.5):
    x = grid.points
    return amp * np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])])


def test_heat_eigenmode(g2):
    u0 = np.cos(2 * g2.points[..., 0])
    for scheme in ("IMEX", "ETD"):
        traj = evolve(None, u0, EvolutionConfig(g2, 0.5, dt=0.01, scheme=scheme))
        if scheme == "IMEX":
            exact = (1 / (1 + 0.04)) ** 50
            assert abs(exact - np.exp(-2.0)) < 0.02  # O(dt) per unit time
        else:
            exact = np.exp(-2.0)
        assert np.allclose(traj.states[-1], exact * u0, atol=1e-12)


def test_constants_preserved(g2):
    for scheme in ("IMEX", "ETD"):
        traj = evolve(smooth_drift(g2, 2.0), np.ones(g2.shape),
                      EvolutionConfig(g2, 1.0, scheme=scheme))
        assert np.max(np.abs(traj.states - 1)) < 1e-13


def _manufactured_error(scheme, dt):
    # u*(t, x) = e^{-t} sin(x) cos(y), f = (d/dt - Lap + b.grad) u*
    g = TorusGrid(2, 32)
    x, y = g.points[..., 0], g.points[..., 1]
    b = smooth_drift(g, 0.7)
    phi = np.sin(x) * np.cos(y)
    grad_phi = gradient(phi, g)
    lap_phi = laplacian(phi, g)
    adv_phi = np.sum(b * grad_phi, axis=0)

    def rhs(t):
        return np.exp(-t) * (-phi - lap_phi + adv_phi)

    traj = evolve(b, phi, EvolutionConfig(g, 0.5, dt=dt, scheme=scheme), rhs=rhs)
    return float(np.max(np.abs(traj.states[-1] - np.exp(-0.5) * phi)))


@pytest.mark.parametrize("scheme", ["IMEX", "ETD"])
def test_manufactured_solution_first_order(scheme):
    e1 = _manufactured_error(scheme, 0.02)
    e2 = _manufactured_error(scheme, 0.01)
    assert e1 < 0.02
    assert 1.7 < e1 / e2 < 2.3


def test_cfl_guard(g2):
    b = smooth_drift(g2, 10.0)
    cfg = EvolutionConfig(g2, 0.1, dt=0.05)
    with pytest.raises(ValueError, match="CFL"):
        evolve(b, np.ones(g2.shape), cfg)
    auto = EvolutionConfig(g2, 0.1)
    dt, n = auto.resolve_dt(b)
    assert dt <= auto.cfl_limit(b) and abs(n * dt - 0.1) < 1e-12


def test_nan_aborts_with_step(g2):
    def rhs(t):
        return np.full(g2.shape, np.nan if t > 0.025 else 0.0)

    with pytest.raises(NumericalAbort) as err:
        evolve(None, np.ones(g2.shape), EvolutionConfig(g2, 0.1, dt=0.01), rhs=rhs)
    assert err.value.step == 4


def test_config_validation(g2):
    with pytest.raises(ValueError):
        EvolutionConfig(g2, 1.0, scheme="RK4")
    with pytest.raises(ValueError):
        EvolutionConfig(g2, -1.0)
    with pytest.raises(ValueError):
        evolve(None, np.ones((3, 3)), EvolutionConfig(g2, 0.1))


def test_orlicz_norm_constant():
    # <cosh(a/c) - 1> = 1 gives c = a / arccosh(2)
    assert orlicz_norm(np.full(50, 1.0)) == pytest.approx(1 / np.arccosh(2.0), rel=1e-12)
    assert orlicz_norm(np.zeros(5)) == 0.0


def test_orlicz_norm_two_level():
    # half the mass at a, half at 0: cosh(a/c) = 3
    f = np.array([2.0, 0.0] * 10)
    assert orlicz_norm(f) == pytest.approx(2.0 / np.arccosh(3.0), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.1, 5.0))
def test_orlicz_dominance_and_homogeneity(seed, scale):
    f = scale * np.random.default_rng(seed).standard_normal(64)
    n = orlicz_norm(f)
    for p in (1, 2):
        lp = np.mean(np.abs(f) ** (2 * p)) ** (1 / (2 * p))
        assert n >= lp / np.prod(np.arange(1, 2 * p + 1)) * (1 - 1e-12)
    assert orlicz_norm(3.0 * f) == pytest.approx(3.0 * n, rel=1e-8)


def _hardy_traj(delta, level=8, N=16, T=0.1, L=1.0):
    g = TorusGrid(3, N, L)
    sch = MollificationSchedule.default((level,))
    bn = mollify_cutoff(hardy_drift(3, delta), level, sch, g)
    x = g.points
    u0 = 0.8 * np.exp(-np.sum(x**2, axis=-1) / (2 * 0.15**2)) + 0.2 * np.cos(2 * np.pi * x[..., 0])
    return evolve(bn, u0, EvolutionConfig(g, T))


def test_energy_lp_and_orlicz():
    traj = _hardy_traj(1.0)
    lp = energy_audit(traj, 4.0, 1.0, mode="Lp", tol=0.01)
    assert lp.checks["scaled_norm_nonincreasing"] and lp.passed
    orl = energy_audit(traj, 2, 1.0, mode="Orlicz")
    assert orl.passed and orl.lhs <= orl.rhs * 1.02
    assert orl.checks["orlicz_dominates_l2p"]
    assert all(np.all(np.isfinite(v)) for v in orl.series.values())
    with pytest.raises(ValueError):
        energy_audit(traj, 3, 1.0, mode="Orlicz")


def test_orlicz_time_restriction():
    traj = _hardy_traj(1.0, T=0.1)
    with pytest.raises(ValueError, match="t <"):
        energy_audit(traj, 2, 1.0, c_delta=10.0, mode="Orlicz")


def test_energy_half_order_and_growth(g2):
    b = smooth_drift(g2, 0.1)
    u0 = random_smooth_field(g2, np.random.default_rng(0))
    traj = evolve(b, u0, EvolutionConfig(g2, 0.2))
    from sdlab.drifts import weak_form_bound
    dw = weak_form_bound(b, g2, 1.0).delta
    assert energy_audit(traj, 2.0, dw, mode="half-order").passed
    gr = energy_audit(traj, 2.0, 0.1, mode="growth", q=4.0)
    assert gr.checks["finite"] and gr.fitted_constant > 0
    with pytest.raises(ValueError):
        energy_audit(traj, 2.0, 0.1, mode="growth")


def test_lp_growth_rate():
    traj = _hardy_traj(0.5)
    rep = energy_audit(traj, 3.0, 0.5, c_delta=0.4, mode="Lp")
    assert rep.growth_rate == pytest.approx(0.4 / 4)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.005, 0.2), st.floats(0.3, 4.0))
def test_weight_function_bounds(kappa, theta):
    g = TorusGrid(3, 8, 4.0)
    w = WeightFunction(kappa, theta, (0.3, -0.2, 0.0))
    gv, lv = w.bound_violations(g)
    assert gv <= 1e-12 and lv <= 1e-12


def test_weight_function_derivatives():
    # single image compared to finite differences of the closed form
    w = WeightFunction(0.1, 1.5, images=0)
    g = TorusGrid(1, 64, 8.0)
    rho = w.on_grid(g)
    fd = (np.roll(rho, -1) - np.roll(rho, 1)) / (2 * g.h)
    assert np.allclose(w.gradient_on_grid(g)[0][2:-2], fd[2:-2], atol=2e-3)


def test_lattice_centers():
    c = lattice_centers(TorusGrid(2, 8, 2 * np.pi))
    assert len(c) == 49 and np.all(np.abs(c) <= np.pi)


def test_conservation_audit():
    g = TorusGrid(3, 16)
    sch = MollificationSchedule.default((8,))
    rep = conservation_audit(mollify_cutoff(hardy_drift(3, 1.0), 8, sch, g), EvolutionConfig(g, 0.5))
    assert rep.passed and rep.values["sup_deviation"] < 1e-8


def test_gradient_bound_flags():
    traj = _hardy_traj(0.5, T=0.05, L=2 * np.pi)
    rep = gradient_bound_audit(traj, 3.5, 0.5, condition="C4")
    assert rep.flags and "C4" in rep.flags[0]
    ok = gradient_bound_audit(traj, 3.5, 0.05, condition="C4")
    assert not ok.flags and ok.constants[0] > 0
    assert ok.values["c"] == pytest.approx(2 * 2.5 / 3.5**2)


def test_refinement_stable():
    assert refinement_stable([1.0, 1.5, 1.9])
    assert not refinement_stable([1.0, 2.5])
    assert not refinement_stable([1.0, np.nan])


def test_linfty_audit_zero_source():
    g = TorusGrid(3, 8)
    rep = linfty_bound_audit(None, np.zeros(g.shape), 1.0, 2.5, 3.5,
                             [WeightFunction(0.05, 2.0)], EvolutionConfig(g, 0.1))
    assert rep.constants == [0.0]
    with pytest.raises(ValueError):
        linfty_bound_audit(None, np.ones(g.shape), 1.0, 2.0, 3.5, [WeightFunction(0.05, 2.0)],
                           EvolutionConfig(g, 0.1), delta=1.0)


def test_feller_cauchy_needs_three_levels():
    g = TorusGrid(3, 8)
    with pytest.raises(ValueError):
        feller_cauchy_diagnostic(hardy_drift(3, 0.1), MollificationSchedule.default((4, 8)),
                                 np.ones(g.shape), EvolutionConfig(g, 0.1))
