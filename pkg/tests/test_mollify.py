import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdlab.drifts import DriftField, hardy_drift
from sdlab.mollify import (
    MollificationSchedule, Mollifier, calibrate_c_delta, degiorgi_exact, domination_violation,
    friedrichs_constant, friedrichs_kernel_on_grid, hardy_profile_eval, mollify_cutoff,
    mollify_direct, verify_preservation,
)
from sdlab.spectral import TorusGrid, random_smooth_field


@pytest.fixture(scope="module")
def g3():
    return TorusGrid(3, 16)


def test_mollifier_validation():
    with pytest.raises(ValueError):
        Mollifier("DeGiorgi", 0.0)
    with pytest.raises(ValueError):
        Mollifier("Gauss", 0.1)


@pytest.mark.parametrize("kind,eps", [("DeGiorgi", 0.1), ("Friedrichs", 0.8)])
def test_constant_unchanged(g3, kind, eps):
    m = Mollifier(kind, eps)
    out = m.apply(np.full((3,) + g3.shape, 2.5), g3)
    assert np.allclose(out, 2.5, atol=1e-12)


def test_degiorgi_mass_and_positivity(g3):
    m = Mollifier("DeGiorgi", 0.05)
    delta = np.zeros(g3.shape)
    delta[0, 0, 0] = 1.0
    kern = m.apply(delta, g3)
    assert kern.sum() == pytest.approx(1.0, abs=1e-14)
    assert kern.min() > -1e-15


def test_friedrichs_normalisation():
    # d = 1: int_{-1}^{1} exp(1/(y^2-1)) dy = 0.443993816...
    assert 1 / friedrichs_constant(1) == pytest.approx(0.4439938161680794, rel=1e-6)
    g = TorusGrid(3, 32)
    kern = friedrichs_kernel_on_grid(g, 1.0)
    assert kern.sum() == pytest.approx(1.0, abs=1e-12) and kern.min() >= 0


def test_semigroup_property(g3):
    f = random_smooth_field(g3, np.random.default_rng(0), leading=(3,))
    a = Mollifier("DeGiorgi", 0.3, "spectral").apply(f, g3)
    b = Mollifier("DeGiorgi", 0.1, "spectral").apply(Mollifier("DeGiorgi", 0.2, "spectral").apply(f, g3), g3)
    assert np.max(np.abs(a - b)) < 1e-13


def test_direct_mollification_hardy_bounded_and_growing(g3):
    b = hardy_drift(3, 1.0)
    maxima = [float(np.max(np.abs(mollify_direct(b, Mollifier("DeGiorgi", e), g3)
                                  .meta["grid_values"]))) for e in (0.2, 0.05, 0.01)]
    assert all(np.isfinite(maxima))
    assert maxima[0] < maxima[1] < maxima[2]


def test_hardy_profile_limits():
    for d in (3, 5):
        assert hardy_profile_eval(np.array([0.0]), d)[0] == pytest.approx(1 / (2 * d), rel=1e-10)
        r = np.array([30.0, 60.0])
        series = r**-2 - 2 * (d - 2) * r**-4 + 4 * (d - 2) * (d - 4) * r**-6
        assert np.allclose(hardy_profile_eval(r, d), series, rtol=1e-5)


def test_degiorgi_exact_against_monte_carlo():
    # e^{eps Lap} b(x) = E b(x + sqrt(2 eps) Z)
    d, eps = 3, 0.25
    b = hardy_drift(d, 1.0)
    x = np.array([0.6, 0.2, 0.0])
    z = np.random.default_rng(7).standard_normal((400000, d))
    samples = b(x + np.sqrt(2 * eps) * z)
    mc = samples.mean(axis=0)
    se = samples.std(axis=0) / np.sqrt(len(z))
    exact = degiorgi_exact(b, eps)(x)
    assert np.all(np.abs(exact - mc) < 4 * se + 1e-4)


def test_degiorgi_exact_at_center():
    b = degiorgi_exact(hardy_drift(3, 1.0), 0.1)
    assert np.allclose(b(np.zeros(3)), 0.0)
    assert b.meta["eps"] == 0.1 and len(b.meta["centers"]) == 1
    with pytest.raises(ValueError):
        degiorgi_exact(DriftField(3, lambda t, x: x), 0.1)


def test_schedule_invariants():
    s = MollificationSchedule.default((4, 8, 16))
    assert all(a > b for a, b in zip(s.eps, s.eps[1:]))
    with pytest.raises(ValueError):
        MollificationSchedule((1, 2), (0.5, 0.5), (1.0, 1.0))
    with pytest.raises(ValueError):
        MollificationSchedule((1, 2), (0.5, 0.25), (1.0, 0.5))
    with pytest.raises(ValueError):
        MollificationSchedule((1, 2), (0.5, 0.25), (0.0, 1.0))
    with pytest.raises(ValueError):
        s.index(5)


def test_cutoff_zeroes_large_values(g3):
    s = MollificationSchedule.default((2,))
    bn = mollify_cutoff(hardy_drift(3, 1.0), 2, s, g3)
    assert np.isfinite(bn.meta["grid_values"]).all()
    assert bn.meta["level"] == 2


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.01, 0.5))
def test_domination_property(seed, eps):
    # |E_eps b| <= sqrt(E_eps |b|^2) for a positive kernel
    g = TorusGrid(2, 16)
    vals = np.random.default_rng(seed).standard_normal((2,) + g.shape)
    assert domination_violation(vals, Mollifier("DeGiorgi", eps), g) <= 1e-12


def test_preservation_small_grid():
    g = TorusGrid(3, 16)
    b = hardy_drift(3, 1.0)
    c = calibrate_c_delta(b, g, 1.0)
    rep = verify_preservation(b, MollificationSchedule.default((4, 8, 16)), g, c)
    assert rep.passed
    assert all(r.delta_hat <= 1.0 + 1e-6 for r in rep.rows)
    assert [row["level"] for row in rep.csv_rows()] == [4, 8, 16]


def test_calibrated_schedule():
    g = TorusGrid(3, 16)
    b = hardy_drift(3, 0.5)
    s = MollificationSchedule.default((4, 8)).calibrated(b, g, 0.5, 0.0)
    assert all(0 < c <= 1 for c in s.c)
    assert list(s.c) == sorted(s.c)
    assert len(s.delta_measured) == 2
