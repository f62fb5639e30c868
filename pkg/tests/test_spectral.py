import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sdlab.spectral import (
    SpectralField, TorusGrid, apply_multiplier, bessel_apply, divergence, fractional_laplacian,
    gradient, laplacian, op_norm_estimate, parabolic_potential, random_smooth_field,
)


@pytest.fixture(scope="module")
def g3():
    return TorusGrid(3, 16)


def test_grid_validation():
    for bad in (dict(d=0, N=16), dict(d=5, N=16), dict(d=3, N=7), dict(d=3, N=6),
                dict(d=3, N=16, L=-1.0)):
        with pytest.raises(ValueError):
            TorusGrid(**bad)


def test_origin_is_node():
    g = TorusGrid(2, 8)
    assert np.any(np.all(g.points == 0, axis=-1))


def test_wavenumber_set():
    g = TorusGrid(1, 8, 2 * np.pi)
    k = np.sort(np.fft.fftfreq(8, 1 / 8))
    assert np.array_equal(k, np.arange(-4, 4))
    assert g.k2.shape == g.spectral_shape


def test_roundtrip_and_hermitian(g3):
    f = random_smooth_field(g3, np.random.default_rng(0))
    sf = SpectralField(g3, f).to_spectral()
    back = sf.to_physical().values
    assert np.max(np.abs(back - f)) < 1e-12 * np.max(np.abs(f))
    full = np.fft.fftn(f)
    assert np.allclose(full[1, 2, 3], np.conj(full[-1, -2, -3]))


def test_single_mode_scaling(g3):
    x = g3.points
    f = np.cos(2 * x[..., 0] + x[..., 1])
    out = bessel_apply(f, g3, 1.5, 2.0)
    assert np.allclose(out, (2.0 + 5.0) ** -0.75 * f, atol=1e-13)


def test_inverse_identity(g3):
    lam = 3.0
    gfun = random_smooth_field(g3, np.random.default_rng(1))
    f = lam * gfun - laplacian(gfun, g3)
    assert np.max(np.abs(bessel_apply(f, g3, 2.0, lam) - gfun)) < 1e-10


def test_composition(g3):
    f = random_smooth_field(g3, np.random.default_rng(2))
    a = bessel_apply(bessel_apply(f, g3, 0.7, 1.0), g3, 1.1, 1.0)
    b = bessel_apply(f, g3, 1.8, 1.0)
    assert np.max(np.abs(a - b)) < 1e-12


def test_lambda_zero_needs_zero_mean(g3):
    f = 1.0 + random_smooth_field(g3, np.random.default_rng(3))
    with pytest.raises(ValueError, match="k=0"):
        bessel_apply(f, g3, 1.0, 0.0)
    out = bessel_apply(f - f.mean(), g3, 2.0, 0.0)
    assert np.isfinite(out).all()


@settings(max_examples=25, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(0.1, 5.0), st.integers(0, 10**6))
def test_bessel_norm_bound(alpha, lam, seed):
    g = TorusGrid(2, 16)
    f = np.random.default_rng(seed).standard_normal(g.shape)
    out = bessel_apply(f, g, alpha, lam)
    assert np.linalg.norm(out) <= lam ** (-alpha / 2) * np.linalg.norm(f) * (1 + 1e-12)


def test_fractional_laplacian_mode(g3):
    x = g3.points
    f = np.cos(2 * x[..., 2])
    assert np.allclose(fractional_laplacian(f, g3, 1.0), 2 * f, atol=1e-12)
    with pytest.raises(ValueError):
        fractional_laplacian(f, g3, 2.5)


def test_gradient_divergence(g3):
    x = g3.points
    f = np.sin(x[..., 0]) * np.cos(2 * x[..., 1])
    gr = gradient(f, g3)
    assert np.allclose(gr[0], np.cos(x[..., 0]) * np.cos(2 * x[..., 1]), atol=1e-12)
    assert np.allclose(gr[1], -2 * np.sin(x[..., 0]) * np.sin(2 * x[..., 1]), atol=1e-12)
    assert np.allclose(divergence(gr, g3), laplacian(f, g3), atol=1e-11)


def test_lattice_symbol():
    g = TorusGrid(1, 16)
    x = g.points[..., 0]
    f = np.sin(3 * x)
    lap = (np.roll(f, -1) - 2 * f + np.roll(f, 1)) / g.h**2
    assert np.allclose(laplacian(f, g, "lattice"), lap, atol=1e-12)


def test_parabolic_constant_history():
    # (lam + d/dt)^(-1) applied to a constant in time is c/lam
    g = TorusGrid(1, 8)
    h = np.full((400, 8), 2.0)
    out = parabolic_potential(h, g, 0.05, 2.0, 1.0, extension="constant", horizon=20.0)
    assert np.allclose(out, 2.0, rtol=1e-6)


def test_parabolic_norm_bound():
    g = TorusGrid(1, 16)
    h = np.random.default_rng(0).standard_normal((64, 16))
    for alpha, lam in ((1.0, 2.0), (2.0, 0.5), (0.5, 4.0)):
        out = parabolic_potential(h, g, 0.05, alpha, lam)
        assert np.sqrt(np.mean(out**2)) <= lam ** (-alpha / 2) * np.sqrt(np.mean(h**2)) * 1.01


def test_parabolic_zero_extension_causal():
    g = TorusGrid(1, 8)
    h = np.zeros((50, 8))
    h[30:] = 1.0
    out = parabolic_potential(h, g, 0.1, 1.0, 1.0)
    assert np.all(out[:30] == 0)
    back = parabolic_potential(h, g, 0.1, 1.0, 1.0, direction="backward")
    assert np.all(back[30:] > 0)


def test_op_norm_scalar_multiple(g3):
    est = op_norm_estimate(lambda f: 0.5 * f, g3, 2.0, adjoint=lambda f: 0.5 * f)
    assert est == pytest.approx(0.5, rel=1e-10)


def test_op_norm_multiplier(g3):
    # max_k |k|/(mu + |k|^2) = 1/(2 sqrt(mu)) at |k| = sqrt(mu) = 2
    mu = 4.0
    mult = 1.0 / (mu + g3.k2)
    op = lambda f: apply_multiplier(gradient(f, g3)[0], g3, mult)
    est = op_norm_estimate(op, g3, 2.0, adjoint=lambda f: -apply_multiplier(gradient(f, g3)[0], g3, mult))
    assert est == pytest.approx(1 / (2 * np.sqrt(mu)), rel=1e-6)
