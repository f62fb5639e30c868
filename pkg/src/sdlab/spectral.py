"""Periodic spectral backend.

Fields live on a uniform grid of the torus ``[-L/2, L/2)^d``.  Spatial axes are
always the trailing ``d`` axes of an array, so vector fields have shape
``(d, N, ..., N)`` and space-time fields ``(M, N, ..., N)``.  Transforms use
``numpy.fft.rfftn`` over the spatial axes, which restricts the backend to real
fields.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import special
from scipy.sparse.linalg import LinearOperator, eigsh

from ._validation import check_positive


@dataclass(frozen=True)
class TorusGrid:
    """Uniform periodic grid with ``N`` nodes per axis and side length ``L``.

    Node ``j`` on each axis sits at ``-L/2 + j*h``, so for even ``N`` the origin
    is a grid node.
    """

    d: int
    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if not isinstance(self.d, (int, np.integer)) or not 1 <= self.d <= 4:
            raise ValueError(f"TorusGrid supports d in 1..4, got {self.d!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got {self.N!r}")
        check_positive(self.L, "L")

    @property
    def h(self):
        return self.L / self.N

    @property
    def shape(self):
        return (self.N,) * self.d

    @property
    def size(self):
        return self.N**self.d

    @property
    def axes(self):
        return tuple(range(-self.d, 0))

    @cached_property
    def axis(self):
        return -self.L / 2 + self.h * np.arange(self.N)

    @cached_property
    def points(self):
        """Node coordinates, shape ``(N, ..., N, d)``."""
        mesh = np.meshgrid(*([self.axis] * self.d), indexing="ij")
        return np.stack(mesh, axis=-1)

    @cached_property
    def spectral_shape(self):
        return (self.N,) * (self.d - 1) + (self.N // 2 + 1,)

    @cached_property
    def wavenumbers(self):
        """Per-axis wavenumbers, each broadcastable to ``spectral_shape``."""
        scale = 2 * np.pi / self.L
        ks = []
        for i in range(self.d):
            if i < self.d - 1:
                k = scale * np.fft.fftfreq(self.N, 1.0 / self.N)
            else:
                k = scale * np.fft.rfftfreq(self.N, 1.0 / self.N)
            shape = [1] * self.d
            shape[i] = k.size
            ks.append(k.reshape(shape))
        return tuple(ks)

    @cached_property
    def derivative_wavenumbers(self):
        """Wavenumbers with the Nyquist mode removed, for odd derivatives."""
        out = []
        for k in self.wavenumbers:
            k = k.copy()
            k[np.isclose(np.abs(k), np.pi / self.h)] = 0.0
            out.append(k)
        return tuple(out)

    @cached_property
    def k2(self):
        return sum(np.broadcast_to(k**2, self.spectral_shape) for k in self.wavenumbers)

    @cached_property
    def lattice_k2(self):
        """Symbol of the second-difference Laplacian, ``sum (2/h sin(k h/2))^2``."""
        h = self.h
        return sum(
            np.broadcast_to((2.0 / h * np.sin(k * h / 2)) ** 2, self.spectral_shape)
            for k in self.wavenumbers
        )

    def symbol(self, kind="spectral"):
        if kind == "spectral":
            return self.k2
        if kind == "lattice":
            return self.lattice_k2
        raise ValueError(f"unknown Laplacian symbol {kind!r}")

    def fft(self, f):
        return np.fft.rfftn(f, axes=self.axes)

    def ifft(self, F):
        return np.fft.irfftn(F, s=self.shape, axes=self.axes)

    def mean(self, f):
        """Volume-normalized average over the spatial axes."""
        return np.mean(f, axis=self.axes)

    def lp_norm(self, f, p=2.0):
        """Volume-normalized ``L^p`` norm over the spatial axes."""
        a = np.abs(f)
        if np.isinf(p):
            return np.max(a, axis=self.axes)
        return np.mean(a**p, axis=self.axes) ** (1.0 / p)


@dataclass
class SpectralField:
    """A real grid function in physical or spectral representation."""

    grid: TorusGrid
    values: np.ndarray
    representation: str = "physical"

    def __post_init__(self):
        if self.representation not in ("physical", "spectral"):
            raise ValueError("representation must be 'physical' or 'spectral'")

    @property
    def components(self):
        extra = self.values.shape[: self.values.ndim - self.grid.d]
        return int(np.prod(extra)) if extra else 1

    def to_spectral(self):
        if self.representation == "spectral":
            return self
        return SpectralField(self.grid, self.grid.fft(self.values), "spectral")

    def to_physical(self):
        if self.representation == "physical":
            return self
        return SpectralField(self.grid, self.grid.ifft(self.values), "physical")


def apply_multiplier(f, grid, multiplier):
    """Apply a Fourier multiplier given on ``grid.spectral_shape``."""
    return grid.ifft(grid.fft(f) * multiplier)


def bessel_apply(f, grid, alpha, lam, symbol="spectral"):
    """Apply ``(lam - Laplacian)^(-alpha/2)``.

    With ``lam = 0`` the zero mode is undefined, so ``f`` must have zero mean.
    """
    check_positive(alpha, "alpha")
    check_positive(lam, "lambda", strict=False)
    F = grid.fft(f)
    base = lam + grid.symbol(symbol)
    with np.errstate(divide="ignore"):
        mult = np.where(base > 0, base, 1.0) ** (-alpha / 2)
    if lam == 0:
        zero_mode = F[(...,) + (0,) * grid.d]
        if np.max(np.abs(zero_mode)) > 1e-12 * max(1.0, np.max(np.abs(F))):
            raise ValueError(
                "lambda = 0 leaves the k=0 mode undefined; f must have zero mean"
            )
        mult = mult.copy()
        mult[(0,) * grid.d] = 0.0
    return grid.ifft(F * mult)


def fractional_laplacian(f, grid, alpha):
    """Apply ``(-Laplacian)^(alpha/2)``, the multiplier ``|k|^alpha``."""
    if not 0 < alpha <= 2:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    return apply_multiplier(f, grid, grid.k2 ** (alpha / 2))


def laplacian(f, grid, symbol="spectral"):
    return apply_multiplier(f, grid, -grid.symbol(symbol))


def gradient(f, grid):
    """Spectral gradient; the component index is prepended to ``f.shape``."""
    F = grid.fft(f)
    return np.stack([grid.ifft(1j * k * F) for k in grid.derivative_wavenumbers])


def divergence(v, grid):
    F = grid.fft(v)
    return sum(grid.ifft(1j * k * F[i]) for i, k in enumerate(grid.derivative_wavenumbers))


def forward_difference(f, grid):
    """Forward differences ``(f(x + h e_i) - f(x)) / h``, component first."""
    return np.stack([(np.roll(f, -1, axis=ax) - f) / grid.h for ax in grid.axes])


# --- parabolic potentials -------------------------------------------------


def _hat_weights(a, beta, dt, n_lags, horizon):
    """Product-integration weights for ``s^(beta-1) e^(-a s) / Gamma(beta)``.

    Returns ``(W, tail)``.  ``W[j]`` integrates the kernel against the hat
    function centred at ``j*dt`` (half-hat for ``j = 0``), truncated at
    ``horizon``; ``tail[j]`` is the kernel mass on ``[j*dt, horizon]``, used for
    constant extension of the history.
    """
    a = np.asarray(a, dtype=float)
    nodes = np.minimum(dt * np.arange(n_lags + 1), horizon)

    def P(b, s):
        return special.gammainc(b, a * s)

    with np.errstate(divide="ignore", invalid="ignore"):
        scale0 = a ** (-beta)
        scale1 = beta * a ** (-beta - 1)
    P0 = np.stack([P(beta, s) for s in nodes])
    P1 = np.stack([P(beta + 1, s) for s in nodes])
    m0 = scale0 * np.diff(P0, axis=0)  # interval [s_j, s_j+1]
    m1 = scale1 * np.diff(P1, axis=0)
    lo = nodes[:-1].reshape((-1,) + (1,) * a.ndim)
    hi = nodes[1:].reshape((-1,) + (1,) * a.ndim)
    falling = (hi * m0 - m1) / dt  # hat_j on [s_j, s_j+1]
    rising = (m1 - lo * m0) / dt  # hat_j+1 on [s_j, s_j+1]
    W = np.zeros((n_lags,) + a.shape)
    W += falling[:n_lags]
    W[1:] += rising[: n_lags - 1]
    P_end = P(beta, horizon)
    tail = scale0 * (P_end - P0[:n_lags])
    rise_into = np.zeros_like(W)
    rise_into[1:] = rising[: n_lags - 1]
    return W, tail + rise_into


def parabolic_truncation_error(lam, alpha, horizon):
    """Kernel mass beyond the horizon relative to the full operator norm."""
    return float(special.gammaincc(alpha / 2, lam * horizon))


def parabolic_potential(
    h, grid, dt, alpha, lam, direction="forward", horizon=None, extension="zero"
):
    """Apply ``(lam + d/dt - Laplacian)^(-alpha/2)`` (or the backward operator).

    ``h`` has shape ``(M, N, ..., N)`` sampled at ``t_j = t_0 + j*dt``.  The
    time convolution with ``e^{-lam s} s^{alpha/2 - 1} e^{s Laplacian}`` is
    done by product integration against piecewise-linear interpolation of
    ``h``.  The kernel carries the factor ``1/Gamma(alpha/2)`` so that the
    operator norm is ``lam^(-alpha/2)``.  History outside the time window is
    zero (``extension='zero'``) or frozen at the end value (``'constant'``).
    The integral is truncated at ``horizon`` (default ``12/lam``).
    """
    if not 0 < alpha <= 2:
        raise ValueError(f"alpha must lie in (0, 2], got {alpha}")
    check_positive(lam, "lambda")
    check_positive(dt, "dt")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    if extension not in ("zero", "constant"):
        raise ValueError("extension must be 'zero' or 'constant'")
    h = np.asarray(h, dtype=float)
    M = h.shape[0]
    horizon = 12.0 / lam if horizon is None else float(horizon)
    n_lags = max(1, min(M, int(np.ceil(horizon / dt)) + 1))
    a = lam + grid.k2
    W, tail = _hat_weights(a, alpha / 2, dt, n_lags, horizon)
    H = grid.fft(h)
    if direction == "backward":
        H = H[::-1]
    out = np.zeros_like(H)
    for j in range(n_lags):
        out[j:] += W[j] * H[: M - j]
    if extension == "constant":
        # replace the zero history behind t_0 by the frozen value h(t_0)
        for i in range(M):
            if i < n_lags:
                out[i] += (tail[i] - W[i]) * H[0]
    if direction == "backward":
        out = out[::-1]
    return grid.ifft(out)


# --- operator norms -------------------------------------------------------


def random_smooth_field(grid, rng, n_modes=4.0, leading=()):
    """Random real field whose spectrum decays like ``exp(-|k|^2/(2 k0^2))``."""
    k0 = n_modes * 2 * np.pi / grid.L
    raw = rng.standard_normal(tuple(leading) + grid.shape)
    return apply_multiplier(raw, grid, np.exp(-grid.k2 / (2 * k0**2)))


def _norm(x, p):
    a = np.abs(x).ravel()
    if np.isinf(p):
        return float(a.max())
    return float(np.mean(a**p) ** (1.0 / p))


def _duality_map(x, p):
    """``J_p(x) = |x|^(p-1) sgn(x)``, the gradient of ``||x||_p^p / p``."""
    return np.sign(x) * np.abs(x) ** (p - 1)


def op_norm_estimate(op, grid, p=2.0, trials=4, seed=0, adjoint=None, steps=40, leading=()):
    """Lower bound of ``||op||_{p->p}`` over real grid functions.

    Starts from ``trials`` random smooth fields and improves the best one by
    ascent: with an ``adjoint`` this is the nonlinear power method
    ``x <- J_q(op^* J_p(op x))`` (for ``p = 2`` a Lanczos solve on
    ``op^* op``); without one, the plain iteration ``x <- op x``.
    """
    if not 1 <= p <= np.inf:
        raise ValueError(f"p must lie in [1, inf], got {p}")
    rng = np.random.default_rng(seed)
    shape = tuple(leading) + grid.shape
    best, best_x = 0.0, None
    for _ in range(max(1, int(trials))):
        x = random_smooth_field(grid, rng, leading=leading)
        nx = _norm(x, p)
        if nx == 0:
            continue
        r = _norm(op(x), p) / nx
        if r > best:
            best, best_x = r, x
    if best_x is None or best == 0.0:
        return 0.0
    if adjoint is not None and p == 2:
        n = int(np.prod(shape))
        A = LinearOperator(
            (n, n),
            matvec=lambda v: adjoint(op(v.reshape(shape))).ravel(),
            dtype=float,
        )
        try:
            val = eigsh(A, k=1, which="LA", v0=best_x.ravel(), tol=1e-10, maxiter=50 * steps,
                        return_eigenvectors=False)[0]
            best = max(best, float(np.sqrt(max(val, 0.0))))
        except Exception:  # fall back to the power method below
            pass
        else:
            return best
    x = best_x / _norm(best_x, p)
    for _ in range(steps):
        y = op(x)
        ny = _norm(y, p)
        if ny == 0:
            break
        best = max(best, ny)
        if adjoint is not None and 1 < p < np.inf:
            q = p / (p - 1)
            z = _duality_map(adjoint(_duality_map(y, p)), q)
        else:
            z = y
        nz = _norm(z, p)
        if nz == 0:
            break
        x = z / nz
    return best
