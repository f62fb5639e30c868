"""Neumann-series resolvents ``Theta_p(mu, b)`` built from operator triples.

For the elliptic variant with ``s = 2/p``

    G = b^s . grad (mu - Lap)^(-1/2 - 1/r)
    T = b^s . grad (mu - Lap)^(-1) |b|^(1 - s)
    Q = (mu - Lap)^(-1/2 + 1/q) |b|^(1 - s)

and ``u = (mu - Lap)^-1 f - (mu - Lap)^(-1/2 - 1/q) Q (1 + T)^-1 G (mu - Lap)^(-1/2 + 1/r) f``
solves ``(mu - Lap + b . grad) u = f``.  The weak variant uses ``s = 1/p`` and
half-order potentials; the parabolic variant uses ``(mu + d/dt - Lap)``.
Here ``b^s = b |b|^(s-1)``, set to zero where ``b = 0``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from ._validation import check_finite, check_positive, check_vector_field
from .admissibility import c_delta_p, weak_constants
from .drifts import DriftField
from .spectral import divergence, gradient, op_norm_estimate, parabolic_potential

VARIANTS = ("elliptic", "weak", "parabolic")


class SeriesDivergenceError(RuntimeError):
    """The Neumann series terms grew; carries the empirical ``||T||``."""

    def __init__(self, message, t_norm=None):
        super().__init__(message)
        self.t_norm = t_norm


@dataclass
class NeumannConfig:
    p: float = 2.0
    q: Optional[float] = None
    r: Optional[float] = None
    mu: float = 10.0
    series_tol: float = 1e-12
    max_terms: int = 200

    def __post_init__(self):
        self.p = float(self.p)
        if self.q is None:
            self.q = 2.0 * self.p
        if self.r is None:
            self.r = (1.0 + self.p) / 2.0
        if not (1 < self.r < self.p < self.q):
            raise ValueError(f"need 1 < r < p < q, got r={self.r}, p={self.p}, q={self.q}")
        check_positive(self.mu, "mu")
        check_positive(self.series_tol, "series_tol")
        if int(self.max_terms) < 1:
            raise ValueError("max_terms must be >= 1")

    def with_mu(self, mu):
        return NeumannConfig(self.p, self.q, self.r, mu, self.series_tol, self.max_terms)


@dataclass
class OperatorTriple:
    G: Callable
    T: Callable
    Q: Callable
    T_adjoint: Callable
    pre: Callable  # potential applied to f before G
    post: Callable  # potential applied after Q
    free: Callable  # (mu - Lap)^-1 or its parabolic analogue
    variant: str
    grid: object
    leading: tuple = ()
    meta: dict = field(default_factory=dict)


def _b_powers(b_values, s):
    mag = np.sqrt(np.sum(b_values**2, axis=0))
    with np.errstate(divide="ignore", invalid="ignore"):
        bs = np.where(mag > 0, b_values * mag ** (s - 1), 0.0)
        w = np.where(mag > 0, mag ** (1 - s), 0.0)
    return bs, w


def _potential(grid, mu, beta):
    """``f -> (mu - Lap)^(-beta) f`` for any real beta."""
    mult = (mu + grid.k2) ** (-beta)
    return lambda f: grid.ifft(grid.fft(f) * mult)


def _sample_drift(b, grid, times=None):
    if isinstance(b, DriftField):
        if times is None:
            return b.on_grid(grid)
        return np.stack([b.on_grid(grid, t) for t in times], axis=1)
    return check_finite(b, "b")


def build_triple(b, cfg, variant, grid, dt=None, n_times=None, t0=0.0):
    """Build ``(G, T, Q)`` as closures over the sampled drift.

    The parabolic variant works on space-time arrays of shape
    ``(M, N, ..., N)`` with ``M = n_times`` steps of size ``dt`` and zero
    extension outside the window; ``b`` then has shape ``(d, M, N, ..., N)``
    or is a :class:`DriftField` sampled at the time nodes.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    p, q, r, mu = cfg.p, cfg.q, cfg.r, cfg.mu
    if variant == "parabolic":
        if dt is None or n_times is None:
            raise ValueError("parabolic variant needs dt and n_times")
        times = t0 + dt * np.arange(n_times)
        b_values = _sample_drift(b, grid, times)
        if b_values.shape != (grid.d, n_times) + grid.shape:
            raise ValueError("parabolic drift must have shape (d, M, N, ..., N)")
        s = 1.0 / p
        pp = p / (p - 1)
        bs, w = _b_powers(b_values, s)

        def P(alpha, direction="forward"):
            return lambda f: parabolic_potential(f, grid, dt, alpha, mu, direction)

        P2, P2b = P(2.0), P(2.0, "backward")

        def grad_st(f):
            return gradient(f, grid)

        def T(f):
            return np.sum(bs * grad_st(P2(w * f)), axis=0)

        def T_adj(g):
            return -w * P2b(divergence(bs * g, grid))

        def G(f):
            return np.sum(bs * grad_st(P(1.0 + 1.0 / p)(f)), axis=0)

        def Q(f):
            return P(1.0 / pp)(w * f)

        return OperatorTriple(
            G=G, T=T, Q=Q, T_adjoint=T_adj,
            pre=P(1.0 / pp), post=P(1.0 + 1.0 / p), free=P2,
            variant=variant, grid=grid, leading=(n_times,),
            meta={"b_powers": (bs, w), "P2": P2, "dt": dt},
        )

    b_values = check_vector_field(_sample_drift(b, grid), grid)
    s = 2.0 / p if variant == "elliptic" else 1.0 / p
    bs, w = _b_powers(b_values, s)
    R = _potential(grid, mu, 1.0)
    if variant == "elliptic":
        g_exp, q_exp = 0.5 + 1.0 / r, 0.5 - 1.0 / q
        pre_exp, post_exp = 0.5 - 1.0 / r, 0.5 + 1.0 / q
    else:
        g_exp, q_exp = 0.5 + 0.5 / r, 0.5 - 0.5 / q
        pre_exp, post_exp = 0.5 - 0.5 / r, 0.5 + 0.5 / q
    G_pot = _potential(grid, mu, g_exp)
    Q_pot = _potential(grid, mu, q_exp)

    def G(f):
        return np.sum(bs * gradient(G_pot(f), grid), axis=0)

    def T(f):
        return np.sum(bs * gradient(R(w * f), grid), axis=0)

    def T_adj(g):
        return -w * R(divergence(bs * g, grid))

    def Q(f):
        return Q_pot(w * f)

    return OperatorTriple(
        G=G, T=T, Q=Q, T_adjoint=T_adj,
        pre=_potential(grid, mu, pre_exp), post=_potential(grid, mu, post_exp), free=R,
        variant=variant, grid=grid, meta={"b_powers": (bs, w)},
    )


def neumann_series(T, g, tol, max_terms):
    """Sum ``sum_k (-T)^k g`` until a term is below ``tol`` times the partial
    sum; raises :class:`SeriesDivergenceError` after three growing terms."""
    total = g.copy()
    term = g
    prev = np.linalg.norm(term)
    growth = 0
    for k in range(1, int(max_terms) + 1):
        term = -T(term)
        nt = np.linalg.norm(term)
        total = total + term
        if nt <= tol * np.linalg.norm(total):
            return total, k
        growth = growth + 1 if nt > prev else 0
        if growth >= 3 or not np.isfinite(nt):
            ratio = nt / prev if prev > 0 else np.inf
            raise SeriesDivergenceError(
                f"Neumann series diverges (term ratio {ratio:.3g} after {k} terms)", ratio
            )
        prev = nt
    return total, int(max_terms)


def theta_apply(f, b, cfg, variant, grid, triple=None, check_norm=False, **kwargs):
    """Apply the resolvent representation to ``f``.

    With ``check_norm`` the empirical ``||T||_{2->2}`` is estimated first and
    values ``>= 1`` raise :class:`SeriesDivergenceError`.
    """
    triple = triple or build_triple(b, cfg, variant, grid, **kwargs)
    f = check_finite(f, "f")
    if check_norm:
        tn = op_norm_estimate(triple.T, grid, 2.0, trials=2, seed=0,
                              adjoint=triple.T_adjoint, leading=triple.leading)
        if tn >= 1:
            raise SeriesDivergenceError(f"empirical ||T|| = {tn:.4g} >= 1", tn)
    if variant == "parabolic":
        # P_{1+1/p} P_{1/p'} = P_2 is used in closed form so that the result
        # solves u + P_2(b . grad u) = P_2 f exactly on the grid
        bs, w = triple.meta["b_powers"]
        P2 = triple.free
        P2f = P2(f)
        g = np.sum(bs * gradient(P2f, grid), axis=0)
        y, _ = neumann_series(triple.T, g, cfg.series_tol, cfg.max_terms)
        return P2f - P2(w * y)
    g = triple.G(triple.pre(f))
    y, _ = neumann_series(triple.T, g, cfg.series_tol, cfg.max_terms)
    return triple.free(f) - triple.post(triple.Q(y))


def forward_operator(u, b_values, mu, grid):
    """``(mu - Lap + b . grad) u`` with spectral derivatives."""
    lap = grid.ifft(-grid.k2 * grid.fft(u))
    return mu * u - lap + np.sum(b_values * gradient(u, grid), axis=0)


def direct_solve(f, b, mu, grid, rtol=1e-13, maxiter=500):
    """Solve ``(mu - Lap + b . grad) u = f`` with GMRES on the assembled
    operator, preconditioned by ``(mu - Lap)^-1``."""
    b_values = check_vector_field(_sample_drift(b, grid), grid)
    n = grid.size
    shape = grid.shape
    A = LinearOperator((n, n), matvec=lambda v: forward_operator(v.reshape(shape), b_values, mu,
                                                                grid).ravel(), dtype=float)
    R = _potential(grid, mu, 1.0)
    M = LinearOperator((n, n), matvec=lambda v: R(v.reshape(shape)).ravel(), dtype=float)
    x, info = gmres(A, np.asarray(f, dtype=float).ravel(), M=M, rtol=rtol, atol=0.0,
                    restart=60, maxiter=maxiter)
    if info != 0:
        raise RuntimeError(f"GMRES did not converge (info={info})")
    return x.reshape(shape)


def _variant_bound(variant, delta, p, d):
    if variant == "elliptic":
        return c_delta_p(delta, p)
    if variant == "weak":
        k = weak_constants(d)
        return k["m_d"] * k["c_p"](p) * delta
    return None


def tp_norm_audit(b, cfg, grid, delta, variant="elliptic", trials=4, seed=0, tol=0.1,
                  auto_mu=True, max_doublings=30, **kwargs):
    """Compare the empirical ``||T_p||_{p->p}`` with the analytic bound.

    ``auto_mu`` doubles ``mu`` until the estimate is at most ``0.9 * bound``
    (the theory only asks for ``mu`` large enough).  Returns a dict report.
    """
    bound = _variant_bound(variant, delta, cfg.p, grid.d)
    mu = cfg.mu
    steps = 0
    while True:
        c = cfg.with_mu(mu)
        tri = build_triple(b, c, variant, grid, **kwargs)
        emp = op_norm_estimate(tri.T, grid, cfg.p, trials=trials, seed=seed,
                               adjoint=tri.T_adjoint, leading=tri.leading)
        if not auto_mu or bound is None or emp <= 0.9 * bound or steps >= max_doublings:
            break
        mu *= 2.0
        steps += 1
    passed = bound is None or emp <= bound * (1 + tol)
    return {
        "variant": variant, "p": cfg.p, "delta": delta, "mu": mu, "mu_doublings": steps,
        "empirical_norm": emp, "analytic_bound": bound, "tolerance": tol, "passed": bool(passed),
        "note": "mu chosen by doubling search; the theory fixes no numeric mu_0",
    }


def pseudo_resolvent_residual(f, b, cfg, mu, nu, grid, variant="elliptic"):
    """``||Theta(mu) f - Theta(nu) f - (nu - mu) Theta(mu) Theta(nu) f|| / ||f||``."""
    tm = build_triple(b, cfg.with_mu(mu), variant, grid)
    tn = build_triple(b, cfg.with_mu(nu), variant, grid)
    u_mu = theta_apply(f, b, cfg.with_mu(mu), variant, grid, triple=tm)
    u_nu = theta_apply(f, b, cfg.with_mu(nu), variant, grid, triple=tn)
    cross = theta_apply(u_nu, b, cfg.with_mu(mu), variant, grid, triple=tm)
    res = u_mu - u_nu - (nu - mu) * cross
    return float(np.linalg.norm(res) / np.linalg.norm(f))


def weighted_second_derivative_audit(u, f, b, p, delta, mu, grid):
    """Check ``(1 - c_p m_d delta) ||w (mu - Lap) u||_p <= ||w f||_p`` with
    ``w = (|b| + 1)^(-1/p')``."""
    b_values = check_vector_field(_sample_drift(b, grid), grid)
    pp = p / (p - 1)
    w = (np.sqrt(np.sum(b_values**2, axis=0)) + 1.0) ** (-1.0 / pp)
    k = weak_constants(grid.d)
    factor = 1.0 - k["c_p"](p) * k["m_d"] * delta
    lap_u = grid.ifft(-grid.k2 * grid.fft(u))
    lhs = float(grid.lp_norm(w * (mu * u - lap_u), p))
    rhs = float(grid.lp_norm(w * f, p))
    constant = 1.0 / factor if factor > 0 else np.inf
    return {
        "p": p, "delta": delta, "factor": factor, "constant": constant,
        "lhs": lhs, "rhs": rhs, "ratio": lhs / rhs if rhs > 0 else 0.0,
        "weight_min": float(w.min()), "weight_max": float(w.max()),
        "passed": bool(factor > 0 and lhs <= constant * rhs * (1 + 1e-9)),
    }
