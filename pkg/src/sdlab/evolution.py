"""Time stepping of ``(d/dt - Laplacian + b.grad) u = f`` on the torus and the
audits built on top of it (energy inequalities, gradient and sup bounds,
convergence along mollification levels, conservation)."""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from ._validation import check_exponent, check_positive
from .admissibility import condition_report
from .drifts import DriftField
from .spectral import SpectralField, TorusGrid, apply_multiplier, gradient

SCHEMES = ("IMEX", "ETD")


class NumericalAbort(FloatingPointError):
    """Raised when a run produces non-finite values; carries the step index."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


@dataclass
class EvolutionConfig:
    """Grid, step and horizon.  ``dt=None`` picks ``safety * h/(2 max|b|)``
    (capped by ``dt_max``) at run time."""

    grid: TorusGrid
    T: float
    dt: float = None
    scheme: str = "IMEX"
    levels: tuple = ()
    save_every: int = 1
    safety: float = 0.9
    dt_max: float = 1e-2

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        check_positive(self.T, "T")
        if self.dt is not None:
            check_positive(self.dt, "dt")
        if int(self.save_every) < 1:
            raise ValueError("save_every must be >= 1")
        self.save_every = int(self.save_every)

    def cfl_limit(self, b_values):
        bmax = float(np.max(np.sqrt(np.sum(b_values**2, axis=0))))
        return np.inf if bmax == 0 else self.grid.h / (2 * bmax)

    def resolve_dt(self, b_values):
        limit = self.cfl_limit(b_values)
        if self.dt is None:
            dt = min(self.dt_max, self.safety * limit)
        else:
            dt = self.dt
            if dt > limit * (1 + 1e-12):
                raise ValueError(
                    f"CFL violation: dt={dt:.3g} exceeds h/(2 max|b|)={limit:.3g}"
                )
        n = int(np.ceil(self.T / dt - 1e-9))
        return self.T / n, n


@dataclass
class Trajectory:
    grid: TorusGrid
    times: np.ndarray
    states: np.ndarray  # (n_saved, N, ..., N)
    dt: float
    scheme: str
    b_values: np.ndarray = None
    rhs: object = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def field(self, i):
        return SpectralField(self.grid, self.states[i])

    @property
    def initial(self):
        return self.states[0]

    def mean_series(self):
        return self.grid.mean(self.states)

    def max_principle_defect(self):
        """Largest excursion above the initial max or below the initial min,
        relative to ``||u(0)||_inf``."""
        u0 = self.states[0]
        scale = max(float(np.max(np.abs(u0))), 1e-300)
        over = float(np.max(self.states) - np.max(u0))
        under = float(np.min(u0) - np.min(self.states))
        return max(over, under, 0.0) / scale


def _drift_values(b, grid, t=0.0):
    if b is None:
        return np.zeros((grid.d,) + grid.shape)
    if isinstance(b, DriftField):
        if "grid_values" in b.meta and b.meta.get("grid") == grid:
            return b.meta["grid_values"]
        return b.on_grid(grid, t)
    vals = np.asarray(b, dtype=float)
    if vals.shape != (grid.d,) + grid.shape:
        raise ValueError(f"drift values have shape {vals.shape}")
    return vals


def _rhs_values(rhs, grid, t):
    if rhs is None:
        return None
    if callable(rhs):
        return np.asarray(rhs(t), dtype=float)
    return np.asarray(rhs, dtype=float)


def _as_array(u, grid):
    if isinstance(u, SpectralField):
        u = u.to_physical().values
    u = np.asarray(u, dtype=float)
    if u.shape != grid.shape:
        raise ValueError(f"initial datum has shape {u.shape}, expected {grid.shape}")
    return u


def evolve(b, u0, cfg, rhs=None):
    """Advance ``u`` from ``u0`` to ``cfg.T``.

    IMEX: ``(1 + dt k^2) U^{k+1} = U^k - dt F(b.grad u^k - f)``.
    ETD:  ``U^{k+1} = e^{-k^2 dt} U^k + (1 - e^{-k^2 dt})/k^2 F(f - b.grad u^k)``.
    ``rhs`` is an array, a callable of ``t`` or None.  Time-dependent drifts
    are resampled every step.
    """
    grid = cfg.grid
    u = _as_array(u0, grid).copy()
    homogeneous = not isinstance(b, DriftField) or b.time_homogeneous
    bv = _drift_values(b, grid, 0.0)
    if not np.all(np.isfinite(bv)):
        raise ValueError("drift is not finite on the grid; mollify it first")
    dt, n = cfg.resolve_dt(bv)
    k2 = grid.k2
    if cfg.scheme == "IMEX":
        denom = 1.0 + dt * k2
    else:
        E = np.exp(-k2 * dt)
        with np.errstate(divide="ignore", invalid="ignore"):
            phi = np.where(k2 > 0, (1 - E) / np.where(k2 > 0, k2, 1.0), dt)
    times = [0.0]
    states = [u.copy()]
    U = grid.fft(u)
    for step in range(n):
        t = step * dt
        if not homogeneous:
            bv = _drift_values(b, grid, t)
            if dt > cfg.cfl_limit(bv) * (1 + 1e-12):
                raise ValueError(f"CFL violation at step {step}")
        adv = np.sum(bv * gradient(u, grid), axis=0)
        f = _rhs_values(rhs, grid, t)
        src = -adv if f is None else f - adv
        S = grid.fft(src)
        if cfg.scheme == "IMEX":
            U = (U + dt * S) / denom
        else:
            U = E * U + phi * S
        u = grid.ifft(U)
        if not np.all(np.isfinite(u)):
            raise NumericalAbort(f"non-finite solution at step {step + 1}", step + 1)
        if (step + 1) % cfg.save_every == 0 or step + 1 == n:
            times.append((step + 1) * dt)
            states.append(u.copy())
    return Trajectory(grid, np.array(times), np.stack(states), dt, cfg.scheme,
                      bv if homogeneous else None, rhs)


# --- Orlicz norm --------------------------------------------------------------


def _log_mean_cosh(y):
    a = np.abs(np.ravel(y))
    return special.logsumexp(a + np.log1p(np.exp(-2 * a)) - np.log(2.0)) - np.log(a.size)


def orlicz_norm(f, rtol=1e-10):
    """Luxemburg norm for ``Phi(y) = cosh(y) - 1`` with the volume-normalized
    average: ``inf{c > 0 : <Phi(f/c)> <= 1}``."""
    if isinstance(f, SpectralField):
        f = f.to_physical().values
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ValueError("f has non-finite entries")
    top = float(np.max(np.abs(f)))
    if top == 0:
        return 0.0
    # Phi(y) >= y^2/2 and Phi <= 1 when |y| <= arccosh 2 bracket the root
    lo = np.sqrt(np.mean(f**2) / 2)
    hi = top / np.arccosh(2.0)
    if hi <= lo * (1 + rtol):
        return float(hi)

    def g(c):
        return _log_mean_cosh(f / c) - np.log(2.0)

    if g(hi) >= 0:
        return float(hi)
    if g(lo) <= 0:
        return float(lo)
    return float(optimize.bisect(g, lo, hi, xtol=1e-300, rtol=rtol, maxiter=400))


# --- energy audits ------------------------------------------------------------


ENERGY_MODES = ("Lp", "half-order", "Orlicz", "growth")


@dataclass
class EnergyReport:
    mode: str
    p: float
    times: np.ndarray
    series: dict
    growth_rate: float
    checks: dict
    lhs: float = np.nan
    rhs: float = np.nan
    fitted_constant: float = np.nan
    notes: str = ""

    @property
    def passed(self):
        return all(self.checks.values())

    def csv_rows(self):
        keys = list(self.series)
        return [dict(t=float(t), **{k: float(self.series[k][i]) for k in keys})
                for i, t in enumerate(self.times)]


def _trapz_cumulative(y, t):
    out = np.zeros_like(y, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(t))
    return out


def _dissipation_cumulative(y, t, scheme):
    """Time integral of a dissipation term.  The IMEX step takes the diffusion
    at the new time level, so its discrete energy law uses the right-endpoint
    rule; ETD uses the trapezoid rule."""
    if scheme != "IMEX":
        return _trapz_cumulative(y, t)
    out = np.zeros_like(y, dtype=float)
    if len(t) > 1:
        out[1:] = np.cumsum(y[1:] * np.diff(t))
    return out


def _grad_sq_mean(w, grid):
    g = gradient(w, grid)
    return float(grid.mean(np.sum(g**2, axis=0)))


def energy_audit(traj, p, delta, c_delta=0.0, mode="Lp", tol=0.02, q=None, lam=1.0):
    """Check one energy inequality along a homogeneous trajectory.

    ``Lp``: ``(1/p)||u(t)||_p^p + (4(p-1)/p^2 - 2 sqrt(delta)/p) int ||grad |u|^{p/2}||^2
    <= (1/p)||f||_p^p + c_delta/(p sqrt(delta)) int ||u||_p^p``, which is the
    classical ``p = 2`` energy inequality when ``c_delta = 0``; also checks that
    ``||u(t)||_p e^{-omega_p t}`` does not increase (within ``tol``).

    ``half-order``: ``delta`` is the weak form-bound at ``lam``;
    ``(1/2)||(lam - Lap)^{1/4} u||^2 + (1 - delta) int ||(lam - Lap)^{3/4} u||^2
    <= (1/2)||(lam - Lap)^{1/4} f||^2 + lam int ||(lam - Lap)^{1/4} u||^2``.

    ``Orlicz`` (even ``p``): ``(1/2) sup <e^{u^p}> + 4(p-1)/p int <(grad u^{p/2})^2 e^{u^p}>
    <= <e^{f^p}>`` while ``(c_delta/sqrt(delta)) t < 1/2``.

    ``growth``: fits ``c`` in ``||u(t)||_q <= c e^{omega_p t} t^{-(d/2)(1/p - 1/q)} ||f||_p``.

    Norms and averages are volume normalized.
    """
    if mode not in ENERGY_MODES:
        raise ValueError(f"mode must be one of {ENERGY_MODES}, got {mode!r}")
    p = check_exponent(p, "p", low=1.0)
    delta = check_positive(delta, "delta", strict=False)
    c_delta = check_positive(c_delta, "c_delta", strict=False)
    grid, t, U = traj.grid, traj.times, traj.states
    omega = c_delta / (2 * (p - 1)) if p > 1 else np.inf
    sd = np.sqrt(delta)
    if traj.rhs is not None and mode != "growth":
        raise ValueError(f"{mode} audit needs a homogeneous trajectory (rhs = 0)")

    if mode == "Lp":
        norms = np.array([grid.lp_norm(u, p) for u in U])
        dir_terms = np.array([_grad_sq_mean(np.abs(u) ** (p / 2), grid) for u in U])
        coef = 4 * (p - 1) / p**2 - 2 * sd / p
        lhs = norms**p / p + coef * _dissipation_cumulative(dir_terms, t, traj.scheme)
        extra = c_delta / (p * sd) * _trapz_cumulative(norms**p, t) if c_delta > 0 else 0.0
        rhs = norms[0] ** p / p + extra
        scaled = norms * np.exp(-omega * t)
        mono = bool(np.all(scaled[1:] <= scaled[:-1] * (1 + tol)))
        total = bool(np.all(lhs <= rhs * (1 + tol)))
        return EnergyReport(
            mode, p, t, {"norm_p": norms, "dirichlet": dir_terms, "lhs": lhs,
                         "rhs": rhs * np.ones_like(t), "scaled_norm": scaled},
            omega, {"energy_inequality": total, "scaled_norm_nonincreasing": mono},
            float(np.max(lhs - rhs)), 0.0,
            notes="" if coef > 0 else "Dirichlet coefficient <= 0: p below the admissible range",
        )

    if mode == "half-order":
        check_positive(lam, "lam")
        base = lam + grid.k2
        quarter = np.array([np.mean(apply_multiplier(u, grid, base**0.25) ** 2) for u in U])
        three = np.array([np.mean(apply_multiplier(u, grid, base**0.75) ** 2) for u in U])
        lhs = 0.5 * quarter + (1 - delta) * _dissipation_cumulative(three, t, traj.scheme)
        rhs = 0.5 * quarter[0] + lam * _trapz_cumulative(quarter, t)
        ok = bool(np.all(lhs <= rhs * (1 + tol)))
        return EnergyReport(
            mode, 2.0, t, {"quarter": quarter, "three_quarter": three, "lhs": lhs, "rhs": rhs},
            omega, {"energy_inequality": ok}, float(np.max(lhs - rhs)), 0.0,
            notes="" if delta < 1 else "delta >= 1: outside the weak form-bound regime",
        )

    if mode == "Orlicz":
        if p != int(p) or int(p) % 2:
            raise ValueError(f"the Orlicz audit needs an even integer p, got {p}")
        top = float(np.max(np.abs(U))) ** p
        if top > 700:
            raise OverflowError(f"max|u|^p = {top:.3g} overflows exp; rescale the datum")
        if c_delta > 0:
            horizon = 0.5 * sd / c_delta if sd > 0 else 0.0
            if t[-1] >= horizon:
                raise ValueError(f"Orlicz inequality needs (c_delta/sqrt(delta)) t < 1/2; "
                                 f"t={t[-1]:.3g} >= {horizon:.3g}")
        expo = np.array([np.mean(np.exp(u**p)) for u in U])
        dir_terms = np.array([
            np.mean(np.sum(gradient(u ** (p / 2), grid) ** 2, axis=0) * np.exp(u**p)) for u in U
        ])
        lhs = 0.5 * np.maximum.accumulate(expo) + 4 * (p - 1) / p * _dissipation_cumulative(
            dir_terms, t, traj.scheme)
        rhs = expo[0]
        orl = np.array([orlicz_norm(u) for u in U])
        l2 = np.array([grid.lp_norm(u, 2) for u in U]) / 2
        l4 = np.array([grid.lp_norm(u, 4) for u in U]) / 24
        ok = bool(np.all(lhs <= rhs * (1 + tol)))
        return EnergyReport(
            mode, p, t, {"exp_mean": expo, "dirichlet": dir_terms, "lhs": lhs,
                         "rhs": rhs * np.ones_like(t), "orlicz_norm": orl},
            omega, {"energy_inequality": ok,
                    "orlicz_dominates_l2p": bool(np.all(orl >= np.maximum(l2, l4) * (1 - 1e-12)))},
            float(np.max(lhs)), float(rhs),
        )

    # growth
    if q is None:
        raise ValueError("growth mode needs q")
    q = check_exponent(q, "q", low=p)
    f_norm = grid.lp_norm(U[0], p)
    if f_norm == 0:
        return EnergyReport(mode, p, t, {}, omega, {"finite": True}, fitted_constant=0.0)
    expo = -(grid.d / 2) * (1 / p - 1 / q)
    sel = t > 0
    qn = np.array([grid.lp_norm(u, q) for u in U])
    ratio = np.full_like(t, np.nan)
    ratio[sel] = qn[sel] / (np.exp(omega * t[sel]) * t[sel] ** expo * f_norm)
    c_fit = float(np.nanmax(ratio))
    return EnergyReport(
        mode, p, t, {"norm_q": qn, "ratio": ratio}, omega,
        {"finite": bool(np.isfinite(c_fit))}, fitted_constant=c_fit,
    )


# --- gradient and sup bounds ------------------------------------------------


REGIME_CONDITIONS = ("C3", "C4", "C5")


@dataclass
class BoundReport:
    name: str
    values: dict
    constants: list
    passed: bool
    flags: list = field(default_factory=list)
    rows: list = field(default_factory=list)


def gradient_bound_audit(traj, q, delta, c=None, condition="C5"):
    """Fit ``C`` in ``sup_t ||grad u||_q^q + c int ||grad |grad u|^{q/2}||^2 <= C ||grad f||_q^q``.

    ``c`` defaults to ``2(q-1)/q^2``, the heat-flow coefficient.
    """
    q = check_exponent(q, "q", low=2.0)
    grid, t, U = traj.grid, traj.times, traj.states
    if c is None:
        c = 2 * (q - 1) / q**2
    gq, dirichlet = [], []
    for u in U:
        mag = np.sqrt(np.sum(gradient(u, grid) ** 2, axis=0))
        gq.append(np.mean(mag**q))
        dirichlet.append(_grad_sq_mean(mag ** (q / 2), grid))
    gq, dirichlet = np.array(gq), np.array(dirichlet)
    lhs = float(np.max(gq) + c * _dissipation_cumulative(dirichlet, t, traj.scheme)[-1])
    rhs = float(gq[0])
    C = lhs / rhs if rhs > 0 else 0.0
    flags = []
    if condition not in REGIME_CONDITIONS:
        raise ValueError(f"condition must be one of {REGIME_CONDITIONS}")
    if delta > 0 and not condition_report(grid.d, delta)[condition].passed:
        flags.append(f"outside proven regime ({condition} fails)")
    return BoundReport("gradient_bound", {"q": q, "delta": delta, "c": c, "lhs": lhs, "rhs": rhs},
                       [C], bool(np.isfinite(C)), flags)


def refinement_stable(constants, factor=2.0):
    c = np.asarray(constants, dtype=float)
    if np.any(~np.isfinite(c)) or np.any(c < 0):
        return False
    if np.all(c == 0):
        return True
    return bool(np.max(c) <= factor * np.min(c))


@dataclass
class WeightFunction:
    """``rho(x) = (1 + kappa |x - z|^2)^(-theta)``, summed over periodic images
    ``|m| <= images`` when evaluated on a torus grid."""

    kappa: float
    theta: float
    center: tuple = None
    images: int = 1

    def __post_init__(self):
        check_positive(self.kappa, "kappa")
        check_positive(self.theta, "theta")

    def _offsets(self, grid):
        z = np.zeros(grid.d) if self.center is None else np.asarray(self.center, dtype=float)
        rng = np.arange(-self.images, self.images + 1)
        shifts = np.stack(np.meshgrid(*([rng] * grid.d), indexing="ij"), -1).reshape(-1, grid.d)
        for m in shifts:
            yield grid.points - z - grid.L * m

    def on_grid(self, grid):
        return sum((1 + self.kappa * np.sum(y**2, axis=-1)) ** (-self.theta)
                   for y in self._offsets(grid))

    def gradient_on_grid(self, grid):
        out = np.zeros((grid.d,) + grid.shape)
        for y in self._offsets(grid):
            r2 = np.sum(y**2, axis=-1)
            out += np.moveaxis(-2 * self.theta * self.kappa * y, -1, 0) \
                * (1 + self.kappa * r2) ** (-self.theta - 1)
        return out

    def laplacian_on_grid(self, grid):
        k, th, d = self.kappa, self.theta, grid.d
        out = np.zeros(grid.shape)
        for y in self._offsets(grid):
            s = 1 + k * np.sum(y**2, axis=-1)
            r2 = np.sum(y**2, axis=-1)
            out += (-2 * th * k * d * s ** (-th - 1)
                    + 4 * th * (th + 1) * k**2 * r2 * s ** (-th - 2))
        return out

    def bound_violations(self, grid):
        """Relative violations of ``|grad rho| <= 2 theta sqrt(kappa) rho`` and
        ``|Lap rho| <= (4 theta^2 + (4 + 2d) theta) kappa rho`` at the nodes."""
        rho = self.on_grid(grid)
        g = np.sqrt(np.sum(self.gradient_on_grid(grid) ** 2, axis=0))
        lap = np.abs(self.laplacian_on_grid(grid))
        k, th, d = self.kappa, self.theta, grid.d
        return (float(np.max(g / (2 * th * np.sqrt(k) * rho)) - 1),
                float(np.max(lap / ((4 * th**2 + (4 + 2 * d) * th) * k * rho)) - 1))


def lattice_centers(grid):
    """Integer lattice points inside the periodic cell."""
    ax = np.arange(np.ceil(-grid.L / 2), np.floor(grid.L / 2 - 1e-12) + 1)
    return np.stack(np.meshgrid(*([ax] * grid.d), indexing="ij"), -1).reshape(-1, grid.d)


def linfty_bound_audit(b, h_field, f_rhs, p, theta_prime, weights, cfg, delta=None):
    """Ratio of ``||u||_{L^inf([0,T] x torus)}`` to
    ``sup_z (int_0^T <(1_{|h|>=1} + 1_{|h|<1}|h|^p)^{theta'} |f|^{p theta'} rho_z^2>)^{1/(p theta')}``
    where ``u`` solves the equation with right side ``|h| f`` and ``u(0) = 0``.

    ``h_field`` and ``f_rhs`` are grid arrays (``h`` may be a vector field; its
    magnitude is used); ``weights`` is a list of WeightFunction (one per centre).
    """
    grid = cfg.grid
    p = check_exponent(p, "p", low=2.0)
    if delta is not None and delta > 0 and not p > 2 / (2 - np.sqrt(delta)):
        raise ValueError(f"p must exceed 2/(2 - sqrt(delta)) = {2 / (2 - np.sqrt(delta)):.4g}")
    hv = np.asarray(h_field, dtype=float)
    hmag = np.sqrt(np.sum(hv**2, axis=0)) if hv.shape == (grid.d,) + grid.shape else np.abs(hv)
    fv = np.broadcast_to(np.asarray(f_rhs, dtype=float), grid.shape)
    source = hmag * fv
    if not np.any(source):
        return BoundReport("linfty_bound", {"lhs": 0.0, "rhs": 0.0}, [0.0], True)
    traj = evolve(b, np.zeros(grid.shape), cfg, rhs=source)
    lhs = float(np.max(np.abs(traj.states)))
    gain = np.where(hmag >= 1, 1.0, hmag**p) ** theta_prime * np.abs(fv) ** (p * theta_prime)
    T = traj.times[-1]
    vals = [(T * np.mean(gain * w.on_grid(grid) ** 2)) ** (1 / (p * theta_prime)) for w in weights]
    rhs = float(np.max(vals))
    ratio = lhs / rhs if rhs > 0 else np.inf
    return BoundReport("linfty_bound", {"lhs": lhs, "rhs": rhs, "argmax_center": int(np.argmax(vals))},
                       [ratio], bool(np.isfinite(ratio)))


# --- schedule diagnostics ---------------------------------------------------


def _level_fields(b, schedule, grid):
    from .mollify import mollify_cutoff

    return [mollify_cutoff(b, n, schedule, grid) for n in schedule.levels]


def _common_config(cfg, fields):
    if cfg.dt is not None:
        return cfg
    dt = min(min(cfg.dt_max, cfg.safety * cfg.cfl_limit(bn.meta["grid_values"])) for bn in fields)
    return EvolutionConfig(cfg.grid, cfg.T, dt, cfg.scheme, cfg.levels, cfg.save_every,
                           cfg.safety, cfg.dt_max)


def feller_cauchy_diagnostic(b, schedule, f, cfg):
    """``max_t ||u_n(t) - u_m(t)||_inf`` for consecutive schedule levels; passes
    iff the sequence strictly decreases."""
    if len(schedule.levels) < 3:
        raise ValueError("the diagnostic needs at least 3 schedule levels")
    grid = cfg.grid
    fields = _level_fields(b, schedule, grid)
    run_cfg = _common_config(cfg, fields)
    trajs = [evolve(bn, f, run_cfg) for bn in fields]
    diffs = [float(np.max(np.abs(a.states - c.states))) for a, c in zip(trajs, trajs[1:])]
    dec = all(d2 < d1 for d1, d2 in zip(diffs, diffs[1:])) or not any(diffs)
    rows = [{"level_from": n, "level_to": m, "sup_diff": dv}
            for n, m, dv in zip(schedule.levels, schedule.levels[1:], diffs)]
    return BoundReport("feller_cauchy", {"dt": run_cfg.dt, "differences": diffs}, diffs,
                       bool(dec), rows=rows)


def conservation_audit(b, cfg):
    """Evolve ``u(0) = 1`` with ``f = 0`` and report the deviation from 1."""
    traj = evolve(b, np.ones(cfg.grid.shape), cfg)
    mean_dev = float(np.max(np.abs(traj.mean_series() - 1)))
    sup_dev = float(np.max(np.abs(traj.states - 1)))
    return BoundReport("conservation", {"mean_deviation": mean_dev, "sup_deviation": sup_dev,
                                        "dt": traj.dt, "steps": int(round(traj.times[-1] / traj.dt))},
                       [sup_dev], sup_dev < 1e-8)
