"""Regularization of singular drifts: cutoff + mollifier and direct mollification."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from ._validation import check_positive
from .drifts import DriftField, discrete_form_bound

MOLLIFIER_KINDS = ("DeGiorgi", "Friedrichs")


@dataclass(frozen=True)
class Mollifier:
    """``DeGiorgi``: heat semigroup ``e^{eps Laplacian}`` (``epsilon`` is a
    squared length).  ``Friedrichs``: compact bump of radius ``epsilon``.

    On a grid the De Giorgi kernel uses the second-difference Laplacian by
    default (``symbol='lattice'``), whose kernel is pointwise positive;
    ``symbol='spectral'`` gives the multiplier ``exp(-eps |k|^2)``.
    """

    kind: str
    epsilon: float
    symbol: str = "lattice"

    def __post_init__(self):
        if self.kind not in MOLLIFIER_KINDS:
            raise ValueError(f"unknown mollifier {self.kind!r}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def length(self):
        return np.sqrt(self.epsilon) if self.kind == "DeGiorgi" else self.epsilon

    def multiplier(self, grid):
        if self.kind == "DeGiorgi":
            return np.exp(-self.epsilon * grid.symbol(self.symbol))
        kern = friedrichs_kernel_on_grid(grid, self.epsilon)
        return grid.fft(np.fft.ifftshift(kern))

    def apply(self, values, grid):
        """Convolve scalar or component-first vector samples with the kernel."""
        return grid.ifft(grid.fft(values) * self.multiplier(grid))


def _bump(r2):
    out = np.zeros_like(r2)
    inside = r2 < 1
    out[inside] = np.exp(1.0 / (r2[inside] - 1.0))
    return out


@lru_cache(maxsize=None)
def friedrichs_constant(d, nodes=32):
    """``c`` with ``c * int_{|y|<1} exp(1/(|y|^2 - 1)) dy = 1`` (product
    Gauss-Legendre on ``[-1, 1]^d``)."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    mesh = np.meshgrid(*([x] * d), indexing="ij")
    wmesh = np.meshgrid(*([w] * d), indexing="ij")
    r2 = sum(m**2 for m in mesh)
    weight = np.prod(np.stack(wmesh), axis=0)
    return 1.0 / float(np.sum(weight * _bump(r2)))


def friedrichs_kernel_on_grid(grid, radius):
    """Sampled bump of the given radius, centred at the origin node and
    rescaled to unit discrete mass (the continuum constant is
    :func:`friedrichs_constant`)."""
    r2 = np.sum(grid.points**2, axis=-1) / radius**2
    kern = friedrichs_constant(grid.d) * radius ** (-grid.d) * _bump(r2)
    mass = kern.sum() * grid.h**grid.d
    if mass == 0:
        kern = np.zeros(grid.shape)
        kern[(grid.N // 2,) * grid.d] = 1.0
        return kern
    return kern / kern.sum()


def _sample(b, grid, t=0.0):
    if isinstance(b, DriftField):
        if "grid_values" in b.meta and b.meta.get("grid") == grid:
            return b.meta["grid_values"]
        return b.on_grid(grid, t, singular="regularize")
    return np.asarray(b, dtype=float)


def mollify_direct(b, m, grid, t=0.0):
    """Mollify ``b`` on ``grid`` without cutoff; returns a grid-backed field.

    Time-dependent fields are mollified in space on the slice ``t``.
    """
    if not isinstance(m, Mollifier):
        raise TypeError("m must be a Mollifier")
    vals = m.apply(_sample(b, grid, t), grid)
    label = getattr(b, "label", "field")
    out = DriftField.from_grid(vals, grid, label=f"{m.kind}[{m.epsilon:g}]({label})",
                               mollification_length=m.length)
    out.singular_points = ()
    return out


# --- exact De Giorgi mollification of Hardy-type fields on R^d -------------


def _profile_integral(rho, d):
    """``(e^{Laplacian} r^{-2})(rho)`` in dimension ``d + 2`` (time 1)."""
    nu = d / 2

    def f(s):
        return 0.5 * s ** (nu - 1) * rho ** (-nu) * np.exp(-((rho - s) ** 2) / 4) * special.ive(
            nu, rho * s / 2
        )

    pts = [0.0, rho, rho + 40.0]
    total = 0.0
    for a, bnd in zip(pts[:-1], pts[1:]):
        if bnd > a:
            total += integrate.quad(f, a, bnd, epsabs=0, epsrel=1e-12, limit=200)[0]
    return total


@lru_cache(maxsize=None)
def hardy_profile(d):
    """Spline of ``Phi(rho)`` such that ``e^{eps Laplacian}`` maps
    ``x/|x|^2`` to ``x * Phi(|x|/sqrt(eps)) / eps``.

    A radial vector field ``x phi(|x|)`` evolves under the heat flow like the
    scalar ``phi`` in dimension ``d + 2``, so ``Phi`` is the heat flow of
    ``r^{-2}`` in ``R^{d+2}``.  ``Phi(0) = 1/(2d)`` and
    ``Phi(rho) ~ rho^-2 - 2(d-2) rho^-4 + 4(d-2)(d-4) rho^-6`` for large rho.
    """
    rho = np.concatenate([np.linspace(0, 2, 81)[1:], np.geomspace(2, 40, 160)[1:]])
    vals = np.array([_profile_integral(r, d) for r in rho])
    rho = np.concatenate([[0.0], rho])
    vals = np.concatenate([[1.0 / (2 * d)], vals])
    return CubicSpline(rho, vals, bc_type=((1, 0.0), "not-a-knot"))


def hardy_profile_eval(rho, d):
    rho = np.asarray(rho, dtype=float)
    spline = hardy_profile(d)
    out = np.empty_like(rho)
    far = rho > 40
    out[~far] = spline(rho[~far])
    r = rho[far]
    out[far] = r**-2 - 2 * (d - 2) * r**-4 + 4 * (d - 2) * (d - 4) * r**-6
    return out


def degiorgi_exact(b, eps):
    """Exact ``e^{eps Laplacian} b`` on ``R^d`` for a sum of Hardy terms."""
    check_positive(eps, "eps")
    if not b.hardy_terms:
        raise ValueError("exact De Giorgi mollification needs a Hardy-type field")
    terms = b.hardy_terms
    d = b.d
    hardy_profile(d)

    def evaluator(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for center, coeff in terms:
            y = x - center
            rho = np.sqrt(np.sum(y * y, axis=-1)) / np.sqrt(eps)
            out += (coeff / eps) * y * hardy_profile_eval(rho, d)[..., None]
        return out

    return DriftField(
        d,
        evaluator,
        label=f"DeGiorgi[{eps:g}]({b.label})",
        certificate=b.certificate,
        mollification_length=float(np.sqrt(eps)),
        meta={"parent": b.label, "eps": eps, "centers": tuple(c for c, _ in terms)},
    )


# --- schedules --------------------------------------------------------------


@dataclass
class MollificationSchedule:
    """Levels ``n`` with cutoffs ``|x| <= n, |b| <= n``, scales ``eps_n`` and
    factors ``c_n``."""

    levels: tuple
    eps: tuple
    c: tuple
    kind: str = "DeGiorgi"
    delta_measured: tuple = field(default=())

    def __post_init__(self):
        self.levels = tuple(int(n) for n in self.levels)
        self.eps = tuple(float(e) for e in self.eps)
        self.c = tuple(float(c) for c in self.c)
        if not (len(self.levels) == len(self.eps) == len(self.c)):
            raise ValueError("levels, eps and c must have equal length")
        if any(e2 >= e1 for e1, e2 in zip(self.eps, self.eps[1:])):
            raise ValueError("eps_n must be strictly decreasing")
        if any(not 0 < c <= 1 for c in self.c):
            raise ValueError("c_n must lie in (0, 1]")
        if any(c2 < c1 for c1, c2 in zip(self.c, self.c[1:])):
            raise ValueError("c_n must be nondecreasing")
        if self.kind not in MOLLIFIER_KINDS:
            raise ValueError(f"unknown mollifier {self.kind!r}")

    @classmethod
    def default(cls, levels=(4, 8, 16, 32), kind="DeGiorgi"):
        """``eps_n = 2^(-n/2)`` and ``c_n = 1``."""
        levels = tuple(levels)
        return cls(levels, tuple(2.0 ** (-n / 2) for n in levels), (1.0,) * len(levels), kind)

    def mollifier(self, level):
        i = self.index(level)
        eps = self.eps[i] if self.kind == "DeGiorgi" else np.sqrt(self.eps[i])
        return Mollifier(self.kind, eps)

    def index(self, level):
        try:
            return self.levels.index(int(level))
        except ValueError:
            raise ValueError(f"level {level} not in schedule {self.levels}") from None

    def calibrated(self, b, grid, delta, c_delta):
        """Set ``c_n = min(1, delta/delta_n)`` with ``delta_n`` the measured
        form-bound of the uncorrected level-n field, then make ``c_n``
        nondecreasing by a running minimum from the finest level."""
        base = MollificationSchedule(self.levels, self.eps, (1.0,) * len(self.levels), self.kind)
        measured = []
        for n in self.levels:
            bn = mollify_cutoff(b, n, base, grid)
            measured.append(discrete_form_bound(bn, grid, c_delta).delta)
        raw = [min(1.0, delta / m) if m > 0 else 1.0 for m in measured]
        c = np.minimum.accumulate(np.array(raw)[::-1])[::-1]
        return MollificationSchedule(self.levels, self.eps, tuple(c), self.kind, tuple(measured))


def mollify_cutoff(b, level, schedule, grid, t=0.0):
    """``b_n = c_n * (mollifier_{eps_n} * (1_n b))`` with ``1_n`` the indicator
    of ``{|x| <= n, |b| <= n}``."""
    i = schedule.index(level)
    n = schedule.levels[i]
    vals = _sample(b, grid, t)
    mag = np.sqrt(np.sum(vals**2, axis=0))
    r = np.linalg.norm(grid.points, axis=-1)
    mask = (mag <= n) & (r <= n)
    cut = np.where(mask, vals, 0.0)
    m = schedule.mollifier(n)
    out = DriftField.from_grid(schedule.c[i] * m.apply(cut, grid), grid,
                               label=f"level {n} of {getattr(b, 'label', 'field')}",
                               mollification_length=m.length)
    out.meta["level"] = n
    return out


@dataclass
class PreservationRow:
    level: int
    eps: float
    c: float
    delta_hat: float
    passed: bool
    domination_violation: float


@dataclass
class PreservationReport:
    delta: float
    c_delta: float
    tol: float
    rows: list

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def csv_rows(self):
        return [
            {"level": r.level, "eps": r.eps, "c": r.c, "delta_hat": r.delta_hat,
             "pass": int(r.passed), "domination_violation": r.domination_violation}
            for r in self.rows
        ]


def domination_violation(b_values, m, grid):
    """``max(|b_eps| - sqrt(E_eps |b|^2), 0)`` over the grid."""
    smooth = m.apply(b_values, grid)
    lhs = np.sqrt(np.sum(smooth**2, axis=0))
    rhs = np.sqrt(np.maximum(m.apply(np.sum(b_values**2, axis=0), grid), 0.0))
    return float(np.max(np.maximum(lhs - rhs, 0.0)))


def verify_preservation(b, schedule, grid, c_delta, tol=1e-6, construction="direct"):
    """Check ``discrete_form_bound(b_n) <= delta + tol`` per level together
    with the pointwise domination ``|b_eps| <= sqrt(E_eps |b|^2)``."""
    if b.certificate is None:
        raise ValueError("verify_preservation needs a field with an analytic certificate")
    delta = b.certificate.delta
    raw = _sample(b, grid)
    rows = []
    for i, n in enumerate(schedule.levels):
        m = schedule.mollifier(n)
        if construction == "direct":
            bn = DriftField.from_grid(schedule.c[i] * m.apply(raw, grid), grid)
        elif construction == "cutoff":
            bn = mollify_cutoff(b, n, schedule, grid)
        else:
            raise ValueError("construction must be 'direct' or 'cutoff'")
        dh = discrete_form_bound(bn, grid, c_delta).delta
        viol = domination_violation(raw, m, grid)
        scale = max(1.0, float(np.max(np.abs(raw))))
        ok = dh <= delta + tol and viol <= 1e-10 * scale
        rows.append(PreservationRow(n, schedule.eps[i], schedule.c[i], dh, ok, viol))
    return PreservationReport(delta, c_delta, tol, rows)


def calibrate_c_delta(b, grid, delta, c_hi=None, rtol=1e-3):
    """Smallest ``c`` (to ``rtol``) with ``discrete_form_bound(b, c) <= delta``
    for the grid-sampled field, found by bisection in ``log c``."""
    raw = _sample(b, grid)

    def fb(c):
        return discrete_form_bound(raw, grid, c).delta

    hi = c_hi or 1.0
    while fb(hi) > delta:
        hi *= 4.0
        if hi > 1e12:
            raise RuntimeError("no c_delta found")
    lo = hi / 4.0
    if fb(lo) <= delta:
        while lo > 1e-12 and fb(lo) <= delta:
            hi, lo = lo, lo / 4.0
    while hi / lo > 1 + rtol:
        mid = np.sqrt(hi * lo)
        if fb(mid) <= delta:
            hi = mid
        else:
            lo = mid
    return hi
