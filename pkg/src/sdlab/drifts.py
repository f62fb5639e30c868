"""Model drifts and numerical estimators of drift-class membership.

A :class:`DriftField` is a callable ``b(x, t)`` on ``R^d`` with points on the
last axis.  The estimators sample a field on a :class:`~sdlab.spectral.TorusGrid`
and return lower bounds of the class constants.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import LinearOperator, eigsh

from ._validation import check_dimension, check_positive, check_vector_field
from .spectral import TorusGrid, bessel_apply

KINDS = ("FormBounded", "WeaklyFormBounded", "TimeInhomFormBounded", "Stable")


@dataclass
class FormBoundCertificate:
    """Record of class membership: ``kind``, ``delta`` and exactly one of
    ``c_delta`` / ``lambda_delta`` / ``g_samples`` (matching the kind)."""

    kind: str
    delta: float
    c_delta: Optional[float] = None
    lambda_delta: Optional[float] = None
    g_samples: Optional[tuple] = None
    method: str = "analytic"
    grid_resolution: Optional[int] = None
    alpha: Optional[float] = None
    notes: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown certificate kind {self.kind!r}")
        if self.method not in ("analytic", "grid-eigenvalue", "power-iteration"):
            raise ValueError(f"unknown method {self.method!r}")
        populated = [
            name
            for name in ("c_delta", "lambda_delta", "g_samples")
            if getattr(self, name) is not None
        ]
        expected = {
            "FormBounded": "c_delta",
            "WeaklyFormBounded": "lambda_delta",
            "Stable": "lambda_delta",
            "TimeInhomFormBounded": "g_samples",
        }[self.kind]
        if populated != [expected]:
            raise ValueError(f"{self.kind} certificate must populate exactly {expected}")
        if self.kind == "Stable" and self.alpha is None:
            raise ValueError("Stable certificate needs alpha")

    @property
    def lower_bound(self):
        """Grid estimates bound the true constant from below."""
        return self.method != "analytic"

    def to_dict(self):
        out = {"kind": self.kind, "delta": self.delta, "method": self.method,
               "lower_bound": self.lower_bound}
        for name in ("c_delta", "lambda_delta", "alpha", "grid_resolution"):
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.g_samples is not None:
            out["g_times"] = " ".join(f"{t:.6g}" for t, _ in self.g_samples)
            out["g_values"] = " ".join(f"{g:.6g}" for _, g in self.g_samples)
        if self.notes:
            out["notes"] = self.notes
        return out


@dataclass
class DriftField:
    """Vector field ``b(x, t)`` on ``R^d``.

    ``evaluator(t, x)`` takes points of shape ``(..., d)`` and returns the same
    shape.  ``hardy_terms`` lists ``(center, coeff)`` pairs when the field is a
    sum of ``coeff * (x - center)/|x - center|^2``; the analytic mollifier uses
    it.  ``mollification_length`` is the smoothing scale of a mollified field.
    """

    d: int
    evaluator: Callable
    time_homogeneous: bool = True
    singular_points: tuple = ()
    label: str = ""
    certificate: Optional[FormBoundCertificate] = None
    hardy_terms: tuple = ()
    mollification_length: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.d = check_dimension(self.d)
        self.singular_points = tuple(np.asarray(p, dtype=float) for p in self.singular_points)

    def __call__(self, x, t=0.0):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"points must have last axis {self.d}, got shape {x.shape}")
        return self.evaluator(t, x)

    def magnitude(self, x, t=0.0):
        return np.linalg.norm(self(x, t), axis=-1)

    def on_grid(self, grid, t=0.0, singular="raise"):
        """Sample on grid nodes, returning shape ``(d, N, ..., N)``.

        Nodes within ``h/2`` of a singular point either raise (``'raise'``) or
        take the value of the field smoothed at scale ``h``
        (``'regularize'``); the smoothed value is exact De Giorgi mollification
        for Hardy-type terms and zero otherwise.
        """
        if grid.d != self.d:
            raise ValueError(f"grid dimension {grid.d} does not match field dimension {self.d}")
        pts = grid.points
        with np.errstate(divide="ignore", invalid="ignore"):
            vals = np.moveaxis(np.asarray(self(pts, t), dtype=float), -1, 0)
        near = np.zeros(grid.shape, dtype=bool)
        for s in self.singular_points:
            diff = (pts - s + grid.L / 2) % grid.L - grid.L / 2
            near |= np.linalg.norm(diff, axis=-1) < grid.h / 2 + 1e-12 * grid.L
        bad = near | ~np.all(np.isfinite(vals), axis=0)
        if np.any(bad):
            if singular == "raise":
                raise ValueError(
                    f"drift {self.label or ''} is singular at {int(bad.sum())} grid node(s); "
                    "mollify the field first or sample with singular='regularize'"
                )
            if singular != "regularize":
                raise ValueError("singular must be 'raise' or 'regularize'")
            fill = np.zeros((int(bad.sum()), self.d))
            if self.hardy_terms:
                from .mollify import degiorgi_exact

                smooth = degiorgi_exact(self, grid.h**2)
                fill = smooth(pts[bad], t)
            vals[:, bad] = fill.T
        return vals

    @classmethod
    def from_grid(cls, values, grid, label="grid field", **kwargs):
        """Wrap grid samples as a field, with periodic linear interpolation
        between nodes (node values are returned exactly)."""
        values = check_vector_field(values, grid)

        def evaluator(t, x):
            x = np.asarray(x, dtype=float)
            idx = (x + grid.L / 2) / grid.h
            flat = idx.reshape(-1, grid.d).T
            out = np.stack(
                [map_coordinates(c, flat, order=1, mode="grid-wrap") for c in values], axis=-1
            )
            return out.reshape(x.shape)

        f = cls(grid.d, evaluator, label=label, **kwargs)
        f.meta["grid"] = grid
        f.meta["grid_values"] = values
        return f


def zero_field(d):
    return DriftField(
        d,
        lambda t, x: np.zeros_like(np.asarray(x, dtype=float)),
        label="zero",
        certificate=FormBoundCertificate("FormBounded", 0.0, c_delta=0.0),
    )


def _hardy_sum(terms):
    def evaluator(t, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for center, coeff in terms:
            y = x - center
            r2 = np.sum(y * y, axis=-1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                out += coeff * np.where(r2 > 0, y / r2, np.nan)
        return out

    return evaluator


def hardy_drift(d, delta, sign=1):
    """``b(x) = sign * sqrt(delta) * (d-2)/2 * x/|x|^2``.

    ``sign=+1`` is attracting for ``dX = -b(X) dt + sqrt(2) dW``.
    """
    d = check_dimension(d)
    check_positive(delta, "delta", strict=False)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    coeff = sign * np.sqrt(delta) * (d - 2) / 2
    cert = FormBoundCertificate("FormBounded", float(delta), c_delta=0.0)
    if delta == 0:
        f = zero_field(d)
        f.certificate = cert
        return f
    terms = ((np.zeros(d), coeff),)
    return DriftField(
        d,
        _hardy_sum(terms),
        singular_points=(np.zeros(d),),
        label=f"hardy(d={d},delta={delta:g},sign={sign:+d})",
        certificate=cert,
        hardy_terms=terms,
        meta={"delta": float(delta), "sign": sign},
    )


def hardy_coefficient(d, delta):
    return np.sqrt(delta) * (d - 2) / 2


def superposition_drift(centers, coeffs, d, coeff_bound=np.inf):
    """``b(x) = sum_k c_k (x - a_k)/|x - a_k|^2``.

    Each term is a Hardy drift with form-bound ``delta_k = (2|c_k|/(d-2))^2``;
    the certificate uses the sum rule ``sqrt(delta) = sum_k sqrt(delta_k)``.
    """
    d = check_dimension(d)
    centers = [np.asarray(c, dtype=float).reshape(d) for c in centers]
    coeffs = [float(c) for c in coeffs]
    if len(centers) != len(coeffs):
        raise ValueError("centers and coeffs must have equal length")
    if sum(np.sqrt(abs(c)) for c in coeffs) > coeff_bound:
        raise ValueError("sum of |c_k|^(1/2) exceeds the declared bound")
    terms = tuple((a, c) for a, c in zip(centers, coeffs) if c != 0)
    sqrt_delta = sum(2 * abs(c) / (d - 2) for _, c in terms)
    cert = FormBoundCertificate("FormBounded", sqrt_delta**2, c_delta=0.0,
                                notes="sum rule over Hardy terms")
    if not terms:
        f = zero_field(d)
        f.certificate = cert
        return f
    return DriftField(
        d,
        _hardy_sum(terms),
        singular_points=tuple(a for a, _ in terms),
        label=f"superposition({len(terms)} terms)",
        certificate=cert,
        hardy_terms=terms,
    )


def time_singular_drift(c1, c2, d, eps_split=1.0):
    """Radial field with ``|b(t, x)| = c1/|x| + c2/sqrt(t)`` for ``t > 0``, zero
    for ``t <= 0``.

    The certificate splits ``|b|^2 <= (1+e)|b_1|^2 + (1+1/e)|b_2|^2`` with
    ``e = eps_split`` and samples ``g(t) = (1+1/e) c2^2 / t``.
    """
    d = check_dimension(d)
    check_positive(c1, "c1", strict=False)
    check_positive(c2, "c2", strict=False)

    def evaluator(t, x):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        r = np.linalg.norm(x, axis=-1, keepdims=True)
        tt = t[..., None] if t.ndim else t
        with np.errstate(divide="ignore", invalid="ignore"):
            mag = c1 / r + np.where(tt > 0, c2 / np.sqrt(np.where(tt > 0, tt, 1.0)), 0.0)
            out = np.where(r > 0, mag * x / r, np.nan if c1 > 0 else 0.0)
        return np.where(tt > 0, out, 0.0)

    delta1 = (2 * c1 / (d - 2)) ** 2
    if c2 == 0:
        cert = FormBoundCertificate("FormBounded", delta1, c_delta=0.0)
    else:
        times = 2.0 ** -np.arange(0, 11)
        g = [(float(t), (1 + 1 / eps_split) * c2**2 / t) for t in times]
        cert = FormBoundCertificate("TimeInhomFormBounded", (1 + eps_split) * delta1,
                                    g_samples=tuple(g))
    return DriftField(
        d,
        evaluator,
        time_homogeneous=(c2 == 0),
        singular_points=(np.zeros(d),) if c1 > 0 else (),
        label=f"time_singular(c1={c1:g},c2={c2:g})",
        certificate=cert,
        hardy_terms=((np.zeros(d), c1),) if (c1 > 0 and c2 == 0) else (),
    )


def _grid_values(b, grid):
    if isinstance(b, DriftField):
        if not b.time_homogeneous:
            raise ValueError("grid estimators need a time-homogeneous field")
        return b.on_grid(grid, singular="raise")
    return check_vector_field(b, grid)


def _largest_eigenvalue(matvec, n, v0):
    # a fixed perturbation keeps v0 off the excluded constant mode
    v0 = v0 * (1.0 + 0.5 * np.random.default_rng(0).random(n))
    A = LinearOperator((n, n), matvec=matvec, dtype=float)
    val = eigsh(A, k=1, which="LA", v0=v0, tol=1e-10, maxiter=5000,
                return_eigenvectors=False)
    return float(max(val[0], 0.0))


def discrete_form_bound(b, grid, c_delta):
    """Largest generalized eigenvalue of ``diag(|b|^2)`` against
    ``-Laplacian_h + c_delta`` (second-difference Laplacian).

    For ``c_delta = 0`` the constant mode, the only obstruction on a torus, is
    excluded from the test space.
    """
    check_positive(c_delta, "c_delta", strict=False)
    vals = _grid_values(b, grid)
    w = np.sqrt(np.sum(vals**2, axis=0))
    notes = "constant mode excluded" if c_delta == 0 else ""
    if not np.any(w > 0):
        return FormBoundCertificate("FormBounded", 0.0, c_delta=float(c_delta),
                                    method="grid-eigenvalue", grid_resolution=grid.N, notes=notes)
    base = grid.lattice_k2 + c_delta
    inv = np.where(base > 0, 1.0 / np.where(base > 0, base, 1.0), 0.0)

    def matvec(v):
        v = v.reshape(grid.shape)
        return (w * grid.ifft(grid.fft(w * v) * inv)).ravel()

    delta = _largest_eigenvalue(matvec, grid.size, w.ravel().copy())
    return FormBoundCertificate("FormBounded", delta, c_delta=float(c_delta),
                                method="grid-eigenvalue", grid_resolution=grid.N, notes=notes)


def weak_form_bound(b, grid, lam, symbol="lattice"):
    """``delta`` with ``|| |b|^(1/2) (lam - Laplacian)^(-1/4) ||_{2->2} = sqrt(delta)``,
    i.e. the top eigenvalue of ``|b|^(1/2) (lam - Laplacian)^(-1/2) |b|^(1/2)``."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0 (the k=0 multiplier needs it), got {lam}")
    vals = _grid_values(b, grid)
    w = np.sqrt(np.sqrt(np.sum(vals**2, axis=0)))
    if not np.any(w > 0):
        return FormBoundCertificate("WeaklyFormBounded", 0.0, lambda_delta=float(lam),
                                    method="power-iteration", grid_resolution=grid.N)
    mult = (lam + grid.symbol(symbol)) ** -0.5

    def matvec(v):
        v = v.reshape(grid.shape)
        return (w * grid.ifft(grid.fft(w * v) * mult)).ravel()

    delta = _largest_eigenvalue(matvec, grid.size, w.ravel().copy())
    return FormBoundCertificate("WeaklyFormBounded", delta, lambda_delta=float(lam),
                                method="power-iteration", grid_resolution=grid.N)


def kato_norm(b, lam, grid):
    """``max_x ((lam - Laplacian)^(-1/2) |b|)(x)`` on the grid."""
    if not lam > 0:
        raise ValueError(f"lambda must be > 0, got {lam}")
    vals = _grid_values(b, grid)
    mag = np.sqrt(np.sum(vals**2, axis=0))
    return float(np.max(bessel_apply(mag, grid, 1.0, lam)))


# --- Morrey classes -------------------------------------------------------


@dataclass
class MorreySampling:
    radii: np.ndarray
    centers: np.ndarray
    n_radial: int = 32
    n_directions: int = 64
    n_time: int = 16
    seed: int = 0

    @classmethod
    def default(cls, b, grid, variant="elliptic", n_centers=64, seed=0):
        """16 log-spaced radii in ``[h, L/2]``; random centers plus the
        singular points (placed at ``t = 0`` for the parabolic variant)."""
        rng = np.random.default_rng(seed)
        radii = np.logspace(np.log10(grid.h), np.log10(grid.L / 2), 16)
        xs = rng.uniform(-grid.L / 2, grid.L / 2, size=(n_centers, b.d))
        sing = np.array(b.singular_points).reshape(-1, b.d)
        if variant == "parabolic":
            ts = rng.uniform(0, 1, size=(n_centers, 1))
            pts = np.hstack([ts, xs])
            sing = np.hstack([np.zeros((len(sing), 1)), sing])
        else:
            pts = xs
        centers = np.vstack([sing, pts]) if len(sing) else pts
        return cls(radii, centers, seed=seed)


@dataclass
class MorreyEstimate:
    q: float
    variant: str
    norm_estimate: float
    radii: np.ndarray
    centers: np.ndarray
    quadrature_nodes: dict
    excluded_nodes: int = 0
    argmax: tuple = ()

    def to_dict(self):
        return {"q": self.q, "variant": self.variant, "norm_estimate": self.norm_estimate,
                "n_radii": len(self.radii), "n_centers": len(self.centers),
                "excluded_nodes": self.excluded_nodes, **self.quadrature_nodes}


def _ball_rule(d, n_radial, n_dir, rng):
    """Nodes ``u_i * omega_j`` in the unit ball with positive weights summing to 1."""
    u, w = np.polynomial.legendre.leggauss(n_radial)
    u = (u + 1) / 2
    w = w / 2 * d * u ** (d - 1)
    w = w / w.sum()
    half = rng.standard_normal((max(1, n_dir // 2), d))
    omega = half / np.linalg.norm(half, axis=1, keepdims=True)
    omega = np.vstack([omega, -omega])
    nodes = (u[:, None, None] * omega[None, :, :]).reshape(-1, d)
    weights = np.repeat(w / omega.shape[0], omega.shape[0])
    return nodes, weights


def morrey_norm(b, q, sampling, variant="elliptic"):
    """Sampled Morrey quantity ``sup r * (avg_{ball or cylinder} |b|^q)^(1/q)``.

    Balls ``B_r(x)`` (elliptic) or cylinders ``[t, t+r^2] x B_r(x)``
    (parabolic).  The result is a lower bound of the supremum.
    """
    if not q > 1:
        raise ValueError(f"q must be > 1, got {q}")
    if variant not in ("elliptic", "parabolic"):
        raise ValueError("variant must be 'elliptic' or 'parabolic'")
    if variant == "elliptic" and not b.time_homogeneous:
        raise ValueError("the elliptic Morrey norm needs a time-homogeneous field")
    d = b.d
    if variant == "parabolic":
        tu, tw = np.polynomial.legendre.leggauss(sampling.n_time)
        tu, tw = (tu + 1) / 2, tw / 2
    best, arg, excluded = 0.0, (), 0
    for ci, center in enumerate(np.asarray(sampling.centers, dtype=float)):
        rng = np.random.default_rng([sampling.seed, ci])
        nodes, weights = _ball_rule(d, sampling.n_radial, sampling.n_directions, rng)
        if variant == "parabolic":
            t0, x0 = center[0], center[1:]
        else:
            t0, x0 = 0.0, center
        for r in sampling.radii:
            pts = x0 + r * nodes
            if variant == "elliptic":
                vals = b.magnitude(pts) ** q
                wts = weights
            else:
                ts = t0 + r**2 * tu
                vals = np.concatenate([b.magnitude(pts, t) ** q for t in ts])
                wts = np.concatenate([weights * wt for wt in tw])
            ok = np.isfinite(vals)
            excluded += int(np.count_nonzero(~ok))
            avg = np.sum(wts[ok] * vals[ok]) / np.sum(wts[ok])
            val = r * avg ** (1.0 / q)
            if val > best:
                best, arg = float(val), (float(r), tuple(center))
    nodes = {"n_radial": sampling.n_radial, "n_directions": sampling.n_directions}
    if variant == "parabolic":
        nodes["n_time"] = sampling.n_time
    return MorreyEstimate(float(q), variant, best, np.asarray(sampling.radii),
                          np.asarray(sampling.centers), nodes, excluded, arg)
