"""scikit-learn style wrappers.

``X`` is a drift: either a :class:`~sdlab.drifts.DriftField` or grid samples
of shape ``(d, N, ..., N)``.  The grid is described by the ``d``, ``N`` and
``L`` parameters so that ``get_params``/``set_params``/``clone`` work as usual.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .drifts import DriftField, discrete_form_bound, weak_form_bound
from .mollify import Mollifier
from .resolvent import NeumannConfig, build_triple, theta_apply
from .spectral import TorusGrid


class _GridMixin:
    def _grid(self):
        return TorusGrid(int(self.d), int(self.N), float(self.L))

    def _values(self, X, grid):
        if isinstance(X, DriftField):
            if "grid_values" in X.meta and X.meta.get("grid") == grid:
                return X.meta["grid_values"]
            return X.on_grid(grid, singular="regularize")
        X = np.asarray(X, dtype=float)
        if X.shape != (grid.d,) + grid.shape:
            raise ValueError(f"X has shape {X.shape}, expected {(grid.d,) + grid.shape}")
        return X


class FormBoundEstimator(_GridMixin, BaseEstimator):
    """Grid estimate of the form-bound (``kind='form'``) or the weak form-bound
    (``kind='weak'``, at ``lam``).  After ``fit``: ``delta_`` and ``certificate_``."""

    def __init__(self, d=3, N=32, L=2 * np.pi, kind="form", c_delta=0.0, lam=1.0):
        self.d = d
        self.N = N
        self.L = L
        self.kind = kind
        self.c_delta = c_delta
        self.lam = lam

    def fit(self, X, y=None):
        grid = self._grid()
        vals = self._values(X, grid)
        if self.kind == "form":
            cert = discrete_form_bound(vals, grid, self.c_delta)
        elif self.kind == "weak":
            cert = weak_form_bound(vals, grid, self.lam)
        else:
            raise ValueError(f"kind must be 'form' or 'weak', got {self.kind!r}")
        self.certificate_ = cert
        self.delta_ = cert.delta
        return self

    def score(self, X, y=None):
        """Negative estimated form-bound (larger is better behaved)."""
        return -self.fit(X).delta_


class DeGiorgiMollifier(_GridMixin, TransformerMixin, BaseEstimator):
    """Heat-semigroup smoothing ``e^{eps Lap}`` of grid fields."""

    def __init__(self, d=3, N=32, L=2 * np.pi, epsilon=0.01, symbol="lattice"):
        self.d = d
        self.N = N
        self.L = L
        self.epsilon = epsilon
        self.symbol = symbol

    def fit(self, X=None, y=None):
        self.mollifier_ = Mollifier("DeGiorgi", self.epsilon, self.symbol)
        self.grid_ = self._grid()
        return self

    def transform(self, X):
        check_is_fitted(self, "mollifier_")
        return self.mollifier_.apply(self._values(X, self.grid_), self.grid_)


class NeumannResolvent(_GridMixin, BaseEstimator):
    """``fit(b)`` builds the operator triple; ``predict(f)`` returns
    ``Theta_p(mu, b) f``, the solution of ``(mu - Lap + b.grad) u = f``."""

    def __init__(self, d=3, N=24, L=2 * np.pi, mu=10.0, p=2.0, variant="elliptic",
                 series_tol=1e-12, max_terms=200):
        self.d = d
        self.N = N
        self.L = L
        self.mu = mu
        self.p = p
        self.variant = variant
        self.series_tol = series_tol
        self.max_terms = max_terms

    def fit(self, X, y=None):
        if self.variant == "parabolic":
            raise ValueError("the estimator wraps the elliptic and weak variants")
        self.grid_ = self._grid()
        self.b_values_ = self._values(X, self.grid_)
        self.config_ = NeumannConfig(self.p, mu=self.mu, series_tol=self.series_tol,
                                     max_terms=self.max_terms)
        self.triple_ = build_triple(self.b_values_, self.config_, self.variant, self.grid_)
        return self

    def predict(self, f):
        check_is_fitted(self, "triple_")
        return theta_apply(f, self.b_values_, self.config_, self.variant, self.grid_,
                           triple=self.triple_)
