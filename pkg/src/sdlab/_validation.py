"""Small input-validation helpers shared by the public API."""

import numbers

import numpy as np


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_dimension(d, minimum=3):
    if not isinstance(d, numbers.Integral) or d < minimum:
        raise ValueError(f"dimension d must be an integer >= {minimum}, got {d!r}")
    return int(d)


def check_finite(values, name="field"):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = int(np.count_nonzero(~np.isfinite(values)))
        raise ValueError(f"{name} has {bad} non-finite entries")
    return values


def check_scalar_field(values, grid, name="f"):
    """Return ``values`` as a float array with the grid's scalar shape."""
    values = check_finite(values, name)
    if values.shape != grid.shape:
        raise ValueError(f"{name} has shape {values.shape}, expected {grid.shape}")
    return values


def check_vector_field(values, grid, name="b"):
    """Return ``values`` as a float array of shape ``(d, N, ..., N)``."""
    values = check_finite(values, name)
    expected = (grid.d,) + grid.shape
    if values.shape != expected:
        raise ValueError(f"{name} has shape {values.shape}, expected {expected}")
    return values


def check_exponent(p, name="p", low=1.0):
    p = float(p)
    if not p >= low:
        raise ValueError(f"{name} must be >= {low}, got {p}")
    return p
