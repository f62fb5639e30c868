"""Numerical laboratory for SDEs and parabolic equations with form-bounded drifts."""

__version__ = "0.1.0"
