"""Closed-form thresholds and constants of the form-bounded theory."""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from ._validation import check_dimension, check_positive


@dataclass
class Condition:
    name: str
    quantity: str  # "delta" or "sqrt_delta"
    value: float
    threshold: float
    description: str = ""

    @property
    def margin(self):
        return self.threshold - self.value

    @property
    def passed(self):
        return bool(self.margin > 0)

    def to_dict(self):
        return {"condition": self.name, "quantity": self.quantity, "value": self.value,
                "threshold": self.threshold, "margin": self.margin, "pass": int(self.passed)}


@dataclass
class AdmissibilityReport:
    inputs: dict
    conditions: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name):
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    @property
    def passed(self):
        return all(c.passed for c in self.conditions)

    def rows(self):
        return [c.to_dict() for c in self.conditions]

    def as_text(self):
        head = ", ".join(f"{k}={v}" for k, v in self.inputs.items())
        lines = [f"admissibility report ({head})"]
        lines.append(f"{'condition':<22}{'quantity':>12}{'value':>14}{'threshold':>14}"
                     f"{'margin':>14}  pass")
        for c in self.conditions:
            lines.append(f"{c.name:<22}{c.quantity:>12}{c.value:>14.6g}{c.threshold:>14.6g}"
                         f"{c.margin:>14.6g}  {'yes' if c.passed else 'no'}")
        for k, v in self.extras.items():
            lines.append(f"{k} = {v}")
        return "\n".join(lines)


def c5_q_bound(q):
    """``(sqrt(q-1) - (q-2)/2) * 2/q``, the ``sqrt(delta)`` bound at exponent q."""
    return (np.sqrt(q - 1) - (q - 2) / 2) * (2 / q)


def c5_threshold(d):
    """Largest ``sqrt(delta)`` allowed by condition C5."""
    d = check_dimension(d)
    if d in (3, 4):
        return float(c5_q_bound(d))

    def lhs(s):
        return (d * s / 2) * (np.sqrt(d**2 * s**2 / 4 + (d - 2) ** 2) + d - 2) - (d - 1)

    return float(optimize.brentq(lhs, 0.0, 1.0, xtol=1e-15, rtol=1e-15))


def counterexample_threshold(d):
    """``4 (d/(d-2))^2``: attracting Hardy drifts above it admit no weak solution."""
    d = check_dimension(d)
    return 4.0 * (d / (d - 2)) ** 2


def elliptic_feller_threshold(d):
    """``min(1, (2/(d-2))^2)``."""
    d = check_dimension(d)
    return min(1.0, (2.0 / (d - 2)) ** 2)


def condition_report(d, delta):
    d = check_dimension(d)
    delta = check_positive(delta, "delta", strict=False)
    s = np.sqrt(delta)
    conds = [
        Condition("C1", "delta", delta, 4.0, "delta < 4"),
        Condition("C3", "sqrt_delta", s, (d - 1) / (d * (d + 1)), "sqrt(delta) < (d-1)/(d(d+1))"),
        Condition("C4", "sqrt_delta", s, 1.0 / d, "sqrt(delta) < 1/d"),
        Condition("C5", "sqrt_delta", s, c5_threshold(d), "gradient bound for q > d close to d"),
        Condition("elliptic_feller", "delta", delta, elliptic_feller_threshold(d),
                  "delta < min(1, (2/(d-2))^2)"),
        Condition("below_counterexample", "delta", delta, counterexample_threshold(d),
                  "delta <= 4 (d/(d-2))^2; above it the attracting Hardy SDE has no weak solution"),
    ]
    extras = {}
    if delta < 4:
        extras["contraction_interval_left"] = contraction_interval(delta)[0]
    return AdmissibilityReport({"d": d, "delta": delta}, conds, extras)


def c_delta_p(delta, p):
    """The constant ``c_{delta,p}`` bounding ``||T_p||_{p->p}``; ``inf`` when
    the second base is not positive."""
    delta = check_positive(delta, "delta", strict=False)
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    s = np.sqrt(delta)
    a = (p / 2) * delta + ((p - 2) / 2) * s
    b = p - 1 - (p - 1) * ((p - 2) / 2) * s - (p * (p - 2) / 4) * delta
    if b <= 0:
        return np.inf
    if p == 2:
        return float(s)
    return float(a ** (1 / p) * b ** (-1 / p))


def contraction_interval(delta):
    """``[2/(2 - sqrt(delta)), inf)``."""
    delta = check_positive(delta, "delta", strict=False)
    if delta >= 4:
        raise ValueError("the contraction interval needs delta < 4")
    return (2.0 / (2.0 - np.sqrt(delta)), np.inf)


def weak_constants(d):
    """``m_d``, ``kappa_d = d/(d-1)`` and ``c_p = p p'/4`` (as a callable)."""
    d = check_dimension(d)
    m = np.sqrt(np.pi) * (2 * np.e) ** -0.5 * d ** (d / 2) * (d - 1) ** ((1 - d) / 2)

    def c_p(p):
        if p <= 1:
            raise ValueError("p must be > 1")
        return p * (p / (p - 1)) / 4

    return {"m_d": float(m), "kappa_d": d / (d - 1), "c_p": c_p}


@dataclass
class Interval:
    lower: float
    upper: float
    empty: bool
    holder_condition: bool
    m_delta: float

    def contains(self, p):
        return (not self.empty) and self.lower < p < self.upper


def i_delta(delta, d):
    """``I_delta = ]2/(1 + sqrt(1 - m_d delta)), 2/(1 - sqrt(1 - m_d delta))[``."""
    delta = check_positive(delta, "delta", strict=False)
    m = weak_constants(d)["m_d"]
    md = m * delta
    holder = md < 4 * (d - 2) / (d - 1) ** 2
    if md >= 1:
        return Interval(np.nan, np.nan, True, bool(holder), md)
    root = np.sqrt(1 - md)
    upper = 2 / (1 - root) if root < 1 else np.inf
    return Interval(2 / (1 + root), upper, False, bool(holder), md)


def kappa_alpha_d(alpha, d):
    """``2^((alpha-1)/2) Gamma((d+alpha-1)/4) / Gamma((d-alpha+1)/4)``."""
    return float(2 ** ((alpha - 1) / 2) * special.gamma((d + alpha - 1) / 4)
                 / special.gamma((d - alpha + 1) / 4))


def stable_admissibility(d, alpha, delta, m_d_alpha):
    d = check_dimension(d)
    if not 1 < alpha < 2:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    check_positive(m_d_alpha, "m_d_alpha")
    bracket = min((d - alpha) / (d - alpha + 1) ** 2, alpha * (d + alpha) / (d + 2 * alpha) ** 2)
    threshold = 4 * bracket / m_d_alpha
    md = m_d_alpha * delta
    p_plus = 2 / (1 - np.sqrt(1 - md)) if md < 1 else np.nan
    cond = Condition("stable_feller", "delta", float(delta), float(threshold))
    return AdmissibilityReport(
        {"d": d, "alpha": alpha, "delta": delta, "m_d_alpha": m_d_alpha}, [cond],
        {"bracket": bracket, "p_plus": p_plus, "kappa_alpha_d": kappa_alpha_d(alpha, d),
         "brownian_hardy_constant": (d - 2) / 2},
    )


def gs_example(c, d):
    """Inputs for ``a(x) = I + c x x^T/|x|^2``: ``delta_rj = (4c)^2/(d-2)^2``,
    ``grad a = c(d-1) x/|x|^2`` (Hardy, so ``delta_a = (2c(d-1)/(d-2))^2``) and
    ``||a - I||_inf = |c|``."""
    d = check_dimension(d)
    table = np.full((d, d), (4 * c) ** 2 / (d - 2) ** 2)
    return {"delta_table": table, "delta_a": (2 * c * (d - 1) / (d - 2)) ** 2, "a_dev": abs(c)}


def _diffusion_lhs(q, delta, delta_a, gamma, a_dev):
    s = np.sqrt(delta + delta_a)
    first = 1 - (q / 4) * (np.sqrt(gamma) + a_dev * s)
    second = ((q - 1) * (1 - q * np.sqrt(gamma) / 2)
              - (s * np.sqrt(delta_a) + delta + delta_a) * q**2 / 4
              - (q - 2) * q * s / 2 - a_dev * q * s / 2)
    return first, second


def diffusion_admissibility(d, delta, delta_a=0.0, delta_table=None, a_dev=0.0, q=None,
                            n_grid=4000):
    """Evaluate the two diffusion inequalities at ``q`` or search
    ``q`` in ``(max(2, d-2), 64]`` for one that passes both."""
    d = check_dimension(d)
    gamma = float(np.sum(delta_table)) if delta_table is not None else 0.0
    q_low = max(2.0, d - 2.0)
    if q is not None:
        qs = np.array([float(q)])
    else:
        qs = q_low + (64.0 - q_low) * (np.arange(1, n_grid + 1) / n_grid) ** 2
    first, second = _diffusion_lhs(qs, delta, delta_a, gamma, a_dev)
    ok = (first > 0) & (second > 0)
    score = np.minimum(first, second)
    i = int(np.argmax(score))
    return {
        "d": d, "delta": delta, "delta_a": delta_a, "gamma": gamma, "a_dev": a_dev,
        "q_range": (q_low, 64.0), "q_best": float(qs[i]), "first": float(first[i]),
        "second": float(second[i]), "passing_q_exists": bool(np.any(ok)),
        "q_pass_min": float(qs[ok].min()) if np.any(ok) else np.nan,
    }
