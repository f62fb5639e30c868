import numpy as np
import pytest
from hypothesis import given, strategies as st

from sdlab.admissibility import (
    c5_q_bound, c5_threshold, c_delta_p, condition_report, contraction_interval,
    counterexample_threshold, diffusion_admissibility, elliptic_feller_threshold, gs_example,
    i_delta, kappa_alpha_d, stable_admissibility, weak_constants,
)


def test_c5_golden_values():
    # closed forms (2 sqrt2 - 1)/3 and 2(sqrt3 - 1)/4
    assert c5_threshold(3) == pytest.approx(0.60947, abs=1e-5)
    assert c5_threshold(4) == pytest.approx(0.36602, abs=1e-5)
    assert c5_threshold(3) == pytest.approx((2 * np.sqrt(2) - 1) / 3, abs=1e-15)
    assert c5_threshold(4) == pytest.approx(2 * (np.sqrt(3) - 1) / 4, abs=1e-15)


def test_c5_root_condition_for_high_dimension():
    for d in (5, 6, 9):
        s = c5_threshold(d)
        lhs = (d * s / 2) * (np.sqrt(d**2 * s**2 / 4 + (d - 2) ** 2) + d - 2)
        assert lhs == pytest.approx(d - 1, abs=1e-12)


def test_c5_decreasing_in_d():
    vals = [c5_threshold(d) for d in range(5, 15)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_c5_q_bound_at_q_equals_d():
    assert c5_q_bound(3.0) == pytest.approx((np.sqrt(2) - 0.5) * 2 / 3)


def test_counterexample_threshold():
    assert abs(counterexample_threshold(5) - 100 / 9) < 1e-12
    assert counterexample_threshold(3) == 36.0


def test_elliptic_threshold():
    assert elliptic_feller_threshold(3) == 1.0
    assert elliptic_feller_threshold(4) == 1.0
    assert elliptic_feller_threshold(5) == pytest.approx(4 / 9)


def test_condition_report_d3():
    rep = condition_report(3, 0.3)
    th = {c.name: c.threshold for c in rep.conditions}
    assert th["C3"] == pytest.approx(1 / 6)
    assert th["C4"] == pytest.approx(1 / 3)
    assert th["below_counterexample"] == 36.0
    for c in rep.conditions:
        assert c.margin == pytest.approx(c.threshold - c.value)
        assert c.passed == (c.margin > 0)
    assert "C5" in rep.as_text()


def test_condition_report_zero_delta_passes_all():
    for d in (3, 4, 5, 8):
        assert condition_report(d, 0.0).passed


def test_dimension_below_three_rejected():
    with pytest.raises(ValueError):
        condition_report(2, 0.1)


@pytest.mark.parametrize("delta", [0.01, 0.25, 1.0, 3.9])
def test_c_delta_2_is_sqrt_delta(delta):
    assert c_delta_p(delta, 2.0) == np.sqrt(delta)


def test_c_delta_p_sweep():
    deltas = np.linspace(0.01, 3.9, 20)
    ps = np.linspace(2.0, 20.0, 20)
    checked = 0
    for delta in deltas:
        for p in ps:
            if np.sqrt(delta) < 2 / p:
                assert c_delta_p(delta, p) < 1
                checked += 1
    assert checked > 20


def test_c_delta_p_value():
    # delta = 0.25, p = 3: a = 0.375 + 0.25, b = 2 - 0.5 - 0.1875
    assert c_delta_p(0.25, 3.0) == pytest.approx((0.625 / 1.3125) ** (1 / 3))


def test_c_delta_p_rejects_small_p():
    with pytest.raises(ValueError):
        c_delta_p(0.5, 1.5)


def test_contraction_interval():
    assert contraction_interval(1.0)[0] == 2.0
    with pytest.raises(ValueError):
        contraction_interval(4.0)


def test_weak_constants_d3():
    k = weak_constants(3)
    assert k["m_d"] == pytest.approx(np.sqrt(np.pi) / np.sqrt(2 * np.e) * 3**1.5 / 2)
    assert k["kappa_d"] == 1.5
    assert k["c_p"](2.0) == 1.0


@given(st.floats(0.0, 0.2), st.integers(3, 8))
def test_i_delta_endpoints_are_conjugate(delta, d):
    iv = i_delta(delta, d)
    if iv.empty or not np.isfinite(iv.upper):
        return
    assert 1 / iv.lower + 1 / iv.upper == pytest.approx(1.0, abs=1e-12)


def test_i_delta_empty_for_large_delta():
    assert i_delta(10.0, 3).empty


def test_kappa_alpha_d_brownian_limit():
    # alpha = 2, d = 3: sqrt2 Gamma(1)/Gamma(1/2)
    from scipy.special import gamma
    assert kappa_alpha_d(2.0, 3) == pytest.approx(np.sqrt(2) / gamma(0.5))


def test_stable_admissibility_threshold():
    rep = stable_admissibility(3, 1.5, 0.1, 2.0)
    bracket = min(1.5 / 2.5**2, 1.5 * 4.5 / 6**2)
    assert rep.extras["bracket"] == pytest.approx(bracket)
    assert rep.conditions[0].threshold == pytest.approx(4 * bracket / 2.0)
    with pytest.raises(ValueError):
        stable_admissibility(3, 2.0, 0.1, 1.0)


@given(st.floats(0.01, 0.4), st.floats(0.01, 0.4))
def test_p_plus_monotone(a, b):
    # 2/(1 - sqrt(1 - x)) falls from +inf at x = 0 to 2 at x = 1
    lo, hi = sorted((a, b))
    if hi - lo < 1e-6:
        return
    p_lo = stable_admissibility(3, 1.5, lo, 2.0).extras["p_plus"]
    p_hi = stable_admissibility(3, 1.5, hi, 2.0).extras["p_plus"]
    assert 2 < p_hi < p_lo


def test_p_plus_value():
    assert stable_admissibility(3, 1.5, 0.25, 2.0).extras["p_plus"] == pytest.approx(
        2 / (1 - np.sqrt(0.5)), abs=1e-12)


def test_gs_example_values():
    ex = gs_example(0.02, 3)
    assert ex["delta_table"][0, 0] == pytest.approx(0.08**2)
    assert ex["delta_a"] == pytest.approx(0.08**2)
    assert ex["a_dev"] == 0.02


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_identity_diffusion_matches_elliptic_threshold(d):
    thr = elliptic_feller_threshold(d)
    assert diffusion_admissibility(d, 0.97 * thr)["passing_q_exists"]
    assert not diffusion_admissibility(d, 1.03 * thr)["passing_q_exists"]


def test_diffusion_gs_example_passes():
    ex = gs_example(0.02, 3)
    rep = diffusion_admissibility(3, 0.01, ex["delta_a"], ex["delta_table"], ex["a_dev"])
    assert rep["passing_q_exists"]
