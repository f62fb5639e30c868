"""The seventeen acceptance criteria at their stated sizes and tolerances."""

import time

import numpy as np
import pytest

from sdlab.admissibility import c5_threshold, c_delta_p, counterexample_threshold
from sdlab.cli import main
from sdlab.experiments import REGISTRY, resolve, run_experiment
from sdlab.io import sha256


def run(name, tmp_path, **overrides):
    params = resolve(name, {k: str(v) for k, v in overrides.items()})
    t0 = time.perf_counter()
    outcome, _ = run_experiment(name, params, tmp_path / name)
    return outcome, time.perf_counter() - t0


def test_01_admissibility_golden(report):
    t0 = time.perf_counter()
    c3, c4, ce = c5_threshold(3), c5_threshold(4), counterexample_threshold(5)
    ok = abs(c3 - 0.60947) < 1e-5 and abs(c4 - 0.36602) < 1e-5 and abs(ce - 100 / 9) < 1e-12
    assert report(1, "admissibility golden values", ok,
                  f"C5(3)={c3:.6f} C5(4)={c4:.6f} 4(d/(d-2))^2={ce!r}",
                  time.perf_counter() - t0, 1)


def test_02_c_delta_p(report):
    t0 = time.perf_counter()
    exact = all(c_delta_p(dl, 2.0) == np.sqrt(dl) for dl in (0.01, 0.25, 1.0, 3.9))
    bad = 0
    for dl in np.linspace(0.01, 3.99, 20):
        for p in np.linspace(2.0, 30.0, 20):
            if np.sqrt(dl) < 2 / p and not c_delta_p(dl, p) < 1:
                bad += 1
    assert report(2, "c_{delta,2} = sqrt(delta) and sweep", exact and bad == 0,
                  f"exact={exact} sweep_violations={bad}/400", time.perf_counter() - t0, 1)


def test_03_resolvent_identity(report, tmp_path):
    out, dt = run("resolvent-identity", tmp_path)
    r = out.summary["residual"]
    assert report(3, "pseudo-resolvent identity", out.passed and r < 1e-6, f"residual={r:.2e}",
                  dt, 60)


def test_04_neumann_vs_direct(report, tmp_path):
    out, dt = run("neumann-vs-direct", tmp_path)
    r = out.summary["relative_difference"]
    assert report(4, "Neumann series vs direct solve", out.passed and r < 1e-6,
                  f"relative_difference={r:.2e}", dt, 120)


def test_05_tp_norm(report, tmp_path):
    out, dt = run("tp-norm", tmp_path)
    worst = max(r["empirical_norm"] / r["analytic_bound"] for r in out.rows)
    ok = out.passed and len(out.rows) >= 3 and worst <= 1.1
    assert report(5, "||T_p|| <= 1.1 c_{delta,p}", ok,
                  f"levels={len(out.rows)} max_ratio={worst:.3f}", dt, 120)


def test_06_mollify_preserve(report, tmp_path):
    out, dt = run("mollify-preserve", tmp_path)
    worst = max(float(r["delta_hat"]) for r in out.rows)
    ok = out.passed and worst <= 1.0 + 1e-6
    assert report(6, "mollifier preserves the form-bound", ok,
                  f"max delta_hat={worst:.4f} (delta=1, c_delta={out.summary['c_delta']:.4f})",
                  dt, 120)


def test_07_morrey(report, tmp_path):
    out, dt = run("morrey-hardy", tmp_path)
    e = out.summary["estimate"]
    ok = out.passed and abs(e / np.sqrt(3) - 1) <= 0.01
    assert report(7, "Morrey M_2 of |x|^-1 = sqrt(3)", ok, f"estimate={e:.6f}", dt, 30)


@pytest.mark.slow
def test_08_orlicz_energy(report, tmp_path):
    out, dt = run("orlicz-energy", tmp_path)
    worst = max(r["lhs"] / r["rhs"] for r in out.rows)
    ok = out.passed and len(out.rows) == 12
    assert report(8, "Orlicz energy inequality", ok,
                  f"cases={len(out.rows)} max lhs/rhs={worst:.3f}", dt, 300)


def test_09_lp_contraction(report, tmp_path):
    out, dt = run("lp-contraction", tmp_path)
    worst = max(r["worst_increase"] for r in out.rows)
    ok = out.passed and worst <= 0.01
    assert report(9, "L^4 contraction for delta=1", ok, f"worst step increase={worst:.2e}",
                  dt, 120)


def test_10_conservation(report, tmp_path):
    out, dt = run("conservation", tmp_path)
    worst = max(r["sup_deviation"] for r in out.rows)
    ok = out.passed and worst < 1e-8
    assert report(10, "conservation of u = 1", ok, f"max sup|u-1|={worst:.2e}", dt, 60)


@pytest.mark.slow
def test_11_hardy_collapse(report, tmp_path):
    hi, dt1 = run("hardy-collapse", tmp_path / "hi", d=5, delta=16.0)
    lo, dt2 = run("hardy-collapse", tmp_path / "lo", d=5, delta=1.0)
    f_hi = [r["trap_fraction"] for r in hi.rows]
    f_lo = [r["trap_fraction"] for r in lo.rows]
    ok = (all(b > a for a, b in zip(f_hi, f_hi[1:])) and all(f < 0.1 for f in f_lo)
          and hi.passed and lo.passed)
    detail = ("delta=16: " + " < ".join(f"{f:.4f}" for f in f_hi)
              + "; delta=1: " + ", ".join(f"{f:.4f}" for f in f_lo))
    assert report(11, "Hardy collapse trend", ok, detail, dt1 + dt2, 600)


@pytest.mark.slow
def test_12_ito_slope(report, tmp_path):
    out, dt = run("ito-slope", tmp_path)
    s = out.summary
    ok = out.passed and s["expected"] == 7.0
    assert report(12, "Ito slope d=5 delta=1", ok,
                  f"slope={s['slope']:.4f} se={s['slope_se']:.4f} expected=7", dt, 300)


@pytest.mark.slow
def test_13_weak_consistency(report, tmp_path):
    out, dt = run("weak-consistency", tmp_path)
    s = out.summary
    assert report(13, "Monte Carlo vs PDE", out.passed,
                  f"mc={s['monte_carlo']:.5f} se={s['monte_carlo_se']:.5f} pde={s['pde']:.5f}", dt, 600)


def test_14_stable_cf(report, tmp_path):
    out, dt = run("stable-cf", tmp_path)
    ok = out.passed and len(out.rows) == 5 and all(r["pass"] for r in out.rows)
    worst = max(abs(r["empirical"] - r["target"]) / r["se"] for r in out.rows)
    assert report(14, "alpha-stable characteristic function", ok,
                  f"probes={len(out.rows)} max |dev|/se={worst:.2f}", dt, 60)


@pytest.mark.slow
def test_15_krylov_stability(report, tmp_path):
    out, dt = run("krylov-stability", tmp_path)
    drift = out.summary["relative_drift"]
    ok = out.passed and drift <= 0.25
    assert report(15, "Krylov constant stability", ok,
                  f"small={out.summary['constant_small']:.4f} "
                  f"large={out.summary['constant_large']:.4f} drift={drift:.3f}", dt, 600)


@pytest.mark.slow
def test_16_feller_cauchy(report, tmp_path):
    out, dt = run("feller-cauchy", tmp_path)
    diffs = [r["sup_diff"] for r in out.rows]
    ok = out.passed and all(b < a for a, b in zip(diffs, diffs[1:]))
    assert report(16, "Feller-Cauchy differences decrease", ok,
                  " > ".join(f"{v:.3e}" for v in diffs), dt, 300)


# reduced sizes: determinism does not depend on the run length
SMALL = {
    "hardy-collapse": dict(n_paths=200, T=0.05, dt=1e-2, levels="8 16"),
    "ito-slope": dict(n_paths=200, T=0.1, dt=1e-2, record_every=1),
    "stable-cf": dict(count=2000),
    "weak-consistency": dict(n_paths=200, T=0.05, dt=1e-2, N=16),
    "krylov-stability": dict(n_paths=256, n_small=64, T=0.05, dt=1e-2),
    "orlicz-energy": dict(N=16, levels="8", deltas="1.0", T=0.02),
    "lp-contraction": dict(N=16, levels="8", T=0.02),
    "conservation": dict(N=16, levels="8", T=0.05),
    "feller-cauchy": dict(N=16, levels="4 8 16", T=0.05),
    "gradient-bound": dict(N=16, levels="8", T=0.05),
    "linfty-bound": dict(N=8, levels="8", T=0.02),
    "resolvent-identity": dict(N=12),
    "neumann-vs-direct": dict(N=12),
    "tp-norm": dict(N=12, levels="4"),
    "mollify-preserve": dict(N=16, levels="4 8"),
    "morrey-hardy": dict(n_radii=4),
    "diffusion-admissibility": dict(),
}


@pytest.mark.slow
def test_17_manifest_rerun_bitwise(report, tmp_path, capsys):
    assert set(SMALL) == set(REGISTRY)
    t0 = time.perf_counter()
    mismatched = []
    for name, small in SMALL.items():
        a, b = tmp_path / name / "a", tmp_path / name / "b"
        args = ["experiment", name, "--out", str(a)]
        for k, v in small.items():
            args += [f"--{k}", str(v)]
        code_a = main(args)
        code_b = main(["experiment", "--manifest", str(a / "manifest.ini"), "--out", str(b)])
        files = sorted(p.name for p in a.iterdir())
        same = (code_a == code_b and code_a in (0, 1)
                and files == sorted(p.name for p in b.iterdir())
                and all(sha256(a / f) == sha256(b / f) for f in files))
        if not same:
            mismatched.append(name)
    capsys.readouterr()
    assert report(17, "manifest re-run is bitwise identical", not mismatched,
                  f"experiments={len(SMALL)} mismatched={mismatched or 'none'}",
                  time.perf_counter() - t0, 600)
