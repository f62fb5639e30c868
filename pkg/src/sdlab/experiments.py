"""Named experiments.  Each takes a parameter dict (typed like its defaults),
an output directory and a thread cap, and returns an :class:`Outcome`."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .admissibility import diffusion_admissibility, gs_example
from .drifts import DriftField, MorreySampling, hardy_drift, morrey_norm
from .evolution import (
    EvolutionConfig, WeightFunction, conservation_audit, energy_audit, evolve,
    feller_cauchy_diagnostic, gradient_bound_audit, lattice_centers, linfty_bound_audit,
    refinement_stable,
)
from .mollify import (
    MollificationSchedule, calibrate_c_delta, degiorgi_exact, mollify_cutoff, verify_preservation,
)
from .resolvent import NeumannConfig, direct_solve, pseudo_resolvent_residual, theta_apply, tp_norm_audit
from .sde import (
    SdeConfig, bump_family, hardy_collapse_experiment, ito_slope_audit, krylov_stability,
    simulate, stable_cf_audit, weak_consistency_audit,
)
from .spectral import TorusGrid, random_smooth_field


@dataclass
class Outcome:
    passed: bool
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    fields: dict = field(default_factory=dict)  # name -> (values, grid or None)


@dataclass
class Experiment:
    name: str
    anchor: str
    description: str
    defaults: dict
    run: object


REGISTRY = {}


def experiment(name, anchor, description, **defaults):
    def wrap(fn):
        REGISTRY[name] = Experiment(name, anchor, description, defaults, fn)
        return fn
    return wrap


def _levels(s):
    return tuple(int(v) for v in s)


def _schedule(levels):
    return MollificationSchedule.default(_levels(levels))


def _bump(grid, center=(0.0,), width=0.15, amplitude=0.8, wave=0.2):
    x = grid.points
    c = np.zeros(grid.d)
    c[: len(center)] = center
    r2 = np.sum((x - c) ** 2, axis=-1)
    return amplitude * np.exp(-r2 / (2 * width**2)) + wave * np.cos(2 * np.pi * x[..., 0] / grid.L)


# --- Monte Carlo ------------------------------------------------------------


@experiment("hardy-collapse", "sde2_ce / delta_counter; thm_sharp",
            "trap fraction of the attracting Hardy SDE along mollification levels",
            d=5, delta=16.0, levels=(8, 16, 32), n_paths=10000, T=1.0, dt=1e-3, r_trap=0.05,
            seed=0)
def run_hardy_collapse(p, out, threads):
    rep = hardy_collapse_experiment(p["d"], p["delta"], _levels(p["levels"]), p["n_paths"],
                                    p["T"], p["dt"], p["r_trap"], p["seed"], threads=threads)
    return Outcome(rep.passed, rep.rows, dict(rep.summary(), **rep.checks))


@experiment("ito-slope", "Ito computation for |X_t|^2 under the Hardy drift",
            "slope of E|X_t|^2 from x0 = 0 against 2(d - sqrt(delta)(d-2)/2)",
            d=5, delta=1.0, level=32, n_paths=10000, T=1.0, dt=1e-3, record_every=10, seed=0,
            rel_tol=0.05)
def run_ito_slope(p, out, threads):
    b = degiorgi_exact(hardy_drift(p["d"], p["delta"]), 2.0 ** (-p["level"] / 2)) \
        if p["delta"] > 0 else None
    cfg = SdeConfig(p["d"], b, dt=p["dt"], T=p["T"], n_paths=p["n_paths"], seed=p["seed"],
                    record_every=p["record_every"], level=p["level"])
    ens = simulate(cfg, threads)
    rep = ito_slope_audit(ens, p["delta"], p["d"], rel_tol=p["rel_tol"])
    pos = ens.positions[: min(64, ens.n_paths)]
    return Outcome(rep.passed, rep.rows, dict(rep.summary(), expected=rep.params["expected"]),
                   {"paths_sample": (pos, None)})


@experiment("stable-cf", "sde_s; thm_stable",
            "empirical characteristic function of alpha-stable increments",
            alpha=1.5, dt=1.0, count=100000, seed=0, d=1)
def run_stable_cf(p, out, threads):
    rep = stable_cf_audit(p["alpha"], p["dt"], p["count"], p["seed"], d=p["d"])
    return Outcome(rep.passed, rep.rows, rep.summary())


@experiment("weak-consistency", "Cauchy problem solved by E_x f(X_t)",
            "Monte Carlo E f(X_t) against the PDE solution with the same mollified drift",
            d=3, delta=0.5, level=4, n_paths=10000, T=0.5, dt=1e-3, N=64, L=20.0, seed=0,
            allowance=0.02, bump_center=0.5, bump_width=1.0)
def run_weak_consistency(p, out, threads):
    b = degiorgi_exact(hardy_drift(p["d"], p["delta"]), 2.0 ** (-p["level"] / 2))
    c = np.zeros(p["d"])
    c[0] = p["bump_center"]
    w = p["bump_width"]

    def obs(x):
        return np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * w**2))

    cfg = SdeConfig(p["d"], b, dt=p["dt"], T=p["T"], n_paths=p["n_paths"], seed=p["seed"])
    rep = weak_consistency_audit(cfg, obs, TorusGrid(p["d"], p["N"], p["L"]), p["allowance"],
                                 threads=threads)
    return Outcome(rep.passed, [dict(rep.summary(), **rep.params)], rep.summary())


@experiment("krylov-stability", "krylov_type (sde_parab iii)",
            "Krylov constant over Gaussian bumps, prefix of n_small paths against all paths",
            d=3, delta=0.5, level=16, nu=3.0, n_small=10240, n_paths=40960, T=1.0, dt=1e-3,
            seed=0, max_drift=0.25)
def run_krylov(p, out, threads):
    b = degiorgi_exact(hardy_drift(p["d"], p["delta"]), 2.0 ** (-p["level"] / 2))
    cfg = SdeConfig(p["d"], b, dt=p["dt"], T=p["T"], n_paths=p["n_paths"], seed=p["seed"])
    rep = krylov_stability(cfg, bump_family(p["d"]), p["nu"], p["n_small"],
                           max_drift=p["max_drift"], threads=threads)
    return Outcome(rep.passed, rep.rows, rep.summary())


# --- PDE --------------------------------------------------------------------


@experiment("orlicz-energy", "thm_Orlicz (iii)",
            "Orlicz energy inequality for mollified Hardy drifts on the unit torus",
            d=3, N=32, L=1.0, deltas=(1.0, 3.5), ps=(2, 4), T=0.25, levels=(8, 16, 32),
            c_delta=0.0, tol=0.02)
def run_orlicz(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    sch = _schedule(p["levels"])
    u0 = _bump(grid)
    rows, ok, fields = [], True, {}
    for delta in p["deltas"]:
        b = hardy_drift(p["d"], delta)
        for n in sch.levels:
            traj = evolve(mollify_cutoff(b, n, sch, grid), u0, EvolutionConfig(grid, p["T"]))
            for pe in p["ps"]:
                rep = energy_audit(traj, pe, delta, p["c_delta"], "Orlicz", tol=p["tol"])
                ok &= rep.passed
                rows.append({"delta": delta, "level": n, "p": pe, "lhs": rep.lhs, "rhs": rep.rhs,
                             "dt": traj.dt, "pass": int(rep.passed)})
            fields[f"u_final_delta{delta:g}_level{n}"] = (traj.states[-1], grid)
    return Outcome(bool(ok), rows, {"all_pass": int(ok)}, fields)


@experiment("lp-contraction", "contraction interval p >= 2/(2 - sqrt(delta)); growth",
            "||u(t)||_p e^{-omega_p t} nonincreasing under mollified Hardy drifts",
            d=3, N=32, L=1.0, delta=1.0, p=4.0, T=0.25, levels=(8, 16, 32), c_delta=0.0,
            tol=0.01)
def run_lp(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    sch = _schedule(p["levels"])
    u0 = _bump(grid)
    b = hardy_drift(p["d"], p["delta"])
    rows, ok = [], True
    for n in sch.levels:
        traj = evolve(mollify_cutoff(b, n, sch, grid), u0, EvolutionConfig(grid, p["T"]))
        rep = energy_audit(traj, p["p"], p["delta"], p["c_delta"], "Lp", tol=p["tol"])
        mono = rep.checks["scaled_norm_nonincreasing"]
        ok &= mono
        s = rep.series["scaled_norm"]
        worst = float(np.max(s[1:] / s[:-1]) - 1)
        rows.append({"level": n, "norm_start": s[0], "norm_end": s[-1], "worst_increase": worst,
                     "energy_inequality": int(rep.checks["energy_inequality"]),
                     "pass": int(mono)})
    return Outcome(bool(ok), rows, {"all_pass": int(ok)})


@experiment("conservation", "thm1_feller (v); cons",
            "u(0) = 1 stays 1 under mollified Hardy drifts",
            d=3, N=32, L=2 * np.pi, delta=1.0, T=1.0, levels=(8, 16, 32))
def run_conservation(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    sch = _schedule(p["levels"])
    b = hardy_drift(p["d"], p["delta"])
    rows, ok = [], True
    for n in sch.levels:
        rep = conservation_audit(mollify_cutoff(b, n, sch, grid), EvolutionConfig(grid, p["T"]))
        ok &= rep.passed
        rows.append(dict(level=n, **rep.values, passed=int(rep.passed)))
    return Outcome(bool(ok), rows, {"all_pass": int(ok)})


@experiment("feller-cauchy", "feller_parab (i); u_conv",
            "sup-norm differences of solutions along consecutive mollification levels",
            d=3, N=32, L=2 * np.pi, delta=0.1, T=0.5, levels=(8, 16, 32))
def run_feller(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    f = np.exp(-np.sum(grid.points**2, axis=-1) / 2)
    rep = feller_cauchy_diagnostic(hardy_drift(p["d"], p["delta"]), _schedule(p["levels"]), f,
                                   EvolutionConfig(grid, p["T"]))
    return Outcome(rep.passed, rep.rows, {"dt": rep.values["dt"]})


@experiment("gradient-bound", "bd_2 under C5",
            "fitted gradient-bound constant along mollification levels",
            d=3, N=32, L=2 * np.pi, delta=0.05, q=3.5, T=0.5, levels=(8, 16, 32),
            condition="C4")
def run_gradient(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    sch = _schedule(p["levels"])
    f = np.exp(-np.sum(grid.points**2, axis=-1) / 2)
    b = hardy_drift(p["d"], p["delta"])
    rows, Cs = [], []
    for n in sch.levels:
        traj = evolve(mollify_cutoff(b, n, sch, grid), f, EvolutionConfig(grid, p["T"]))
        rep = gradient_bound_audit(traj, p["q"], p["delta"], condition=p["condition"])
        Cs.append(rep.constants[0])
        rows.append({"level": n, "C": rep.constants[0], "flags": ";".join(rep.flags)})
    ok = refinement_stable(Cs)
    return Outcome(ok, rows, {"stable": int(ok), "C_min": min(Cs), "C_max": max(Cs)})


@experiment("linfty-bound", "est_m; rho",
            "ratio of sup|u| to the weighted right side along mollification levels",
            d=3, N=32, L=2 * np.pi, delta=1.0, p=2.5, theta_prime=3.5, kappa=0.05, theta=2.0,
            T=0.5, levels=(8, 16, 32))
def run_linfty(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    sch = _schedule(p["levels"])
    b = hardy_drift(p["d"], p["delta"])
    ws = [WeightFunction(p["kappa"], p["theta"], tuple(z)) for z in lattice_centers(grid)]
    viol = ws[0].bound_violations(grid)
    rows, ratios = [], []
    for n in sch.levels:
        bn = mollify_cutoff(b, n, sch, grid)
        rep = linfty_bound_audit(bn, bn.meta["grid_values"], 1.0, p["p"], p["theta_prime"], ws,
                                 EvolutionConfig(grid, p["T"]), delta=p["delta"])
        ratios.append(rep.constants[0])
        rows.append({"level": n, "lhs": rep.values["lhs"], "rhs": rep.values["rhs"],
                     "ratio": rep.constants[0]})
    ok = refinement_stable(ratios) and max(viol) <= 1e-12
    return Outcome(ok, rows, {"stable": int(refinement_stable(ratios)),
                              "grad_weight_violation": viol[0], "lap_weight_violation": viol[1]})


# --- resolvent and form-bounds ----------------------------------------------


def _smooth_drift(grid, amp=0.5):
    x = grid.points
    return amp * np.stack([np.sin(x[..., 1]), np.sin(x[..., 2]), np.cos(x[..., 0])])


@experiment("resolvent-identity", "pseudo-resolvent identity for Theta_p(mu, b)",
            "Theta(mu) - Theta(nu) = (nu - mu) Theta(mu) Theta(nu) on a smooth drift",
            N=24, L=2 * np.pi, mu=5.0, nu=10.0, p=2.0, seed=0, tol=1e-6)
def run_resolvent_identity(p, out, threads):
    grid = TorusGrid(3, p["N"], p["L"])
    f = random_smooth_field(grid, np.random.default_rng(p["seed"]))
    res = pseudo_resolvent_residual(f, _smooth_drift(grid), NeumannConfig(p["p"]), p["mu"],
                                    p["nu"], grid)
    return Outcome(res < p["tol"], [{"residual": res}], {"residual": res})


@experiment("neumann-vs-direct", "Theta_p(mu, b) against a direct solve",
            "Neumann series resolvent against preconditioned GMRES",
            N=24, L=2 * np.pi, delta=0.25, level=8, mu=10.0, p=2.0, seed=0, tol=1e-6)
def run_neumann(p, out, threads):
    grid = TorusGrid(3, p["N"], p["L"])
    sch = _schedule((p["level"],))
    bn = mollify_cutoff(hardy_drift(3, p["delta"]), p["level"], sch, grid).meta["grid_values"]
    f = random_smooth_field(grid, np.random.default_rng(p["seed"]))
    cfg = NeumannConfig(p["p"], mu=p["mu"])
    u = theta_apply(f, bn, cfg, "elliptic", grid, check_norm=True)
    v = direct_solve(f, bn, p["mu"], grid)
    rel = float(np.linalg.norm(u - v) / np.linalg.norm(v))
    return Outcome(rel < p["tol"], [{"relative_difference": rel}], {"relative_difference": rel},
                   {"theta_f": (u, grid)})


@experiment("tp-norm", "||T_p|| <= c_{delta,p}",
            "empirical ||T_p||_{p->p} against the analytic bound along mollification levels",
            N=24, L=2 * np.pi, delta=0.25, p=2.0, mu=1.0, levels=(4, 8, 16), tol=0.1, seed=0)
def run_tp(p, out, threads):
    grid = TorusGrid(3, p["N"], p["L"])
    sch = _schedule(p["levels"])
    b = hardy_drift(3, p["delta"])
    rows, ok = [], True
    for n in sch.levels:
        bn = mollify_cutoff(b, n, sch, grid).meta["grid_values"]
        rep = tp_norm_audit(bn, NeumannConfig(p["p"], mu=p["mu"]), grid, p["delta"],
                            tol=p["tol"], seed=p["seed"])
        ok &= rep["passed"]
        rows.append(dict(level=n, **{k: v for k, v in rep.items() if k != "note"}))
    return Outcome(bool(ok), rows, {"all_pass": int(ok)})


@experiment("mollify-preserve", "De Giorgi mollifier keeps delta and c_delta",
            "discrete form-bound of the mollified Hardy drift at every level",
            d=3, N=32, L=2 * np.pi, delta=1.0, levels=(4, 8, 16, 32), tol=1e-6)
def run_mollify(p, out, threads):
    grid = TorusGrid(p["d"], p["N"], p["L"])
    b = hardy_drift(p["d"], p["delta"])
    c = calibrate_c_delta(b, grid, p["delta"])
    rep = verify_preservation(b, _schedule(p["levels"]), grid, c, tol=p["tol"])
    return Outcome(rep.passed, rep.csv_rows(), {"c_delta": c, "all_pass": int(rep.passed)})


@experiment("morrey-hardy", "Morrey class M_2 of |x|^{-1}",
            "sampled M_2 quantity of |x|^{-1} with origin-centred balls",
            d=3, q=2.0, r_min=0.01, r_max=1.0, n_radii=16, tol=0.01, seed=0)
def run_morrey(p, out, threads):
    d = p["d"]
    b = DriftField(d, lambda t, x: x / np.sum(x * x, axis=-1, keepdims=True),
                   singular_points=(np.zeros(d),), label="x/|x|^2")
    samp = MorreySampling(np.geomspace(p["r_min"], p["r_max"], p["n_radii"]), np.zeros((1, d)),
                          seed=p["seed"])
    est = morrey_norm(b, p["q"], samp)
    target = np.sqrt(d / (d - p["q"])) if p["q"] < d else np.inf
    rel = abs(est.norm_estimate / target - 1)
    return Outcome(rel <= p["tol"], [est.to_dict()],
                   {"estimate": est.norm_estimate, "target": target, "relative_error": rel})


@experiment("diffusion-admissibility", "gs example; diffusion conditions",
            "both diffusion inequalities for a(x) = I + c x x^T/|x|^2 plus a Hardy drift",
            d=3, c=0.02, delta=0.01)
def run_diffusion(p, out, threads):
    ex = gs_example(p["c"], p["d"])
    rep = diffusion_admissibility(p["d"], p["delta"], ex["delta_a"], ex["delta_table"], ex["a_dev"])
    row = {k: v for k, v in rep.items() if k != "q_range"}
    return Outcome(rep["passing_q_exists"], [row], row)


# --- running ----------------------------------------------------------------


def coerce(name, value, default):
    """Parse a string ``value`` to the type of ``default``."""
    if not isinstance(value, str):
        return value
    try:
        if isinstance(default, bool):
            return value.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, tuple):
            kind = type(default[0]) if default else float
            return tuple(kind(v) for v in value.replace(",", " ").split())
    except ValueError as exc:
        raise ValueError(f"parameter {name}: cannot parse {value!r} ({exc})") from None
    return value


def resolve(name, overrides):
    exp = REGISTRY[name]
    unknown = sorted(set(overrides) - set(exp.defaults))
    if unknown:
        raise KeyError(f"unknown parameter(s) for {name}: {', '.join(unknown)}")
    params = dict(exp.defaults)
    for k, v in overrides.items():
        params[k] = coerce(k, v, exp.defaults[k])
    return params


def run_experiment(name, params, out_dir, threads=1):
    """Run, write ``results.csv``, ``summary.txt``, binary fields and
    ``manifest.ini`` into ``out_dir``; returns ``(outcome, paths)``."""
    exp = REGISTRY[name]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outcome = exp.run(params, out, threads)
    paths = [io.write_csv(out / "results.csv", outcome.rows),
             io.write_kv(out / "summary.txt", dict(outcome.summary, passed=int(outcome.passed)))]
    for fname, (values, grid) in outcome.fields.items():
        paths.append(io.write_field(out / f"{fname}.field", values, grid))
    seed = params.get("seed", 0)
    io.write_manifest(out / "manifest.ini", name, params, seed, paths,
                      {"passed": int(outcome.passed)})
    return outcome, paths
