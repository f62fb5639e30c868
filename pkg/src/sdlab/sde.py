"""Monte Carlo for ``dX = -b(t, X) dt + sqrt(2) dW`` (or ``+ dZ`` with a
rotationally symmetric alpha-stable ``Z``) with mollified drifts on ``R^d``.

Randomness comes in blocks of ``block_size`` paths; block ``k`` draws from
``PCG64(SeedSequence([seed, k]))``, so an ensemble does not depend on how many
threads ran it.
"""

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_dimension, check_positive
from .admissibility import counterexample_threshold
from .drifts import DriftField, hardy_drift
from .evolution import EvolutionConfig, evolve
from .mollify import MollificationSchedule, degiorgi_exact

DRIVERS = ("Brownian", "Stable")


@dataclass
class SdeConfig:
    d: int
    drift: DriftField = None
    driver: str = "Brownian"
    alpha: float = 2.0
    x0: tuple = None
    dt: float = 1e-3
    T: float = 1.0
    n_paths: int = 1000
    seed: int = 0
    level: int = None
    record_every: int = 1
    keep_paths: bool = True
    track_drift: bool = False
    accumulators: dict = field(default_factory=dict)
    eta: float = 0.5
    max_substeps: int = 64
    block_size: int = 1024

    def __post_init__(self):
        self.d = check_dimension(self.d, minimum=1)
        if self.driver not in DRIVERS:
            raise ValueError(f"driver must be one of {DRIVERS}, got {self.driver!r}")
        if self.driver == "Stable" and not 1 < self.alpha < 2:
            raise ValueError(f"alpha must lie in (1, 2), got {self.alpha}")
        check_positive(self.dt, "dt")
        check_positive(self.T, "T")
        if int(self.n_paths) < 1:
            raise ValueError("n_paths must be >= 1")
        self.n_paths = int(self.n_paths)
        self.x0 = np.zeros(self.d) if self.x0 is None else np.asarray(self.x0, dtype=float)
        if self.x0.shape != (self.d,):
            raise ValueError(f"x0 must have shape ({self.d},)")
        if self.drift is not None and self.drift.d != self.d:
            raise ValueError("drift dimension does not match d")
        if int(self.max_substeps) < 1 or int(self.record_every) < 1 or int(self.block_size) < 1:
            raise ValueError("max_substeps, record_every and block_size must be >= 1")

    @property
    def n_steps(self):
        return int(round(self.T / self.dt))

    @property
    def n_records(self):
        return -(-self.n_steps // self.record_every)

    def block_seeds(self):
        n_blocks = -(-self.n_paths // self.block_size)
        return [(self.seed, k) for k in range(n_blocks)]

    def echo(self):
        return {
            "d": self.d, "drift": getattr(self.drift, "label", "zero"), "driver": self.driver,
            "alpha": self.alpha, "x0": self.x0.tolist(), "dt": self.dt, "T": self.T,
            "n_paths": self.n_paths, "seed": self.seed, "level": self.level,
            "block_size": self.block_size, "eta": self.eta, "max_substeps": self.max_substeps,
        }


@dataclass
class PathEnsemble:
    config: SdeConfig
    times: np.ndarray  # record times, including 0
    final: np.ndarray  # (n_paths, d)
    positions: np.ndarray = None  # (n_paths, n_records + 1, d)
    integrals: dict = field(default_factory=dict)  # name -> (n_paths, n_records)
    aborted: np.ndarray = None
    max_excursion: np.ndarray = None
    substeps: np.ndarray = None  # total substeps per path

    @property
    def n_paths(self):
        return self.final.shape[0]

    def path_seed(self, j):
        """``(master seed, block, index within block)`` of path ``j``."""
        bs = self.config.block_size
        return (self.config.seed, j // bs, j % bs)

    def subset(self, n):
        """The first ``n`` paths; with shared blocks this is what a run with
        ``n_paths = n`` would produce when ``n`` is a multiple of the block size."""
        take = slice(0, n)
        return PathEnsemble(
            self.config, self.times, self.final[take],
            None if self.positions is None else self.positions[take],
            {k: v[take] for k, v in self.integrals.items()},
            self.aborted[take], self.max_excursion[take], self.substeps[take],
        )


# --- drivers -----------------------------------------------------------------


def _positive_stable(rng, beta, n):
    """One-sided ``beta``-stable with ``E exp(-s S) = exp(-s^beta)``."""
    u = rng.uniform(0.0, np.pi, n)
    e = rng.exponential(1.0, n)
    return (np.sin(beta * u) / np.sin(u) ** (1 / beta)) * (
        np.sin((1 - beta) * u) / e) ** ((1 - beta) / beta)


def _stable_step(rng, alpha, dt, d):
    """Increments with ``E exp(i k.Z) = exp(-dt |k|^alpha)``: a Gaussian with
    covariance ``2 A I`` subordinated by ``A = dt^{2/alpha} S``."""
    dt = np.atleast_1d(np.asarray(dt, dtype=float))
    s = _positive_stable(rng, alpha / 2, dt.size)
    a = dt ** (2 / alpha) * s
    g = rng.standard_normal((dt.size, d))
    return np.sqrt(2 * a)[:, None] * g


def stable_increments(alpha, dt, count, seed=0, d=1):
    if not 1 < alpha < 2:
        raise ValueError(f"alpha must lie in (1, 2), got {alpha}")
    check_positive(dt, "dt")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed)])))
    return _stable_step(rng, alpha, np.full(int(count), dt), d)


# --- simulation --------------------------------------------------------------


def _centers(b):
    if b is None:
        return ()
    cs = b.meta.get("centers", None)
    if cs is None:
        cs = b.singular_points
    return tuple(np.asarray(c, dtype=float) for c in cs)


def _substeps(cfg, x, bx, centers, h_b):
    """Per-path substep counts: enough that one substep moves a path by at most
    ``eta * max(dist, h_b)``, and at least 8 within ``10 h_b`` of a singular point."""
    if not centers:
        return np.ones(len(x), dtype=int)
    dist = np.min([np.linalg.norm(x - c, axis=1) for c in centers], axis=0)
    scale = np.maximum(dist, h_b if h_b else 1e-300)
    speed = np.linalg.norm(bx, axis=1)
    m = np.ceil(cfg.dt * speed / (cfg.eta * scale))
    if h_b:
        m = np.where(dist < 10 * h_b, np.maximum(m, 8), m)
    return np.clip(np.nan_to_num(m, nan=1.0), 1, cfg.max_substeps).astype(int)


def _run_block(cfg, block, count):
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([cfg.seed, block])))
    d, dt, b = cfg.d, cfg.dt, cfg.drift
    centers = _centers(b)
    h_b = float(b.mollification_length) if b is not None and b.mollification_length else 0.0
    x = np.tile(cfg.x0, (count, 1))
    n_rec = cfg.n_records
    names = list(cfg.accumulators) + (["abs_drift"] if cfg.track_drift else [])
    integ = {k: np.zeros((count, n_rec)) for k in names}
    pos = np.empty((count, n_rec + 1, d)) if cfg.keep_paths else None
    if pos is not None:
        pos[:, 0] = x
    aborted = np.zeros(count, dtype=bool)
    excursion = np.zeros(count)
    subs = np.zeros(count, dtype=np.int64)

    def drift(xs, t):
        if b is None:
            return np.zeros_like(xs)
        t = np.asarray(t, dtype=float)
        if b.time_homogeneous or t.ndim == 0:
            return b(xs, float(np.ravel(t)[0]))
        out = np.empty_like(xs)
        for tv in np.unique(t):
            sel = t == tv
            out[sel] = b(xs[sel], float(tv))
        return out

    for k in range(cfg.n_steps):
        t = k * dt
        rec = k // cfg.record_every
        live = np.flatnonzero(~aborted)
        xl = x[live]
        bx = drift(xl, t)
        m = _substeps(cfg, xl, bx, centers, h_b)
        subs[live] += m
        h = dt / m
        for j in range(int(m.max())):
            act = np.flatnonzero(m > j)
            xa, ha = xl[act], h[act]
            ta = t + j * ha
            ba = bx[act] if j == 0 else drift(xa, ta)
            for name, fn in cfg.accumulators.items():
                integ[name][live[act], rec] += fn(xa, ta) * ha
            if cfg.track_drift:
                integ["abs_drift"][live[act], rec] += np.linalg.norm(ba, axis=1) * ha
            if cfg.driver == "Brownian":
                noise = np.sqrt(2 * ha)[:, None] * rng.standard_normal((len(act), d))
            else:
                noise = _stable_step(rng, cfg.alpha, ha, d)
            xl[act] = xa - ba * ha[:, None] + noise
        bad = ~np.all(np.isfinite(xl), axis=1)
        if np.any(bad):
            aborted[live[bad]] = True
        x[live] = xl
        excursion[live] = np.maximum(excursion[live], np.max(np.abs(xl - cfg.x0), axis=1))
        if pos is not None and ((k + 1) % cfg.record_every == 0 or k + 1 == cfg.n_steps):
            pos[:, rec + 1] = x
    return x, pos, integ, aborted, excursion, subs


def simulate(cfg, threads=None):
    """Euler-Maruyama with per-path adaptive substeps near singular points."""
    if cfg.drift is not None and cfg.drift.singular_points:
        raise ValueError("simulate needs a mollified drift (finite everywhere)")
    threads = threads or int(os.environ.get("SDLAB_THREADS", "1"))
    blocks = cfg.block_seeds()
    sizes = [min(cfg.block_size, cfg.n_paths - k * cfg.block_size) for k in range(len(blocks))]
    jobs = [(k, n) for k, n in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(lambda kn: _run_block(cfg, *kn), jobs))
    else:
        parts = [_run_block(cfg, k, n) for k, n in jobs]
    final = np.concatenate([p[0] for p in parts])
    pos = np.concatenate([p[1] for p in parts]) if cfg.keep_paths else None
    integ = {k: np.concatenate([p[2][k] for p in parts]) for k in parts[0][2]}
    times = np.minimum(np.arange(cfg.n_records + 1) * cfg.record_every, cfg.n_steps) * cfg.dt
    return PathEnsemble(cfg, times, final, pos, integ,
                        np.concatenate([p[3] for p in parts]),
                        np.concatenate([p[4] for p in parts]),
                        np.concatenate([p[5] for p in parts]))


# --- reports ------------------------------------------------------------------


@dataclass
class Statistic:
    value: float
    se: float

    def to_dict(self):
        return {"value": self.value, "se": self.se}


@dataclass
class ExperimentReport:
    name: str
    statistics: dict = field(default_factory=dict)  # name -> Statistic
    checks: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    params: dict = field(default_factory=dict)
    notes: str = ""

    @property
    def passed(self):
        return bool(self.checks) and all(self.checks.values())

    def summary(self):
        out = {f"{k}": v.value for k, v in self.statistics.items()}
        out.update({f"{k}_se": v.se for k, v in self.statistics.items()})
        out.update({f"check_{k}": int(v) for k, v in self.checks.items()})
        return out


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    n = v.size
    return Statistic(float(np.mean(v)), float(np.std(v, ddof=1) / np.sqrt(n)) if n > 1 else np.nan)


def _hardy_level_drift(d, delta, eps, sign=1):
    b = hardy_drift(d, delta, sign)
    if delta == 0:
        return b
    return degiorgi_exact(b, eps)


def _levels_eps(schedule):
    if isinstance(schedule, MollificationSchedule):
        return list(zip(schedule.levels, schedule.eps))
    return [(int(n), 2.0 ** (-n / 2)) for n in schedule]


def hardy_collapse_experiment(d, delta, schedule=(8, 16, 32), n_paths=10_000, T=1.0, dt=1e-3,
                              r_trap=0.05, seed=0, trap_cap=0.1, threads=None):
    """Trap fraction ``P(|X_T| < r_trap)`` from ``x0 = 0`` under the attracting
    Hardy drift mollified at each level (``eps_n = 2^{-n/2}`` by default)."""
    d = check_dimension(d)
    rows, stats = [], {}
    for n, eps in _levels_eps(schedule):
        cfg = SdeConfig(d, _hardy_level_drift(d, delta, eps), dt=dt, T=T, n_paths=n_paths,
                        seed=seed, level=n, keep_paths=False)
        ens = simulate(cfg, threads)
        ok = ~ens.aborted
        trapped = np.linalg.norm(ens.final[ok], axis=1) < r_trap
        s = _mean_se(trapped.astype(float))
        stats[f"trap_fraction_level_{n}"] = s
        rows.append({"level": n, "eps": eps, "trap_fraction": s.value, "se": s.se,
                     "aborted": int(ens.aborted.sum()),
                     "mean_substeps": float(ens.substeps.mean() / cfg.n_steps)})
    fr = [r["trap_fraction"] for r in rows]
    checks = {}
    threshold = counterexample_threshold(d)
    if delta > threshold:
        checks["trap_fraction_increasing"] = all(b > a for a, b in zip(fr, fr[1:]))
    if delta < 4:
        checks["trap_fraction_below_cap"] = all(f < trap_cap for f in fr)
    if not checks:
        checks["no_claim"] = True
    return ExperimentReport("hardy-collapse", stats, checks, rows,
                            {"d": d, "delta": delta, "threshold": threshold, "r_trap": r_trap,
                             "T": T, "dt": dt, "n_paths": n_paths, "seed": seed})


def ito_slope(d, delta):
    """``2(d - sqrt(delta)(d-2)/2)``: slope of ``E|X_t|^2`` from ``x0 = 0``."""
    return 2 * (d - np.sqrt(delta) * (d - 2) / 2)


def ito_slope_audit(ensemble, delta, d, rel_tol=0.05, n_batches=20, bias=0.0):
    """Least-squares slope of ``E|X_t|^2`` over the recorded times with a
    batch-means standard error.  Passes when the deviation from the Itô slope
    is within ``rel_tol`` and the 3-sigma band fits inside that tolerance
    (``bias`` widens the band)."""
    if ensemble.positions is None:
        raise ValueError("ito_slope_audit needs recorded positions")
    ok = ~ensemble.aborted
    r2 = np.sum(ensemble.positions[ok] ** 2, axis=2)
    t = ensemble.times

    def fit(y):
        A = np.stack([t, np.ones_like(t)], axis=1)
        return np.linalg.lstsq(A, y, rcond=None)[0][0]

    slope = float(fit(r2.mean(axis=0)))
    batches = np.array_split(np.arange(r2.shape[0]), n_batches)
    per = np.array([fit(r2[bi].mean(axis=0)) for bi in batches])
    se = float(np.std(per, ddof=1) / np.sqrt(n_batches))
    expected = ito_slope(d, delta)
    dev = abs(slope - expected)
    tol = rel_tol * expected
    checks = {"within_tolerance": bool(dev <= tol), "mc_band_fits": bool(3 * se + bias <= tol)}
    rows = [{"t": float(ti), "mean_r2": float(m)} for ti, m in zip(t, r2.mean(axis=0))]
    return ExperimentReport("ito-slope", {"slope": Statistic(slope, se)}, checks, rows,
                            {"d": d, "delta": delta, "expected": expected,
                             "z": dev / se if se > 0 else np.inf})


@dataclass
class GaussianBump:
    """``h(x) = amplitude * exp(-|x - center|^2 / (2 sigma^2))``, constant in time."""

    center: tuple
    sigma: float
    amplitude: float = 1.0

    def __call__(self, x, t=None):
        c = np.asarray(self.center, dtype=float)
        return self.amplitude * np.exp(-np.sum((x - c) ** 2, axis=-1) / (2 * self.sigma**2))

    def space_time_norm(self, nu, T):
        """``||h||_{L^nu([0,T] x R^d)}`` in closed form."""
        d = len(self.center)
        return abs(self.amplitude) * (T * (2 * np.pi * self.sigma**2 / nu) ** (d / 2)) ** (1 / nu)

    def weighted_norm(self, weight, p, T, n=48, width=6.0):
        """``||1_[0,T] |w|^{1/p} h||_{L^p}`` by tensor midpoint quadrature on
        ``center +- width*sigma``."""
        d = len(self.center)
        c = np.asarray(self.center, dtype=float)
        ax = (np.arange(n) + 0.5) / n * 2 * width * self.sigma - width * self.sigma
        pts = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), -1).reshape(-1, d) + c
        vol = (2 * width * self.sigma / n) ** d
        w = np.abs(weight(pts))
        return float((T * vol * np.sum(w * np.abs(self(pts)) ** p)) ** (1 / p))


def bump_family(d, centers=((0.0,), (0.5,), (1.0,)), sigmas=(0.25, 0.5, 1.0)):
    """Bumps centred on the first axis at the given offsets with the given widths."""
    out = []
    for c in centers:
        full = np.zeros(d)
        full[: len(c)] = c
        for s in sigmas:
            out.append(GaussianBump(tuple(full), s))
    return out


def krylov_accumulators(bumps, drift=None, variant="krylov_type"):
    acc = {}
    for i, h in enumerate(bumps):
        if variant == "drift-weighted":
            acc[f"bump_{i}"] = (lambda x, t, h=h: np.linalg.norm(drift(x, 0.0), axis=1) * h(x))
        else:
            acc[f"bump_{i}"] = h
    return acc


KRYLOV_VARIANTS = ("krylov_type", "drift-weighted", "elliptic")


def krylov_audit(ensemble, bumps, exponent, variant="krylov_type", drift=None):
    """Ratios ``E int_0^T |h(X_t)| dt / ||h||`` over a bump family; the fitted
    constant is the largest ratio.  ``drift-weighted`` uses ``|b| h`` on the left
    and ``||1_[0,T] |b|^{1/p} h||_p`` on the right."""
    if variant not in KRYLOV_VARIANTS:
        raise ValueError(f"variant must be one of {KRYLOV_VARIANTS}")
    T = ensemble.config.T
    ok = ~ensemble.aborted
    rows, stats = [], {}
    for i, h in enumerate(bumps):
        key = f"bump_{i}"
        if key not in ensemble.integrals:
            raise ValueError(f"ensemble lacks accumulator {key}; simulate with krylov_accumulators")
        lhs = _mean_se(ensemble.integrals[key][ok].sum(axis=1))
        if variant == "drift-weighted":
            if drift is None:
                raise ValueError("drift-weighted variant needs the drift")
            norm = h.weighted_norm(lambda x: np.linalg.norm(drift(x, 0.0), axis=1), exponent, T)
        else:
            norm = h.space_time_norm(exponent, T)
        ratio = lhs.value / norm if norm > 0 else 0.0
        stats[f"ratio_{i}"] = Statistic(ratio, lhs.se / norm if norm > 0 else 0.0)
        rows.append({"bump": i, "center": list(h.center), "sigma": h.sigma, "lhs": lhs.value,
                     "lhs_se": lhs.se, "norm": norm, "ratio": ratio})
    ratios = [r["ratio"] for r in rows]
    i = int(np.argmax(ratios)) if ratios else 0
    const = stats[f"ratio_{i}"] if ratios else Statistic(0.0, 0.0)
    stats["constant"] = const
    return ExperimentReport("krylov", stats, {"finite": bool(np.isfinite(const.value))}, rows,
                            {"exponent": exponent, "variant": variant})


def krylov_stability(cfg, bumps, exponent, n_small, variant="krylov_type", max_drift=0.25,
                     threads=None):
    """Fit the Krylov constant on the first ``n_small`` paths and on all
    ``cfg.n_paths`` paths (the small run is a prefix of the large one)."""
    cfg.accumulators = krylov_accumulators(bumps, cfg.drift, variant)
    cfg.keep_paths = False
    cfg.record_every = cfg.n_steps
    ens = simulate(cfg, threads)
    small = krylov_audit(ens.subset(n_small), bumps, exponent, variant, cfg.drift)
    large = krylov_audit(ens, bumps, exponent, variant, cfg.drift)
    c_s, c_l = small.statistics["constant"].value, large.statistics["constant"].value
    drift = abs(c_l / c_s - 1) if c_s > 0 else (0.0 if c_l == 0 else np.inf)
    return ExperimentReport(
        "krylov-stability",
        {"constant_small": small.statistics["constant"], "constant_large": large.statistics["constant"],
         "relative_drift": Statistic(drift, np.nan)},
        {"stable": bool(drift <= max_drift)},
        [dict(r, n_paths=n_small) for r in small.rows] + [dict(r, n_paths=cfg.n_paths) for r in large.rows],
        {"exponent": exponent, "variant": variant, "n_small": n_small, "n_large": cfg.n_paths},
    )


def weak_consistency_audit(cfg, observable, pde_grid, allowance=0.02, pde_scheme="IMEX",
                           pde_dt=None, threads=None):
    """Compare ``E f(X_T)`` with ``u(T, x0)`` where ``u`` solves the backward
    equation on ``pde_grid`` with the same drift.  ``x0`` must be a grid node."""
    cfg.keep_paths = False
    ens = simulate(cfg, threads)
    ok = ~ens.aborted
    mc = _mean_se(observable(ens.final[ok]))
    b = cfg.drift
    pts = pde_grid.points
    bv = np.zeros((pde_grid.d,) + pde_grid.shape) if b is None else np.moveaxis(b(pts, 0.0), -1, 0)
    u0 = observable(pts)
    traj = evolve(bv, u0, EvolutionConfig(pde_grid, cfg.T, pde_dt, pde_scheme, save_every=10**9))
    idx = np.round((cfg.x0 + pde_grid.L / 2) / pde_grid.h).astype(int)
    if np.max(np.abs(pde_grid.axis[idx] - cfg.x0)) > 1e-9 * pde_grid.L:
        raise ValueError("x0 must be a node of the PDE grid")
    pde = float(traj.states[-1][tuple(idx)])
    escape = float(np.mean(ens.max_excursion > pde_grid.L / 4))
    diff = abs(mc.value - pde)
    band = 3 * mc.se + allowance * max(abs(pde), 1e-12)
    checks = {"agreement": bool(diff <= band)}
    notes = ""
    if escape > 1e-3:
        checks["inconclusive"] = False
        notes = f"escape fraction {escape:.2%} > 0.1%: enlarge the torus"
    return ExperimentReport(
        "weak-consistency",
        {"monte_carlo": mc, "pde": Statistic(pde, 0.0), "difference": Statistic(diff, mc.se)},
        checks, [], {"band": band, "escape_fraction": escape, "pde_dt": traj.dt,
                     "allowance": allowance}, notes)


def drift_integrability_audit(ensemble, lengths):
    """``sup_s E int_s^{s+h} |b(X_t)| dt`` for each ``h``, from the per-record
    integrals of ``|b|`` (simulate with ``track_drift=True``)."""
    if "abs_drift" not in ensemble.integrals:
        raise ValueError("simulate with track_drift=True")
    cfg = ensemble.config
    rec_dt = cfg.record_every * cfg.dt
    per = ensemble.integrals["abs_drift"][~ensemble.aborted]
    rows, stats = [], {}
    for h in sorted(lengths, reverse=True):
        w = int(round(h / rec_dt))
        if w < 1 or abs(w * rec_dt - h) > 1e-9 * max(h, 1.0):
            raise ValueError(f"length {h} is not a multiple of the record interval {rec_dt}")
        csum = np.concatenate([np.zeros((per.shape[0], 1)), np.cumsum(per, axis=1)], axis=1)
        windows = csum[:, w:] - csum[:, :-w]
        means = windows.mean(axis=0)
        s = int(np.argmax(means))
        st = _mean_se(windows[:, s])
        stats[f"modulus_{h:g}"] = st
        rows.append({"h": h, "modulus": st.value, "se": st.se, "argmax_s": s * rec_dt})
    mods = [r["modulus"] for r in rows]  # descending h
    ses = [r["se"] for r in rows]
    mono = all(b <= a + 3 * np.hypot(sa, sb) for a, b, sa, sb in zip(mods, mods[1:], ses, ses[1:]))
    shrink = all(b < a for a, b in zip(mods, mods[1:])) if any(mods) else True
    return ExperimentReport("drift-integrability", stats,
                            {"nondecreasing_in_h": mono, "decreasing_to_zero": shrink}, rows)


def stable_cf_audit(alpha, dt=1.0, count=100_000, seed=0, probes=None, d=1):
    """Empirical characteristic function of stable increments at probe
    wavevectors against ``exp(-dt |k|^alpha)``; each probe must match within 3
    standard errors."""
    z = stable_increments(alpha, dt, count, seed, d)
    if probes is None:
        probes = [np.full(d, v / np.sqrt(d)) for v in (0.25, 0.5, 1.0, 1.5, 2.0)]
    rows, stats, ok = [], {}, True
    for i, k in enumerate(probes):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        c = np.cos(z @ k)  # the law is symmetric, so the imaginary part has mean 0
        st = _mean_se(c)
        target = float(np.exp(-dt * np.linalg.norm(k) ** alpha))
        good = abs(st.value - target) <= 3 * st.se
        ok &= good
        stats[f"cf_{i}"] = st
        rows.append({"kappa": float(np.linalg.norm(k)), "empirical": st.value, "se": st.se,
                     "target": target, "pass": int(good)})
    mean = _mean_se(z[:, 0])
    return ExperimentReport("stable-cf", stats,
                            {"cf_match": bool(ok), "symmetric": bool(abs(mean.value) <= 3 * mean.se)},
                            rows, {"alpha": alpha, "dt": dt, "count": count})


__all__ = [
    "SdeConfig", "PathEnsemble", "ExperimentReport", "Statistic", "GaussianBump", "simulate",
    "stable_increments", "hardy_collapse_experiment", "ito_slope", "ito_slope_audit",
    "krylov_audit", "krylov_stability", "bump_family", "krylov_accumulators",
    "weak_consistency_audit", "drift_integrability_audit", "stable_cf_audit",
]
