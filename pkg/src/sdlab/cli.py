"""Command line: ``sdlab check-drift``, ``sdlab admissibility`` and
``sdlab experiment NAME``.

Exit codes: 0 all gates pass, 1 a gate failed, 2 usage or configuration
error, 3 numerical abort.
"""

import argparse
import configparser
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .admissibility import condition_report, stable_admissibility
from .drifts import (
    discrete_form_bound, hardy_drift, superposition_drift, time_singular_drift, weak_form_bound,
)
from .evolution import NumericalAbort
from .experiments import REGISTRY, resolve, run_experiment
from .mollify import calibrate_c_delta
from .resolvent import SeriesDivergenceError
from .spectral import TorusGrid

EXIT_PASS, EXIT_GATE, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _threads(args):
    if getattr(args, "threads", None):
        return int(args.threads)
    env = os.environ.get("SDLAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"SDLAB_THREADS must be an integer, got {env!r}") from None
    return 1


def _key_lines(path):
    lines = {}
    for i, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        s = line.strip()
        if s and not s.startswith(("#", ";", "[")) and "=" in s:
            lines.setdefault(s.split("=", 1)[0].strip(), i)
    return lines


def load_config(path, name):
    """Read ``[params]`` (or ``[<experiment name>]``) and ``[run]`` sections.
    Unknown keys are rejected with their line number."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    allowed = {"run", "params", "outputs", name}
    for sec in cp.sections():
        if sec not in allowed:
            raise UsageError(f"{path}: unknown section [{sec}]")
    params = {}
    for sec in ("params", name):
        if cp.has_section(sec):
            params.update(cp[sec])
    run = dict(cp["run"]) if cp.has_section("run") else {}
    defaults = REGISTRY[name].defaults
    lines = _key_lines(path)
    for k in params:
        if k not in defaults:
            raise UsageError(f"{path}:{lines.get(k, '?')}: unknown parameter {k!r} for {name}")
    for k in run:
        if k not in ("experiment", "seed", "passed"):
            raise UsageError(f"{path}:{lines.get(k, '?')}: unknown [run] key {k!r}")
    if "experiment" in run and run["experiment"] != name:
        raise UsageError(f"{path}: config is for {run['experiment']!r}, not {name!r}")
    if "seed" in run and "seed" in defaults:
        params.setdefault("seed", run["seed"])
    return params


def _experiment_help():
    lines = ["experiments (name: anchor):"]
    for e in REGISTRY.values():
        lines.append(f"  {e.name:<24} {e.anchor}")
        lines.append(f"  {'':<24} {e.description}")
    return "\n".join(lines)


def build_parser():
    p = argparse.ArgumentParser(
        prog="sdlab", description="Form-bounded drift laboratory.",
        epilog=_experiment_help(), formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("check-drift", help="form-bound certificate of a catalogue drift")
    c.add_argument("--drift", choices=DRIFT_KINDS, default="hardy")
    c.add_argument("--spec", type=Path, help="plain-text drift spec ([drift] section)")
    c.add_argument("--d", type=int, default=3)
    c.add_argument("--delta", type=float, default=1.0)
    c.add_argument("--sign", type=int, choices=(1, -1), default=1)
    c.add_argument("--c1", type=float, help="time-singular drift: coefficient of 1/|x|")
    c.add_argument("--c2", type=float, default=0.0, help="time-singular drift: coefficient of 1/sqrt(t)")
    c.add_argument("--N", type=int, default=32)
    c.add_argument("--L", type=float, default=2 * np.pi)
    c.add_argument("--lam", type=float, default=1.0, help="lambda for the weak form-bound")
    c.add_argument("--out", type=Path)

    a = sub.add_parser("admissibility", help="threshold table for (d, delta)")
    a.add_argument("--d", type=int, required=True)
    a.add_argument("--delta", type=float, required=True)
    a.add_argument("--alpha", type=float, help="stable index in (1, 2)")
    a.add_argument("--m-d-alpha", type=float, help="constant m_{d,alpha} for the stable table")
    a.add_argument("--out", type=Path)

    e = sub.add_parser("experiment", help="run a named experiment",
                       epilog=_experiment_help(),
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    e.add_argument("name", nargs="?", help="experiment name")
    e.add_argument("--config", type=Path, help="INI file with [params] / [run]")
    e.add_argument("--manifest", type=Path, help="re-run from a manifest.ini")
    e.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    e.add_argument("--seed", type=int)
    e.add_argument("--out", type=Path, default=Path("sdlab-out"))
    e.add_argument("--threads", type=int)
    e.add_argument("--list", action="store_true", help="list experiments and exit")
    e.epilog += "\n\nAny parameter can also be given as --KEY VALUE (dashes read as underscores)."
    return p


DRIFT_KINDS = ("hardy", "superposition", "time-singular")
_SPEC_KEYS = {
    "hardy": {"kind", "d", "delta", "sign"},
    "superposition": {"kind", "d", "centers", "coeffs"},
    "time-singular": {"kind", "d", "c1", "c2"},
}


def _points(text, d):
    pts = [[float(v) for v in chunk.replace(",", " ").split()] for chunk in text.split(";")
           if chunk.strip()]
    if any(len(p) != d for p in pts):
        raise ValueError(f"every center needs {d} coordinates")
    return [np.array(p) for p in pts]


def drift_from_spec(path):
    """Build a drift from an INI file with a ``[drift]`` section, e.g.::

        [drift]
        kind = superposition
        d = 3
        centers = 0 0 0; 1 0 0
        coeffs = 0.25 0.25
    """
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (configparser.Error, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: {exc}") from None
    except OSError as exc:
        raise UsageError(f"cannot read drift spec {path}: {exc}") from None
    if not cp.has_section("drift"):
        raise UsageError(f"{path}: missing [drift] section")
    sec = dict(cp["drift"])
    lines = _key_lines(path)
    kind = sec.get("kind", "hardy")
    if kind not in _SPEC_KEYS:
        raise UsageError(f"{path}:{lines.get('kind', '?')}: unknown drift kind {kind!r}")
    for k in sec:
        if k not in _SPEC_KEYS[kind]:
            raise UsageError(f"{path}:{lines.get(k, '?')}: unknown key {k!r} for {kind}")
    try:
        d = int(sec.get("d", 3))
        if kind == "hardy":
            return hardy_drift(d, float(sec.get("delta", 1.0)), int(sec.get("sign", 1)))
        if kind == "superposition":
            coeffs = [float(v) for v in sec.get("coeffs", "").replace(",", " ").split()]
            return superposition_drift(_points(sec.get("centers", ""), d), coeffs, d)
        return time_singular_drift(float(sec.get("c1", 0.0)), float(sec.get("c2", 0.0)), d)
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _check_drift(args):
    d = args.d
    if args.spec:
        b = drift_from_spec(args.spec)
        d = b.d
    elif args.drift == "hardy":
        b = hardy_drift(d, args.delta, args.sign)
    elif args.drift == "superposition":
        coeff = np.sqrt(args.delta) * (d - 2) / 4
        b = superposition_drift([np.zeros(d), np.eye(d)[0]], [coeff, coeff], d)
    else:
        c1 = np.sqrt(args.delta) * (d - 2) / 2 if args.c1 is None else args.c1
        b = time_singular_drift(c1, args.c2, d)
    grid = TorusGrid(d, args.N, args.L)
    summary = {"drift": b.label}
    if b.certificate is not None:
        summary.update({f"certificate_{k}": v for k, v in b.certificate.to_dict().items()
                        if v is not None})
    if b.time_homogeneous:
        raw = b.on_grid(grid, singular="regularize")
        summary["grid_delta_c0"] = discrete_form_bound(raw, grid, 0.0).delta
        summary["grid_weak_delta"] = weak_form_bound(raw, grid, args.lam).delta
        if args.delta > 0:
            summary["grid_c_delta_for_delta"] = calibrate_c_delta(raw, grid, args.delta)
    for k, v in summary.items():
        print(f"{k}={io._fmt(v)}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_kv(args.out / "certificate.txt", summary)
    return EXIT_PASS


def _admissibility(args):
    rep = condition_report(args.d, args.delta)
    print(rep.as_text())
    rows = rep.rows()
    if args.alpha is not None:
        if args.m_d_alpha is None:
            raise UsageError("--alpha needs --m-d-alpha")
        st = stable_admissibility(args.d, args.alpha, args.delta, args.m_d_alpha)
        print(st.as_text())
        rows += st.rows()
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        io.write_csv(args.out / "admissibility.csv", rows)
    return EXIT_PASS


def _experiment(args):
    if args.list or (args.name is None and args.manifest is None):
        print(_experiment_help())
        return EXIT_PASS if args.list else EXIT_USAGE
    overrides = {}
    if args.manifest:
        man = io.read_manifest(args.manifest)
        name = man.get("run", {}).get("experiment")
        if name is None:
            raise UsageError(f"{args.manifest}: no [run] experiment")
        if args.name and args.name != name:
            raise UsageError(f"manifest is for {name!r}, not {args.name!r}")
        overrides.update(man.get("params", {}))
    else:
        name = args.name
    if name not in REGISTRY:
        raise UsageError(f"unknown experiment {name!r}; try --list")
    if args.config:
        overrides.update(load_config(args.config, name))
    for item in args.set:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        overrides[k.strip()] = v.strip()
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    try:
        params = resolve(name, overrides)
    except (KeyError, ValueError) as exc:
        raise UsageError(str(exc).strip("'\"")) from None
    outcome, paths = run_experiment(name, params, args.out, _threads(args))
    for k, v in outcome.summary.items():
        print(f"{k}={io._fmt(v)}")
    print(f"{name}: {'PASS' if outcome.passed else 'FAIL'} (outputs in {args.out})")
    return EXIT_PASS if outcome.passed else EXIT_GATE


def _extra_overrides(tokens, parser):
    """``--key value`` / ``--key=value`` pairs left over by argparse."""
    out, i = {}, 0
    while i < len(tokens):
        tok = tokens[i]
        if not tok.startswith("--") or len(tok) < 3:
            parser.error(f"unrecognized argument {tok!r}")
        if "=" in tok:
            k, v = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(tokens):
                parser.error(f"{tok} needs a value")
            k, v = tok[2:], tokens[i + 1]
            i += 2
        out[k.replace("-", "_")] = v
    return out


def main(argv=None):
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    if extra:
        if args.verb != "experiment":
            parser.error(f"unrecognized arguments: {' '.join(extra)}")
        args.set = list(args.set) + [f"{k}={v}" for k, v in
                                     _extra_overrides(extra, parser).items()]
    handlers = {"check-drift": _check_drift, "admissibility": _admissibility,
                "experiment": _experiment}
    try:
        return handlers[args.verb](args)
    except UsageError as exc:
        print(f"sdlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalAbort, SeriesDivergenceError, FloatingPointError, OverflowError) as exc:
        print(f"sdlab: numerical abort in {args.verb}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"sdlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
