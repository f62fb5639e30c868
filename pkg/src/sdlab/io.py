"""File formats: binary fields with a one-line text header, CSV tables,
key=value reports and INI manifests."""

import configparser
import csv
import hashlib
from pathlib import Path

import numpy as np

MAGIC = "SDLAB-FIELD"
VERSION = 1


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in np.ravel(np.asarray(v, dtype=object)))
    return str(v)


def write_field(path, values, grid=None, kind="field", **meta):
    """Write ``values`` as little-endian float64 after a header line
    ``SDLAB-FIELD 1 kind=... shape=AxB... [d= N= L=] key=value...``."""
    values = np.asarray(values, dtype="<f8", order="C")
    head = {"kind": kind, "shape": "x".join(str(s) for s in values.shape)}
    if grid is not None:
        head.update(d=grid.d, N=grid.N, L=repr(float(grid.L)),
                    components=int(np.prod(values.shape[: values.ndim - grid.d], dtype=int)))
    for k, v in meta.items():
        if any(c.isspace() for c in str(k)) or "=" in str(k):
            raise ValueError(f"bad header key {k!r}")
        head[k] = _fmt(v).replace(" ", ",")
    line = " ".join([MAGIC, str(VERSION)] + [f"{k}={v}" for k, v in head.items()]) + "\n"
    with open(path, "wb") as fh:
        fh.write(line.encode("ascii"))
        fh.write(values.tobytes())
    return Path(path)


def read_field(path):
    """Return ``(values, header)``; raises on a malformed header or size mismatch."""
    with open(path, "rb") as fh:
        line = fh.readline().decode("ascii").rstrip("\n")
        data = fh.read()
    parts = line.split(" ")
    if len(parts) < 3 or parts[0] != MAGIC:
        raise ValueError(f"{path}: not an {MAGIC} file")
    if int(parts[1]) != VERSION:
        raise ValueError(f"{path}: unsupported version {parts[1]}")
    header = dict(p.split("=", 1) for p in parts[2:])
    shape = tuple(int(s) for s in header["shape"].split("x")) if header["shape"] else ()
    values = np.frombuffer(data, dtype="<f8")
    if values.size != int(np.prod(shape, dtype=int)):
        raise ValueError(f"{path}: payload has {values.size} values, header says {shape}")
    return values.reshape(shape).copy(), header


def write_ensemble(path, positions, times, **meta):
    """Paths x records x d array in the field format."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 3:
        raise ValueError("positions must have shape (paths, records, d)")
    return write_field(path, positions, kind="ensemble", t0=float(times[0]), t1=float(times[-1]),
                       records=len(times), **meta)


def write_csv(path, rows, columns=None):
    """Comma-separated with a header row; floats are written with ``repr``
    so the decimal mark is always '.'."""
    rows = list(rows)
    if columns is None:
        columns = []
        for r in rows:
            columns += [k for k in r if k not in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r.get(c, "")) for c in columns])
    return Path(path)


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_kv(path, mapping):
    with open(path, "w", encoding="utf-8") as fh:
        for k, v in mapping.items():
            fh.write(f"{k}={_fmt(v)}\n")
    return Path(path)


def read_kv(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for i, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{i}: expected key=value")
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out


def sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, experiment, params, seed, outputs, extra=None):
    """INI manifest: ``[run]`` (experiment, seed), ``[params]`` (resolved
    configuration) and ``[outputs]`` (file -> sha256)."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["run"] = {"experiment": experiment, "seed": str(seed)}
    if extra:
        cp["run"].update({k: _fmt(v) for k, v in extra.items()})
    cp["params"] = {k: _fmt(v) for k, v in params.items()}
    cp["outputs"] = {Path(p).name: sha256(p) for p in outputs}
    with open(path, "w", encoding="utf-8") as fh:
        cp.write(fh)
    return Path(path)


def read_manifest(path):
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    return {s: dict(cp[s]) for s in cp.sections()}
