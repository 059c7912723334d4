"""Snapshots, run manifests and tracker tables.

Snapshot files store the nonzero Fourier coefficients of a field together
with the box length ``L``, the resolution ``N``, the number of components
and the time.  Two encodings are available.

CSV
    Comment header lines ``# key = value`` (``format``, ``L``, ``N``,
    ``rank``, ``t``), then the column line
    ``component,k1,k2,k3,re,im`` and one row per stored coefficient.
    Floats are written with ``repr`` so they round-trip exactly.

Binary (little-endian throughout)
    ``8s`` magic ``NSKSNAP1``, ``f8`` L, ``u4`` N, ``u4`` rank, ``f8`` t,
    ``u8`` record count, then per record ``i4`` component, ``i4`` k1,
    ``i4`` k2, ``i4`` k3, ``f8`` re, ``f8`` im.

``rank`` is 1 for a scalar field, 3 for a vector field and 4 for a flow
state ``(a, m1, m2, m3)``.  Wavenumbers are signed integers in
``[-N/2, N/2)``.
"""

from __future__ import annotations

import configparser
import csv
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .grid import FlowState, GridSpec, SpectralField

MAGIC = b"NSKSNAP1"
_HEADER = struct.Struct("<8sdIIdQ")
_RECORD = np.dtype(
    [("c", "<i4"), ("k1", "<i4"), ("k2", "<i4"), ("k3", "<i4"), ("re", "<f8"), ("im", "<f8")]
)
TRACKER_COLUMNS = ("step", "t", "energy", "dispersive", "mid_band", "eps_a_max", "min_density")


def _as_components(obj) -> tuple[GridSpec, np.ndarray, float]:
    if isinstance(obj, FlowState):
        return obj.grid, obj.stacked(), obj.t
    if isinstance(obj, SpectralField):
        c = obj.coeffs
        return obj.grid, (c[None] if c.ndim == 3 else c), 0.0
    raise TypeError(f"cannot snapshot {type(obj).__name__}")


def _records(grid: GridSpec, comps: np.ndarray) -> np.ndarray:
    idx = np.nonzero(comps)
    k = grid.wavenumbers.astype(int)
    rec = np.empty(idx[0].size, dtype=_RECORD)
    rec["c"] = idx[0]
    rec["k1"], rec["k2"], rec["k3"] = k[idx[1]], k[idx[2]], k[idx[3]]
    vals = comps[idx]
    rec["re"], rec["im"] = vals.real, vals.imag
    return rec


def _rebuild(L: float, N: int, rank: int, t: float, rec: np.ndarray):
    grid = GridSpec(L, N)
    comps = np.zeros((rank,) + grid.shape, dtype=np.complex128)
    if rec.size:
        if rec["c"].max() >= rank or rec["c"].min() < 0:
            raise ConfigurationError("snapshot component index out of range")
        comps[rec["c"], rec["k1"] % N, rec["k2"] % N, rec["k3"] % N] = rec["re"] + 1j * rec["im"]
    if rank == 1:
        return SpectralField(grid, comps[0])
    if rank == 3:
        return SpectralField(grid, comps)
    if rank == 4:
        return FlowState.from_stacked(grid, comps, t)
    raise ConfigurationError(f"unsupported snapshot rank {rank}")


def write_snapshot(path, obj, fmt: str = "binary") -> Path:
    """Write a field or flow state; ``fmt`` is ``binary`` or ``csv``."""
    path = Path(path)
    grid, comps, t = _as_components(obj)
    rec = _records(grid, comps)
    rank = comps.shape[0]
    if fmt == "binary":
        with path.open("wb") as fh:
            fh.write(_HEADER.pack(MAGIC, grid.L, grid.N, rank, t, rec.size))
            fh.write(rec.tobytes())
    elif fmt == "csv":
        with path.open("w", newline="") as fh:
            for key, val in (("format", "NSKSNAP1-csv"), ("L", repr(float(grid.L))), ("N", grid.N), ("rank", rank), ("t", repr(float(t)))):
                fh.write(f"# {key} = {val}\n")
            w = csv.writer(fh)
            w.writerow(["component", "k1", "k2", "k3", "re", "im"])
            for r in rec:
                w.writerow([int(r["c"]), int(r["k1"]), int(r["k2"]), int(r["k3"]), repr(float(r["re"])), repr(float(r["im"]))])
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    return path


def read_snapshot(path):
    """Read a snapshot written by :func:`write_snapshot` (encoding detected from the content)."""
    path = Path(path)
    with path.open("rb") as fh:
        head = fh.read(len(MAGIC))
    if head == MAGIC:
        data = path.read_bytes()
        magic, L, N, rank, t, count = _HEADER.unpack_from(data, 0)
        rec = np.frombuffer(data, dtype=_RECORD, count=count, offset=_HEADER.size)
        return _rebuild(L, N, rank, t, rec)
    meta = {}
    rows = []
    with path.open(newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            key, _, val = ln[1:].partition("=")
            meta[key.strip()] = val.strip()
        else:
            body.append(ln)
    reader = csv.reader(body)
    header = next(reader, None)
    if header != ["component", "k1", "k2", "k3", "re", "im"] or meta.get("format") != "NSKSNAP1-csv":
        raise ConfigurationError(f"{path} is not a snapshot file")
    for row in reader:
        rows.append((int(row[0]), int(row[1]), int(row[2]), int(row[3]), float(row[4]), float(row[5])))
    rec = np.array(rows, dtype=_RECORD) if rows else np.empty(0, dtype=_RECORD)
    return _rebuild(float(meta["L"]), int(meta["N"]), int(meta["rank"]), float(meta["t"]), rec)


def _manifest_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keep L, N and T as written
    return cp


def write_manifest(path, sections: dict) -> Path:
    """Write ``{section: {key: value}}`` as ``key = value`` sections."""
    cp = _manifest_parser()
    for name, entries in sections.items():
        cp[name] = {k: _fmt(v) for k, v in entries.items()}
    path = Path(path)
    with path.open("w") as fh:
        cp.write(fh)
    return path


def read_manifest(path) -> dict:
    cp = _manifest_parser()
    if not cp.read(path):
        raise ConfigurationError(f"cannot read {path}")
    return {s: dict(cp[s]) for s in cp.sections()}


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def write_tracker_csv(path, rows) -> Path:
    """One line per tracker sample with the columns of :data:`TRACKER_COLUMNS`."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACKER_COLUMNS)
        for r in rows:
            w.writerow([r.step] + [repr(float(getattr(r, c))) for c in TRACKER_COLUMNS[1:]])
    return path


def read_tracker_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        cols = {c: [] for c in TRACKER_COLUMNS}
        for row in reader:
            for c in TRACKER_COLUMNS:
                cols[c].append(float(row[c]))
    return {c: np.asarray(v) for c, v in cols.items()}
