"""Experiment configuration files.

A configuration is an INI file (``key = value`` lines under ``[section]``
headers).  Numbers may be written as arithmetic expressions of ``pi``,
for example ``L = 8*pi`` or ``mach = 2**-12``.  Lists are comma separated;
exponent triples are ``p q r`` groups separated by ``;``.

Sections
--------
``[experiment]``
    ``kind`` (required; one of :data:`EXPERIMENT_KINDS`), ``seed``
    (default 0), ``out`` (default ``results``), ``workers`` (default 1).
``[grid]``
    ``L`` (default ``32*pi``, lattice spacing 1/16) and ``N`` (default 32).
``[params]``
    ``mu``, ``lam``, ``kappa``, ``mach``, ``rotation``, ``gamma``
    (defaults 1, -1, 1, 1, 0, 2).
``[solver]``
    Any field of :class:`~rotnsk.solver.SolverConfig`.
``[sweep]``
    Sweep axes; which are required depends on ``kind`` (see
    :data:`REQUIRED_AXES`).
``[data]``
    Initial data: ``kind`` (``random``, ``high_band`` or ``zero``),
    ``kmax``, ``amp_a``, ``amp_m``, ``block``, ``seed``.
``[thresholds]``
    Pass/fail thresholds; defaults in :data:`DEFAULT_THRESHOLDS`.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import math
import operator
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigurationError
from .grid import GridSpec
from .params import PhysParams, PressureLaw
from .solver import SolverConfig

EXPERIMENT_KINDS = (
    "linear_decay",
    "energy_exponents",
    "strichartz",
    "lemma_constants",
    "picard",
    "phase_diagram",
    "single_run",
)

REQUIRED_AXES = {
    "linear_decay": ("xi", "rotation", "mach"),
    "energy_exponents": ("r", "low_blocks", "high_blocks"),
    "strichartz": ("exponents", "rotation"),
    "lemma_constants": ("lemma", "resolutions"),
    "picard": ("amplitude",),
    "phase_diagram": ("rotation", "mach"),
    "single_run": (),
}

DEFAULT_THRESHOLDS = {
    "linear_decay": {"margin_tol": 1e-9},
    "energy_exponents": {"exponent_tol": 0.15},
    "strichartz": {"slope_tol": 0.1},
    "lemma_constants": {"homogeneity_tol": 1e-10, "resolution_factor": 2.0},
    "picard": {"agreement_tol": 1e-6},
    "phase_diagram": {},
    "single_run": {},
}

_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
    ast.USub: operator.neg,
    ast.UAdd: operator.pos,
}


def parse_number(text: str) -> float:
    """Evaluate a numeric literal or an arithmetic expression of ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.Name) and node.id == "inf":
            return math.inf
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError
    try:
        return float(ev(ast.parse(text.strip(), mode="eval")))
    except (SyntaxError, ValueError, TypeError, ZeroDivisionError):
        raise ConfigurationError(f"cannot read {text!r} as a number") from None


def parse_list(text: str) -> tuple:
    """Comma-separated values; numbers are evaluated, other tokens kept as strings."""
    out = []
    for tok in (t.strip() for t in text.split(",")):
        if not tok:
            continue
        try:
            out.append(parse_number(tok))
        except ConfigurationError:
            out.append(tok)
    return tuple(out)


def parse_triples(text: str) -> tuple:
    triples = []
    for group in (g.strip() for g in text.split(";")):
        if not group:
            continue
        parts = group.replace(",", " ").split()
        if len(parts) != 3:
            raise ConfigurationError(f"exponent triple {group!r} needs three numbers")
        triples.append(tuple(parse_number(x) for x in parts))
    return tuple(triples)


@dataclass(frozen=True)
class ExperimentConfig:
    """A parsed and validated experiment description."""

    kind: str
    seed: int
    out: str
    workers: int
    grid: GridSpec
    params: PhysParams
    solver: SolverConfig
    sweep: dict
    data: dict
    thresholds: dict
    canonical: str

    @property
    def config_hash(self) -> str:
        """First 12 hex digits of the SHA-256 of the canonical text (seed included)."""
        return hashlib.sha256(self.canonical.encode()).hexdigest()[:12]

    def output_dir(self, base=None) -> Path:
        return Path(base if base is not None else self.out) / f"{self.kind}-{self.config_hash}"

    def axis(self, name: str) -> tuple:
        return self.sweep[name]


def _section(cp, name) -> dict:
    return dict(cp[name]) if cp.has_section(name) else {}


def _numbers(entries: dict, allowed, where: str) -> dict:
    out = {}
    for k, v in entries.items():
        if k not in allowed:
            raise ConfigurationError(f"[{where}] unknown key {k!r}")
        out[k] = parse_number(v)
    return out


def _solver(entries: dict) -> SolverConfig:
    kw = {}
    types = {f.name: f.type for f in fields(SolverConfig)}
    for k, v in entries.items():
        if k not in types:
            raise ConfigurationError(f"[solver] unknown key {k!r}")
        t = str(types[k])
        if "str" in t:
            kw[k] = v.strip()
        elif "bool" in t:
            kw[k] = v.strip().lower() in ("1", "true", "yes", "on")
        elif t == "int":
            kw[k] = int(parse_number(v))
        elif "None" in t and v.strip().lower() == "none":
            kw[k] = None
        else:
            kw[k] = parse_number(v)
    return SolverConfig(**kw)


def _sweep(entries: dict) -> dict:
    out = {}
    for k, v in entries.items():
        out[k] = parse_triples(v) if k == "exponents" else parse_list(v)
    return out


def _canonical(cp: configparser.ConfigParser) -> str:
    lines = []
    for s in sorted(cp.sections()):
        lines.append(f"[{s}]")
        for k in sorted(cp[s]):
            if s == "experiment" and k in ("out", "workers"):
                continue
            lines.append(f"{k} = {' '.join(cp[s][k].split())}")
    return "\n".join(lines) + "\n"


def _build(cp: configparser.ConfigParser, seed_override: int | None = None) -> ExperimentConfig:
    exp = _section(cp, "experiment")
    kind = exp.get("kind", "").strip()
    if not kind:
        raise ConfigurationError("[experiment] kind is required")
    if kind not in EXPERIMENT_KINDS:
        raise ConfigurationError(f"[experiment] kind must be one of {EXPERIMENT_KINDS}, got {kind!r}")
    if seed_override is not None:
        cp["experiment"]["seed"] = str(int(seed_override))
    seed = int(parse_number(cp["experiment"].get("seed", "0")))
    out = exp.get("out", "results").strip()
    workers = int(parse_number(exp.get("workers", "1")))
    if workers < 1:
        raise ConfigurationError("[experiment] workers must be >= 1")

    g = _numbers(_section(cp, "grid"), ("L", "N"), "grid")
    grid = GridSpec(g.get("L", 32 * math.pi), int(g.get("N", 32)))
    pr = _numbers(_section(cp, "params"), ("mu", "lam", "kappa", "mach", "rotation", "gamma"), "params")
    gamma = pr.pop("gamma", 2.0)
    try:
        params = PhysParams(**pr, pressure=PressureLaw(gamma))
    except (ValueError, TypeError) as exc:
        raise ConfigurationError(f"[params] {exc}") from None
    solver = _solver(_section(cp, "solver"))
    sweep = _sweep(_section(cp, "sweep"))
    for axis in REQUIRED_AXES[kind]:
        if axis not in sweep:
            raise ConfigurationError(f"[sweep] {axis} is required for {kind}")
        if len(sweep[axis]) == 0:
            raise ConfigurationError(f"[sweep] {axis} must not be empty")
    data = {}
    for k, v in _section(cp, "data").items():
        data[k] = v.strip() if k == "kind" else parse_number(v)
    thresholds = dict(DEFAULT_THRESHOLDS[kind])
    thresholds.update(_numbers(_section(cp, "thresholds"), set(thresholds), "thresholds"))
    cfg = ExperimentConfig(kind, seed, out, workers, grid, params, solver, sweep, data, thresholds, _canonical(cp))
    _validate(cfg)
    return cfg


def _validate(cfg: ExperimentConfig) -> None:
    from .harmonic import LemmaCase, LEMMA_CASES
    from .linear import check_strichartz_exponents

    if cfg.kind == "strichartz":
        for p, q, r in cfg.sweep["exponents"]:
            try:
                check_strichartz_exponents(p, q, r)
            except ValueError as exc:
                raise ConfigurationError(f"[sweep] exponents ({p:g}, {q:g}, {r:g}): {exc}") from None
    if cfg.kind == "lemma_constants":
        for name in cfg.sweep["lemma"]:
            if name != "lemma_2_6" and name not in LEMMA_CASES:
                raise ConfigurationError(f"[sweep] unknown lemma case {name!r}")
            if name != "lemma_2_6":
                LemmaCase(name, **lemma_indices(cfg, name))
    if cfg.kind in ("linear_decay", "phase_diagram", "strichartz"):
        for om in cfg.sweep["rotation"]:
            if not isinstance(om, float):
                raise ConfigurationError(f"[sweep] rotation entries must be numbers, got {om!r}")
    if cfg.kind == "energy_exponents":
        for r in cfg.sweep["r"]:
            if not r >= 1:
                raise ConfigurationError(f"[sweep] r must be >= 1, got {r}")


def lemma_indices(cfg: ExperimentConfig, name: str) -> dict:
    """Indices for a lemma case taken from ``[sweep]`` keys ``<case>.<index>``."""
    out = {}
    for key, val in cfg.sweep.items():
        prefix, _, idx = key.partition(".")
        if prefix == name and idx:
            out[idx] = val[0]
    return out


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str  # keys are case sensitive (L, N, T)
    return cp


def load_config(path, seed_override: int | None = None) -> ExperimentConfig:
    """Read and validate a configuration file."""
    cp = _parser()
    try:
        read = cp.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    if not read:
        raise ConfigurationError(f"cannot read configuration {path}")
    return _build(cp, seed_override)


def parse_config(text: str, seed_override: int | None = None) -> ExperimentConfig:
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigurationError(f"malformed configuration: {exc}") from None
    return _build(cp, seed_override)
