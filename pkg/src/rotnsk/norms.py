"""Besov, Fourier-Besov, truncated and Chemin-Lerner norms.

Block norms come in two flavors:

``fourier_besov``
    ``||phi_j f_hat||_{L^p'}`` with each lattice frequency weighted by the
    cell volume ``(2 pi / L)**3``; ``p'`` is the Holder conjugate of ``p``.
``besov``
    ``||Delta_j f||_{L^p}`` by collocation quadrature with weight ``(L/N)**3``.

Vector fields are measured as the sum of their component norms, and every
aggregation (blocks, time) is carried out per component before that sum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicDecomposition, resolve_partition
from .errors import UnresolvedSupportWarning
from .grid import SpectralField, inverse_transform

FLAVORS = ("besov", "fourier_besov")
TAIL_TOLERANCE = 1e-10


def conjugate_exponent(p: float) -> float:
    """Holder conjugate ``p'`` with ``1/p + 1/p' = 1``."""
    if p < 1:
        raise ValueError(f"integrability index must be >= 1, got {p}")
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def weighted_lp(values: np.ndarray, weight, p: float, axis=None) -> np.ndarray:
    """``(sum w |v|^p)^(1/p)`` along ``axis``; the maximum of ``|v|`` for ``p = inf``.

    For ``p = inf`` entries with zero weight are ignored.
    """
    v = np.abs(values)
    if np.isinf(p):
        w = np.broadcast_to(weight, v.shape)
        return np.max(np.where(w > 0, v, 0.0), axis=axis, initial=0.0)
    return np.sum(weight * v**p, axis=axis) ** (1.0 / p)


@dataclass(frozen=True)
class NormSpec:
    """Indices ``(s, p, sigma)`` and flavor of a homogeneous Besov-type norm."""

    s: float
    p: float = 2.0
    sigma: float = 1.0
    flavor: str = "fourier_besov"

    def __post_init__(self) -> None:
        if not self.p >= 1 or not self.sigma >= 1:
            raise ValueError(f"p and sigma must lie in [1, inf], got p={self.p}, sigma={self.sigma}")
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}; expected one of {FLAVORS}")


@dataclass(frozen=True)
class TruncationBand:
    """Block selection: ``low`` (2^j <= alpha), ``middle`` (alpha < 2^j <= beta), ``high`` (2^j > beta)."""

    mode: str
    alpha: float
    beta: float | None = None

    def __post_init__(self) -> None:
        if self.mode not in ("low", "middle", "high"):
            raise ValueError(f"unknown band mode {self.mode!r}")
        if self.mode == "middle":
            if self.beta is None or self.beta < self.alpha:
                raise ValueError("middle band needs beta >= alpha")
        if self.mode in ("low", "middle") and not self.alpha > 0:
            raise ValueError("alpha must be positive")

    @property
    def threshold(self) -> float:
        """Cut used by the ``high`` mode (``beta`` when given, else ``alpha``)."""
        return self.beta if self.beta is not None else self.alpha

    def selects(self, js: np.ndarray) -> np.ndarray:
        scale = np.ldexp(1.0, np.asarray(js, dtype=int))
        if self.mode == "low":
            return scale <= self.alpha
        if self.mode == "middle":
            return (scale > self.alpha) & (scale <= self.beta)
        return scale > self.threshold


def _components(coeffs: np.ndarray) -> np.ndarray:
    return coeffs[None] if coeffs.ndim == 3 else coeffs


def fourier_lebesgue_norm(f: SpectralField, p: float) -> float:
    """``||f_hat||_{L^p'}`` with frequency-cell weight, summed over components."""
    pc = conjugate_exponent(p)
    comps = _components(f.coeffs)
    return float(
        sum(weighted_lp(c, f.grid.cell_volume, pc) for c in comps)
    )


def lebesgue_norm(f: SpectralField, p: float) -> float:
    """Physical ``L^p`` norm by collocation quadrature, summed over components."""
    vals = inverse_transform(f)
    comps = vals[None] if vals.ndim == 3 else vals
    return float(sum(weighted_lp(c, f.grid.quadrature_weight, p) for c in comps))


def block_norms(
    f: SpectralField, p: float, flavor: str = "fourier_besov", dec: DyadicDecomposition | None = None
) -> np.ndarray:
    """Per-component, per-block norms, shape ``(components, blocks)``."""
    dec = resolve_partition(f.grid, dec)
    comps = _components(f.coeffs)
    out = np.empty((comps.shape[0], dec.n_blocks))
    if flavor == "fourier_besov":
        pc = conjugate_exponent(p)
        for b, j in enumerate(dec.blocks):
            mask = dec.mask(j)
            for c, coeff in enumerate(comps):
                out[c, b] = weighted_lp(mask * coeff, f.grid.cell_volume, pc)
    elif flavor == "besov":
        for b, j in enumerate(dec.blocks):
            mask = dec.mask(j)
            for c, coeff in enumerate(comps):
                vals = inverse_transform(SpectralField(f.grid, mask * coeff))
                out[c, b] = weighted_lp(vals, f.grid.quadrature_weight, p)
    else:
        raise ValueError(f"unknown flavor {flavor!r}")
    return out


def aggregate_blocks(
    values: np.ndarray, js: np.ndarray, s: float, sigma: float, band: TruncationBand | None = None
) -> float:
    """``sum_components || 2^{js} values_j ||_{l^sigma}`` over the selected blocks."""
    values = np.atleast_2d(values)
    js = np.asarray(js)
    weights = 2.0 ** (s * js)
    sel = np.ones(js.shape, dtype=bool) if band is None else band.selects(js)
    if not np.any(sel):
        return 0.0
    scaled = values[:, sel] * weights[sel]
    return float(np.sum(weighted_lp(scaled, 1.0, sigma, axis=-1)))


def _warn_tail(f: SpectralField, dec: DyadicDecomposition) -> float:
    tail = dec.unresolved_fraction(f.coeffs)
    if tail > TAIL_TOLERANCE:
        warnings.warn(
            f"{tail:.2e} of the coefficient mass lies outside blocks "
            f"[{dec.j_min}, {dec.j_max}]",
            UnresolvedSupportWarning,
            stacklevel=3,
        )
    return tail


def _norm(f, spec, flavor, dec, band):
    dec = resolve_partition(f.grid, dec)
    _warn_tail(f, dec)
    vals = block_norms(f, spec.p, flavor, dec)
    return aggregate_blocks(vals, dec.blocks, spec.s, spec.sigma, band)


def besov_norm(
    f: SpectralField, spec: NormSpec, dec: DyadicDecomposition | None = None, band: TruncationBand | None = None
) -> float:
    """Homogeneous Besov norm with physical ``L^p`` block norms."""
    return _norm(f, spec, "besov", dec, band)


def fourier_besov_norm(
    f: SpectralField, spec: NormSpec, dec: DyadicDecomposition | None = None, band: TruncationBand | None = None
) -> float:
    """Homogeneous Fourier-Besov norm with ``L^p'`` block norms of the coefficients."""
    return _norm(f, spec, "fourier_besov", dec, band)


def norm(f: SpectralField, spec: NormSpec, dec: DyadicDecomposition | None = None, band=None) -> float:
    """Dispatch on ``spec.flavor``."""
    return _norm(f, spec, spec.flavor, dec, band)


def truncated_norm(
    f: SpectralField, spec: NormSpec, band: TruncationBand, dec: DyadicDecomposition | None = None
) -> float:
    """The norm of ``spec`` restricted to the blocks selected by ``band``."""
    return _norm(f, spec, spec.flavor, dec, band)


def unresolved_mass(f: SpectralField, dec: DyadicDecomposition | None = None) -> float:
    """Fraction of coefficient mass outside the resolved blocks."""
    return resolve_partition(f.grid, dec).unresolved_fraction(f.coeffs)


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    """Trapezoid quadrature weights on a strictly increasing time grid."""
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    if t.size > 1:
        dt = np.diff(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


@dataclass
class TimeTrace:
    """Per-sample block norms of a time-dependent field.

    ``values`` has shape ``(samples, components, blocks)``; ``js`` labels
    the block axis.  Samples are appended by a single writer.
    """

    js: np.ndarray
    p: float = 2.0
    flavor: str = "fourier_besov"
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    def append(self, t: float, block_values: np.ndarray) -> None:
        block_values = np.atleast_2d(np.asarray(block_values, dtype=float))
        if block_values.shape[-1] != len(self.js):
            raise ValueError("block axis does not match the trace")
        if self.times and t <= self.times[-1]:
            raise ValueError("sample times must increase strictly")
        self.times.append(float(t))
        self.rows.append(block_values)

    @classmethod
    def from_fields(
        cls,
        times,
        fields,
        p: float = 2.0,
        flavor: str = "fourier_besov",
        dec: DyadicDecomposition | None = None,
    ) -> "TimeTrace":
        fields = list(fields)
        dec = resolve_partition(fields[0].grid, dec)
        trace = cls(dec.blocks.copy(), p, flavor)
        for t, f in zip(times, fields):
            trace.append(t, block_norms(f, p, flavor, dec))
        return trace

    @property
    def values(self) -> np.ndarray:
        return np.stack(self.rows)

    @property
    def weights(self) -> np.ndarray:
        return trapezoid_weights(np.asarray(self.times))

    def __len__(self) -> int:
        return len(self.times)


def time_lr(values: np.ndarray, weights: np.ndarray, r: float) -> np.ndarray:
    """``L^r`` in time along axis 0 with quadrature ``weights``."""
    w = np.asarray(weights).reshape((-1,) + (1,) * (values.ndim - 1))
    if np.isinf(r):
        return np.max(np.abs(values), axis=0)
    return np.sum(w * np.abs(values) ** r, axis=0) ** (1.0 / r)


def chemin_lerner_norm(
    trace: TimeTrace, spec: NormSpec, r: float, band: TruncationBand | None = None
) -> float:
    """``|| 2^{js} ||Delta_j f||_{L^r_t} ||_{l^sigma}``: time norm inside the block sum."""
    if len(trace) == 0:
        raise ValueError("empty time trace")
    per_block = time_lr(trace.values, trace.weights, r)
    return aggregate_blocks(per_block, trace.js, spec.s, spec.sigma, band)


def plain_time_norm(
    trace: TimeTrace, spec: NormSpec, r: float, band: TruncationBand | None = None
) -> float:
    """``|| ||f(t)||_{B^s_{p,sigma}} ||_{L^r_t}``: block sum inside the time norm.

    Components are summed after the time norm, matching the convention of
    :func:`chemin_lerner_norm`.
    """
    if len(trace) == 0:
        raise ValueError("empty time trace")
    vals = trace.values
    sel = np.ones(len(trace.js), dtype=bool) if band is None else band.selects(trace.js)
    scaled = vals[:, :, sel] * 2.0 ** (spec.s * trace.js[sel])
    per_time = weighted_lp(scaled, 1.0, spec.sigma, axis=-1)
    return float(np.sum(time_lr(per_time, trace.weights, r)))
