"""Bony calculus, Bernstein ratios and empirical product/composition constants.

All products go through :func:`rotnsk.grid.dealias_product`.  The exact
identities (Bony decomposition) are only claimed for inputs whose spectra
sit inside the partition-of-unity region and whose products are not cut
by the 2/3 rule; anything else is rejected instead of silently truncated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dyadic import (
    INNER_RADIUS,
    OUTER_RADIUS,
    DyadicDecomposition,
    resolve_partition,
)
from .errors import ConfigurationError, GridMismatchError, ResolutionError, SupportError
from .grid import GridSpec, SpectralField, dealias, dealias_product, forward_transform, inverse_transform
from .norms import NormSpec, TruncationBand, besov_norm, conjugate_exponent, fourier_besov_norm, weighted_lp

SUPPORT_TOL = 1e-12


# ---------------------------------------------------------------------------
# Random band-limited data
# ---------------------------------------------------------------------------


def random_band_limited(
    grid: GridSpec,
    kmax: float,
    seed: int | np.random.Generator = 0,
    kmin: float = 0.5,
    rank: str = "scalar",
    amplitude: float = 1.0,
) -> SpectralField:
    """Real random field with integer wavenumbers ``kmin <= |k| <= kmax``.

    Coefficients are drawn on the integer cube ``[-K, K]^3`` with
    ``K = floor(kmax)`` in a fixed order, so the same seed yields the same
    field on every grid that resolves ``kmax``.
    """
    rng = np.random.default_rng(seed)
    kk = int(np.floor(kmax))
    if 3 * kk > 0 and kk > grid.N // 2 - 1:
        raise ConfigurationError(f"kmax={kmax} not representable with N={grid.N}")
    ncomp = 1 if rank == "scalar" else 3
    side = 2 * kk + 1
    z = rng.normal(size=(ncomp, side, side, side)) + 1j * rng.normal(size=(ncomp, side, side, side))
    z = 0.5 * (z + np.conj(z[:, ::-1, ::-1, ::-1]))
    k = np.arange(-kk, kk + 1)
    kn = np.sqrt(k[:, None, None] ** 2 + k[None, :, None] ** 2 + k[None, None, :] ** 2)
    z = z * ((kn >= kmin) & (kn <= kmax))
    coeffs = np.zeros((ncomp,) + grid.shape, dtype=np.complex128)
    idx = k % grid.N
    coeffs[np.ix_(range(ncomp), idx, idx, idx)] = z
    coeffs *= amplitude * grid.L**3 / max(1, side**1.5)
    return SpectralField(grid, coeffs[0] if rank == "scalar" else coeffs)


def spectral_radius(f: SpectralField, rtol: float = SUPPORT_TOL) -> float:
    """Largest ``|xi|`` carrying coefficient mass above ``rtol`` of the maximum."""
    mag = np.abs(f.coeffs)
    if mag.ndim == 4:
        mag = mag.max(axis=0)
    top = mag.max()
    if top == 0:
        return 0.0
    return float(f.grid.xi_norm[mag > rtol * top].max())


# ---------------------------------------------------------------------------
# Bony decomposition
# ---------------------------------------------------------------------------


def _check_resolved(f: SpectralField, g: SpectralField, dec: DyadicDecomposition) -> None:
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    for name, h in (("f", f), ("g", g)):
        tail = dec.unresolved_fraction(h.coeffs)
        if tail > SUPPORT_TOL:
            raise ResolutionError(
                f"{name} has {tail:.2e} of its mass outside the partition-of-unity region"
            )
        if h.coeffs.ndim == 3 and abs(h.coeffs[0, 0, 0]) > 0:
            raise ResolutionError(f"{name} has a zero mode, which no dyadic block captures")
    reach = spectral_radius(f) + spectral_radius(g)
    cut = f.grid.dealias_cutoff * f.grid.dxi
    if reach > cut * (1 + 1e-12):
        raise ResolutionError(
            f"product spectrum reaches |xi|={reach:.4g}, beyond the dealiasing cut-off {cut:.4g}"
        )


def _masked(f: SpectralField, mask: np.ndarray) -> SpectralField:
    return SpectralField(f.grid, f.coeffs * mask)


def bony_paraproduct(
    f: SpectralField, g: SpectralField, dec: DyadicDecomposition | None = None
) -> SpectralField:
    """Paraproduct ``T_f g = sum_j S_{j-1} f * Delta_j g``."""
    dec = resolve_partition(f.grid, dec)
    _check_resolved(f, g, dec)
    out = np.zeros(np.broadcast_shapes(f.coeffs.shape, g.coeffs.shape), dtype=np.complex128)
    for j in dec.blocks:
        low = dec.low_mask(j - 1)
        if not np.any(low):
            continue
        out += dealias_product(_masked(f, low), _masked(g, dec.mask(j))).coeffs
    return SpectralField(f.grid, out)


def bony_remainder(
    f: SpectralField, g: SpectralField, dec: DyadicDecomposition | None = None
) -> SpectralField:
    """Remainder ``R(f, g) = sum_j sum_{|j'-j|<=1} Delta_j f * Delta_j' g``."""
    dec = resolve_partition(f.grid, dec)
    _check_resolved(f, g, dec)
    out = np.zeros(np.broadcast_shapes(f.coeffs.shape, g.coeffs.shape), dtype=np.complex128)
    for j in dec.blocks:
        near = sum(dec.mask(jj) for jj in (j - 1, j, j + 1) if dec.j_min <= jj <= dec.j_max)
        out += dealias_product(_masked(f, dec.mask(j)), _masked(g, near)).coeffs
    return SpectralField(f.grid, out)


def bony_residual(f: SpectralField, g: SpectralField, dec: DyadicDecomposition | None = None) -> float:
    """Relative defect of ``T_f g + T_g f + R(f, g) - fg`` in the coefficient maximum norm."""
    whole = dealias_product(f, g).coeffs
    parts = (
        bony_paraproduct(f, g, dec).coeffs
        + bony_paraproduct(g, f, dec).coeffs
        + bony_remainder(f, g, dec).coeffs
    )
    scale = np.max(np.abs(whole))
    return float(np.max(np.abs(parts - whole)) / scale) if scale > 0 else float(np.max(np.abs(parts)))


# ---------------------------------------------------------------------------
# Bernstein inequalities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BernsteinReport:
    """Measured Bernstein ratios for a field supported in one dyadic annulus.

    ``ratio`` is ``||grad^k f||_{L^q hat} / (2^{j(k + 3(1/p - 1/q))} ||f||_{L^p hat})``
    and ``bound`` the grid constant it cannot exceed.  ``reverse_ratio`` is
    ``2^{jk} ||f||_{L^p hat} / ||grad^k f||_{L^p hat}``, bounded by ``(4/3)^k``.
    """

    j: int
    k: int
    p: float
    q: float
    ratio: float
    bound: float
    reverse_ratio: float
    reverse_bound: float

    @property
    def holds(self) -> bool:
        tol = 1 + 1e-12
        return self.ratio <= self.bound * tol and self.reverse_ratio <= self.reverse_bound * tol


def annulus_volume(grid: GridSpec, j: int) -> float:
    """Discrete volume of ``{3/4 2^j <= |xi| <= 8/3 2^j}`` on the lattice."""
    r = grid.xi_norm
    count = np.count_nonzero((r >= INNER_RADIUS * 2.0**j) & (r <= OUTER_RADIUS * 2.0**j))
    return float(count * grid.cell_volume)


def verify_bernstein(f: SpectralField, j: int, k: int, p: float, q: float) -> BernsteinReport:
    """Measure both Bernstein inequalities for ``f`` supported in block ``j``.

    The derivative ``grad^k`` is realized by the multiplier ``|xi|^k``,
    whose modulus equals the Frobenius norm of the symbol of ``grad^k``.

    Raises
    ------
    SupportError
        If ``f`` carries mass outside the annulus of block ``j``.
    """
    if q < p:
        raise ConfigurationError(f"Bernstein needs q >= p, got p={p}, q={q}")
    r = f.grid.xi_norm
    inside = (r >= INNER_RADIUS * 2.0**j) & (r <= OUTER_RADIUS * 2.0**j)
    mag = np.abs(f.coeffs)
    if mag.ndim == 4:
        mag = mag.sum(axis=0)
    total = mag.sum()
    if total == 0:
        raise SupportError("field is identically zero")
    leak = mag[~inside].sum() / total
    if leak > SUPPORT_TOL:
        raise SupportError(f"{leak:.2e} of the field lies outside block {j}")

    cell = f.grid.cell_volume
    mult = r**k
    comps = f.coeffs[None] if f.coeffs.ndim == 3 else f.coeffs

    def fl(c, s):
        return sum(weighted_lp(x, cell, conjugate_exponent(s)) for x in c)

    base_p = fl(comps, p)
    deriv_q = fl(comps * mult, q)
    deriv_p = fl(comps * mult, p)
    ratio = deriv_q / (2.0 ** (j * (k + 3 * (1 / p - 1 / q))) * base_p)
    vol = annulus_volume(f.grid, j) / 2.0 ** (3 * j)
    bound = OUTER_RADIUS**k * vol ** (1 / p - 1 / q)
    reverse = 2.0 ** (j * k) * base_p / deriv_p if deriv_p > 0 else np.inf
    return BernsteinReport(j, k, p, q, float(ratio), float(bound), float(reverse), (1 / INNER_RADIUS) ** k)


# ---------------------------------------------------------------------------
# Product estimates
# ---------------------------------------------------------------------------

LEMMA_CASES = ("lemma_2_3", "lemma_2_4", "lemma_2_5a", "lemma_2_5b")


@dataclass(frozen=True)
class LemmaCase:
    """Indices of one product estimate.

    ``lemma_2_3``: Fourier-Besov product with ``s = s1 + s2 = s3 + s4``.
    ``lemma_2_4``: physical Besov product into ``B^{3/2 - s}_{2,1}``.
    ``lemma_2_5a`` / ``lemma_2_5b``: mixed product at regularity ``3/p + s``,
    the latter with the high-frequency truncation at ``beta`` on the left
    and ``beta / 16`` on the first right-hand term.
    """

    lemma: str
    p: float = 2.0
    q: float = 2.5
    s: float = 1.0
    s1: float = 0.5
    s3: float = 0.5
    s2: float | None = None
    beta: float = 1.0

    def __post_init__(self) -> None:
        if self.lemma not in LEMMA_CASES:
            raise ConfigurationError(f"unknown lemma case {self.lemma!r}")
        for msg, ok in self.hypotheses():
            if not ok:
                raise ConfigurationError(f"{self.lemma}: hypothesis violated: {msg}")

    def hypotheses(self) -> list[tuple[str, bool]]:
        p, q, s = self.p, self.q, self.s
        if self.lemma == "lemma_2_3":
            return [
                ("1 <= p", p >= 1),
                ("s < min{3, 6/p}", s < min(3.0, 6.0 / p)),
                ("s1 >= 0", self.s1 >= 0),
                ("s3 >= 0", self.s3 >= 0),
            ]
        if self.lemma == "lemma_2_4":
            return [
                ("2 <= q <= 4", 2 <= q <= 4),
                ("s < 6/q", s < 6.0 / q),
                ("min{s1, s3} >= 3/2 - 3/q", min(self.s1, self.s3) >= 1.5 - 3.0 / q),
            ]
        s2 = self.s2 if self.s2 is not None else 1.5 - 3.0 / q
        return [
            ("p >= 2", p >= 2),
            ("2 <= q <= 4", 2 <= q <= 4),
            ("s > -6/q", s > -6.0 / q),
            ("s1 >= 0", self.s1 >= 0),
            ("s2 >= 3/2 - 3/q", s2 >= 1.5 - 3.0 / q - 1e-15),
            ("beta > 0", self.beta > 0),
        ]


@dataclass(frozen=True)
class ProductReport:
    """Both sides of a product estimate with the constant set to one."""

    lhs: float
    rhs_terms: tuple[float, float]
    ratio: float


def measure_product_constant(
    f: SpectralField, g: SpectralField, case: LemmaCase, dec: DyadicDecomposition | None = None
) -> ProductReport:
    """Evaluate ``lhs / rhs`` of the product estimate named by ``case``."""
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    dec = resolve_partition(f.grid, dec)
    fg = dealias_product(f, g)
    p, q, s = case.p, case.q, case.s

    def fb(h, reg, band=None):
        return fourier_besov_norm(h, NormSpec(reg, p, 1.0), dec, band)

    def bq(h, reg, pp=q):
        return besov_norm(h, NormSpec(reg, pp, 1.0, "besov"), dec)

    if case.lemma == "lemma_2_3":
        s2, s4 = s - case.s1, s - case.s3
        lhs = fb(fg, 3 / p - s)
        terms = (fb(f, 3 / p - case.s1) * fb(g, 3 / p - s2), fb(g, 3 / p - case.s3) * fb(f, 3 / p - s4))
    elif case.lemma == "lemma_2_4":
        s2, s4 = s - case.s1, s - case.s3
        lhs = bq(fg, 1.5 - s, 2.0)
        terms = (bq(f, 3 / q - case.s1) * bq(g, 3 / q - s2), bq(g, 3 / q - case.s3) * bq(f, 3 / q - s4))
    else:
        s2 = case.s2 if case.s2 is not None else 1.5 - 3.0 / q
        second = bq(g, 3 / q - s2) * bq(f, 3 / q + s + s2)
        if case.lemma == "lemma_2_5a":
            lhs = fb(fg, 3 / p + s)
            first = fb(f, 3 / p - case.s1) * fb(g, 3 / p + s + case.s1)
        else:
            lhs = fb(fg, 3 / p + s, TruncationBand("high", case.beta))
            first = fb(f, 3 / p - case.s1) * fb(
                g, 3 / p + s + case.s1, TruncationBand("high", case.beta / 16.0)
            )
        terms = (first, second)
    rhs = terms[0] + terms[1]
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    return ProductReport(float(lhs), (float(terms[0]), float(terms[1])), float(ratio))


# ---------------------------------------------------------------------------
# Composition estimate
# ---------------------------------------------------------------------------


@dataclass
class CompositionReport:
    """Outcome of composing an analytic function with a small field."""

    field: SpectralField = field(repr=False)
    norm_ratio: float
    small_norm: float
    smallness: float
    small_ok: bool


def compose_analytic(
    F: Callable[[np.ndarray], np.ndarray],
    u: SpectralField,
    s: float,
    p: float = 2.0,
    smallness: float = 0.5,
    dec: DyadicDecomposition | None = None,
) -> CompositionReport:
    """``F(u)`` evaluated pointwise and dealiased, with ``||F(u)||_s / ||u||_s``.

    The norms are Fourier-Besov ``B^s_{p,1}``.  ``small_ok`` records
    whether ``||u||_{B^{3/p}_{p,1}}`` is below ``smallness``; the estimate
    is not claimed otherwise.
    """
    if abs(float(np.asarray(F(np.zeros(1)))[0])) > 1e-14:
        raise ConfigurationError("composition requires F(0) = 0")
    dec = resolve_partition(u.grid, dec)
    fu = dealias(forward_transform(u.grid, F(inverse_transform(u))))
    spec = NormSpec(s, p, 1.0)
    nu = fourier_besov_norm(u, spec, dec)
    small = fourier_besov_norm(u, NormSpec(3.0 / p, p, 1.0), dec)
    ratio = fourier_besov_norm(fu, spec, dec) / nu if nu > 0 else 0.0
    return CompositionReport(fu, float(ratio), float(small), smallness, bool(small <= smallness))


def composition_difference_ratio(
    F: Callable[[np.ndarray], np.ndarray],
    u: SpectralField,
    v: SpectralField,
    s: float,
    p: float = 2.0,
    dec: DyadicDecomposition | None = None,
) -> float:
    """``||F(u) - F(v)||_s / ||u - v||_s`` in ``B^s_{p,1}``."""
    dec = resolve_partition(u.grid, dec)
    fu = dealias(forward_transform(u.grid, F(inverse_transform(u))))
    fv = dealias(forward_transform(v.grid, F(inverse_transform(v))))
    spec = NormSpec(s, p, 1.0)
    den = fourier_besov_norm(u - v, spec, dec)
    return float(fourier_besov_norm(fu - fv, spec, dec) / den) if den > 0 else 0.0
