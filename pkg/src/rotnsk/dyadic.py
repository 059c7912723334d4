"""Homogeneous Littlewood-Paley partition on the frequency lattice.

The radial profile is built from a quintic smoothstep

    psi(t) = 6 t^5 - 15 t^4 + 10 t^3,   clamped to [0, 1],
    chi(r) = 1 - psi((r - 3/4) / (4/3 - 3/4)),

so ``chi = 1`` for ``r <= 3/4`` and ``chi = 0`` for ``r >= 4/3``.  The block
masks are ``phi_j(r) = chi(r / 2^(j+1)) - chi(r / 2^j)``, supported in
``[3/4 * 2^j, 8/3 * 2^j]`` and equal to one on ``[4/3 * 2^j, 3/2 * 2^j]``.
Their telescoping sum equals one on ``[4/3 * 2^j_min, 3/2 * 2^j_max]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import floor, log2

import numpy as np

from .errors import BlockRangeError, ConfigurationError, GridMismatchError
from .grid import GridSpec, SpectralField

INNER_RADIUS = 3.0 / 4.0
OUTER_RADIUS = 8.0 / 3.0
FLAT_LOW = 4.0 / 3.0
FLAT_HIGH = 3.0 / 2.0


def smoothstep(t: np.ndarray) -> np.ndarray:
    """Quintic smoothstep ``6t^5 - 15t^4 + 10t^3`` clamped to ``[0, 1]``."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def cutoff_profile(r: np.ndarray) -> np.ndarray:
    """Radial low-pass profile: 1 below 3/4, 0 above 4/3."""
    return 1.0 - smoothstep((np.asarray(r, dtype=float) - INNER_RADIUS) / (FLAT_LOW - INNER_RADIUS))


def block_profile(r: np.ndarray, j: int) -> np.ndarray:
    """Mask value of block ``j`` at radius ``r``.

    Division by a power of two is exact, so the dilation law
    ``block_profile(r, j) == block_profile(r / 2**j, 0)`` holds bitwise.
    """
    r = np.asarray(r, dtype=float)
    return cutoff_profile(r / 2.0 ** (j + 1)) - cutoff_profile(r / 2.0**j)


def lowest_nonempty_block(grid: GridSpec) -> int:
    """Smallest ``j`` whose annulus contains a nonzero lattice frequency."""
    # Block j reaches down to the lattice iff its outer radius 8/3 * 2^j
    # exceeds the smallest nonzero frequency dxi.  With this choice every
    # nonzero lattice frequency below 3/2 * 2^j_max is fully partitioned.
    return floor(log2(grid.dxi / OUTER_RADIUS)) + 1


def highest_resolved_block(grid: GridSpec) -> int:
    """Largest ``j`` whose outer radius ``8/3 * 2^j`` stays below Nyquist."""
    j = floor(log2(grid.xi_max))
    while OUTER_RADIUS * 2.0**j >= grid.xi_max:
        j -= 1
    return j


@dataclass
class DyadicDecomposition:
    """Dyadic block masks ``phi_j`` for ``j_min <= j <= j_max`` on a grid.

    Masks are computed lazily and cached; each is a real array on the full
    lattice with values in ``[0, 1]``.
    """

    grid: GridSpec
    j_min: int
    j_max: int
    _masks: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if self.j_min > self.j_max:
            raise ConfigurationError(f"empty block range j_min={self.j_min} > j_max={self.j_max}")

    @property
    def blocks(self) -> np.ndarray:
        return np.arange(self.j_min, self.j_max + 1)

    @property
    def n_blocks(self) -> int:
        return self.j_max - self.j_min + 1

    @property
    def resolved_annulus(self) -> tuple[float, float]:
        """Radii between which the masks sum to one."""
        return FLAT_LOW * 2.0**self.j_min, FLAT_HIGH * 2.0**self.j_max

    def check_block(self, j: int) -> None:
        if not self.j_min <= j <= self.j_max:
            raise BlockRangeError(f"block {j} outside resolved range [{self.j_min}, {self.j_max}]")

    def mask(self, j: int) -> np.ndarray:
        self.check_block(j)
        if j not in self._masks:
            self._masks[j] = block_profile(self.grid.xi_norm, j)
        return self._masks[j]

    def mask_sum(self) -> np.ndarray:
        return sum(self.mask(j) for j in self.blocks)

    def low_mask(self, j: int) -> np.ndarray:
        """Mask of ``S_j``: the sum of ``phi_j'`` over ``j_min <= j' <= j - 1``."""
        out = np.zeros(self.grid.shape)
        for jj in range(self.j_min, min(j, self.j_max + 1)):
            out = out + self.mask(jj)
        return out

    def unresolved_fraction(self, coeffs: np.ndarray) -> float:
        """Share of the coefficient modulus sum not captured by the masks.

        The zero mode is excluded, as in every homogeneous norm.
        """
        mag = np.abs(coeffs)
        if mag.ndim == 4:
            mag = mag.sum(axis=0)
        mag = mag.copy()
        mag[0, 0, 0] = 0.0
        total = mag.sum()
        if total == 0.0:
            return 0.0
        return float(np.sum(mag * np.abs(1.0 - self.mask_sum())) / total)


def build_dyadic_partition(
    grid: GridSpec, j_min: int | None = None, j_max: int | None = None
) -> DyadicDecomposition:
    """Partition of the lattice into dyadic annuli.

    By default the range runs from the lowest block that contains a
    lattice frequency to the highest block whose outer radius lies below
    the Nyquist frequency.  A requested ``j_max`` beyond that limit is a
    configuration error.
    """
    top = highest_resolved_block(grid)
    if j_max is None:
        j_max = top
    elif OUTER_RADIUS * 2.0**j_max >= grid.xi_max:
        raise ConfigurationError(
            f"block {j_max} reaches radius {OUTER_RADIUS * 2.0**j_max:.4g}, "
            f"beyond the Nyquist frequency {grid.xi_max:.4g}"
        )
    if j_min is None:
        j_min = lowest_nonempty_block(grid)
    return DyadicDecomposition(grid, int(j_min), int(j_max))


@lru_cache(maxsize=8)
def default_partition(grid: GridSpec) -> DyadicDecomposition:
    """Shared default partition for a grid (masks cached across calls)."""
    return build_dyadic_partition(grid)


def resolve_partition(grid: GridSpec, dec: DyadicDecomposition | None) -> DyadicDecomposition:
    if dec is None:
        return default_partition(grid)
    if dec.grid != grid:
        raise GridMismatchError("field and decomposition live on different grids")
    return dec


def dyadic_project(
    f: SpectralField, j: int, dec: DyadicDecomposition | None = None
) -> SpectralField:
    """Block projection ``Delta_j f``."""
    dec = resolve_partition(f.grid, dec)
    return SpectralField(f.grid, f.coeffs * dec.mask(j))


def low_cutoff(
    f: SpectralField, j: int, dec: DyadicDecomposition | None = None
) -> SpectralField:
    """Low-frequency cut-off ``S_j f = sum_{j' <= j-1} Delta_j' f``.

    ``j`` may range from ``j_min`` (giving zero) to ``j_max + 1`` (all blocks).
    """
    dec = resolve_partition(f.grid, dec)
    if not dec.j_min <= j <= dec.j_max + 1:
        raise BlockRangeError(f"cut-off index {j} outside [{dec.j_min}, {dec.j_max + 1}]")
    return SpectralField(f.grid, f.coeffs * dec.low_mask(j))
