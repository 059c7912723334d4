"""Periodic lattice, spectral fields and the transform pair.

The whole space is modelled by a cubic torus of period ``L`` sampled on
``N`` points per axis.  Coefficients approximate the continuum transform

    f_hat(xi) = int exp(-i x.xi) f(x) dx

so the forward map carries the quadrature weight ``(L/N)**3`` and the
inverse map the matching ``(N/L)**3``.  With this pairing the discrete
Fourier-Lebesgue norms, which weight each lattice frequency by the cell
volume ``(2 pi / L)**3``, converge to their continuum values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import GridMismatchError, SymmetryError

SPATIAL_AXES = (-3, -2, -1)
HERMITIAN_RTOL = 1e-12
IMAG_RESIDUE_RTOL = 1e-10


@dataclass(frozen=True)
class GridSpec:
    """Cubic periodic box of period ``L`` with ``N`` collocation points per axis.

    Parameters
    ----------
    L : float
        Box period, identical along all three axes.
    N : int
        Points per axis; even and at least 8.
    """

    L: float
    N: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box period must be positive, got L={self.L}")
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ValueError(f"points per axis must be an even integer >= 8, got N={self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.N, self.N, self.N)

    @property
    def dxi(self) -> float:
        """Lattice spacing in frequency, ``2 pi / L``."""
        return 2.0 * np.pi / self.L

    @property
    def cell_volume(self) -> float:
        """Frequency cell volume ``(2 pi / L)**3``."""
        return self.dxi**3

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def quadrature_weight(self) -> float:
        """Physical collocation weight ``(L/N)**3``."""
        return self.dx**3

    @property
    def xi_max(self) -> float:
        """Nyquist frequency ``(N/2) * 2 pi / L``."""
        return 0.5 * self.N * self.dxi

    @property
    def dealias_cutoff(self) -> int:
        """Largest retained integer wavenumber per axis under the 2/3 rule."""
        return self.N // 3

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers in FFT order, ``k in {-N/2, ..., N/2-1}``."""
        return np.rint(np.fft.fftfreq(self.N, 1.0 / self.N)).astype(np.int64)

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequency vectors on the full lattice, shape ``(3, N, N, N)``."""
        k = self.wavenumbers * self.dxi
        return np.stack(np.meshgrid(k, k, k, indexing="ij"))

    @cached_property
    def xi_deriv(self) -> np.ndarray:
        """Frequency vectors with the Nyquist plane of each axis zeroed.

        Odd derivatives of a real field must map the self-conjugate Nyquist
        modes to zero, otherwise Hermitian symmetry is lost.
        """
        k = self.wavenumbers * self.dxi
        k = np.where(self.wavenumbers == -self.N // 2, 0.0, k)
        return np.stack(np.meshgrid(k, k, k, indexing="ij"))

    @cached_property
    def xi_norm(self) -> np.ndarray:
        """``|xi|`` on the full lattice."""
        return np.sqrt(np.sum(self.xi**2, axis=0))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Boolean mask of modes with ``|k_i| <= N/3`` on every axis."""
        keep = np.abs(self.wavenumbers) <= self.dealias_cutoff
        return keep[:, None, None] & keep[None, :, None] & keep[None, None, :]

    @cached_property
    def points(self) -> np.ndarray:
        """Collocation points, shape ``(3, N, N, N)``."""
        x = np.arange(self.N) * self.dx
        return np.stack(np.meshgrid(x, x, x, indexing="ij"))

    def mode_index(self, k: tuple[int, int, int]) -> tuple[int, int, int]:
        """Array index of the integer wavenumber ``k``."""
        return tuple(int(ki) % self.N for ki in k)


@dataclass
class SpectralField:
    """Complex coefficients of a scalar or 3-vector field on a lattice.

    ``coeffs`` has shape ``(N, N, N)`` for a scalar and ``(3, N, N, N)``
    for a vector.  The buffer is owned by the field; operations return new
    fields rather than mutating their inputs.
    """

    grid: GridSpec
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape not in (self.grid.shape, (3,) + self.grid.shape):
            raise GridMismatchError(
                f"coefficient shape {c.shape} does not match grid {self.grid.shape}"
            )
        self.coeffs = c

    @property
    def rank(self) -> str:
        return "scalar" if self.coeffs.ndim == 3 else "vector3"

    @classmethod
    def zeros(cls, grid: GridSpec, rank: str = "scalar") -> "SpectralField":
        shape = grid.shape if rank == "scalar" else (3,) + grid.shape
        return cls(grid, np.zeros(shape, dtype=np.complex128))

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs.copy())

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def component(self, i: int) -> "SpectralField":
        if self.rank == "scalar":
            raise ValueError("scalar field has no components")
        return SpectralField(self.grid, self.coeffs[i].copy())

    def components(self) -> list["SpectralField"]:
        if self.rank == "scalar":
            return [self]
        return [self.component(i) for i in range(3)]

    def _check(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise GridMismatchError("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check(other)
        return SpectralField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c: complex) -> "SpectralField":
        return SpectralField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, -self.coeffs)

    def hermitian_defect(self) -> float:
        """Relative size of ``c(-k) - conj(c(k))``."""
        scale = np.max(np.abs(self.coeffs))
        if scale == 0.0:
            return 0.0
        return float(np.max(np.abs(self.coeffs - conj_reflect(self.coeffs))) / scale)

    def is_hermitian(self, rtol: float = HERMITIAN_RTOL) -> bool:
        return self.hermitian_defect() <= rtol


@dataclass
class FlowState:
    """Density perturbation ``a`` and momentum ``m`` at time ``t``."""

    a: SpectralField
    m: SpectralField
    t: float = 0.0

    def __post_init__(self) -> None:
        if self.a.rank != "scalar" or self.m.rank != "vector3":
            raise ValueError("FlowState expects a scalar density and a vector momentum")
        if self.a.grid != self.m.grid:
            raise GridMismatchError("density and momentum on different grids")
        if self.t < 0:
            raise ValueError("time must be nonnegative")

    @property
    def grid(self) -> GridSpec:
        return self.a.grid

    @classmethod
    def zeros(cls, grid: GridSpec, t: float = 0.0) -> "FlowState":
        return cls(SpectralField.zeros(grid), SpectralField.zeros(grid, "vector3"), t)

    def stacked(self) -> np.ndarray:
        """Coefficients as one ``(4, N, N, N)`` array ordered ``(a, m1, m2, m3)``."""
        return np.concatenate([self.a.coeffs[None], self.m.coeffs])

    @classmethod
    def from_stacked(cls, grid: GridSpec, u: np.ndarray, t: float = 0.0) -> "FlowState":
        return cls(SpectralField(grid, u[0]), SpectralField(grid, u[1:4]), t)

    def density(self, mach: float) -> np.ndarray:
        """Physical density ``1 + eps * a`` on the collocation grid."""
        return 1.0 + mach * inverse_transform(self.a)

    def is_admissible(self, mach: float, floor: float = 0.0) -> bool:
        return bool(np.min(self.density(mach)) > floor)


def conj_reflect(coeffs: np.ndarray) -> np.ndarray:
    """Return ``conj(c(-k))`` for coefficients stored in FFT order."""
    flipped = np.flip(coeffs, axis=SPATIAL_AXES)
    return np.conj(np.roll(flipped, 1, axis=SPATIAL_AXES))


def forward_transform(grid: GridSpec, samples: np.ndarray) -> SpectralField:
    """Transform real collocation samples to spectral coefficients.

    ``samples`` has shape ``(N, N, N)`` or ``(3, N, N, N)``.
    """
    samples = np.asarray(samples)
    if samples.shape not in (grid.shape, (3,) + grid.shape):
        raise GridMismatchError(f"sample shape {samples.shape} does not match grid {grid.shape}")
    coeffs = sfft.fftn(samples, axes=SPATIAL_AXES) * grid.quadrature_weight
    return SpectralField(grid, coeffs)


def inverse_transform(f: SpectralField, check: bool = True) -> np.ndarray:
    """Real collocation samples of a Hermitian field.

    An imaginary residue larger than ``1e-10`` relative to the real part
    means the coefficients do not describe a real field and raises
    :class:`SymmetryError`.
    """
    grid = f.grid
    values = sfft.ifftn(f.coeffs, axes=SPATIAL_AXES) / grid.quadrature_weight
    if check:
        scale = np.max(np.abs(values))
        if scale > 0 and np.max(np.abs(values.imag)) > IMAG_RESIDUE_RTOL * scale:
            raise SymmetryError(
                "coefficients are not Hermitian: imaginary residue "
                f"{np.max(np.abs(values.imag)) / scale:.3e} relative"
            )
    return np.ascontiguousarray(values.real)


def dealias(f: SpectralField) -> SpectralField:
    """Zero every mode outside the 2/3-rule box."""
    return SpectralField(f.grid, f.coeffs * f.grid.dealias_mask)


def dealias_product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise physical product followed by 2/3-rule truncation.

    Scalar-scalar and scalar-vector products are supported; a vector times
    a vector is taken componentwise.
    """
    if f.grid != g.grid:
        raise GridMismatchError("fields live on different grids")
    fx = inverse_transform(f)
    gx = inverse_transform(g)
    return dealias(forward_transform(f.grid, fx * gx))


def gradient(f: SpectralField) -> SpectralField:
    """Spectral gradient of a scalar field."""
    if f.rank != "scalar":
        raise ValueError("gradient expects a scalar field")
    return SpectralField(f.grid, 1j * f.grid.xi_deriv * f.coeffs[None])


def divergence(f: SpectralField) -> SpectralField:
    """Spectral divergence of a vector field."""
    if f.rank != "vector3":
        raise ValueError("divergence expects a vector field")
    return SpectralField(f.grid, np.sum(1j * f.grid.xi_deriv * f.coeffs, axis=0))


def laplacian(f: SpectralField) -> SpectralField:
    """Spectral Laplacian, multiplier ``-|xi|**2``."""
    return SpectralField(f.grid, -(f.grid.xi_norm**2) * f.coeffs)


def parseval_sides(f: SpectralField) -> tuple[float, float]:
    """Physical and spectral sides of the discrete Parseval identity.

    Returns ``(int |f|^2 dx, (2 pi)^-3 * sum |f_hat|^2 (2 pi/L)^3)``.
    """
    fx = inverse_transform(f)
    physical = float(np.sum(fx**2) * f.grid.quadrature_weight)
    spectral = float(np.sum(np.abs(f.coeffs) ** 2) * f.grid.cell_volume / (2 * np.pi) ** 3)
    return physical, spectral
