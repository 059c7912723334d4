"""The nonlinear forcing of the momentum equation.

Seven terms enter (``b = eps a``, ``I = b/(1+b)``, ``G`` the pressure
antiderivative):

1. ``div((I - 1) m (x) m)``
2. ``-mu Lap(I m)``
3. ``-(mu + lam) grad div(I m)``
4. ``-(1/eps) J grad a``, evaluated as ``-(1/eps^2) grad G(eps a)``
5. ``kappa eps^2 grad(a Lap a)``
6. ``(kappa eps^2 / 2) grad |grad a|^2``
7. ``-kappa eps^2 div(grad a (x) grad a)``

Each is a divergence or a gradient, so its zero mode vanishes.  Products
are formed pointwise in physical space and truncated once by the 2/3 rule.

Two evaluators are provided.  :func:`nonlinear_terms` returns every term
separately on the full lattice and is meant for inspection and testing.
:class:`Nonlinearity` is the fused production kernel used by the time
stepper; it works on the dealiased half spectrum of a real FFT and needs
8 inverse and 10 forward transforms per call.
"""

from __future__ import annotations

from functools import cached_property

import numpy as np
import scipy.fft as sfft

from .errors import NonFiniteError
from .grid import (
    SPATIAL_AXES,
    FlowState,
    GridSpec,
    SpectralField,
    conj_reflect,
    dealias,
    forward_transform,
    inverse_transform,
)
from .params import PhysParams, eval_pressure_helpers, linear_helpers

TERM_NAMES = (
    "convection",
    "viscous_shear",
    "viscous_bulk",
    "pressure",
    "capillary_lap",
    "capillary_grad_sq",
    "capillary_stress",
)

_PAIRS = ((0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2))


def _helpers(b: np.ndarray, params: PhysParams, helpers: str, floor: float):
    if helpers == "exact":
        return eval_pressure_helpers(b, params.pressure, floor)
    if helpers == "linear":
        return linear_helpers(b, params.pressure)
    raise ValueError(f"unknown helper order {helpers!r}")


def _check_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"non-finite values in {name}")


def nonlinear_terms(
    state: FlowState, params: PhysParams, helpers: str = "exact", density_floor: float = 0.0
) -> dict[str, SpectralField]:
    """All seven terms as separate vector fields on the full lattice."""
    grid = state.grid
    eps, kap = params.mach, params.kappa
    xi = grid.xi_deriv
    a = inverse_transform(state.a)
    m = inverse_transform(state.m)
    grad_a = inverse_transform(SpectralField(grid, 1j * xi * state.a.coeffs[None]))
    lap_a = inverse_transform(SpectralField(grid, -(grid.xi_norm**2) * state.a.coeffs))
    hp = _helpers(eps * a, params, helpers, density_floor)

    def spec(x):
        return dealias(forward_transform(grid, x)).coeffs

    def div_tensor(t):  # t[i][j] physical -> div: i sum_j xi_j T_ij
        return np.stack([sum(1j * xi[j] * spec(t[i][j]) for j in range(3)) for i in range(3)])

    def grad(s_hat):
        return 1j * xi * s_hat[None]

    conv = [[(hp.I - 1.0) * m[i] * m[j] for j in range(3)] for i in range(3)]
    im_hat = np.stack([spec(hp.I * m[i]) for i in range(3)])
    k2 = grid.xi_norm**2
    div_im = np.sum(1j * xi * im_hat, axis=0)
    stress = [[-kap * eps**2 * grad_a[i] * grad_a[j] for j in range(3)] for i in range(3)]
    terms = {
        "convection": div_tensor(conv),
        "viscous_shear": params.mu * k2 * im_hat,
        "viscous_bulk": -(params.mu + params.lam) * grad(div_im),
        "pressure": grad(spec(-hp.G / eps**2)),
        "capillary_lap": grad(spec(kap * eps**2 * a * lap_a)),
        "capillary_grad_sq": grad(spec(0.5 * kap * eps**2 * np.sum(grad_a**2, axis=0))),
        "capillary_stress": div_tensor(stress),
    }
    out = {}
    for name, c in terms.items():
        _check_finite(name, c)
        out[name] = SpectralField(grid, c)
    return out


def eval_nonlinearity(
    state: FlowState, params: PhysParams, helpers: str = "exact", density_floor: float = 0.0
) -> SpectralField:
    """The full forcing ``N_eps[a, m]`` as a vector field on the full lattice."""
    kernel = Nonlinearity(state.grid, params, helpers, density_floor)
    layout = kernel.layout
    out = kernel(layout.pack_state(state))
    return SpectralField(state.grid, layout.unpack(out[1:]))


class SpectralLayout:
    """Dealiased modes of the real-FFT half spectrum, stored as flat vectors.

    The half spectrum keeps ``k3 >= 0``; the retained modes satisfy
    ``|k_i| <= N/3``.  ``weights`` is 1 on the ``k3 = 0`` plane (both
    ``k`` and ``-k`` are stored there) and 2 elsewhere (the mirror mode is
    implicit), so ``sum weights * |c|^p`` equals the full-lattice sum.
    """

    def __init__(self, grid: GridSpec) -> None:
        self.grid = grid
        n = grid.N
        self.half_shape = (n, n, n // 2 + 1)
        k = grid.wavenumbers
        kz = np.arange(n // 2 + 1)
        cut = grid.dealias_cutoff
        keep = (np.abs(k)[:, None, None] <= cut) & (np.abs(k)[None, :, None] <= cut) & (kz[None, None, :] <= cut)
        self.keep = keep
        self.index = np.flatnonzero(keep)
        kx, ky, kzz = np.unravel_index(self.index, self.half_shape)
        self.k = np.stack([k[kx], k[ky], kz[kzz]])
        self.xi = self.k * grid.dxi
        self.k2 = np.sum(self.xi**2, axis=0)
        self.xi_norm = np.sqrt(self.k2)
        self.weights = np.where(kz[kzz] == 0, 1.0, 2.0)
        self.size = self.index.size

    @cached_property
    def zero_mode(self) -> int:
        return int(np.flatnonzero(self.k2 == 0)[0])

    def to_physical(self, packed: np.ndarray) -> np.ndarray:
        """Physical samples of packed coefficients ``(C, M) -> (C, N, N, N)``."""
        c = packed.shape[0]
        half = np.zeros((c, int(np.prod(self.half_shape))), dtype=np.complex128)
        half[:, self.index] = packed
        half = half.reshape((c,) + self.half_shape)
        return sfft.irfftn(half, s=self.grid.shape, axes=SPATIAL_AXES) / self.grid.quadrature_weight

    def to_spectral(self, values: np.ndarray) -> np.ndarray:
        """Truncated coefficients of physical samples ``(C, N, N, N) -> (C, M)``."""
        half = sfft.rfftn(values, axes=SPATIAL_AXES) * self.grid.quadrature_weight
        return half.reshape(values.shape[0], -1)[:, self.index]

    def pack(self, coeffs: np.ndarray) -> np.ndarray:
        """Full-lattice coefficients ``(C, N, N, N)`` to packed ``(C, M)``."""
        c = coeffs.reshape((-1,) + self.grid.shape)
        return c[..., : self.half_shape[2]].reshape(c.shape[0], -1)[:, self.index]

    def pack_state(self, state: FlowState) -> np.ndarray:
        return self.pack(state.stacked())

    def unpack(self, packed: np.ndarray) -> np.ndarray:
        """Packed ``(C, M)`` back to full-lattice coefficients ``(C, N, N, N)``."""
        c = packed.shape[0]
        half = np.zeros((c, int(np.prod(self.half_shape))), dtype=np.complex128)
        half[:, self.index] = packed
        half = half.reshape((c,) + self.half_shape)
        full = np.zeros((c,) + self.grid.shape, dtype=np.complex128)
        full[..., : self.half_shape[2]] = half
        mirror = conj_reflect(full)
        upper = self.grid.wavenumbers < 0
        full[..., upper] = mirror[..., upper]
        return full

    def unpack_state(self, packed: np.ndarray, t: float = 0.0) -> FlowState:
        return FlowState.from_stacked(self.grid, self.unpack(packed), t)


class Nonlinearity:
    """Fused evaluator of ``(0, N_eps[a, m])`` on packed coefficients.

    Calling the instance with ``u`` of shape ``(4, M)`` returns ``(4, M)``
    whose first row (the density equation) is zero.  The physical density
    perturbation of the last call is kept in ``last_eps_a`` for monitors.
    """

    def __init__(
        self,
        grid: GridSpec,
        params: PhysParams,
        helpers: str = "exact",
        density_floor: float = 0.0,
        layout: SpectralLayout | None = None,
    ) -> None:
        self.grid = grid
        self.params = params
        self.helpers = helpers
        self.density_floor = density_floor
        self.layout = layout or SpectralLayout(grid)
        self.last_eps_a: np.ndarray | None = None

    def __call__(self, u: np.ndarray) -> np.ndarray:
        lay, p = self.layout, self.params
        eps, kap = p.mach, p.kappa
        xi, k2 = lay.xi, lay.k2
        a_hat, m_hat = u[0], u[1:4]
        inputs = np.empty((8, lay.size), dtype=np.complex128)
        inputs[0] = a_hat
        inputs[1:4] = m_hat
        inputs[4:7] = 1j * xi * a_hat
        inputs[7] = -k2 * a_hat
        phys = lay.to_physical(inputs)
        a, m, grad_a, lap_a = phys[0], phys[1:4], phys[4:7], phys[7]
        _check_finite("state", phys)
        b = eps * a
        self.last_eps_a = b
        hp = _helpers(b, p, self.helpers, self.density_floor)
        ce = kap * eps**2
        prods = np.empty((10,) + self.grid.shape)
        im1 = hp.I - 1.0
        for n, (i, j) in enumerate(_PAIRS):
            prods[n] = im1 * m[i] * m[j] - ce * grad_a[i] * grad_a[j]
        prods[6:9] = hp.I * m
        prods[9] = ce * a * lap_a + 0.5 * ce * np.sum(grad_a * grad_a, axis=0) - hp.G / eps**2
        hat = lay.to_spectral(prods)
        out = np.zeros((4, lay.size), dtype=np.complex128)
        tensor = [[None] * 3 for _ in range(3)]
        for n, (i, j) in enumerate(_PAIRS):
            tensor[i][j] = tensor[j][i] = hat[n]
        y = hat[6:9]
        xy = np.sum(xi * y, axis=0)
        for i in range(3):
            out[1 + i] = (
                1j * sum(xi[j] * tensor[i][j] for j in range(3))
                + p.mu * k2 * y[i]
                + (p.mu + p.lam) * xi[i] * xy
                + 1j * xi[i] * hat[9]
            )
        _check_finite("nonlinearity", out)
        return out
