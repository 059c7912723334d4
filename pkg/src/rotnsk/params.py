"""Physical constants, the pressure law and its derived helper functions."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from math import sqrt
from typing import NamedTuple

import numpy as np

from .errors import InadmissibleDensityError

SERIES_RADIUS = 1e-2
_SERIES_TERMS = 16


def _gen_binom(gamma: float, n: int) -> float:
    """Generalized binomial coefficient ``gamma choose n``."""
    out = 1.0
    for i in range(n):
        out *= (gamma - i) / (i + 1)
    return out


@dataclass(frozen=True)
class PressureLaw:
    """Power law ``P(rho) = rho**gamma / gamma``, normalized so ``P'(1) = 1``."""

    gamma: float = 2.0

    def __post_init__(self) -> None:
        if not self.gamma > 1.0:
            raise ValueError(f"pressure exponent must exceed 1, got gamma={self.gamma}")

    def pressure(self, rho: np.ndarray) -> np.ndarray:
        return np.asarray(rho, dtype=float) ** self.gamma / self.gamma

    def dpressure(self, rho: np.ndarray) -> np.ndarray:
        return np.asarray(rho, dtype=float) ** (self.gamma - 1.0)

    @property
    def g2(self) -> float:
        """``G''(0) = J'(0) = gamma - 1``."""
        return self.gamma - 1.0


class PressureHelpers(NamedTuple):
    """Pointwise values of ``I``, ``J``, ``G`` and ``H`` at ``b``."""

    I: np.ndarray
    J: np.ndarray
    G: np.ndarray
    H: np.ndarray


def eval_pressure_helpers(
    b: np.ndarray, law: PressureLaw | None = None, floor: float = 0.0
) -> PressureHelpers:
    """Evaluate the helper functions at density perturbation ``b = eps * a``.

    * ``I(b) = b / (1 + b)``
    * ``J(b) = P'(1 + b) - 1 = (1 + b)**(gamma - 1) - 1``
    * ``G(b) = int_0^b J = ((1 + b)**gamma - 1) / gamma - b``
    * ``H(b) = G(b) / b**2 - (gamma - 1) / 2``

    ``H`` has a removable singularity at zero; below ``|b| < 1e-2`` it is
    evaluated from the binomial series of ``G``, which there is more
    accurate than the cancelling closed form.

    Raises
    ------
    InadmissibleDensityError
        If ``1 + b <= floor`` anywhere.
    """
    law = law or PressureLaw()
    b = np.asarray(b, dtype=float)
    rho = 1.0 + b
    if np.any(rho <= floor):
        raise InadmissibleDensityError(
            f"density {float(np.min(rho)):.4g} at or below floor {floor:.4g}"
        )
    gamma = law.gamma
    log_rho = np.log1p(b)
    I = b / rho
    J = np.expm1((gamma - 1.0) * log_rho)
    G = np.expm1(gamma * log_rho) / gamma - b

    small = np.abs(b) < SERIES_RADIUS
    H = np.empty_like(b)
    big = ~small
    H[big] = G[big] / b[big] ** 2 - 0.5 * law.g2
    if np.any(small):
        bs = b[small]
        acc = np.zeros_like(bs)
        for n in range(_SERIES_TERMS, 2, -1):
            acc = acc * bs + _gen_binom(gamma, n) / gamma
        H[small] = acc * bs
        # G itself loses relative accuracy near zero; use the series there too.
        G[small] = bs**2 * (0.5 * law.g2 + H[small])
    return PressureHelpers(I, J, G, H)


def linear_helpers(b: np.ndarray, law: PressureLaw | None = None) -> PressureHelpers:
    """Helpers frozen to lowest order: ``I = b``, ``J = (gamma-1) b``, ``G = (gamma-1) b^2/2``.

    The resulting nonlinearity is exactly quadratic (plus the capillary
    terms), which admits a direct convolution-sum oracle.
    """
    law = law or PressureLaw()
    b = np.asarray(b, dtype=float)
    return PressureHelpers(b.copy(), law.g2 * b, 0.5 * law.g2 * b * b, np.zeros_like(b))


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of the reformulated system.

    Parameters
    ----------
    mu, lam : float
        Shear and second viscosities; ``mu > 0`` and ``2 mu + lam > 0``.
    kappa : float
        Capillarity coefficient, positive.
    mach : float
        Mach number ``eps``, positive.
    rotation : float
        Rotation speed ``Omega`` (any sign).
    pressure : PressureLaw
    """

    mu: float = 1.0
    lam: float = -1.0
    kappa: float = 1.0
    mach: float = 1.0
    rotation: float = 0.0
    pressure: PressureLaw = field(default_factory=PressureLaw)

    def __post_init__(self) -> None:
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if not 2 * self.mu + self.lam > 0:
            raise ValueError(f"2*mu + lam must be positive, got {2 * self.mu + self.lam}")
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not self.mach > 0:
            raise ValueError(f"mach number must be positive, got {self.mach}")

    @property
    def nu(self) -> float:
        return 2.0 * self.mu + self.lam

    @property
    def mu_lower(self) -> float:
        return min(self.mu, 1.0)

    @property
    def eta(self) -> float:
        """Cross-term weight ``min{1/2, kappa/2, kappa*mu_/2, mu_/4, sqrt(kappa)}``."""
        ml = self.mu_lower
        return min(0.5, self.kappa / 2.0, self.kappa * ml / 2.0, ml / 4.0, sqrt(self.kappa))

    @property
    def rotation_mach(self) -> float:
        """The threshold ``|Omega| * eps`` separating low and higher frequencies."""
        return abs(self.rotation) * self.mach

    def replace(self, **changes) -> "PhysParams":
        return replace(self, **changes)


__all__ = [
    "PressureLaw",
    "PressureHelpers",
    "PhysParams",
    "eval_pressure_helpers",
    "linear_helpers",
]
