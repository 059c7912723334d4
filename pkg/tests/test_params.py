"""Physical constants and the pressure helper functions."""

import numpy as np
import pytest

from rotnsk.errors import InadmissibleDensityError
from rotnsk.params import (
    SERIES_RADIUS,
    PhysParams,
    PressureLaw,
    eval_pressure_helpers,
    linear_helpers,
)


class TestPressureHelpers:
    """I, J, G and H at density perturbation b."""

    def test_zero(self):
        hp = eval_pressure_helpers(np.zeros(5), PressureLaw(1.4))
        for arr in hp:
            assert np.all(arr == 0.0)

    def test_quadratic_law(self):
        """gamma = 2: J = b, G = b^2 / 2, H = 0."""
        b = np.linspace(-0.5, 0.8, 27)
        law = PressureLaw(2.0)
        hp = eval_pressure_helpers(b, law)
        assert law.g2 == 1.0
        assert np.allclose(hp.J, b, atol=1e-15)
        assert np.allclose(hp.G, b * b / 2, atol=1e-15)
        assert np.allclose(hp.H, 0.0, atol=1e-12)

    def test_half_density_contrast(self):
        assert eval_pressure_helpers(np.array([1.0])).I[0] == 0.5

    def test_closed_forms(self):
        """Generic gamma: helpers match their defining formulas away from zero."""
        g = 1.4
        b = np.array([-0.6, -0.1, 0.05, 0.3, 2.0])
        hp = eval_pressure_helpers(b, PressureLaw(g))
        assert np.allclose(hp.I, b / (1 + b))
        assert np.allclose(hp.J, (1 + b) ** (g - 1) - 1)
        G = ((1 + b) ** g - 1) / g - b
        assert np.allclose(hp.G, G, rtol=1e-12)
        assert np.allclose(hp.H, G / b**2 - (g - 1) / 2, rtol=1e-10)

    def test_series_branch_continuous(self):
        """H and G agree across the switch to the binomial series."""
        law = PressureLaw(1.4)
        for edge in (SERIES_RADIUS, -SERIES_RADIUS):
            b = np.array([np.nextafter(edge, 0.0), edge])  # one ulp apart
            hp = eval_pressure_helpers(b, law)
            assert abs(hp.H[0] - hp.H[1]) <= 1e-9 * abs(hp.H[1])
            assert abs(hp.G[0] - hp.G[1]) <= 1e-9 * abs(hp.G[1])

    def test_series_slope(self):
        """Near zero H(b) ~ (gamma - 1)(gamma - 2) b / 6."""
        g = 1.4
        b = np.array([1e-7, -3e-6])
        hp = eval_pressure_helpers(b, PressureLaw(g))
        assert np.allclose(hp.H, (g - 1) * (g - 2) / 6 * b, rtol=1e-4)

    def test_series_against_extended_precision(self):
        """Inside the series radius G matches a 50-digit evaluation of its closed form."""
        from decimal import Decimal, getcontext

        getcontext().prec = 50
        g = Decimal("1.4")
        for bf in (3e-3, -7e-3, 2e-6):
            b = Decimal(bf)
            G = ((1 + b) ** g - 1) / g - b
            got = eval_pressure_helpers(np.array([bf]), PressureLaw(1.4)).G[0]
            assert abs(Decimal(got) - G) <= Decimal(1e-14) * abs(G)

    def test_floor(self):
        with pytest.raises(InadmissibleDensityError):
            eval_pressure_helpers(np.array([0.0, -1.0]))
        with pytest.raises(InadmissibleDensityError):
            eval_pressure_helpers(np.array([-0.95]), floor=0.1)

    def test_linear_helpers(self):
        b = np.array([0.2, -0.3])
        hp = linear_helpers(b, PressureLaw(1.4))
        assert np.allclose(hp.I, b)
        assert np.allclose(hp.J, 0.4 * b)
        assert np.allclose(hp.G, 0.2 * b * b)
        assert np.all(hp.H == 0)


class TestPhysParams:
    """Validation and derived constants."""

    def test_defaults(self):
        p = PhysParams()
        assert p.nu == 1.0
        assert p.eta == 0.25
        assert p.rotation_mach == 0.0

    def test_eta_branches(self):
        assert PhysParams(mu=4.0, kappa=4.0).eta == 0.25  # mu_ = min(mu, 1) caps eta at 1/4
        assert PhysParams(mu=1.0, kappa=0.25).eta == pytest.approx(0.125)
        assert PhysParams(mu=0.5, lam=0.0, kappa=1.0).eta == pytest.approx(0.125)

    def test_rotation_mach(self):
        assert PhysParams(rotation=-64, mach=1 / 256).rotation_mach == 0.25

    @pytest.mark.parametrize(
        "kw", [dict(mu=0.0), dict(mu=1.0, lam=-2.5), dict(kappa=0.0), dict(mach=0.0)]
    )
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            PhysParams(**kw)

    def test_pressure_law_rejects(self):
        with pytest.raises(ValueError):
            PressureLaw(1.0)

    def test_replace(self):
        p = PhysParams().replace(rotation=3.0)
        assert p.rotation == 3.0 and p.mu == 1.0
