"""Fourier-Lebesgue, Besov, Fourier-Besov, truncated and Chemin-Lerner norms."""

import warnings

import numpy as np
import pytest

from rotnsk.dyadic import default_partition
from rotnsk.errors import UnresolvedSupportWarning
from rotnsk.grid import GridSpec, SpectralField, gradient
from rotnsk.harmonic import annulus_volume, random_band_limited
from rotnsk.norms import (
    NormSpec,
    TimeTrace,
    TruncationBand,
    besov_norm,
    block_norms,
    chemin_lerner_norm,
    conjugate_exponent,
    fourier_besov_norm,
    fourier_lebesgue_norm,
    lebesgue_norm,
    norm,
    plain_time_norm,
    time_lr,
    trapezoid_weights,
    truncated_norm,
    unresolved_mass,
    weighted_lp,
)


def one_coefficient(grid, k, amp):
    c = np.zeros(grid.shape, dtype=complex)
    c[grid.mode_index(k)] = amp
    return SpectralField(grid, c)


def real_mode(grid, k, amp):
    c = np.zeros(grid.shape, dtype=complex)
    c[grid.mode_index(k)] = amp
    c[grid.mode_index(tuple(-x for x in k))] = amp
    return SpectralField(grid, c)


class TestElementary:
    """Exponents, weighted sums and validation."""

    @pytest.mark.parametrize("p,expect", [(1, np.inf), (2, 2.0), (4, 4 / 3), (np.inf, 1.0)])
    def test_conjugate(self, p, expect):
        assert conjugate_exponent(p) == expect

    def test_conjugate_rejects(self):
        with pytest.raises(ValueError):
            conjugate_exponent(0.5)

    def test_weighted_lp(self):
        v = np.array([3.0, -4.0])
        assert weighted_lp(v, 1.0, 2) == pytest.approx(5.0)
        assert weighted_lp(v, 2.0, 1) == pytest.approx(14.0)
        assert weighted_lp(v, np.array([1.0, 0.0]), np.inf) == 3.0

    def test_normspec_validation(self):
        with pytest.raises(ValueError):
            NormSpec(0.0, p=0.5)
        with pytest.raises(ValueError):
            NormSpec(0.0, flavor="sobolev")

    def test_band_validation(self):
        with pytest.raises(ValueError):
            TruncationBand("middle", 1.0)
        with pytest.raises(ValueError):
            TruncationBand("middle", 2.0, 1.0)
        with pytest.raises(ValueError):
            TruncationBand("side", 1.0)

    def test_band_selection(self):
        js = np.arange(-2, 4)
        assert list(TruncationBand("low", 1.0).selects(js)) == [True, True, True, False, False, False]
        assert list(TruncationBand("middle", 1.0, 4.0).selects(js)) == [False, False, False, True, True, False]
        assert list(TruncationBand("high", 1.0, 4.0).selects(js)) == [False] * 5 + [True]


class TestFourierLebesgue:
    """Coefficient L^{p'} norms with cell weight (2 pi / L)^3."""

    def test_single_mode(self):
        """One coefficient A at p = 2 gives A (2 pi / L)^{3/2}."""
        g = GridSpec(3.0, 16)
        f = one_coefficient(g, (2, 1, 0), 1.7)
        assert fourier_lebesgue_norm(f, 2) == pytest.approx(1.7 * (2 * np.pi / 3.0) ** 1.5, rel=1e-14)

    def test_p_infinity_is_weighted_sum(self, grid16, rng):
        c = np.abs(rng.normal(size=grid16.shape))
        f = SpectralField(grid16, c)
        assert fourier_lebesgue_norm(f, np.inf) == pytest.approx(np.sum(c) * grid16.cell_volume, rel=1e-13)

    def test_homogeneous(self, grid16):
        f = random_band_limited(grid16, 4, seed=0)
        assert fourier_lebesgue_norm(f * -2.5, 3) == pytest.approx(2.5 * fourier_lebesgue_norm(f, 3), rel=1e-14)

    def test_lebesgue_constant(self, grid16):
        f = one_coefficient(grid16, (0, 0, 0), grid16.L**3)
        assert lebesgue_norm(f, 2) == pytest.approx(grid16.L**1.5)


class TestBesovNorms:
    """Homogeneous Besov and Fourier-Besov norms."""

    def test_plancherel(self, grid32):
        """At p = 2 the two flavors differ exactly by (2 pi)^{3/2}."""
        f = random_band_limited(grid32, 5, seed=7)
        for s, sigma in ((0.5, 1.0), (-1.0, 2.0), (1.5, np.inf)):
            fb = fourier_besov_norm(f, NormSpec(s, 2, sigma))
            b = besov_norm(f, NormSpec(s, 2, sigma, "besov"))
            assert fb == pytest.approx((2 * np.pi) ** 1.5 * b, rel=1e-10)

    def test_single_mode_exclusive_band(self):
        """A mode at |xi| = 1.4 2^j contributes 2^{js} times its Fourier-Lebesgue norm."""
        g = GridSpec(2 * np.pi / 0.7, 32)
        f = real_mode(g, (4, 0, 0), 2.0)
        s, p = 0.75, 3.0
        expect = 2.0 ** (s * 1) * fourier_lebesgue_norm(f, p)
        assert fourier_besov_norm(f, NormSpec(s, p, 1.0)) == pytest.approx(expect, rel=1e-14)
        vals = block_norms(f, p)
        assert np.count_nonzero(vals) == 1

    def test_derivative_equivalence(self, grid32):
        """Per block, |xi| f is within [3/4, 8/3] 2^j of f; the component sum adds at most sqrt 3."""
        f = random_band_limited(grid32, 9, seed=8)
        dec = default_partition(grid32)
        base = block_norms(f, 2.0)[0]
        mult = block_norms(SpectralField(grid32, grid32.xi_norm * f.coeffs), 2.0)[0]
        grad = block_norms(gradient(f), 2.0).sum(axis=0)
        scale = 2.0**dec.blocks
        assert np.all(mult >= 0.75 * scale * base * (1 - 1e-12))
        assert np.all(mult <= 8 / 3 * scale * base * (1 + 1e-12))
        assert np.all(grad >= mult * (1 - 1e-12))
        assert np.all(grad <= np.sqrt(3) * mult * (1 + 1e-12))

    def test_norm_dispatch(self, grid32):
        f = random_band_limited(grid32, 5, seed=1)
        spec = NormSpec(0.3, 2.5, 1.0, "besov")
        assert norm(f, spec) == besov_norm(f, spec)

    def test_unresolved_warning(self, grid32):
        f = real_mode(grid32, (12, 0, 0), 1.0)
        with pytest.warns(UnresolvedSupportWarning):
            fourier_besov_norm(f, NormSpec(0.0))
        assert unresolved_mass(f) == 1.0

    def test_resolved_field_is_silent(self, grid32):
        f = random_band_limited(grid32, 5, seed=1)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fourier_besov_norm(f, NormSpec(0.0))

    def test_embedding_bound(self, grid32):
        """Lowering integrability costs at most the annulus volume to the power 1/p1 - 1/p2."""
        p1, p2, s = 2.0, 4.0, 1.0
        shift = 3 * (1 / p1 - 1 / p2)
        dec = default_partition(grid32)
        vol = max(annulus_volume(grid32, int(j)) / 2.0 ** (3 * j) for j in dec.blocks)
        bound = vol ** (1 / p1 - 1 / p2)
        ratios = []
        for seed in range(100):
            f = random_band_limited(grid32, 5.5, seed=seed)
            lhs = fourier_besov_norm(f, NormSpec(s - shift, p2, 1.0))
            ratios.append(lhs / fourier_besov_norm(f, NormSpec(s, p1, 1.0)))
        assert np.all(np.isfinite(ratios))
        assert max(ratios) <= bound


class TestTruncatedNorms:
    """Low, middle and high block selections."""

    def test_bands_partition_the_norm(self, grid32):
        f = random_band_limited(grid32, 6, seed=2)
        spec = NormSpec(0.5, 2.5, 1.0)
        alpha, beta = 0.5, 2.0
        parts = (
            truncated_norm(f, spec, TruncationBand("low", alpha))
            + truncated_norm(f, spec, TruncationBand("middle", alpha, beta))
            + truncated_norm(f, spec, TruncationBand("high", alpha, beta))
        )
        assert parts == pytest.approx(fourier_besov_norm(f, spec), rel=1e-12)

    def test_high_support(self, grid32):
        f = real_mode(grid32, (0, 6, 0), 1.0)  # only blocks 2 and above
        spec = NormSpec(0.0)
        assert truncated_norm(f, spec, TruncationBand("low", 1.0)) == 0.0
        assert truncated_norm(f, spec, TruncationBand("middle", 1.0, 2.0)) == 0.0
        assert truncated_norm(f, spec, TruncationBand("high", 2.0)) > 0.0

    def test_threshold_matches_filter(self, grid32):
        """alpha = |Omega| eps: the low norm equals the brute-force sum over 2^j <= alpha."""
        f = random_band_limited(grid32, 6, seed=3)
        alpha = 64 * (1 / 32)
        spec = NormSpec(-0.5, 2.0, 1.0)
        dec = default_partition(grid32)
        vals = block_norms(f, 2.0)[0]
        brute = sum(2.0 ** (-0.5 * j) * v for j, v in zip(dec.blocks, vals) if 2.0**j <= alpha)
        assert truncated_norm(f, spec, TruncationBand("low", alpha)) == pytest.approx(brute, rel=1e-14)


class TestTimeNorms:
    """Trapezoid weights, traces and Chemin-Lerner aggregation."""

    def test_trapezoid(self):
        t = np.array([0.0, 0.5, 2.0, 3.0])
        w = trapezoid_weights(t)
        assert np.all(w > 0)
        assert np.sum(w) == pytest.approx(3.0)

    def test_trace_errors(self):
        tr = TimeTrace(np.arange(3))
        with pytest.raises(ValueError):
            chemin_lerner_norm(tr, NormSpec(0.0), 2.0)
        tr.append(0.0, np.ones(3))
        with pytest.raises(ValueError):
            tr.append(0.0, np.ones(3))
        with pytest.raises(ValueError):
            tr.append(1.0, np.ones(4))

    def test_constant_in_time(self, grid32):
        f = random_band_limited(grid32, 5, seed=4)
        spec = NormSpec(0.5, 2.0, 1.0)
        times = np.linspace(0.0, 2.5, 6)
        trace = TimeTrace.from_fields(times, [f] * len(times))
        static = fourier_besov_norm(f, spec)
        assert chemin_lerner_norm(trace, spec, np.inf) == pytest.approx(static, rel=1e-14)
        assert chemin_lerner_norm(trace, spec, 1.0) == pytest.approx(2.5 * static, rel=1e-14)

    def test_minkowski_both_directions(self, rng):
        """r >= sigma: plain <= tilde; r <= sigma: tilde <= plain."""
        js = np.arange(-2, 3)
        for _ in range(20):
            tr = TimeTrace(js)
            for t in np.cumsum(rng.uniform(0.1, 1.0, size=8)):
                tr.append(t, rng.uniform(0, 1, size=(1, js.size)) ** 3)
            for r, sigma in ((4.0, 1.0), (2.0, 2.0), (1.0, 3.0), (1.0, np.inf)):
                spec = NormSpec(0.3, 2.0, sigma)
                tilde = chemin_lerner_norm(tr, spec, r)
                plain = plain_time_norm(tr, spec, r)
                if r >= sigma:
                    assert plain <= tilde * (1 + 1e-12)
                if r <= sigma:
                    assert tilde <= plain * (1 + 1e-12)

    def test_time_lr_infinity(self):
        vals = np.array([[1.0], [-3.0], [2.0]])
        assert time_lr(vals, np.ones(3), np.inf)[0] == 3.0
