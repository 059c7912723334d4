"""ETD2 stepping, Picard iteration, a priori trackers and global runs."""

import math

import numpy as np
import pytest

from rotnsk.errors import ConfigurationError, GridMismatchError, ResolutionError
from rotnsk.expm import expm
from rotnsk.grid import FlowState, GridSpec, SpectralField
from rotnsk.harmonic import random_band_limited
from rotnsk.linear import assemble_mode_matrix, propagate_linear
from rotnsk.nonlinear import SpectralLayout
from rotnsk.norms import NormSpec, fourier_besov_norm
from rotnsk.params import PhysParams
from rotnsk.solver import (
    AprioriTracker,
    ETDStepper,
    SolverConfig,
    Trajectory,
    check_tracker_exponents,
    etd_step,
    global_run,
    pack_data,
    picard_local_solve,
    suggest_step,
    track_apriori,
)

PARAMS = PhysParams(mach=0.5, rotation=2.0)


@pytest.fixture
def grid():
    return GridSpec(2 * np.pi, 16)


def random_state(grid, seed, amp_a=0.1, amp_m=0.1, kmax=3):
    a = random_band_limited(grid, kmax, seed=seed, amplitude=amp_a)
    m = random_band_limited(grid, kmax, seed=seed + 1, rank="vector", amplitude=amp_m)
    return FlowState(a, m)


def run_etd(layout, params, u0, h, n, nonlinearity=None):
    stepper = ETDStepper(layout, params, h, nonlinearity)
    u = u0
    for _ in range(n):
        u = stepper.step(u)
    return u


class TestETD:
    """Exponential time differencing on packed states."""

    def test_zero_forcing_is_exact(self, grid):
        st = random_state(grid, 1, 1.0, 1.0)
        lay = SpectralLayout(grid)
        u = run_etd(lay, PARAMS, pack_data(lay, st), 0.1, 5, lambda v: np.zeros_like(v))
        ref = lay.pack(propagate_linear(st, 0.5, 0.1, PARAMS).states[-1])
        assert np.max(np.abs(u - ref)) <= 1e-12 * np.max(np.abs(ref))

    def test_linear_forcing_second_order(self, grid):
        """N(u) = c u has exact solution e^{t(A + c)} u0; the global error falls like h^2."""
        st = random_state(grid, 2, 1.0, 1.0)
        lay = SpectralLayout(grid)
        u0 = pack_data(lay, st)
        c, T = 0.8, 0.4
        mats = assemble_mode_matrix(lay.xi.T, PARAMS).entries
        exact = np.einsum("mij,jm->im", expm(T * (mats + c * np.eye(4))), u0)
        errs = []
        for n in (4, 8, 16):
            u = run_etd(lay, PARAMS, u0, T / n, n, lambda v: c * v)
            errs.append(np.max(np.abs(u - exact)) / np.max(np.abs(exact)))
        assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
        assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.2)

    def test_self_convergence(self, grid):
        """Full nonlinear runs at h, h/2, h/4: successive differences shrink by 4."""
        st = random_state(grid, 3, 0.3, 0.5)
        lay = SpectralLayout(grid)
        u0 = pack_data(lay, st)
        T = 0.2
        sols = [run_etd(lay, PARAMS, u0, T / n, n) for n in (5, 10, 20, 40)]
        d = [np.max(np.abs(sols[i + 1] - sols[i])) for i in range(3)]
        assert d[0] / d[1] == pytest.approx(4.0, rel=0.2)
        assert d[1] / d[2] == pytest.approx(4.0, rel=0.2)

    def test_mass_conserved(self, grid):
        """The mean of the density perturbation is untouched by every step."""
        st = random_state(grid, 4, 0.3, 0.5)
        c = st.a.coeffs.copy()
        c[0, 0, 0] = 2.5
        st = FlowState(SpectralField(grid, c), st.m)
        lay = SpectralLayout(grid)
        u = run_etd(lay, PARAMS, pack_data(lay, st), 0.02, 10)
        assert u[0, lay.zero_mode] == pytest.approx(2.5, abs=1e-12)

    def test_etd_step_wrapper(self, grid):
        st = random_state(grid, 5)
        lay = SpectralLayout(grid)
        ref = run_etd(lay, PARAMS, pack_data(lay, st), 0.05, 1)
        out = etd_step(st, 0.05, PARAMS)
        assert out.t == pytest.approx(0.05)
        assert np.allclose(lay.pack_state(out), ref, rtol=0, atol=1e-14 * np.max(np.abs(ref)))

    def test_shape_checked(self, grid):
        stepper = ETDStepper(SpectralLayout(grid), PARAMS, 0.1)
        with pytest.raises(GridMismatchError):
            stepper.step(np.zeros((4, 3), dtype=complex))
        with pytest.raises(ConfigurationError):
            ETDStepper(SpectralLayout(grid), PARAMS, 0.0)


class TestPackData:
    """Resolution guard on input data."""

    def test_rejects_modes_beyond_cutoff(self, grid):
        st = random_state(grid, 1, kmax=7)
        with pytest.raises(ResolutionError):
            pack_data(SpectralLayout(grid), st)

    def test_grid_mismatch(self, grid):
        with pytest.raises(GridMismatchError):
            pack_data(SpectralLayout(GridSpec(2 * np.pi, 8)), random_state(grid, 1))


class TestSolverConfig:
    """Validation of run settings and tracker exponents."""

    @pytest.mark.parametrize(
        "kw",
        [
            dict(h=0.0),
            dict(T=-1.0),
            dict(T=0.25, h=0.1),
            dict(helpers="cubic"),
            dict(dealias="none"),
            dict(sample_every=0),
            dict(eps_a_window=1.0),
            dict(growth_bound=1.0),
            dict(beta=0.0),
        ],
    )
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            SolverConfig(**kw)

    def test_steps_and_split(self):
        cfg = SolverConfig(h=0.02, T=1.0)
        assert cfg.n_steps == 50
        assert cfg.split(PhysParams(rotation=64, mach=1 / 256)) == (0.25, 4.0)
        assert cfg.replace(beta=2.0).split(PhysParams(rotation=64, mach=1 / 256)) == (0.25, 2.0)

    @pytest.mark.parametrize(
        "pqr,msg",
        [
            ((2.0, 3.0, 8.0), "p < q < 3"),
            ((2.0, 2.5, 2.0), "2 < r"),
            ((2.0, 2.5, 4.0), "1/r <= 1/p - 1/q"),
        ],
    )
    def test_tracker_exponents(self, pqr, msg):
        with pytest.raises(ConfigurationError, match=msg.replace("(", r"\(").replace(")", r"\)")):
            check_tracker_exponents(*pqr)

    def test_default_exponents_admissible(self):
        check_tracker_exponents(2.0, 2.75, 8.0)

    def test_last_condition_implied(self, rng):
        """For q < 10/3 the bound 1/r <= 3/(2q) - 1/4 follows from 1/r <= 1/p - 1/q."""
        for _ in range(1000):
            p = rng.uniform(2.0, 2.99)
            q = rng.uniform(p, 3.0)
            assert 1 / p - 1 / q <= 3 / (2 * q) - 0.25


class TestTracker:
    """A priori functionals."""

    config = SolverConfig(h=0.1, T=1.0)

    def constant_trajectory(self, st, times):
        lay = SpectralLayout(st.grid)
        u = pack_data(lay, st)
        return Trajectory(lay, np.asarray(times), np.stack([u] * len(times)))

    def test_zero_trajectory(self, grid):
        traj = self.constant_trajectory(FlowState.zeros(grid), [0.0, 0.5, 1.0])
        tr = track_apriori(traj, PARAMS, self.config)
        assert tr.energy == 0 and tr.dispersive == 0 and tr.mid_band == 0
        assert tr.growth == 1.0

    def test_energy_of_static_state(self, grid):
        """A state frozen for time T: sup norms plus T times the L^1 integrand, from full-lattice norms."""
        st = random_state(grid, 6, 1.0, 1.0)
        T = 0.6
        tr = track_apriori(self.constant_trajectory(st, [0.0, 0.2, 0.6]), PARAMS, self.config)
        eps = PARAMS.mach
        grad = SpectralField(grid, 1j * grid.xi_deriv * st.a.coeffs[None] * eps)
        p = 2.0

        def bes(s):
            return sum(fourier_besov_norm(f, NormSpec(s, p, 1.0)) for f in (st.a, grad, st.m))

        expect = bes(3 / p - 3) + bes(3 / p - 1) + T * bes(3 / p + 1)
        assert tr.energy == pytest.approx(expect, rel=1e-10)
        assert tr.data_norm == pytest.approx(bes(3 / p - 3) + bes(3 / p - 1), rel=1e-10)

    def test_functionals_nondecreasing(self, grid):
        out = global_run(random_state(grid, 7, 0.3, 0.5), PARAMS, SolverConfig(h=0.05, T=0.5))
        for name in ("energy", "dispersive", "mid_band"):
            vals = [getattr(r, name) for r in out.rows]
            assert np.all(np.diff(vals) >= 0), name

    def test_window_violation_step(self, grid):
        """The first sample with |eps a| above the window is recorded."""
        base = random_state(grid, 8, 1.0, 0.0)
        lay = SpectralLayout(grid)
        u = pack_data(lay, base)
        peak = np.max(np.abs(lay.to_physical(u[:1])))
        cfg = SolverConfig(h=0.1, T=1.0, eps_a_window=0.3)
        tr = AprioriTracker(lay, PARAMS, cfg)
        scales = np.array([0.1, 0.25, 0.55, 0.7, 0.2]) / (PARAMS.mach * peak)
        for k, s in enumerate(scales):
            tr.observe(k, 0.1 * k, u * s)
        assert tr.window_violation == 2
        assert tr.rows[2].eps_a_max == pytest.approx(0.55)

    def test_samples_must_advance(self, grid):
        lay = SpectralLayout(grid)
        tr = AprioriTracker(lay, PARAMS, self.config)
        u = pack_data(lay, random_state(grid, 1))
        tr.observe(0, 0.0, u)
        with pytest.raises(ValueError):
            tr.observe(1, 0.0, u)

    def test_mid_band_selection(self, grid):
        """Blocks with |Omega| eps < 2^j <= beta only."""
        cfg = SolverConfig(h=0.1, T=1.0, beta=2.0)
        tr = AprioriTracker(SpectralLayout(grid), PhysParams(rotation=1.0, mach=0.5), cfg)
        assert list(tr.js[tr.mid_select]) == [0.0, 1.0]


class TestPicard:
    """Fixed-point iteration of the Duhamel map."""

    def test_zero_data(self, grid):
        rep = picard_local_solve(FlowState.zeros(grid), PARAMS, SolverConfig(h=0.01, T=0.05))
        assert rep.converged and rep.iterations == 1
        assert not np.any(rep.trajectory.packed)

    def test_small_data_contracts(self, grid):
        rep = picard_local_solve(random_state(grid, 9, 0.05, 0.05), PARAMS, SolverConfig(h=0.01, T=0.05))
        assert rep.converged
        assert all(r < 1 for r in rep.ratios)

    def test_agrees_with_etd(self, grid):
        """Both schemes are second order, so their gap shrinks by 4 when h halves."""
        st = random_state(grid, 10, 0.2, 0.3)
        lay = SpectralLayout(grid)
        gaps = []
        for h in (0.02, 0.01, 0.005):
            rep = picard_local_solve(st, PARAMS, SolverConfig(h=h, T=0.1))
            etd = run_etd(lay, PARAMS, pack_data(lay, st), h, int(round(0.1 / h)))
            gaps.append(np.max(np.abs(rep.trajectory.packed[-1] - etd)) / np.max(np.abs(etd)))
        assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.25)
        assert gaps[1] / gaps[2] == pytest.approx(4.0, rel=0.25)

    def test_large_data_flagged(self, grid):
        cfg = SolverConfig(h=0.05, T=0.5, picard_max_iter=15, picard_ball=1.0)
        rep = picard_local_solve(random_state(grid, 11, 3.0, 20.0), PhysParams(mach=0.3), cfg)
        assert rep.outside_ball
        assert rep.status == "picard_divergence"
        assert rep.trajectory is None


class TestGlobalRun:
    """Monitored marching."""

    def test_zero_data_bounded(self, grid):
        out = global_run(FlowState.zeros(grid), PARAMS, SolverConfig(h=0.1, T=0.5))
        assert out.status == "bounded"
        assert out.max_growth == 1.0
        assert out.t_final == pytest.approx(0.5)
        assert len(out.rows) == 6

    def test_inadmissible_density_is_a_status(self, grid):
        st = random_state(grid, 12, 10.0, 0.0)
        out = global_run(st, PhysParams(mach=0.5), SolverConfig(h=0.01, T=0.1))
        assert out.status == "inadmissible_density"
        assert out.steps == 0

    def test_growth_bound(self, grid):
        """The L^1 part of the energy grows with time, so a tight bound trips."""
        out = global_run(random_state(grid, 13), PARAMS, SolverConfig(h=0.1, T=2.0, growth_bound=1.01))
        assert out.status == "norm_growth"
        assert out.max_growth > 1.01
        assert out.t_final < 2.0

    def test_halving_retries(self, grid):
        cfg = SolverConfig(h=0.1, T=2.0, growth_bound=1.01, max_halvings=2)
        out = global_run(random_state(grid, 13), PARAMS, cfg)
        assert out.h == pytest.approx(0.025)

    def test_sampling_and_snapshots(self, grid):
        out = global_run(random_state(grid, 14), PARAMS, SolverConfig(h=0.1, T=1.0, sample_every=3), snapshot_every=5)
        assert [r.step for r in out.rows] == [0, 3, 6, 9, 10]
        assert [s.t for s in out.snapshots] == pytest.approx([0.0, 0.5, 1.0])
        assert out.final_state.t == pytest.approx(1.0)

    def test_suggest_step(self, grid):
        assert suggest_step(FlowState.zeros(grid), PARAMS) == math.inf
        h = suggest_step(random_state(grid, 15, 0.5, 1.0), PARAMS)
        assert 0 < h < 1
