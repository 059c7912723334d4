"""Time stepping, Picard iteration and a priori functional tracking.

States are held on the packed dealiased half spectrum of
:class:`~rotnsk.nonlinear.SpectralLayout` as arrays of shape ``(4, M)``
(rows ``a, m1, m2, m3``).  The linear part is propagated exactly per mode;
the nonlinear forcing enters through the phi-functions of the mode matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dyadic import DyadicDecomposition, resolve_partition
from .errors import (
    ConfigurationError,
    GridMismatchError,
    InadmissibleDensityError,
    NonFiniteError,
    ResolutionError,
)
from .expm import exp_and_phi
from .grid import FlowState, GridSpec
from .linear import LinearTrajectory, assemble_mode_matrix
from .nonlinear import Nonlinearity, SpectralLayout
from .norms import conjugate_exponent, time_lr, trapezoid_weights, weighted_lp
from .params import PhysParams

STATUSES = ("bounded", "norm_growth", "inadmissible_density", "picard_divergence")
HELPER_ORDERS = ("exact", "linear")
N_COMPONENTS = 7  # a, eps d1 a, eps d2 a, eps d3 a, m1, m2, m3
_EXPM_CHUNK = 4096


@dataclass(frozen=True)
class SolverConfig:
    """Step size, horizon, monitor thresholds and tracker exponents."""

    h: float = 1e-2
    T: float = 1.0
    p: float = 2.0
    q: float = 2.75
    r: float = 8.0
    picard_tol: float = 1e-10
    picard_max_iter: int = 40
    picard_ball: float = math.inf
    density_floor: float = 0.0
    eps_a_window: float = 0.5
    c1: float = 1.0
    growth_bound: float = 4.0
    beta: float | None = None
    sample_every: int = 1
    helpers: str = "exact"
    max_halvings: int = 0
    dealias: str = "two_thirds"
    trackers: bool = True

    def __post_init__(self) -> None:
        if not self.h > 0:
            raise ConfigurationError(f"step size h must be positive, got {self.h}")
        if not self.T >= 0:
            raise ConfigurationError(f"horizon T must be nonnegative, got {self.T}")
        if abs(round(self.T / self.h) * self.h - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigurationError(f"horizon T={self.T} is not a multiple of h={self.h}")
        if self.helpers not in HELPER_ORDERS:
            raise ConfigurationError(f"helpers must be one of {HELPER_ORDERS}, got {self.helpers!r}")
        if self.dealias != "two_thirds":
            raise ConfigurationError(f"unsupported dealias rule {self.dealias!r}")
        if self.sample_every < 1 or self.picard_max_iter < 1 or self.max_halvings < 0:
            raise ConfigurationError("sample_every and picard_max_iter must be >= 1, max_halvings >= 0")
        if not 0 < self.eps_a_window < 1 or not 0 <= self.density_floor < 1:
            raise ConfigurationError("need 0 < eps_a_window < 1 and 0 <= density_floor < 1")
        if not self.growth_bound > 1:
            raise ConfigurationError(f"growth_bound must exceed 1, got {self.growth_bound}")
        if self.beta is not None and not self.beta > 0:
            raise ConfigurationError(f"beta must be positive, got {self.beta}")
        if self.trackers:
            check_tracker_exponents(self.p, self.q, self.r)

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.h))

    def split(self, params: PhysParams) -> tuple[float, float]:
        """``(alpha, beta)`` of the middle band: ``alpha = |Omega| eps``, ``beta`` default ``16 alpha``."""
        alpha = params.rotation_mach
        beta = 16.0 * alpha if self.beta is None else self.beta
        return alpha, beta

    def replace(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


def check_tracker_exponents(p: float, q: float, r: float) -> None:
    """Raise :class:`ConfigurationError` naming the first violated exponent condition."""
    if not 2 <= p < q < 3:
        raise ConfigurationError(f"need 2 <= p < q < 3, got p={p}, q={q}")
    if not 2 < r < math.inf:
        raise ConfigurationError(f"need 2 < r < inf, got r={r}")
    if 1 / r > 1 / p - 1 / q + 1e-15:
        raise ConfigurationError(f"need 1/r <= 1/p - 1/q, got {1 / r:.6g} > {1 / p - 1 / q:.6g}")
    if 1 / r > 3 / (2 * q) - 0.25 + 1e-15:
        raise ConfigurationError(f"need 1/r <= 3/(2q) - 1/4, got {1 / r:.6g} > {3 / (2 * q) - 0.25:.6g}")


def _apply(mats: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.einsum("mij,jm->im", mats, u)


class ETDStepper:
    """Second-order exponential time differencing on packed states.

    With ``E = exp(hA)``, ``P1 = h phi1(hA)`` and ``P2 = h phi2(hA)`` cached
    per mode, one step is

        u* = E u + P1 N(u)
        u+ = u* + P2 (N(u*) - N(u)).

    ``nonlinearity`` maps a packed state ``(4, M)`` to a packed forcing; it
    defaults to the fused kernel, and ``None`` forcing rows are not assumed.
    """

    def __init__(
        self,
        layout: SpectralLayout,
        params: PhysParams,
        h: float,
        nonlinearity=None,
        helpers: str = "exact",
        density_floor: float = 0.0,
    ) -> None:
        if not h > 0:
            raise ConfigurationError(f"step size must be positive, got {h}")
        self.layout = layout
        self.params = params
        self.h = float(h)
        if nonlinearity is None:
            nonlinearity = Nonlinearity(layout.grid, params, helpers, density_floor, layout)
        self.nonlinearity = nonlinearity
        self.E, self.P1, self.P2 = self._build_cache()

    def _build_cache(self):
        mats = assemble_mode_matrix(self.layout.xi.T, self.params).entries
        shape = mats.shape
        e = np.empty(shape, dtype=np.complex128)
        p1 = np.empty(shape, dtype=np.complex128)
        p2 = np.empty(shape, dtype=np.complex128)
        for start in range(0, shape[0], _EXPM_CHUNK):
            sl = slice(start, start + _EXPM_CHUNK)
            e[sl], p1[sl], p2h = exp_and_phi(mats[sl], self.h)
            p2[sl] = p2h / self.h
        return e, p1, p2

    def check(self, u: np.ndarray) -> None:
        if u.shape != (4, self.layout.size):
            raise GridMismatchError(f"state shape {u.shape} does not match the cache {(4, self.layout.size)}")

    def linear(self, u: np.ndarray) -> np.ndarray:
        """``E u``: one exact step of the linear semigroup."""
        return _apply(self.E, u)

    def step(self, u: np.ndarray, n_u: np.ndarray | None = None) -> np.ndarray:
        """Advance one step; ``n_u`` may pass a precomputed ``N(u)``."""
        self.check(u)
        if n_u is None:
            n_u = self.nonlinearity(u)
        u_star = _apply(self.E, u) + _apply(self.P1, n_u)
        n_star = self.nonlinearity(u_star)
        return u_star + _apply(self.P2, n_star - n_u)

    def duhamel_step(self, u: np.ndarray, n0: np.ndarray, n1: np.ndarray) -> np.ndarray:
        """Exponential trapezoid rule with forcing values ``n0`` at ``t`` and ``n1`` at ``t + h``."""
        return _apply(self.E, u) + _apply(self.P1, n0) + _apply(self.P2, n1 - n0)


def etd_step(state: FlowState, h: float, params: PhysParams, helpers: str = "exact") -> FlowState:
    """One ETD2 step of the full system from a full-lattice state."""
    layout = SpectralLayout(state.grid)
    stepper = ETDStepper(layout, params, h, helpers=helpers)
    u = pack_data(layout, state)
    return layout.unpack_state(stepper.step(u), state.t + h)


def pack_data(layout: SpectralLayout, state: FlowState, tol: float = 1e-12) -> np.ndarray:
    """Pack a full-lattice state, refusing data with mass beyond the dealiasing cutoff."""
    if state.grid != layout.grid:
        raise GridMismatchError("state and layout live on different grids")
    full = state.stacked()
    total = np.linalg.norm(full)
    outside = np.linalg.norm(full[:, ~layout.grid.dealias_mask])
    if total > 0 and outside > tol * total:
        raise ResolutionError(
            f"data carries {outside / total:.2e} of its mass "
            f"beyond the dealiasing cutoff {layout.grid.dealias_cutoff}"
        )
    return layout.pack(full)


@dataclass
class Trajectory:
    """Packed states ``(K+1, 4, M)`` at ``times``."""

    layout: SpectralLayout
    times: np.ndarray
    packed: np.ndarray

    @property
    def grid(self) -> GridSpec:
        return self.layout.grid

    def state(self, k: int) -> FlowState:
        return self.layout.unpack_state(self.packed[k], float(self.times[k]))

    def __len__(self) -> int:
        return len(self.times)


def _block_tools(layout: SpectralLayout, dec: DyadicDecomposition):
    masks = np.stack([layout.pack(dec.mask(j)[None])[0].real for j in dec.blocks])
    return dec.blocks.astype(float), masks


def _components(layout: SpectralLayout, u: np.ndarray, mach: float) -> np.ndarray:
    comps = np.empty((N_COMPONENTS, layout.size), dtype=np.complex128)
    comps[0] = u[0]
    comps[1:4] = mach * 1j * layout.xi * u[0]
    comps[4:7] = u[1:4]
    return comps


def hat_block_norms(layout, masks, comps, p):
    """Fourier-Besov block norms ``(components, blocks)`` of packed coefficients."""
    pc = conjugate_exponent(p)
    w = layout.weights * layout.grid.cell_volume
    return weighted_lp(masks[None, :, :] * comps[:, None, :], w, pc, axis=-1)


def physical_block_norms(layout, masks, comps, q):
    """Physical ``L^q`` block norms ``(components, blocks)`` of packed coefficients."""
    c, nb = comps.shape[0], masks.shape[0]
    blocks = (masks[None, :, :] * comps[:, None, :]).reshape(c * nb, -1)
    vals = layout.to_physical(blocks)
    norms = weighted_lp(vals, layout.grid.quadrature_weight, q, axis=(-3, -2, -1))
    return norms.reshape(c, nb)


@dataclass(frozen=True)
class TrackerRow:
    """One tracker sample: functionals up to ``t`` and the admissibility monitors at ``t``."""

    step: int
    t: float
    energy: float
    dispersive: float
    mid_band: float
    eps_a_max: float
    min_density: float


class AprioriTracker:
    """Running a priori functionals of a trajectory of ``(a, eps grad a, m)``.

    ``energy`` is the sum of the Chemin-Lerner sup norms at ``3/p - 3`` and
    ``3/p - 1`` and the ``L^1`` time norm at ``3/p + 1`` (Fourier-Besov,
    ``sigma = 1``).  ``dispersive`` is the sum of the Chemin-Lerner ``L^r``
    norms at ``3/q - 3 + 4/r`` and ``3/q - 1 + 2/r`` of physical ``L^q``
    blocks plus the sup norm of ``eps grad a`` at ``3/p - 1``.  ``mid_band``
    is the first dispersive term restricted to ``|Omega| eps < 2^j <= beta``.
    ``data_norm`` is fixed by the first sample.  Time integrals use the
    trapezoid rule on the sample times, so every functional is nondecreasing.
    """

    def __init__(
        self,
        layout: SpectralLayout,
        params: PhysParams,
        config: SolverConfig,
        dec: DyadicDecomposition | None = None,
    ) -> None:
        self.layout = layout
        self.params = params
        self.config = config
        self.dec = resolve_partition(layout.grid, dec)
        self.js, self.masks = _block_tools(layout, self.dec)
        p, q, r = config.p, config.q, config.r
        js = self.js
        self._w_sup = 2.0 ** ((3 / p - 3) * js) + 2.0 ** ((3 / p - 1) * js)
        self._w_l1 = 2.0 ** ((3 / p + 1) * js)
        self._w_disp1 = 2.0 ** ((3 / q - 3 + 4 / r) * js)
        self._w_disp2 = 2.0 ** ((3 / q - 1 + 2 / r) * js)
        self._w_grad = 2.0 ** ((3 / p - 1) * js)
        alpha, beta = config.split(params)
        scale = 2.0**js
        self.mid_select = (scale > alpha) & (scale <= beta)
        self.rows: list[TrackerRow] = []
        self.data_norm = 0.0
        self._sup = np.zeros((N_COMPONENTS, js.size))
        self._int1 = np.zeros_like(self._sup)
        self._intr = np.zeros_like(self._sup)
        self._last: tuple[float, np.ndarray, np.ndarray] | None = None
        self.window_violation: int | None = None
        self.c1_violation: int | None = None

    def observe(self, step: int, t: float, u: np.ndarray, eps_a: np.ndarray | None = None) -> TrackerRow:
        """Record the packed state ``u`` at time ``t`` (strictly after the previous sample)."""
        cfg = self.config
        comps = _components(self.layout, u, self.params.mach)
        hat = hat_block_norms(self.layout, self.masks, comps, cfg.p)
        phys = physical_block_norms(self.layout, self.masks, comps, cfg.q) ** cfg.r
        if self._last is None:
            self._sup = hat.copy()
            self.data_norm = float(np.sum(hat * self._w_sup))
        else:
            t0, hat0, phys0 = self._last
            if not t > t0:
                raise ValueError("tracker samples must advance in time")
            dt = t - t0
            self._sup = np.maximum(self._sup, hat)
            self._int1 += 0.5 * dt * (hat0 + hat)
            self._intr += 0.5 * dt * (phys0 + phys)
        self._last = (t, hat, phys)
        if eps_a is None:
            eps_a = self.params.mach * self.layout.to_physical(u[:1])[0]
        eps_a_max = float(np.max(np.abs(eps_a)))
        min_density = float(1.0 + np.min(eps_a))
        if self.window_violation is None and eps_a_max > cfg.eps_a_window:
            self.window_violation = step
        if self.c1_violation is None:
            eps_a_hat = self.params.mach * hat[0] * 2.0 ** ((3 / cfg.p) * self.js)
            if np.sum(eps_a_hat) > cfg.c1:
                self.c1_violation = step
        row = TrackerRow(step, float(t), self.energy, self.dispersive, self.mid_band, eps_a_max, min_density)
        self.rows.append(row)
        return row

    @property
    def energy(self) -> float:
        return float(np.sum(self._sup * self._w_sup) + np.sum(self._int1 * self._w_l1))

    @property
    def dispersive(self) -> float:
        lr = self._intr ** (1.0 / self.config.r)
        grad = np.sum(self._sup[1:4] * self._w_grad)
        return float(np.sum(lr * (self._w_disp1 + self._w_disp2)) + grad)

    @property
    def mid_band(self) -> float:
        lr = self._intr[:, self.mid_select] ** (1.0 / self.config.r)
        return float(np.sum(lr * self._w_disp1[self.mid_select]))

    @property
    def growth(self) -> float:
        """``energy / data_norm`` (1 for zero data)."""
        return self.energy / self.data_norm if self.data_norm > 0 else 1.0


def track_apriori(
    trajectory: Trajectory | LinearTrajectory,
    params: PhysParams,
    config: SolverConfig,
    dec: DyadicDecomposition | None = None,
) -> AprioriTracker:
    """Run an :class:`AprioriTracker` over every sample of a trajectory."""
    if isinstance(trajectory, Trajectory):
        layout = trajectory.layout
        packed = trajectory.packed
    else:
        layout = SpectralLayout(trajectory.grid)
        packed = [layout.pack(s) for s in trajectory.states]
    tracker = AprioriTracker(layout, params, config, dec)
    for k, (t, u) in enumerate(zip(trajectory.times, packed)):
        tracker.observe(k, float(t), u)
    return tracker


def z_norm(layout: SpectralLayout, times: np.ndarray, packed: np.ndarray, mach: float, p: float, dec=None) -> float:
    """Norm of the local existence space for a packed trajectory ``(K+1, 4, M)``.

    ``a`` is measured in ``L^2_t`` at ``3/p - 1`` and ``3/p``; ``eps grad a``
    additionally in the Chemin-Lerner sup norm at ``3/p - 1`` and in
    ``L^1_t`` at ``3/p + 1``; ``m`` in ``L^2_t`` at ``3/p - 1``, ``3/p`` and
    ``L^1_t`` at ``3/p + 1``.  Time integrals use the trapezoid rule.
    """
    dec = resolve_partition(layout.grid, dec)
    js, masks = _block_tools(layout, dec)
    vals = np.stack([hat_block_norms(layout, masks, _components(layout, u, mach), p) for u in packed])
    w = trapezoid_weights(np.asarray(times))

    def plain(comp, s, r):  # L^r_t of the Besov norm, summed over components
        inner = np.sum(vals[:, comp, :] * 2.0 ** (s * js), axis=-1)
        return float(np.sum(time_lr(inner, w, r)))

    a, g, m = [0], [1, 2, 3], [4, 5, 6]
    total = plain(a, 3 / p - 1, 2) + plain(a, 3 / p, 2)
    total += float(np.sum(np.max(vals[:, g, :], axis=0) * 2.0 ** ((3 / p - 1) * js)))
    for comp in (g, m):
        total += plain(comp, 3 / p - 1, 2) + plain(comp, 3 / p, 2) + plain(comp, 3 / p + 1, 1)
    return total


@dataclass
class PicardReport:
    """Outcome of the Picard iteration on ``[t0, t0 + T]``."""

    status: str
    iterations: int
    distances: list
    ratios: list
    data_norm: float
    outside_ball: bool
    trajectory: Trajectory | None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def picard_local_solve(state0: FlowState, params: PhysParams, config: SolverConfig) -> PicardReport:
    """Iterate the Duhamel map from the linear solution until successive iterates agree.

    Iterate ``k + 1`` is the exact linear evolution of the data plus the
    Duhamel integral of ``N`` evaluated along iterate ``k``, discretized by
    the exponential trapezoid rule on the grid ``t_n = t0 + n h``.  The
    distance between iterates is measured in :func:`z_norm`; iteration stops
    once it falls below ``picard_tol`` times the norm of the iterate.  Three
    consecutive contraction ratios ``>= 1``, or a non-finite or inadmissible
    iterate, end the iteration with status ``picard_divergence``.
    """
    layout = SpectralLayout(state0.grid)
    u0 = pack_data(layout, state0)
    stepper = ETDStepper(layout, params, config.h, helpers=config.helpers, density_floor=config.density_floor)
    k_steps = config.n_steps
    times = state0.t + config.h * np.arange(k_steps + 1)
    eps = params.mach
    data_norm = z_norm(layout, times[:1], u0[None], eps, config.p) if np.any(u0) else 0.0
    outside = data_norm > config.picard_ball

    current = np.empty((k_steps + 1, 4, layout.size), dtype=np.complex128)
    current[0] = u0
    for n in range(k_steps):
        current[n + 1] = stepper.linear(current[n])
    distances: list[float] = []
    ratios: list[float] = []
    status = "max_iter"
    streak = 0
    for it in range(1, config.picard_max_iter + 1):
        try:
            forcing = np.stack([stepper.nonlinearity(u) for u in current])
        except (NonFiniteError, InadmissibleDensityError):
            status = "picard_divergence"
            break
        nxt = np.empty_like(current)
        nxt[0] = u0
        for n in range(k_steps):
            nxt[n + 1] = stepper.duhamel_step(nxt[n], forcing[n], forcing[n + 1])
        if not np.all(np.isfinite(nxt)):
            status = "picard_divergence"
            break
        dist = z_norm(layout, times, nxt - current, eps, config.p)
        size = z_norm(layout, times, nxt, eps, config.p)
        if distances:
            ratio = dist / distances[-1] if distances[-1] > 0 else 0.0
            ratios.append(ratio)
            streak = streak + 1 if ratio >= 1 else 0
        distances.append(dist)
        current = nxt
        if dist <= config.picard_tol * size or size == 0:
            status = "converged"
            break
        if streak >= 3:
            status = "picard_divergence"
            break
    traj = Trajectory(layout, times, current) if status != "picard_divergence" else None
    return PicardReport(status, len(distances), distances, ratios, data_norm, outside, traj)


def suggest_step(state: FlowState, params: PhysParams, safety: float = 0.5) -> float:
    """Step size keeping ``h`` times an estimate of the stiffest nonlinear rate below ``safety``.

    The rate estimate adds the convective rate ``k |m|``, the viscous rate
    of the variable-coefficient terms ``(mu + |mu + lam|) k^2 |I(eps a)|``
    and the capillary rate ``kappa eps^2 k^3 |a|`` at the largest retained
    wavenumber ``k``.
    """
    layout = SpectralLayout(state.grid)
    u = layout.pack(state.stacked())
    phys = layout.to_physical(u)
    b = np.max(np.abs(params.mach * phys[0]))
    if b >= 1:
        raise InadmissibleDensityError(f"|eps a| reaches {b:.3g}")
    kmax = float(np.max(layout.xi_norm))
    rate = (
        kmax * np.max(np.abs(phys[1:]))
        + (params.mu + abs(params.mu + params.lam)) * kmax**2 * b / (1 - b)
        + params.kappa * params.mach**2 * kmax**3 * np.max(np.abs(phys[0]))
    )
    return safety / rate if rate > 0 else math.inf


@dataclass
class RunOutcome:
    """Result of :func:`global_run`; failures are statuses, never exceptions."""

    status: str
    t_final: float
    steps: int
    h: float
    rows: list
    data_norm: float
    final_state: FlowState
    snapshots: list = field(default_factory=list)
    window_violation: int | None = None
    c1_violation: int | None = None
    message: str = ""

    @property
    def max_growth(self) -> float:
        if self.data_norm <= 0:
            return 1.0
        return max((r.energy for r in self.rows), default=0.0) / self.data_norm

    @property
    def max_mid_band(self) -> float:
        return max((r.mid_band for r in self.rows), default=0.0)


def _march(layout, u0, t0, params, config, dec, snapshot_every):
    stepper = ETDStepper(layout, params, config.h, helpers=config.helpers, density_floor=config.density_floor)
    tracker = AprioriTracker(layout, params, config, dec)
    kernel = stepper.nonlinearity
    n_steps = config.n_steps
    u = u0
    snapshots = []
    status, message, k = "bounded", "", 0
    try:
        for k in range(n_steps + 1):
            t = t0 + k * config.h
            n_u = kernel(u)  # also refreshes kernel.last_eps_a for the monitors
            eps_a = kernel.last_eps_a
            if snapshot_every and k % snapshot_every == 0:
                snapshots.append(layout.unpack_state(u, t))
            if k % config.sample_every == 0 or k == n_steps:
                row = tracker.observe(k, t, u, eps_a)
                if row.min_density <= config.density_floor:
                    status, message = "inadmissible_density", f"density {row.min_density:.3g} at t={t:.6g}"
                    break
                if tracker.energy > config.growth_bound * tracker.data_norm:
                    status, message = "norm_growth", f"energy grew by {tracker.growth:.3g} at t={t:.6g}"
                    break
            elif 1.0 + np.min(eps_a) <= config.density_floor:
                tracker.observe(k, t, u, eps_a)
                status, message = "inadmissible_density", f"density floor crossed at t={t:.6g}"
                break
            if k == n_steps:
                break
            u = stepper.step(u, n_u)
    except InadmissibleDensityError as exc:
        status, message = "inadmissible_density", str(exc)
    except NonFiniteError as exc:
        status, message = "norm_growth", str(exc)
    return status, message, k, u, tracker, snapshots


def global_run(
    data: FlowState,
    params: PhysParams,
    config: SolverConfig,
    dec: DyadicDecomposition | None = None,
    snapshot_every: int | None = None,
) -> RunOutcome:
    """March with ETD2 until the horizon or until a monitor trips.

    The run is ``bounded`` when the energy functional stays within
    ``growth_bound`` times its initial value and the density stays above
    ``density_floor`` at every sample.  Exceeding the growth bound is a
    numerical proxy for loss of the a priori bound, not a statement about
    blow-up.  When a monitor trips and ``max_halvings`` allows it, the run
    is repeated from the data with half the step.
    """
    layout = SpectralLayout(data.grid)
    u0 = pack_data(layout, data)
    cfg = config
    for attempt in range(cfg.max_halvings + 1):
        status, message, k, u, tracker, snaps = _march(layout, u0, data.t, params, cfg, dec, snapshot_every)
        if status == "bounded" or attempt == cfg.max_halvings:
            break
        cfg = cfg.replace(h=cfg.h / 2, sample_every=cfg.sample_every * 2)
    return RunOutcome(
        status=status,
        t_final=data.t + k * cfg.h,
        steps=k,
        h=cfg.h,
        rows=tracker.rows,
        data_norm=tracker.data_norm,
        final_state=layout.unpack_state(u, data.t + k * cfg.h),
        snapshots=snaps,
        window_violation=tracker.window_violation,
        c1_violation=tracker.c1_violation,
        message=message,
    )
