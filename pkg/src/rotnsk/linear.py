"""Per-mode linear dynamics: generator, exponentials, energy and dispersion checks.

At each frequency the linearized system acts on ``u = (a, m1, m2, m3)`` as
``du/dt = A(xi) u`` with

    da/dt = -(i/eps) xi . m
    dm/dt = -mu |xi|^2 m - (mu + lam) xi (xi . m) - Omega e3 x m
            - (i/eps) (1 + kappa eps^2 |xi|^2) xi a

Dropping viscosity and capillarity leaves a skew-Hermitian generator whose
flow conserves the Euclidean norm of every mode.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dyadic import block_profile
from .errors import GridMismatchError
from .expm import exp_and_phi, expm
from .grid import FlowState, GridSpec, SpectralField, inverse_transform
from .norms import conjugate_exponent, time_lr, trapezoid_weights, weighted_lp
from .params import PhysParams

CORIOLIS = np.array([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])


@dataclass(frozen=True)
class ModeMatrix:
    """Generators ``A(xi)`` for a batch of frequencies.

    ``xi`` has shape ``(..., 3)`` and ``entries`` shape ``(..., 4, 4)``.
    """

    xi: np.ndarray = field(repr=False)
    entries: np.ndarray = field(repr=False)
    viscous: bool = True

    @property
    def batch_shape(self) -> tuple:
        return self.entries.shape[:-2]


def assemble_mode_matrix(xi, params: PhysParams, viscous: bool = True) -> ModeMatrix:
    """Assemble ``A(xi)`` for one frequency or a batch of shape ``(..., 3)``."""
    xi = np.asarray(xi, dtype=float)
    eps, om = params.mach, params.rotation
    k2 = np.sum(xi * xi, axis=-1)
    shape = xi.shape[:-1]
    a = np.zeros(shape + (4, 4), dtype=np.complex128)
    a[..., 0, 1:] = -1j * xi / eps
    if viscous:
        cap = 1.0 + params.kappa * eps**2 * k2
        mu, lam = params.mu, params.lam
    else:
        cap = np.ones_like(k2)
        mu = lam = 0.0
    a[..., 1:, 0] = -1j * xi / eps * cap[..., None]
    block = -mu * k2[..., None, None] * np.eye(3) - (mu + lam) * xi[..., :, None] * xi[..., None, :]
    a[..., 1:, 1:] = block + om * CORIOLIS
    return ModeMatrix(xi, a, viscous)


def mode_exponential(mm: ModeMatrix, t: float) -> np.ndarray:
    """``exp(t A)`` for every matrix in the batch."""
    if t < 0:
        raise ValueError("mode_exponential needs t >= 0")
    return expm(t * mm.entries)


def spectral_abscissa(mm: ModeMatrix) -> np.ndarray:
    """Largest real part of the eigenvalues of each generator."""
    return np.max(np.linalg.eigvals(mm.entries).real, axis=-1)


def decay_rate_theta(xi_norm, rotation: float, mach: float) -> np.ndarray:
    """``Theta = |xi|^4 / (Omega^2 eps^2 + |xi|^2)``, zero at ``xi = 0``."""
    r = np.asarray(xi_norm, dtype=float)
    den = (rotation * mach) ** 2 + r * r
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(den > 0, r**4 / np.where(den > 0, den, 1.0), 0.0)
    return out if out.ndim else float(out)


def augmented_view(xi, u, mach: float) -> np.ndarray:
    """``(a, eps i xi a, m)`` in C^7 from ``u = (a, m)`` in C^4 (batched over leading axes)."""
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u)
    a = u[..., 0]
    return np.concatenate([a[..., None], mach * 1j * xi * a[..., None], u[..., 1:]], axis=-1)


# ---------------------------------------------------------------------------
# Lyapunov functional
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LyapunovReport:
    """``V^2``, the comparison form ``Q`` and their ratio (batched)."""

    value: np.ndarray
    quadratic: np.ndarray
    ratio: np.ndarray

    @property
    def within_bounds(self) -> bool:
        r = np.asarray(self.ratio)
        return bool(np.all((r >= 0.5) & (r <= 1.5)))


def lyapunov_value(xi, u, params: PhysParams) -> LyapunovReport:
    """Evaluate the Lyapunov functional at mode states ``u = (a, m)``.

    ``V^2 = w (|a|^2 + |m|^2 + kappa |eps i xi a|^2) + 2 eta |xi|^2 Re<eps i xi a, m>``
    with ``w = Omega^2 eps^2 + |xi|^2``; ``Q = w (|a|^2 + |m|^2 + kappa |eps i xi a|^2)``.
    """
    xi = np.asarray(xi, dtype=float)
    u = np.asarray(u, dtype=np.complex128)
    eps = params.mach
    k2 = np.sum(xi * xi, axis=-1)
    a = u[..., 0]
    m = u[..., 1:]
    grad_a = eps * 1j * xi * a[..., None]
    w = (params.rotation * eps) ** 2 + k2
    quad = w * (np.abs(a) ** 2 + np.sum(np.abs(m) ** 2, axis=-1) + params.kappa * np.sum(np.abs(grad_a) ** 2, axis=-1))
    cross = 2.0 * params.eta * k2 * np.real(np.sum(np.conj(grad_a) * m, axis=-1))
    value = quad + cross
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(quad > 0, value / np.where(quad > 0, quad, 1.0), 1.0)
    return LyapunovReport(value, quad, ratio)


# ---------------------------------------------------------------------------
# Decay of the viscous generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayReport:
    """Spectral-abscissa margins ``-(eta/3) Theta - abscissa`` per sample."""

    xi_norm: np.ndarray
    rotation: np.ndarray
    mach: np.ndarray
    abscissa: np.ndarray
    bound: np.ndarray
    margin: np.ndarray

    @property
    def holds(self) -> bool:
        return bool(np.all(self.margin >= -1e-9))


def verify_mode_decay(samples, params: PhysParams, direction=None) -> DecayReport:
    """Compare the spectral abscissa of ``A(xi)`` with ``-(eta/3) Theta``.

    ``samples`` is an iterable of ``(|xi|, Omega, eps)``.  The frequency
    points along ``direction`` (default ``(1, 2, 3)/sqrt(14)``, which
    couples every component).
    """
    samples = np.asarray(list(samples), dtype=float).reshape(-1, 3)
    d = np.asarray(direction if direction is not None else (1.0, 2.0, 3.0), dtype=float)
    d = d / np.linalg.norm(d)
    absc = np.empty(len(samples))
    for i, (r, om, eps) in enumerate(samples):
        mm = assemble_mode_matrix(r * d, params.replace(rotation=om, mach=eps))
        absc[i] = spectral_abscissa(mm)
    theta = decay_rate_theta(samples[:, 0], samples[:, 1], samples[:, 2])
    bound = -(params.eta / 3.0) * theta
    return DecayReport(samples[:, 0], samples[:, 1], samples[:, 2], absc, bound, bound - absc)


def slowest_decay_rates(xi_norms, params: PhysParams, direction=None) -> np.ndarray:
    """``-abscissa`` of ``A(xi)`` along a direction, for a set of radii."""
    d = np.asarray(direction if direction is not None else (1.0, 2.0, 3.0), dtype=float)
    d = d / np.linalg.norm(d)
    xi = np.asarray(xi_norms, dtype=float)[:, None] * d
    return -spectral_abscissa(assemble_mode_matrix(xi, params))


def fit_loglog_slope(x, y) -> float:
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])


# ---------------------------------------------------------------------------
# Propagation on the lattice
# ---------------------------------------------------------------------------


def lattice_xi(grid: GridSpec) -> np.ndarray:
    """Lattice frequencies as ``(N, N, N, 3)``, Nyquist planes mapped to zero.

    Using zero at the self-conjugate Nyquist planes keeps
    ``A(-xi) = conj(A(xi))`` on the whole lattice, so propagation
    preserves Hermitian symmetry.
    """
    return np.moveaxis(grid.xi_deriv, 0, -1)


@dataclass
class LinearTrajectory:
    """States of a linear run on the uniform grid ``t_k = k h``."""

    grid: GridSpec
    times: np.ndarray
    states: np.ndarray = field(repr=False)  # (K+1, 4, N, N, N)

    def state(self, k: int) -> FlowState:
        return FlowState.from_stacked(self.grid, self.states[k], float(self.times[k]))

    def __len__(self) -> int:
        return len(self.times)


def _apply(mats: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply ``(..., n, m)`` matrices to ``(m, ...)`` vectors stored component-first."""
    return np.einsum("...ij,j...->i...", mats, u)


def propagate_linear(
    state0: FlowState,
    T: float,
    h: float,
    params: PhysParams,
    forcing=None,
) -> LinearTrajectory:
    """Exact per-mode propagation with an optional forcing.

    ``forcing`` (if given) is an array ``(K+1, 4, N, N, N)`` or a sequence
    of :class:`FlowState` sampled at ``t_k = k h``; its ``a`` component is
    allowed.  The Duhamel integral uses the exponential trapezoid rule

        u_{k+1} = e^{hA} u_k + h phi1(hA) f_k + h phi2(hA) (f_{k+1} - f_k),

    exact for forcings linear in time and second order otherwise.
    """
    grid = state0.grid
    nsteps = int(round(T / h))
    if nsteps < 0 or abs(nsteps * h - T) > 1e-9 * max(1.0, T):
        raise ValueError(f"horizon T={T} is not a multiple of h={h}")
    if forcing is not None:
        if not isinstance(forcing, np.ndarray):
            forcing = np.stack([f.stacked() if isinstance(f, FlowState) else np.asarray(f) for f in forcing])
        if forcing.shape != (nsteps + 1, 4) + grid.shape:
            raise GridMismatchError(
                f"forcing shape {forcing.shape} does not match {(nsteps + 1, 4) + grid.shape}"
            )
    mm = assemble_mode_matrix(lattice_xi(grid), params)
    e_h, p1, p2h = exp_and_phi(mm.entries, h)
    p2 = p2h / h
    out = np.empty((nsteps + 1, 4) + grid.shape, dtype=np.complex128)
    out[0] = state0.stacked()
    for k in range(nsteps):
        nxt = _apply(e_h, out[k])
        if forcing is not None:
            nxt += _apply(p1, forcing[k]) + _apply(p2, forcing[k + 1] - forcing[k])
        out[k + 1] = nxt
    times = state0.t + h * np.arange(nsteps + 1)
    return LinearTrajectory(grid, times, out)


def inviscid_eigensystem(xi: np.ndarray, params: PhysParams):
    """Eigen-decomposition of the Hermitian matrix ``i A_inviscid(xi)``.

    Returns ``(w, v)`` with ``A = -i v diag(w) v^*``.
    """
    mm = assemble_mode_matrix(xi, params, viscous=False)
    return np.linalg.eigh(1j * mm.entries)


def inviscid_propagate(state0: FlowState, times, params: PhysParams) -> LinearTrajectory:
    """Exact unitary propagation of the inviscid rotating acoustic system."""
    grid = state0.grid
    times = np.asarray(times, dtype=float)
    w, v = inviscid_eigensystem(lattice_xi(grid), params)
    u0 = state0.stacked()
    c = np.einsum("...ji,j...->...i", np.conj(v), u0)  # v^* u0, shape (N,N,N,4)
    out = np.empty((len(times), 4) + grid.shape, dtype=np.complex128)
    for n, t in enumerate(times):
        if t == state0.t:
            out[n] = u0
            continue
        out[n] = np.einsum("...ij,...j->i...", v, np.exp(-1j * w * (t - state0.t)) * c)
    return LinearTrajectory(grid, times, out)


# ---------------------------------------------------------------------------
# Smoothing exponents of the viscous semigroup
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyExponentReport:
    """Per-block time-integrated gains and their fitted power of ``2^j``."""

    r: float
    band: str
    js: np.ndarray
    gains: np.ndarray
    slope: float
    expected: float

    @property
    def deviation(self) -> float:
        return abs(self.slope - self.expected)


def _block_modes(j: int, spacing: float):
    """Lattice of spacing ``2^j * spacing`` restricted to block ``j``, with mask values.

    The dimensionless geometry ``xi / 2^j`` is the same for every ``j``.
    """
    from .dyadic import OUTER_RADIUS, block_profile

    kmax = int(np.ceil(OUTER_RADIUS / spacing))
    k = np.arange(-kmax, kmax + 1) * spacing
    grid = np.stack(np.meshgrid(k, k, k, indexing="ij"), axis=-1).reshape(-1, 3)
    r = np.linalg.norm(grid, axis=-1)
    mask = block_profile(r, 0)
    keep = mask > 0
    return grid[keep] * 2.0**j, mask[keep]


def block_time_gain(
    params: PhysParams,
    j: int,
    r: float,
    p: float = 2.0,
    spacing: float = 0.4,
    seed: int = 0,
    n_times: int = 2500,
) -> float:
    """``||Delta_j (a, eps grad a, m)||_{L^r(0, inf; L^p hat)} / ||Delta_j (a0, eps grad a0, m0)||_{L^p hat}``.

    The datum is a random block-``j`` field on a self-similar lattice and
    the solution is evaluated per mode from the eigen-decomposition of
    ``A(xi)``.  The time grid is geometric, scaled by the slowest decay
    time of the block, and extends until the solution has decayed by many
    e-folds, so the truncation of ``(0, inf)`` is negligible.
    """
    xi, mask = _block_modes(j, spacing)
    rng = np.random.default_rng(seed)
    u0 = (rng.normal(size=(len(xi), 4)) + 1j * rng.normal(size=(len(xi), 4))) * mask[:, None]
    mm = assemble_mode_matrix(xi, params)
    lam, vec = np.linalg.eig(mm.entries)
    coef = np.linalg.solve(vec, u0[..., None])[..., 0]
    pc = conjugate_exponent(p)

    def norm_at(t):
        u = np.einsum("mij,mj->mi", vec, np.exp(lam * t) * coef)
        aug = augmented_view(xi, u, params.mach)
        return float(np.sum(weighted_lp(aug, 1.0, pc, axis=0)))

    base = norm_at(0.0)
    if np.isinf(r):
        probe = np.concatenate([[0.0], np.geomspace(1e-6, 1e2, 400) / np.min(-lam.real.max(axis=-1))])
        return max(norm_at(t) for t in probe) / base
    slow = np.min(-lam.real.max(axis=-1))
    fast = np.max(np.abs(lam))
    t = np.concatenate([[0.0], np.geomspace(1e-3 / fast, 60.0 / slow, n_times)])
    vals = np.array([norm_at(tt) for tt in t])
    return float(time_lr(vals, trapezoid_weights(t), r) / base)


def verify_energy_estimate(
    params: PhysParams,
    r: float,
    band: str,
    js,
    p: float = 2.0,
    spacing: float = 0.4,
    seed: int = 0,
) -> EnergyExponentReport:
    """Fit the per-block smoothing gain ``~ 2^{slope j}`` over the blocks ``js``.

    The expected slope is ``-4/r`` when every block lies in the low band
    ``2^j <= |Omega| eps`` and ``-2/r`` when every block lies in the high band.
    """
    js = np.asarray(list(js), dtype=int)
    alpha = params.rotation_mach
    scales = 2.0**js
    if band == "low" and np.any(scales > alpha):
        raise ValueError("low band requires 2^j <= |Omega| eps for every block")
    if band == "high" and np.any(scales <= alpha):
        raise ValueError("high band requires 2^j > |Omega| eps for every block")
    gains = np.array([block_time_gain(params, int(j), r, p, spacing, seed) for j in js])
    slope = float(np.polyfit(js, np.log2(gains), 1)[0])
    power = 4.0 if band == "low" else 2.0
    expected = 0.0 if np.isinf(r) else -power / r
    return EnergyExponentReport(r, band, js, gains, slope, expected)


# ---------------------------------------------------------------------------
# Strichartz sweep
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StrichartzReport:
    """Space-time norms over a rotation sweep and the fitted ``log``-``log`` slope."""

    p: float
    q: float
    r: float
    rotations: np.ndarray
    norms: np.ndarray
    slope: float
    target: float
    residuals: np.ndarray

    @property
    def passes(self) -> bool:
        return self.slope <= self.target


def check_strichartz_exponents(p: float, q: float, r: float) -> None:
    """Reject exponent triples outside ``2 <= p <= q < inf``, ``0 <= 1/r <= 1/p - 1/q``."""
    if not (2 <= p <= q < np.inf):
        raise ValueError(f"need 2 <= p <= q < inf, got p={p}, q={q}")
    if not (0 <= 1.0 / r <= 1.0 / p - 1.0 / q + 1e-15):
        raise ValueError(f"need 0 <= 1/r <= 1/p - 1/q, got r={r}")


def high_band_datum(grid: GridSpec, j: int, direction=(1.0, 0.3, 0.0)) -> FlowState:
    """Divergence-free momentum on block ``j`` with zero density perturbation.

    The block profile is multiplied by the projection of ``direction``
    onto the plane orthogonal to ``xi``, and modes with ``xi_3 = 0`` are
    removed so that every mode feels the rotation.  Coefficients are scaled
    by ``L^3 / sqrt(#modes)`` so the physical amplitude is of order one.
    """
    xi, r = grid.xi, grid.xi_norm
    profile = block_profile(r, j) * (np.abs(xi[2]) > 0)
    count = int(np.count_nonzero(profile))
    if count == 0:
        raise ValueError(f"block {j} holds no lattice modes with xi_3 != 0")
    e = np.asarray(direction, dtype=float)
    safe = np.where(r > 0, r * r, 1.0)
    proj = e[:, None, None, None] - xi * np.einsum("i...,i->...", xi, e) / safe
    m = proj * profile * grid.L**3 / np.sqrt(count)
    return FlowState(SpectralField.zeros(grid), SpectralField(grid, m.astype(np.complex128)))


def space_time_norm(traj: LinearTrajectory, q: float, r: float) -> float:
    """``sum_components || ||u_c(t)||_{L^q_x} ||_{L^r_t}`` with trapezoid weights in time."""
    grid = traj.grid
    per_time = np.empty((len(traj), 4))
    for n in range(len(traj)):
        # Components generated by roundoff from an exactly zero datum are
        # not meaningfully Hermitian, so the symmetry check is skipped.
        st = traj.state(n)
        vals = np.concatenate([inverse_transform(st.a, check=False)[None], inverse_transform(st.m, check=False)])
        for c in range(4):
            per_time[n, c] = weighted_lp(vals[c], grid.quadrature_weight, q)
    return float(np.sum(time_lr(per_time, trapezoid_weights(traj.times), r)))


def measure_strichartz(
    p: float,
    q: float,
    r: float,
    rotations,
    mach: float,
    datum: FlowState,
    T: float = 8.0,
    times=None,
    tolerance: float = 0.1,
) -> StrichartzReport:
    """Sweep ``Omega`` and fit ``log ||U(t) u0||_{L^r(0,T; L^q)}`` against ``log Omega``.

    The datum must sit in blocks with ``2^j > |Omega| eps`` for every swept
    rotation.  ``passes`` compares the slope with ``-1/r + tolerance``.
    """
    check_strichartz_exponents(p, q, r)
    rotations = np.asarray(list(rotations), dtype=float)
    check_high_band(datum, rotations, mach)
    if times is None:
        times = np.linspace(0.0, T, 257)
    norms = np.array([strichartz_norm(datum, om, mach, q, r, times) for om in rotations])
    return fit_strichartz(p, q, r, rotations, norms, tolerance)


def check_high_band(datum: FlowState, rotations, mach: float) -> None:
    """Require every block touched by the datum to satisfy ``2^j > |Omega| eps``."""
    grid = datum.grid
    support = np.abs(datum.stacked()).sum(axis=0) > 0
    rmin = float(grid.xi_norm[support].min()) if np.any(support) else np.inf
    top = float(np.max(np.abs(np.asarray(rotations, dtype=float)))) * mach
    # Every block touching |xi| has 2^j >= 3|xi|/8.
    if 3.0 * rmin / 8.0 <= top:
        raise ValueError(f"datum reaches |xi|={rmin:.4g}, not in the high band for |Omega| eps={top:.4g}")


def strichartz_norm(datum: FlowState, rotation: float, mach: float, q: float, r: float, times) -> float:
    """``||U(t) u0||_{L^r_t L^q_x}`` of the inviscid rotating acoustic flow on ``times``."""
    traj = inviscid_propagate(datum, times, PhysParams(mach=mach, rotation=rotation))
    return space_time_norm(traj, q, r)


def fit_strichartz(p, q, r, rotations, norms, tolerance: float = 0.1) -> StrichartzReport:
    """Least-squares slope of ``log norm`` against ``log Omega``."""
    rotations = np.asarray(rotations, dtype=float)
    norms = np.asarray(norms, dtype=float)
    x, y = np.log(rotations), np.log(norms)
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return StrichartzReport(p, q, r, rotations, norms, float(coef[0]), -1.0 / r + tolerance, resid)
