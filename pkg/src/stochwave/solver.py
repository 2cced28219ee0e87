"""Mild-solution solver: deterministic wave part plus Picard iteration.

A solution of

    u_tt + (-1)**k Lap**k u = alpha(u) dF,   u(0) = v0, u_t(0) = v0_dot,

is computed in mild form on the lattice: the deterministic part
propagates the initial data through the cosine and Green multipliers,
and the stochastic convolution of alpha(u) against the noise is added
through the left-endpoint rule.  Because that rule makes u(t_j) depend
only on u(t_i) with i < j, a single causal forward sweep solves the
discrete fixed-point equation exactly; Picard iteration reaches the
same fixed point (after at most one iteration per time step) and is
kept both as the constructive existence scheme and as a cross-check.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .covariance import SpectralMeasure, admissibility_integral
from .greens import GreenMultiplier, cosine_multiplier, j_functional, spectral_energy_field
from .lattice import Grid, LatticeField, h_neg_k_norm, l2_norm
from .noise import NoisePath

__all__ = [
    "Nonlinearity",
    "SolveConfig",
    "SolveReport",
    "MomentSummary",
    "deterministic_part",
    "deterministic_velocity",
    "energy_trajectory",
    "explicit_sweep",
    "picard_iterate",
    "moment_track",
]


@dataclass(frozen=True)
class Nonlinearity:
    """Lipschitz forcing coefficient alpha with declared constant."""

    name: str
    func: object
    lipschitz: float
    vanishes_at_zero: bool

    def __post_init__(self) -> None:
        if self.lipschitz <= 0:
            raise ValueError("Lipschitz constant must be positive")

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return self.func(u)

    @property
    def growth(self) -> float:
        """Constant of the linear-growth bound |alpha(u)| <= K (1 + |u|)."""
        alpha0 = float(np.abs(np.asarray(self.func(np.zeros(1))))[0])
        return max(self.lipschitz, alpha0)

    @classmethod
    def identity(cls) -> "Nonlinearity":
        return cls("identity", lambda u: u, 1.0, True)

    @classmethod
    def sine(cls) -> "Nonlinearity":
        return cls("sine", np.sin, 1.0, True)

    @classmethod
    def one_minus_exp(cls, box: float = 3.0) -> "Nonlinearity":
        # alpha(u) = 1 - exp(-u) has slope exp(-u), unbounded as u -> -inf;
        # the declared constant is only valid on |u| <= box.
        return cls("one-minus-exp", lambda u: 1.0 - np.exp(-u), math.exp(box), True)

    @classmethod
    def affine(cls, a: float, b: float) -> "Nonlinearity":
        if a == 0.0 and b == 0.0:
            return cls("affine", lambda u: np.zeros_like(u), 1e-12, True)
        return cls("affine", lambda u: a * u + b, max(abs(a), 1e-12), b == 0.0)

    @classmethod
    def from_table(cls, points, values, lipschitz: float | None = None) -> "Nonlinearity":
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        slopes = np.diff(values) / np.diff(points)
        k = float(np.max(np.abs(slopes))) if lipschitz is None else float(lipschitz)
        vanishes = abs(np.interp(0.0, points, values)) == 0.0

        def interp(u: np.ndarray) -> np.ndarray:
            return np.interp(u, points, values)

        return cls("custom-table", interp, k, vanishes)

    def validate(self, rng: np.random.Generator, pairs: int = 1000, box: float = 3.0) -> None:
        """Spot-check the Lipschitz and linear-growth declarations."""
        u1 = rng.uniform(-box, box, pairs)
        u2 = rng.uniform(-box, box, pairs)
        gap = np.abs(self(u1) - self(u2))
        bound = self.lipschitz * np.abs(u1 - u2) + 1e-12
        if np.any(gap > bound):
            raise ValueError(f"nonlinearity {self.name!r} violates its Lipschitz constant")
        if self.vanishes_at_zero:
            if np.any(np.abs(self(u1)) > self.lipschitz * np.abs(u1) + 1e-12):
                raise ValueError(f"nonlinearity {self.name!r} violates |alpha(u)| <= K|u|")


@dataclass
class SolveConfig:
    """Full problem description for one solve."""

    grid: Grid
    measure: SpectralMeasure
    k: int
    horizon: float
    dt: float
    nonlinearity: Nonlinearity
    v0: LatticeField
    v0_dot: LatticeField | None = None
    picard_tol: float = 1e-12
    picard_max_iter: int | None = None
    noise_mask: np.ndarray | None = None
    snapshot_stride: int = 10
    support_radius_hint: float | None = None

    @property
    def steps(self) -> int:
        return int(round(self.horizon / self.dt))

    @property
    def green(self) -> GreenMultiplier:
        return GreenMultiplier(self.k, self.horizon)

    def initial_velocity(self) -> LatticeField:
        return self.v0_dot if self.v0_dot is not None else LatticeField.zeros(self.grid)

    def validate(self, weighted: bool = False) -> None:
        steps_float = self.horizon / self.dt
        if abs(steps_float - round(steps_float)) > 1e-9:
            raise ValueError("horizon/dt must be an integer step count")
        if not admissibility_integral(self.measure, self.k).finite:
            raise ValueError("measure fails the admissibility condition for this k")
        if not weighted and not self.nonlinearity.vanishes_at_zero:
            raise ValueError(
                "nonlinearity does not vanish at zero; use the weighted solver (weighted.weighted_wave_solve)"
            )
        if not math.isfinite(l2_norm(self.v0)):
            raise ValueError("v0 has non-finite L2 norm")
        if self.v0_dot is not None and not math.isfinite(h_neg_k_norm(self.v0_dot, self.k)):
            raise ValueError("v0_dot has non-finite negative-Sobolev norm")
        if self.k == 1 and self.support_radius_hint is not None:
            needed = 4.0 * (2.0 * self.support_radius_hint) + self.horizon
            if self.grid.box_length < needed:
                raise ValueError(
                    f"box length {self.grid.box_length} < {needed} needed to keep "
                    "finite-speed effects from wrapping within the horizon"
                )
        if self.noise_mask is not None and np.asarray(self.noise_mask).shape != self.grid.shape:
            raise ValueError("noise mask shape does not match the grid")


@dataclass
class SolveReport:
    """Outcome of one pathwise solve."""

    times: np.ndarray
    moments: np.ndarray  # ||u(t_j)||**2 along the path
    m_table: list[np.ndarray]  # per-iteration squared Picard distances over t
    sup_distances: list[float]
    iterations: int
    converged: bool
    snapshots: dict[int, LatticeField]
    wall_clock: float
    space: str = "L2"

    def snapshot_at(self, step: int) -> LatticeField:
        return self.snapshots[step]


# ---------------------------------------------------------------------------
# deterministic part
# ---------------------------------------------------------------------------


def _u0_spectrum(cfg: SolveConfig, t: float) -> np.ndarray:
    grid = cfg.grid
    mag = np.sqrt(grid.freq_norm_sq)
    spec = cosine_multiplier(t, mag, cfg.k) * cfg.v0.spectrum
    if cfg.v0_dot is not None:
        spec = spec + cfg.green.lattice_spectrum(grid, t) * cfg.v0_dot.spectrum
    return spec


def _u0_dt_spectrum(cfg: SolveConfig, t: float) -> np.ndarray:
    grid = cfg.grid
    mag = np.sqrt(grid.freq_norm_sq)
    spec = -(mag**cfg.k) * np.sin(t * mag**cfg.k) * cfg.v0.spectrum
    if cfg.v0_dot is not None:
        spec = spec + cfg.green.lattice_dt_spectrum(grid, t) * cfg.v0_dot.spectrum
    return spec


def deterministic_part(cfg: SolveConfig, t: float) -> LatticeField:
    """u0(t) = (d/dt) G(t) * v0 + G(t) * v0_dot."""
    return LatticeField.from_spectrum(cfg.grid, _u0_spectrum(cfg, t))


def deterministic_velocity(cfg: SolveConfig, t: float) -> LatticeField:
    """Time derivative of the deterministic part."""
    return LatticeField.from_spectrum(cfg.grid, _u0_dt_spectrum(cfg, t))


def energy_trajectory(cfg: SolveConfig) -> np.ndarray:
    """Spectral energy of the noise-free evolution at every step time."""
    out = np.empty(cfg.steps + 1)
    for j in range(cfg.steps + 1):
        t = j * cfg.dt
        out[j] = spectral_energy_field(cfg.grid, _u0_spectrum(cfg, t), _u0_dt_spectrum(cfg, t), cfg.k)
    return out


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def _norm_factory(cfg: SolveConfig, theta: np.ndarray | None):
    cell = cfg.grid.cell_volume
    if theta is None:
        return lambda values: float(cell * np.sum(values**2))
    return lambda values: float(cell * np.sum(values**2 * theta))


def _prepare(cfg: SolveConfig, path: NoisePath):
    if path.grid != cfg.grid:
        raise ValueError("noise path grid does not match the configuration")
    if abs(path.dt - cfg.dt) > 1e-12 * cfg.dt:
        raise ValueError("noise path dt does not match the configuration")
    n = cfg.steps
    if len(path) < n:
        raise ValueError(f"path provides {len(path)} slices, {n} needed")
    grid = cfg.grid
    mults = [None] + [cfg.green.lattice_spectrum(grid, j * cfg.dt) for j in range(1, n + 1)]
    u0_specs = [_u0_spectrum(cfg, j * cfg.dt) for j in range(n + 1)]
    mask = None if cfg.noise_mask is None else np.asarray(cfg.noise_mask, dtype=float)
    w_fields = []
    for i in range(n):
        w = path.slices[i].field
        w_fields.append(w if mask is None else w * mask)
    return n, mults, u0_specs, w_fields


def _trajectory_from(cfg: SolveConfig, prev_values: list[np.ndarray], mults, u0_specs,
                     w_fields) -> list[np.ndarray]:
    """One Picard update: feed the previous trajectory through the integral."""
    grid, alpha = cfg.grid, cfg.nonlinearity
    n = len(w_fields)
    forc = [grid.forward(alpha(prev_values[i]) * w_fields[i]) for i in range(n)]
    out = [grid.inverse(u0_specs[0])]
    for j in range(1, n + 1):
        acc = u0_specs[j].astype(complex).copy()
        for i in range(j):
            acc += mults[j - i] * forc[i]
        out.append(grid.inverse(acc))
    return out


def _sweep_values(cfg: SolveConfig, mults, u0_specs, w_fields) -> list[np.ndarray]:
    """Causal forward pass: the discrete fixed point in one sweep."""
    grid, alpha = cfg.grid, cfg.nonlinearity
    n = len(w_fields)
    values = [grid.inverse(u0_specs[0])]
    forc: list[np.ndarray] = []
    for j in range(1, n + 1):
        forc.append(grid.forward(alpha(values[j - 1]) * w_fields[j - 1]))
        acc = u0_specs[j].astype(complex).copy()
        for i in range(j):
            acc += mults[j - i] * forc[i]
        values.append(grid.inverse(acc))
    return values


def _report_from_trajectory(cfg: SolveConfig, values: list[np.ndarray], m_table,
                            sup_distances, iterations, converged, started,
                            theta: np.ndarray | None = None, space: str = "L2") -> SolveReport:
    grid = cfg.grid
    norm_sq = _norm_factory(cfg, theta)
    moments = np.array([norm_sq(v) for v in values])
    stride = max(1, cfg.snapshot_stride)
    snapshots = {j: LatticeField(grid, values[j].copy())
                 for j in range(len(values)) if j % stride == 0 or j == len(values) - 1}
    return SolveReport(
        times=cfg.dt * np.arange(len(values)),
        moments=moments,
        m_table=m_table,
        sup_distances=sup_distances,
        iterations=iterations,
        converged=converged,
        snapshots=snapshots,
        wall_clock=time.perf_counter() - started,
        space=space,
    )


def explicit_sweep(cfg: SolveConfig, path: NoisePath, _theta: np.ndarray | None = None,
                   _space: str = "L2", _skip_validate: bool = False) -> SolveReport:
    """Solve the discrete mild equation in a single causal pass."""
    if not _skip_validate:
        cfg.validate()
    started = time.perf_counter()
    n, mults, u0_specs, w_fields = _prepare(cfg, path)
    values = _sweep_values(cfg, mults, u0_specs, w_fields)
    return _report_from_trajectory(cfg, values, [], [], 1, True, started,
                                   theta=_theta, space=_space)


def picard_iterate(cfg: SolveConfig, path: NoisePath, initial: str = "u0",
                   _theta: np.ndarray | None = None, _space: str = "L2",
                   _skip_validate: bool = False) -> SolveReport:
    """Iterate the mild-solution map on one fixed noise path.

    Stops when the sup-over-t L2 distance between successive iterates
    falls below ``cfg.picard_tol`` (or the weighted norm for the
    weighted solver).  Non-convergence within the iteration budget is
    reported, not fatal; the squared-distance table carries the tail.
    """
    if not _skip_validate:
        cfg.validate()
    started = time.perf_counter()
    n, mults, u0_specs, w_fields = _prepare(cfg, path)
    grid = cfg.grid
    norm_sq = _norm_factory(cfg, _theta)
    max_iter = cfg.picard_max_iter if cfg.picard_max_iter is not None else n + 2

    if initial == "u0":
        prev = [grid.inverse(s) for s in u0_specs]
    elif initial == "zero":
        prev = [np.zeros(grid.shape) for _ in range(n + 1)]
    else:
        raise ValueError(f"unknown initial guess {initial!r}")

    m_table: list[np.ndarray] = []
    sup_distances: list[float] = []
    converged = False
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        new = _trajectory_from(cfg, prev, mults, u0_specs, w_fields)
        dist_sq = np.array([norm_sq(new[j] - prev[j]) for j in range(n + 1)])
        m_table.append(dist_sq)
        sup = float(math.sqrt(np.max(dist_sq)))
        sup_distances.append(sup)
        prev = new
        if sup < cfg.picard_tol:
            converged = True
            break
    return _report_from_trajectory(cfg, prev, m_table, sup_distances, iterations,
                                   converged, started, theta=_theta, space=_space)


# ---------------------------------------------------------------------------
# moment tracking
# ---------------------------------------------------------------------------


@dataclass
class MomentSummary:
    times: np.ndarray
    mean: np.ndarray
    std_error: np.ndarray
    envelope: np.ndarray
    replicas: int
    within_envelope: bool


def gronwall_constant(cfg: SolveConfig) -> float:
    """C = max_s J(s) over the step times, the moment-bound rate."""
    g = cfg.green
    best = 0.0
    for j in range(1, cfg.steps + 1):
        best = max(best, j_functional(g, cfg.measure, j * cfg.dt, cfg.grid))
    return best


def moment_track(reports: list[SolveReport], cfg: SolveConfig,
                 rate_constant: float | None = None) -> MomentSummary:
    """Pool replica moment trajectories and test the exponential envelope.

    The envelope is 2 ||u0(t)||**2 exp(2 K C t) with C = max_s J(s); the
    squared-norm Lipschitz amplification is K**2, so the envelope as
    written is valid for K <= 1 (all shipped experiments use K = 1).
    """
    if len(reports) < 30:
        raise ValueError("moment tracking needs at least 30 replicas")
    n = cfg.steps
    data = np.stack([r.moments for r in reports])
    mean = data.mean(axis=0)
    se = data.std(axis=0, ddof=1) / math.sqrt(len(reports))
    c = gronwall_constant(cfg) if rate_constant is None else rate_constant
    k_lip = cfg.nonlinearity.lipschitz
    times = cfg.dt * np.arange(n + 1)
    u0_sq = np.array([l2_norm(deterministic_part(cfg, t)) ** 2 for t in times])
    envelope = 2.0 * u0_sq * np.exp(2.0 * k_lip * c * times)
    ok = bool(np.all(mean <= envelope + 3.0 * se + 1e-12))
    return MomentSummary(times, mean, se, envelope, len(reports), ok)
