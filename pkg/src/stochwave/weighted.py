"""Weighted L2 theory for the wave case: polynomial weight, annuli, solver.

The weight theta(x) = (1 + |x|**2)**(-K/2) with K > d satisfies the
pointwise sandwich

    2**(-K/2) (1 and |x|**(-K)) <= theta(x) <= 1 and |x|**(-K)

exactly, and the weighted norm is equivalent to the annulus sum
sum_n (max(n,1))**(-K) ||f||**2 on shells H_n = {nR <= |x| < (n+1)R},
with discrete constants computed from the actual extrema of theta per
shell.  Because the one-dimensional wave kernel has exact finite
propagation speed on the lattice, the stochastic convolution on a shell
depends only on the integrand within the propagation distance, which
yields the weighted moment bound

    E ||v||_theta**2 <= S * sum_i dt ||Z(s_i)||_theta**2 J(sigma_i)

with a locality constant S computed from the shell geometry.  That bound
extends the solver to nonlinearities that need not vanish at the
origin (linear growth |alpha(u)| <= K_lip (1 + |u|)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import SpectralMeasure, admissibility_integral
from .greens import GreenMultiplier, j_field
from .lattice import Grid, LatticeField
from .noise import NoisePath, sample_slice_batch
from .solver import MomentSummary, SolveConfig, SolveReport, deterministic_part
from .solver import explicit_sweep as _sweep
from .solver import gronwall_constant, picard_iterate as _picard
from .stochint import IntegrandProcess, _chunk_rng, _green_times

__all__ = [
    "Weight",
    "weighted_norm",
    "annuli_norms",
    "equivalence_constants",
    "locality_constant",
    "WeightedBoundResult",
    "weighted_isometry_bound",
    "weighted_wave_solve",
    "weighted_moment_track",
]


@dataclass(frozen=True)
class Weight:
    """Polynomial weight (1 + |x|**2)**(-exponent/2), annulus width radius."""

    exponent: float
    radius: float = 1.0

    def __post_init__(self) -> None:
        if self.exponent <= 0:
            raise ValueError("weight exponent must be positive")
        if self.radius <= 0:
            raise ValueError("annulus radius must be positive")

    @property
    def sandwich_lower(self) -> float:
        return 2.0 ** (-self.exponent / 2.0)

    @property
    def sandwich_upper(self) -> float:
        return 1.0

    def check_dimension(self, d: int) -> None:
        if self.exponent <= d:
            raise ValueError(f"weight exponent must exceed the dimension ({self.exponent} <= {d})")

    def theta_on(self, grid: Grid) -> np.ndarray:
        return (1.0 + grid.coord_norm_sq) ** (-self.exponent / 2.0)

    def annulus_index(self, grid: Grid) -> np.ndarray:
        return np.floor(np.sqrt(grid.coord_norm_sq) / self.radius).astype(int)


def weighted_norm(f: LatticeField, w: Weight) -> float:
    """(integral f**2 theta)**(1/2) on the lattice."""
    theta = w.theta_on(f.grid)
    return float(math.sqrt(f.grid.cell_volume * np.sum(f.values**2 * theta)))


def annuli_norms(f: LatticeField, w: Weight) -> np.ndarray:
    """Squared L2 norms of f restricted to the shells H_0, H_1, ..."""
    grid = f.grid
    idx = w.annulus_index(grid)
    out = np.zeros(int(idx.max()) + 1)
    np.add.at(out, idx.ravel(), grid.cell_volume * f.values.ravel() ** 2)
    return out


def equivalence_constants(grid: Grid, w: Weight) -> tuple[float, float]:
    """Discrete constants (c, C) with

        c * sum_n (max(n,1))**(-K) ||f||_{H_n}**2 <= ||f||_theta**2 <= C * sum_n ...

    for every lattice field, computed from the extrema of theta over the
    grid points of each occupied shell.
    """
    theta = w.theta_on(grid).ravel()
    idx = w.annulus_index(grid).ravel()
    n_max = int(idx.max())
    lo, hi = math.inf, -math.inf
    for n in range(n_max + 1):
        sel = idx == n
        if not np.any(sel):
            continue
        scale = float(max(n, 1)) ** w.exponent
        lo = min(lo, theta[sel].min() * scale)
        hi = max(hi, theta[sel].max() * scale)
    return lo, hi


def locality_constant(grid: Grid, w: Weight, horizon: float) -> float:
    """Shell-coupling constant S of the weighted moment bound.

    A shell's convolution values depend on the integrand within the
    propagation distance (here bounded by the horizon), i.e. within
    ceil(horizon/R) + 1 neighboring shells; S prices the resulting
    re-weighting of the shell sums against theta.
    """
    theta = w.theta_on(grid).ravel()
    idx = w.annulus_index(grid).ravel()
    n_max = int(idx.max())
    t_min = np.full(n_max + 1, np.nan)
    t_max = np.full(n_max + 1, np.nan)
    for n in range(n_max + 1):
        sel = idx == n
        if np.any(sel):
            t_min[n] = theta[sel].min()
            t_max[n] = theta[sel].max()
    width = int(math.ceil(horizon / w.radius)) + 1
    best = 0.0
    for m in range(n_max + 1):
        if np.isnan(t_min[m]):
            continue
        lo = max(0, m - width)
        hi = min(n_max, m + width)
        neighborhood = np.nansum(t_max[lo:hi + 1])
        best = max(best, neighborhood / t_min[m])
    return best


# ---------------------------------------------------------------------------
# weighted second-moment bound
# ---------------------------------------------------------------------------


@dataclass
class WeightedBoundResult:
    bound: float  # sum_i dt ||Z_i||_theta**2 J(sigma_i)
    mc_estimate: float
    std_error: float
    locality: float
    replicas: int

    @property
    def within(self) -> bool:
        return self.mc_estimate <= self.bound + 3.0 * self.std_error


def weighted_isometry_bound(g: GreenMultiplier, Z: IntegrandProcess, measure: SpectralMeasure,
                            w: Weight, replicas: int, rng,
                            t: float | None = None, chunk: int = 256) -> WeightedBoundResult:
    """Compare E||v||_theta**2 (Monte Carlo) against its quadrature bound.

    Requires k = 1: the bound rests on the compact support of the wave
    kernel, which beam-type operators (k >= 2) do not have.
    """
    if g.k != 1:
        raise ValueError("compact support required: weighted bound only holds for k = 1")
    if not admissibility_integral(measure, 1).finite:
        raise ValueError("measure fails the admissibility condition for k = 1")
    grid, dt = Z.grid, Z.dt
    w.check_dimension(grid.dimension)
    m, times = _green_times(Z, t)
    theta = w.theta_on(grid)

    bound = 0.0
    mults = []
    for i in range(m):
        jmax = float(np.max(j_field(g, measure, times[i], grid)))
        znorm_sq = grid.cell_volume * float(np.sum(Z.fields[i].values ** 2 * theta))
        bound += dt * znorm_sq * jmax
        mults.append(g.lattice_spectrum(grid, times[i]))

    sq_norms = np.empty(replicas)
    done = 0
    while done < replicas:
        c = min(chunk, replicas - done)
        gens = _chunk_rng(rng, done, done + c)
        acc = np.zeros((c,) + grid.shape, dtype=complex)
        for i in range(m):
            specs = sample_slice_batch(grid, measure, dt, gens, c)
            fields = grid.inverse(specs)
            acc += mults[i] * grid.forward(Z.fields[i].values * fields)
        v = grid.inverse(acc)
        sq_norms[done:done + c] = grid.cell_volume * np.sum(v**2 * theta, axis=tuple(range(1, v.ndim)))
        done += c
    mc = float(np.mean(sq_norms))
    se = float(np.std(sq_norms, ddof=1) / math.sqrt(replicas)) if replicas > 1 else 0.0
    return WeightedBoundResult(bound, mc, se, locality_constant(grid, w, times.max() if m else 0.0),
                               replicas)


# ---------------------------------------------------------------------------
# weighted solver
# ---------------------------------------------------------------------------


def weighted_wave_solve(cfg: SolveConfig, path: NoisePath, w: Weight,
                        method: str = "sweep", initial: str = "u0") -> SolveReport:
    """Wave-equation solve measured in the weighted norm.

    Accepts any globally Lipschitz nonlinearity (the vanish-at-zero
    requirement of the plain solver is lifted); k must be 1.  The
    dynamics coincide with the plain solver's; the weighted norm enters
    the Picard stop rule, the distance table, and the reported moments.
    """
    if cfg.k != 1:
        raise ValueError("weighted solver requires k = 1 (compact support)")
    w.check_dimension(cfg.grid.dimension)
    cfg.validate(weighted=True)
    theta = w.theta_on(cfg.grid)
    if method == "sweep":
        return _sweep(cfg, path, _theta=theta, _space="L2theta", _skip_validate=True)
    if method == "picard":
        return _picard(cfg, path, initial=initial, _theta=theta, _space="L2theta",
                       _skip_validate=True)
    raise ValueError(f"unknown method {method!r}")


def weighted_moment_track(reports: list[SolveReport], cfg: SolveConfig, w: Weight) -> MomentSummary:
    """Affine-recursion envelope for linear-growth nonlinearities.

    From |alpha(u)|**2 <= 2 K**2 (1 + u**2) with the growth constant
    K = max(Lipschitz, |alpha(0)|) and the weighted moment bound, the
    pooled moments must stay below the explicit iteration

        B_j = 2 ||u0(t_j)||_theta**2 + 2 K**2 S J* sum_{i<j} dt (Theta + B_i),

    with Theta = integral theta and J* = max_s J(s).
    """
    if len(reports) < 30:
        raise ValueError("moment tracking needs at least 30 replicas")
    grid = cfg.grid
    theta = w.theta_on(grid)
    n = cfg.steps
    data = np.stack([r.moments for r in reports])
    mean = data.mean(axis=0)
    se = data.std(axis=0, ddof=1) / math.sqrt(len(reports))
    times = cfg.dt * np.arange(n + 1)

    theta_mass = grid.cell_volume * float(np.sum(theta))
    j_star = gronwall_constant(cfg)
    s_const = locality_constant(grid, w, cfg.horizon)
    k_gr = cfg.nonlinearity.growth
    rate = 2.0 * k_gr**2 * s_const * j_star

    u0_sq = np.empty(n + 1)
    for j, t in enumerate(times):
        u0 = deterministic_part(cfg, t)
        u0_sq[j] = grid.cell_volume * float(np.sum(u0.values**2 * theta))

    envelope = np.empty(n + 1)
    running = 0.0  # sum_{i<j} dt (Theta + B_i)
    for j in range(n + 1):
        envelope[j] = 2.0 * u0_sq[j] + rate * running
        running += cfg.dt * (theta_mass + envelope[j])
    ok = bool(np.all(mean <= envelope + 3.0 * se + 1e-12))
    return MomentSummary(times, mean, se, envelope, len(reports), ok)
