import numpy as np
import pytest

from stochwave.covariance import SpectralMeasure
from stochwave.lattice import Grid, LatticeField, h_neg_k_norm, l2_norm
from stochwave.noise import coarsen_path, sample_path
from stochwave.solver import (
    Nonlinearity,
    SolveConfig,
    deterministic_part,
    deterministic_velocity,
    energy_trajectory,
    explicit_sweep,
    moment_track,
    picard_iterate,
)


def _basic_config(n=64, length=16.0, k=1, dt=1.0 / 64.0, alpha=None, **kw):
    grid = Grid(1, n, length)
    x = grid.axis_coords
    v0 = LatticeField(grid, np.exp(-(x**2)))
    return SolveConfig(
        grid=grid,
        measure=SpectralMeasure.white(1),
        k=k,
        horizon=1.0,
        dt=dt,
        nonlinearity=alpha or Nonlinearity.sine(),
        v0=v0,
        **kw,
    )


# -- nonlinearities -----------------------------------------------------------


def test_nonlinearity_validation_passes_for_builtins():
    rng = np.random.default_rng(0)
    for alpha in (Nonlinearity.identity(), Nonlinearity.sine(), Nonlinearity.affine(0.5, 0.0),
                  Nonlinearity.one_minus_exp()):
        alpha.validate(rng)


def test_nonlinearity_validation_catches_bad_constant():
    cheat = Nonlinearity("cheat", lambda u: 3.0 * u, 1.0, True)
    with pytest.raises(ValueError, match="Lipschitz"):
        cheat.validate(np.random.default_rng(1))


def test_nonlinearity_linear_bound_check():
    shifted = Nonlinearity("shifted", lambda u: u + 0.5, 1.0, True)  # lies about alpha(0)
    with pytest.raises(ValueError, match="alpha"):
        shifted.validate(np.random.default_rng(2))


def test_nonlinearity_table():
    alpha = Nonlinearity.from_table([-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0])
    assert alpha.vanishes_at_zero
    assert alpha.lipschitz == pytest.approx(0.5)
    assert alpha(np.array([1.0]))[0] == pytest.approx(0.5)


def test_growth_constant():
    assert Nonlinearity.affine(0.0, 1.0).growth == pytest.approx(1.0)
    assert Nonlinearity.sine().growth == pytest.approx(1.0)


# -- deterministic part -------------------------------------------------------


def test_deterministic_part_zero_data():
    cfg = _basic_config()
    cfg.v0 = LatticeField.zeros(cfg.grid)
    for t in (0.0, 0.5, 1.0):
        assert np.all(deterministic_part(cfg, t).values == 0.0)


def test_deterministic_part_at_time_zero():
    grid = Grid(1, 64, 16.0)
    rng = np.random.default_rng(3)
    v0 = LatticeField(grid, rng.standard_normal(grid.shape))
    v0dot = LatticeField(grid, rng.standard_normal(grid.shape))
    cfg = SolveConfig(grid, SpectralMeasure.white(1), 1, 1.0, 1 / 64, Nonlinearity.sine(),
                      v0, v0dot)
    out = deterministic_part(cfg, 0.0)
    assert np.max(np.abs(out.values - v0.values)) < 1e-12


@pytest.mark.parametrize("k", [1, 2])
def test_velocity_data_propagation_bounded_by_sobolev_norm(k):
    # ||G(t) * v0_dot|| <= sqrt(1 + T^2) ||v0_dot||_{H^-k}, 20 draws
    grid = Grid(1, 64, 16.0)
    rng = np.random.default_rng(4)
    horizon = 1.0
    c_t = np.sqrt(1.0 + horizon**2)
    for _ in range(20):
        v0dot = LatticeField(grid, rng.standard_normal(grid.shape))
        cfg = SolveConfig(grid, SpectralMeasure.white(1), k, horizon, 1 / 64,
                          Nonlinearity.sine(), LatticeField.zeros(grid), v0dot)
        t = rng.uniform(0.0, horizon)
        value = l2_norm(deterministic_part(cfg, t))
        assert value <= c_t * h_neg_k_norm(v0dot, k) * (1.0 + 1e-12)


def test_deterministic_velocity_is_derivative():
    cfg = _basic_config()
    cfg.v0_dot = LatticeField(cfg.grid, 0.2 * np.exp(-((cfg.grid.axis_coords - 1) ** 2)))
    t, eps = 0.5, 1e-6
    fd = (deterministic_part(cfg, t + eps).values - deterministic_part(cfg, t - eps).values) / (2 * eps)
    assert np.max(np.abs(fd - deterministic_velocity(cfg, t).values)) < 1e-6


# -- solvers ------------------------------------------------------------------


def test_zero_nonlinearity_converges_immediately():
    cfg = _basic_config(alpha=Nonlinearity.affine(0.0, 0.0), snapshot_stride=1)
    path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(5))
    report = picard_iterate(cfg, path)
    assert report.iterations == 1 and report.converged
    for j, fld in report.snapshots.items():
        expected = deterministic_part(cfg, j * cfg.dt)
        assert np.max(np.abs(fld.values - expected.values)) < 1e-12


def test_linear_alpha_zero_data_stays_zero():
    cfg = _basic_config(alpha=Nonlinearity.identity(), snapshot_stride=1)
    cfg.v0 = LatticeField.zeros(cfg.grid)
    path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(6))
    report = explicit_sweep(cfg, path)
    assert np.all(report.moments == 0.0)


def test_sweep_equals_picard_fixed_point():
    cfg = _basic_config(snapshot_stride=1, picard_tol=1e-13)
    path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(7))
    sweep = explicit_sweep(cfg, path)
    pic = picard_iterate(cfg, path)
    gap = max(l2_norm(sweep.snapshot_at(j) - pic.snapshot_at(j)) for j in sweep.snapshots)
    assert gap <= 1e-10


def test_uniqueness_two_initial_guesses():
    cfg = _basic_config(snapshot_stride=1, picard_tol=1e-13)
    path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(8))
    a = picard_iterate(cfg, path, initial="u0")
    b = picard_iterate(cfg, path, initial="zero")
    gap = max(l2_norm(a.snapshot_at(j) - b.snapshot_at(j)) for j in a.snapshots)
    assert gap <= 1e-10


def test_picard_non_convergence_reported():
    cfg = _basic_config(picard_tol=0.0, picard_max_iter=3)
    path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(9))
    report = picard_iterate(cfg, path)
    assert not report.converged and report.iterations == 3
    assert len(report.m_table) == 3


def test_pathwise_determinism():
    cfg = _basic_config()
    p1 = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(10))
    p2 = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(10))
    r1 = explicit_sweep(cfg, p1)
    r2 = explicit_sweep(cfg, p2)
    assert np.array_equal(r1.moments, r2.moments)


def test_refinement_is_cauchy_in_dt():
    # couple resolutions through one fine path; coarser runs use the
    # block-summed slices
    cfg_fine = _basic_config(dt=1.0 / 128.0, snapshot_stride=1)
    fine = sample_path(cfg_fine.grid, cfg_fine.measure, 1.0, cfg_fine.dt,
                       np.random.default_rng(11))
    sols = {}
    for level, factor in ((0, 1), (1, 2), (2, 4), (3, 8)):
        path = fine if factor == 1 else coarsen_path(fine, factor)
        cfg = _basic_config(dt=path.dt, snapshot_stride=1)
        sols[level] = explicit_sweep(cfg, path)
    gaps = []
    for level in (3, 2, 1):
        coarse, finer = sols[level], sols[level - 1]
        steps = len(coarse.times) - 1
        gap = max(
            l2_norm(coarse.snapshot_at(j) - finer.snapshot_at(2 * j))
            for j in range(steps + 1)
        )
        gaps.append(gap)
    assert gaps[0] > gaps[1] > gaps[2]


def test_energy_conservation():
    for k in (1, 2):
        grid = Grid(1, 128, 16.0)
        x = grid.axis_coords
        cfg = SolveConfig(grid, SpectralMeasure.white(1), k, 1.0, 1.0 / 256.0,
                          Nonlinearity.affine(0.0, 0.0),
                          LatticeField(grid, np.exp(-(x**2))),
                          LatticeField(grid, 0.3 * np.exp(-((x - 1.0) ** 2) / 2.0)))
        energy = energy_trajectory(cfg)
        assert (energy.max() - energy.min()) / energy.mean() <= 1e-10


def test_finite_speed_with_masked_noise():
    grid = Grid(1, 512, 16.0)
    x = grid.axis_coords
    bump = np.zeros(grid.shape)
    inside = np.abs(x) < 1.0
    bump[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    h = grid.spacing
    cfg = SolveConfig(grid, SpectralMeasure.white(1), 1, 1.0, h, Nonlinearity.sine(),
                      LatticeField(grid, bump),
                      noise_mask=(np.abs(x) <= 1.0).astype(float),
                      snapshot_stride=1, support_radius_hint=1.0)
    path = sample_path(grid, cfg.measure, 1.0, h, np.random.default_rng(12))
    report = explicit_sweep(cfg, path)
    for j, fld in report.snapshots.items():
        outside = np.abs(x) > 1.0 + j * cfg.dt + 2.0 * h
        if np.any(outside):
            assert np.max(np.abs(fld.values[outside])) <= 1e-10


# -- validation ---------------------------------------------------------------


def test_validate_rejects_nonvanishing_alpha():
    cfg = _basic_config(alpha=Nonlinearity.affine(0.0, 1.0))
    with pytest.raises(ValueError, match="weighted"):
        cfg.validate()


def test_validate_rejects_inadmissible_measure():
    grid = Grid(2, 16, 8.0)
    cfg = SolveConfig(grid, SpectralMeasure.white(2), 1, 1.0, 1 / 16,
                      Nonlinearity.sine(), LatticeField.zeros(grid))
    with pytest.raises(ValueError, match="admissibility"):
        cfg.validate()


def test_validate_box_rule():
    cfg = _basic_config(length=8.0, n=64, support_radius_hint=1.0)
    with pytest.raises(ValueError, match="box length"):
        cfg.validate()


def test_validate_step_count():
    grid = Grid(1, 64, 16.0)
    cfg = SolveConfig(grid, SpectralMeasure.white(1), 1, 1.0, 0.3,
                      Nonlinearity.sine(), LatticeField.zeros(grid))
    with pytest.raises(ValueError, match="integer"):
        cfg.validate()


# -- moments ------------------------------------------------------------------


def test_moment_track_zero_alpha_exact():
    cfg = _basic_config(alpha=Nonlinearity.affine(0.0, 0.0), dt=1.0 / 32.0)
    reports = []
    for r in range(30):
        path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(100 + r))
        reports.append(explicit_sweep(cfg, path))
    summary = moment_track(reports, cfg)
    u0_sq = np.array([l2_norm(deterministic_part(cfg, t)) ** 2 for t in summary.times])
    assert np.allclose(summary.mean, u0_sq, rtol=1e-12)
    # replicas are identical; only mean-rounding noise remains
    assert np.all(summary.std_error <= 1e-14 * summary.mean.max())
    assert summary.within_envelope


def test_moment_track_needs_replicas():
    cfg = _basic_config()
    with pytest.raises(ValueError, match="30"):
        moment_track([], cfg)


def test_moment_envelope_linear_alpha():
    cfg = _basic_config(alpha=Nonlinearity.identity(), dt=1.0 / 32.0, n=64)
    reports = []
    for r in range(60):
        path = sample_path(cfg.grid, cfg.measure, 1.0, cfg.dt, np.random.default_rng(200 + r))
        reports.append(explicit_sweep(cfg, path))
    summary = moment_track(reports, cfg)
    assert summary.within_envelope
