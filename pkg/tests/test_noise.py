import numpy as np
import pytest

from stochwave.covariance import SpectralMeasure
from stochwave.lattice import Grid
from stochwave.noise import (
    NoisePath,
    coarsen_path,
    sample_path,
    sample_slice,
    sample_slice_batch,
)


@pytest.fixture
def grid():
    return Grid(1, 32, 8.0)


def test_rejects_bad_dt(grid):
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError):
        sample_slice(grid, SpectralMeasure.white(1), 0.0, rng)
    with pytest.raises(ValueError):
        sample_slice(grid, SpectralMeasure.white(1), -0.1, rng)


def test_path_step_count(grid):
    m = SpectralMeasure.white(1)
    rng = np.random.default_rng(1)
    assert len(sample_path(grid, m, 0.0, 0.25, rng)) == 0
    assert len(sample_path(grid, m, 1.0, 0.25, rng)) == 4
    with pytest.raises(ValueError, match="integer"):
        sample_path(grid, m, 1.0, 0.3, rng)


def test_path_deterministic_in_seed(grid):
    m = SpectralMeasure.riesz(1, 0.5)
    p1 = sample_path(grid, m, 1.0, 0.25, np.random.default_rng(42))
    p2 = sample_path(grid, m, 1.0, 0.25, np.random.default_rng(42))
    for s1, s2 in zip(p1.slices, p2.slices):
        assert np.array_equal(s1.spectrum, s2.spectrum)


def test_slice_field_is_real_and_hermitian(grid):
    m = SpectralMeasure.riesz(1, 0.5)
    s = sample_slice(grid, m, 0.1, np.random.default_rng(3))
    mirrored = grid.negate_freq_index(s.spectrum)
    assert np.allclose(s.spectrum, np.conj(mirrored), atol=1e-10 * np.abs(s.spectrum).max())
    assert s.field.dtype == np.float64


def test_white_noise_cells_iid():
    # cell variance dt/h**d; off-diagonal correlations at the MC floor
    grid = Grid(1, 16, 4.0)
    m = SpectralMeasure.white(1)
    dt, reps = 0.2, 10_000
    fields = grid.inverse(sample_slice_batch(grid, m, dt, np.random.default_rng(4), reps))
    target = dt / grid.spacing
    var = fields.var(axis=0)
    assert np.all(np.abs(var - target) < 3.0 * target * np.sqrt(2.0 / reps) + 0.02 * target)
    corr = np.corrcoef(fields.T)
    off = corr[~np.eye(16, dtype=bool)]
    assert np.max(np.abs(off)) < 4.0 / np.sqrt(reps)


def test_variance_scales_linearly_in_dt():
    # slice at dt vs sum of two independent slices at dt/2, in law
    grid = Grid(1, 16, 4.0)
    m = SpectralMeasure.riesz(1, 0.5)
    reps = 10_000
    rng = np.random.default_rng(5)
    full = grid.inverse(sample_slice_batch(grid, m, 0.2, rng, reps))
    half = grid.inverse(sample_slice_batch(grid, m, 0.1, rng, reps)) \
        + grid.inverse(sample_slice_batch(grid, m, 0.1, rng, reps))
    v1, v2 = full.var(axis=0), half.var(axis=0)
    se = v1 * np.sqrt(2.0 / reps)
    assert np.all(np.abs(v1 - v2) < 4.0 * se + 3.0 * v2 * np.sqrt(2.0 / reps))


def test_slices_independent_across_time(grid):
    m = SpectralMeasure.white(1)
    reps = 4000
    rng = np.random.default_rng(6)
    probe = np.exp(-grid.axis_coords**2)
    pairs = np.empty((reps, 2))
    for r in range(reps):
        path = sample_path(grid, m, 0.5, 0.25, rng)
        pairs[r, 0] = grid.cell_volume * np.sum(probe * path.slices[0].field)
        pairs[r, 1] = grid.cell_volume * np.sum(probe * path.slices[1].field)
    corr = np.corrcoef(pairs.T)[0, 1]
    assert abs(corr) < 3.0 / np.sqrt(reps)


def test_homogeneity_and_covariance_against_spectrum():
    # empirical lag covariance must match the exact discrete covariance
    # dt * sum_j D_j cos(eta_j z) within Monte Carlo error, and that
    # discrete covariance must track the continuum |z|^(-alpha) kernel
    grid = Grid(1, 256, 32.0)
    alpha, dt, reps = 0.5, 0.25, 8000
    m = SpectralMeasure.riesz(1, alpha)
    weights = m.lattice_weights(grid)
    eta = grid.axis_freqs
    fields = grid.inverse(sample_slice_batch(grid, m, dt, np.random.default_rng(7), reps))
    for lag in (1.0, 2.0, 3.0, 4.0, 6.0):
        shift = int(round(lag / grid.spacing))
        per_rep = np.mean(fields * np.roll(fields, shift, axis=1), axis=1)
        emp, se = per_rep.mean(), per_rep.std(ddof=1) / np.sqrt(reps)
        exact = dt * float(np.sum(weights * np.cos(eta * lag)))
        assert abs(emp - exact) < 3.5 * se
        # band-limited periodized model vs the continuum power law
        assert exact / dt == pytest.approx(lag**-alpha, rel=0.05)


def test_coarsen_path(grid):
    m = SpectralMeasure.white(1)
    fine = sample_path(grid, m, 1.0, 0.125, np.random.default_rng(8))
    coarse = coarsen_path(fine, 2)
    assert len(coarse) == 4 and coarse.dt == 0.25
    merged = fine.slices[0].spectrum + fine.slices[1].spectrum
    assert np.array_equal(coarse.slices[0].spectrum, merged)
    with pytest.raises(ValueError):
        coarsen_path(fine, 3)


def test_slice_batch_with_per_replica_generators(grid):
    # a batch fed by per-replica streams equals the per-replica slices
    m = SpectralMeasure.white(1)
    gens = [np.random.default_rng(100 + r) for r in range(5)]
    batch = sample_slice_batch(grid, m, 0.1, gens, 5)
    singles = [sample_slice(grid, m, 0.1, np.random.default_rng(100 + r)).spectrum
               for r in range(5)]
    assert np.allclose(batch, np.stack(singles), atol=0)
    with pytest.raises(ValueError):
        sample_slice_batch(grid, m, 0.1, gens, 4)
