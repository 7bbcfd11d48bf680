import numpy as np
import pytest

from svolterra.grid import GridError, TimeGrid
from svolterra.montecarlo import batch_bounds, map_batches
from svolterra.noise import cumulative, cumulative_path, sample_increments, sample_path
from svolterra.spectral import SpectralSpace

N_MC = 100_000


@pytest.fixture(scope="module")
def big_sample():
    space = SpectralSpace([-1.0, -4.0, -9.0], [1.0, 0.5, 0.1])
    grid = TimeGrid.from_horizon(1.0, 0.25)
    return space, grid, sample_increments(space, grid, 7, range(N_MC))


def test_zero_covariance_gives_zero_path():
    path = sample_path(SpectralSpace([-1.0, -4.0], [0.0, 0.0]), TimeGrid(0.1, 10), 3, 0)
    np.testing.assert_array_equal(path.dW, 0.0)


def test_increment_mean_and_variance(big_sample):
    space, grid, dW = big_sample
    var_true = space.lam * grid.dt
    mean = dW.mean(axis=0)
    assert np.all(np.abs(mean) <= 3 * np.sqrt(var_true / N_MC)[:, None])
    np.testing.assert_allclose(dW.var(axis=0), np.broadcast_to(var_true[:, None], mean.shape), rtol=0.05)


def test_mode_independence(big_sample):
    _, _, dW = big_sample
    x = dW[:, :, 0]
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    corr = z.T @ z / N_MC
    off = corr[~np.eye(3, dtype=bool)]
    # each sample correlation has standard error about 1/sqrt(N)
    assert np.all(np.abs(off) <= 3 / np.sqrt(N_MC))


def test_cumulative_variance(big_sample):
    space, grid, dW = big_sample
    W_T = dW.sum(axis=2)
    np.testing.assert_allclose(W_T.var(axis=0), space.lam * grid.T, rtol=0.05)


def test_cumulative_examples():
    grid = TimeGrid(0.1, 10)
    path = sample_path(SpectralSpace.dirichlet(3), grid, 11, 2)
    np.testing.assert_array_equal(cumulative(path, 0.0), np.zeros(3))
    np.testing.assert_array_equal(cumulative(path, 0.1), path.dW[:, 0])
    with pytest.raises(GridError):
        cumulative(path, 0.15)
    np.testing.assert_allclose(cumulative_path(path.dW)[:, 7], cumulative(path, 0.7), rtol=1e-15)


def test_reproducible_and_order_free():
    space, grid = SpectralSpace.dirichlet(4), TimeGrid(0.01, 50)
    a = sample_increments(space, grid, 99, [3, 1, 2])
    np.testing.assert_array_equal(a[1], sample_path(space, grid, 99, 1).dW)
    np.testing.assert_array_equal(a[0], sample_increments(space, grid, 99, [3])[0])
    assert not np.array_equal(a[0], sample_increments(space, grid, 100, [3])[0])


def test_mode_rows_do_not_depend_on_truncation():
    grid = TimeGrid(0.01, 20)
    small = sample_path(SpectralSpace.dirichlet(2), grid, 5, 0)
    large = sample_path(SpectralSpace.dirichlet(6), grid, 5, 0)
    np.testing.assert_array_equal(small.dW, large.dW[:2])


def test_parallel_generation_identical():
    space, grid = SpectralSpace.dirichlet(3), TimeGrid(0.05, 20)

    def batch(lo, hi):
        return sample_increments(space, grid, 1, range(lo, hi))

    serial = np.concatenate(map_batches(batch, 23, batch_size=5, workers=1))
    threaded = np.concatenate(map_batches(batch, 23, batch_size=5, workers=4))
    np.testing.assert_array_equal(serial, threaded)
    assert batch_bounds(23, 5)[-1] == (20, 23)


def test_coarsen_sums_increments():
    path = sample_path(SpectralSpace.dirichlet(2), TimeGrid(0.125, 8), 0, 0)
    c = path.coarsen(4)
    assert c.grid == TimeGrid(0.5, 2)
    np.testing.assert_allclose(c.dW[:, 1], path.dW[:, 4:].sum(axis=1), rtol=1e-15)
    with pytest.raises(GridError):
        path.coarsen(3)
