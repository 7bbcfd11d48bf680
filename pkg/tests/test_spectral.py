import math

import numpy as np
import pytest

from svolterra.convolution import AdaptedModulated, ConstantB, DeterministicModulated
from svolterra.grid import GridError, TimeGrid
from svolterra.kernels import ConstantKernel
from svolterra.resolvent import build_family
from svolterra.spectral import (
    DimensionError,
    HilbertSchmidtOperator,
    SpectralSpace,
    apply_A,
    graph_norm,
    hs_norm,
    psi_norm_N2,
)


def space_of(mu, lam=None):
    mu = np.asarray(mu, dtype=float)
    return SpectralSpace(mu, np.ones_like(mu) if lam is None else lam)


def test_hs_norm_examples():
    assert hs_norm(HilbertSchmidtOperator.identity(4), space_of(np.zeros(4))) == 2.0
    assert hs_norm(HilbertSchmidtOperator.zero(3), space_of(np.zeros(3))) == 0.0
    op = HilbertSchmidtOperator.diagonal([1.0, 2.0])
    np.testing.assert_allclose(hs_norm(op, space_of([0, 0], [0.5, 0.25])), math.sqrt(1.5), rtol=1e-15)
    np.testing.assert_allclose(hs_norm(op, space_of([0, 0], [0.5, 0.25])), 1.2247449, atol=1e-7)


def test_hs_norm_weights_columns():
    # column k is the image of e_k, so only its squared entries are scaled by lambda_k
    op = HilbertSchmidtOperator(np.array([[0.0, 3.0], [0.0, 4.0]]))
    np.testing.assert_allclose(hs_norm(op, space_of([0, 0], [1.0, 0.04])), 1.0, rtol=1e-15)


def test_graph_norm_examples():
    assert graph_norm([1.0], space_of([0.0])) == 1.0
    np.testing.assert_allclose(graph_norm([1.0], space_of([-1.0])), math.sqrt(2), rtol=1e-15)
    np.testing.assert_allclose(graph_norm([1.0, 1.0], space_of([-1.0, -4.0])), math.sqrt(19), rtol=1e-15)


def test_apply_A_examples():
    np.testing.assert_array_equal(apply_A(np.zeros(3), space_of([-1, -4, -9])), np.zeros(3))
    np.testing.assert_array_equal(apply_A([0.0, 1.0], space_of([-1, -4])), [0.0, -4.0])
    np.testing.assert_array_equal(apply_A([1.0, 1.0, 1.0], space_of([-1, -4, -9])), [-1.0, -4.0, -9.0])


@pytest.mark.parametrize("fn", [
    lambda s: hs_norm(HilbertSchmidtOperator.identity(3), s),
    lambda s: graph_norm(np.ones(3), s),
    lambda s: apply_A(np.ones(3), s),
])
def test_dimension_mismatch(fn):
    with pytest.raises(DimensionError):
        fn(space_of([-1.0, -4.0]))


def test_space_validation():
    with pytest.raises(ValueError):
        SpectralSpace([-1.0], [-0.5])
    with pytest.raises(DimensionError):
        SpectralSpace([-1.0, -2.0], [1.0])
    s = SpectralSpace.dirichlet(5)
    np.testing.assert_array_equal(s.mu, [-1, -4, -9, -16, -25])
    assert s.trace_q == 5.0
    with pytest.raises(ValueError):
        s.mu[0] = 3.0


def test_operator_algebra():
    a = HilbertSchmidtOperator.diagonal([1.0, 2.0])
    b = HilbertSchmidtOperator(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert a.diagonal_flag and not b.diagonal_flag
    np.testing.assert_array_equal((a + b).entries, [[1.0, 1.0], [0.0, 2.0]])
    np.testing.assert_array_equal((2 * a).entries, np.diag([2.0, 4.0]))
    with pytest.raises(DimensionError):
        HilbertSchmidtOperator(np.ones((2, 3)))


def test_psi_norm_examples():
    grid = TimeGrid.from_horizon(1.0, 2.0**-6)
    space = space_of(np.zeros(4))
    B = HilbertSchmidtOperator.identity(4)
    np.testing.assert_allclose(psi_norm_N2(ConstantB(B), space, grid), 2.0, rtol=1e-15)
    one = space_of([0.0])
    psi = DeterministicModulated(math.sqrt, HilbertSchmidtOperator.identity(1))
    np.testing.assert_allclose(psi_norm_N2(psi, one, grid), 1 / math.sqrt(2), rtol=1e-10)
    assert psi_norm_N2(ConstantB(HilbertSchmidtOperator.zero(4)), space, grid) == 0.0


def test_psi_norm_adapted_monte_carlo():
    grid = TimeGrid.from_horizon(1.0, 2.0**-5)
    space = space_of([-1.0])
    fam = build_family(ConstantKernel(1.0), space, grid)
    psi = AdaptedModulated(lambda t, h: np.full(h.shape[0], 0.5), HilbertSchmidtOperator.identity(1), 1.0)
    np.testing.assert_allclose(psi_norm_N2(psi, space, grid, family=fam, n_paths=50, seed=1), 0.5, rtol=1e-12)
    with pytest.raises(TypeError):
        psi_norm_N2(psi, space, grid)


def test_time_grid():
    g = TimeGrid.from_horizon(1.0, 0.25)
    assert g.n_steps == 4 and g.T == 1.0
    np.testing.assert_array_equal(g.times, [0, 0.25, 0.5, 0.75, 1.0])
    assert g.index_of(0.75) == 3
    with pytest.raises(GridError):
        g.index_of(0.3)
    with pytest.raises(GridError):
        TimeGrid.from_horizon(1.0, 0.3)
    with pytest.raises(GridError):
        TimeGrid(-0.1, 3)
    assert g.refine(2) == TimeGrid(0.125, 8)
