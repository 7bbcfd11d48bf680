import math

import numpy as np
import pytest

from svolterra.grid import TimeGrid
from svolterra.kernels import ConstantKernel, ExponentialKernel, FractionalKernel, LinearKernel, TabulatedKernel
from svolterra.resolvent import (
    SingularStepError,
    admissibility_check,
    build_family,
    convergence_sweep,
    oracle_error,
    resolvent_residual,
    solve_scalar_resolvent,
    sup_norm,
    volterra_convolve,
)
from svolterra.spectral import HilbertSchmidtOperator, SpectralSpace

KERNELS = [ConstantKernel(1.0), LinearKernel(), FractionalKernel(0.5), ExponentialKernel(2.0)]


def one_mode(mu, T=1.0):
    return SpectralSpace([mu], [1.0], T)


@pytest.mark.parametrize("k", KERNELS + [TabulatedKernel(np.linspace(0, 1, 9), np.linspace(1, 2, 9))],
                         ids=lambda k: k.name)
def test_zero_mu_is_identity(k):
    s = solve_scalar_resolvent(k, 0.0, TimeGrid.from_horizon(1.0, 2.0**-5))
    np.testing.assert_array_equal(s, np.ones_like(s))


def test_heat_oracle():
    s = solve_scalar_resolvent(ConstantKernel(1.0), -1.0, TimeGrid.from_horizon(1.0, 2.0**-10))
    np.testing.assert_allclose(s[-1], 0.3678794, atol=1e-5)


def test_wave_oracle():
    grid = TimeGrid.from_horizon(2.0, 2.0**-10)
    s = solve_scalar_resolvent(LinearKernel(), -1.0, grid)
    at = np.interp(math.pi / 2, grid.times, s)
    assert abs(at) <= 1e-4


def test_family_examples():
    grid = TimeGrid.from_horizon(1.0, 2.0**-10)
    f = build_family(ConstantKernel(1.0), SpectralSpace([0.0], [1.0]), grid)
    np.testing.assert_array_equal(f.s, 1.0)
    f = build_family(ConstantKernel(1.0), SpectralSpace([-1.0, -4.0], [1.0, 1.0]), grid)
    np.testing.assert_allclose(f.at(1.0)[1], 0.0183156, atol=1e-4)
    grid = TimeGrid.from_horizon(4.0, 2.0**-10)
    f = build_family(LinearKernel(), SpectralSpace([-1.0, -4.0, -9.0], np.ones(3)), grid)
    at_pi = [np.interp(math.pi, grid.times, row) for row in f.s]
    np.testing.assert_allclose(at_pi, [-1.0, 1.0, -1.0], atol=1e-3)


@pytest.mark.parametrize("k", KERNELS, ids=lambda k: k.name)
def test_family_invariants(k):
    f = build_family(k, SpectralSpace.dirichlet(6), TimeGrid.from_horizon(1.0, 2.0**-6))
    np.testing.assert_array_equal(f.s[:, 0], 1.0)
    # diagonal representation: S(t) A = A S(t) entrywise
    S, A = np.diag(f.s[:, 10]), np.diag(f.space.mu)
    np.testing.assert_array_equal(S @ A, A @ S)


def test_family_workers_identical():
    grid = TimeGrid.from_horizon(1.0, 2.0**-7)
    space = SpectralSpace.dirichlet(9)
    a = build_family(FractionalKernel(0.5), space, grid)
    b = build_family(FractionalKernel(0.5), space, grid, workers=4)
    np.testing.assert_array_equal(a.s, b.s)


def test_residual_examples():
    f = build_family(ConstantKernel(1.0), SpectralSpace([0.0], [1.0]), TimeGrid.from_horizon(1.0, 2.0**-6))
    assert resolvent_residual(f) == 0.0
    f = build_family(ConstantKernel(1.0), one_mode(-1.0), TimeGrid.from_horizon(1.0, 2.0**-8))
    assert resolvent_residual(f) <= 1e-4


@pytest.mark.parametrize("k", [ConstantKernel(1.0), LinearKernel(), ExponentialKernel(2.0)], ids=lambda k: k.name)
def test_smooth_convergence_order(k):
    rows = convergence_sweep(k, one_mode(-1.0), 1.0, [2.0**-6, 2.0**-7, 2.0**-8])
    res = [r[1] for r in rows]
    orders = np.log2(np.array(res[:-1]) / np.array(res[1:]))
    assert np.all((orders >= 1.5) & (orders <= 2.5)), orders
    err = [r[2] for r in rows]
    assert np.all(np.log2(np.array(err[:-1]) / np.array(err[1:])) >= 1.8)


def test_fractional_convergence_order():
    rows = convergence_sweep(FractionalKernel(0.5), one_mode(-1.0), 1.0, [2.0**-6, 2.0**-7, 2.0**-8])
    res = [r[1] for r in rows]
    assert np.all(np.log2(np.array(res[:-1]) / np.array(res[1:])) >= 1.0)


def test_sup_norm_examples():
    grid = TimeGrid.from_horizon(4.0, 2.0**-8)
    for k in (ConstantKernel(1.0), LinearKernel()):
        f = build_family(k, SpectralSpace.dirichlet(4), grid)
        np.testing.assert_allclose(sup_norm(f), 1.0, rtol=0, atol=1e-12)
    assert sup_norm(build_family(LinearKernel(), SpectralSpace([0.0], [1.0]), grid)) == 1.0


def test_admissibility_examples():
    f = build_family(ConstantKernel(1.0), one_mode(-1.0, 20.0), TimeGrid.from_horizon(20.0, 2.0**-8))
    np.testing.assert_allclose(admissibility_check(f, HilbertSchmidtOperator.identity(1)), 0.5, atol=1e-3)
    assert admissibility_check(f, HilbertSchmidtOperator.zero(1)) == 0.0
    f = build_family(ConstantKernel(1.0), SpectralSpace([-1.0, -2.0], [1.0, 1.0]), TimeGrid.from_horizon(1.0, 2.0**-9))
    expected = (1 - math.exp(-2)) / 2 + (1 - math.exp(-4)) / 4
    value = admissibility_check(f, HilbertSchmidtOperator.identity(2))
    np.testing.assert_allclose(value, expected, atol=1e-4)
    np.testing.assert_allclose(value, 0.6777035, atol=1e-4)


def test_oracle_error_exponential_kernel():
    f = build_family(ExponentialKernel(2.0), SpectralSpace.dirichlet(3), TimeGrid.from_horizon(1.0, 2.0**-9))
    assert oracle_error(f) <= 1e-4


def test_singular_step():
    # 1 - mu * dt/2 = 0 for a constant kernel
    with pytest.raises(SingularStepError):
        solve_scalar_resolvent(ConstantKernel(1.0), 2.0 / 0.25, TimeGrid.from_horizon(1.0, 0.25))


def test_volterra_convolve_exact_for_linear_functions():
    # product integration is exact for piecewise-linear x: (1 * t)(t) = t^2 / 2
    grid = TimeGrid.from_horizon(1.0, 0.125)
    conv = volterra_convolve(ConstantKernel(1.0), grid, grid.times)
    np.testing.assert_allclose(conv, grid.times**2 / 2, rtol=1e-14, atol=1e-16)
    conv = volterra_convolve(FractionalKernel(0.5), grid, np.ones(grid.n_steps + 1))
    np.testing.assert_allclose(conv, FractionalKernel(0.5).antiderivative(grid.times), rtol=1e-13, atol=1e-16)
