import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from svolterra.kernels import (
    ConstantKernel,
    ExponentialKernel,
    FractionalKernel,
    KernelError,
    LinearKernel,
    NotDifferentiableError,
    SingularEvaluationError,
    TabulatedKernel,
    analytic_resolvent,
    eval_kernel,
    eval_kernel_derivative,
    kernel_from_spec,
    kernel_moments,
    mittag_leffler,
)

ALL_KERNELS = [
    ConstantKernel(1.0),
    ConstantKernel(2.5),
    LinearKernel(),
    FractionalKernel(0.5),
    FractionalKernel(0.3),
    FractionalKernel(1.5),
    ExponentialKernel(2.0),
    ExponentialKernel(1e-6),
]


def test_eval_examples():
    assert eval_kernel(ConstantKernel(1.0), 3.7) == 1.0
    assert eval_kernel(LinearKernel(), 2.0) == 2.0
    np.testing.assert_allclose(eval_kernel(FractionalKernel(0.5), 1.0), 0.5641895835, rtol=1e-10)
    np.testing.assert_allclose(eval_kernel(FractionalKernel(0.5), 1.0), 1 / math.sqrt(math.pi), rtol=1e-14)


def test_eval_errors():
    with pytest.raises(SingularEvaluationError):
        eval_kernel(FractionalKernel(0.5), 0.0)
    with pytest.raises(KernelError):
        eval_kernel(ConstantKernel(1.0), -1.0)
    assert eval_kernel(FractionalKernel(1.5), 0.0) == 0.0


def test_derivative_examples():
    assert eval_kernel_derivative(ConstantKernel(3.0), 1.0) == 0.0
    assert eval_kernel_derivative(LinearKernel(), 5.0) == 1.0
    np.testing.assert_allclose(eval_kernel_derivative(ExponentialKernel(2.0), 0.5), -2 * math.exp(-1), rtol=1e-14)
    np.testing.assert_allclose(eval_kernel_derivative(ExponentialKernel(2.0), 0.5), -0.7357589, atol=1e-7)


def test_derivative_not_allowed():
    with pytest.raises(NotDifferentiableError):
        eval_kernel_derivative(FractionalKernel(0.5), 1.0)
    t = np.linspace(0, 1, 11)
    with pytest.raises(NotDifferentiableError):
        eval_kernel_derivative(TabulatedKernel(t, t**2), 0.5)


@pytest.mark.parametrize("k", [k for k in ALL_KERNELS if k.differentiable], ids=lambda k: k.name)
@pytest.mark.parametrize("t", [0.3, 1.0, 2.7])
def test_derivative_matches_finite_differences(k, t):
    h = 1e-4
    fd = (eval_kernel(k, t + h) - eval_kernel(k, t - h)) / (2 * h)
    np.testing.assert_allclose(eval_kernel_derivative(k, t), fd, rtol=1e-6, atol=1e-8)


def test_moment_examples():
    w = kernel_moments(ConstantKernel(1.0), 0.1, 5)
    np.testing.assert_allclose([w.left[0], w.right[0]], [0.05, 0.05], rtol=1e-14)
    w = kernel_moments(FractionalKernel(0.5), 1.0, 1)
    np.testing.assert_allclose(w.total[0], 2 / math.sqrt(math.pi), rtol=1e-14)
    np.testing.assert_allclose(w.total[0], 1.1283792, atol=1e-7)
    w = kernel_moments(LinearKernel(), 1.0, 1)
    np.testing.assert_allclose(w.total[0], 0.5, rtol=1e-15)


@pytest.mark.parametrize("k", ALL_KERNELS, ids=lambda k: k.name)
@settings(max_examples=25, deadline=None)
@given(dt=st.floats(1e-4, 0.5), n=st.integers(1, 300))
def test_moment_consistency(k, dt, n):
    w = kernel_moments(k, dt, n)
    total = np.sum(w.total)
    exact = k.antiderivative(n * dt)
    assert abs(total - exact) <= 1e-12 * max(1.0, abs(exact))


@pytest.mark.parametrize("k", ALL_KERNELS, ids=lambda k: k.name)
def test_moment_weights_against_quadrature(k):
    from scipy import integrate

    dt, n = 0.25, 6
    w = kernel_moments(k, dt, n)
    for c in range(n):
        lo, hi = c * dt, (c + 1) * dt
        opts = {"points": None} if c else {}
        left, _ = integrate.quad(lambda t: eval_kernel(k, t) * (hi - t) / dt, lo, hi, epsabs=1e-14, **opts)
        right, _ = integrate.quad(lambda t: eval_kernel(k, t) * (t - lo) / dt, lo, hi, epsabs=1e-14, **opts)
        np.testing.assert_allclose([w.left[c], w.right[c]], [left, right], rtol=1e-8, atol=1e-13)


def test_tabulated_matches_linear_interpolant():
    t = np.linspace(0.0, 2.0, 21)
    k = TabulatedKernel(t, np.cos(t))
    w = kernel_moments(k, 0.05, 40)
    np.testing.assert_allclose(np.sum(w.total), k.antiderivative(2.0), rtol=1e-13)
    np.testing.assert_allclose(eval_kernel(k, 0.15), 0.5 * (math.cos(0.1) + math.cos(0.2)), rtol=1e-14)


@pytest.mark.parametrize("k", [ExponentialKernel(1.5), FractionalKernel(0.5), FractionalKernel(0.9)],
                         ids=lambda k: k.name)
def test_monotone_positive(k):
    t = np.linspace(0.01, 5, 400)
    v = eval_kernel(k, t)
    assert np.all(v > 0)
    assert np.all(np.diff(v) <= 0)


def test_flags():
    assert ConstantKernel(1.0).differentiable and LinearKernel().differentiable
    assert not FractionalKernel(0.5).differentiable
    assert FractionalKernel(1.5).differentiable
    assert ExponentialKernel(1.0).differentiable
    assert FractionalKernel(0.5).completely_positive


def test_mittag_leffler_oracles():
    np.testing.assert_allclose(mittag_leffler(0.5, -1.0), math.e * special.erfc(1.0), rtol=1e-14)
    np.testing.assert_allclose(mittag_leffler(0.5, -1.0), 0.4275836, atol=1e-7)
    np.testing.assert_allclose(mittag_leffler(1.0, -2.0), math.exp(-2.0), rtol=1e-15)
    # E_2(-x^2) = cos(x)
    np.testing.assert_allclose(mittag_leffler(2.0, -4.0), math.cos(2.0), rtol=1e-12)


@pytest.mark.parametrize("z", [-0.1, -1.0, -3.0, -10.0])
def test_mittag_leffler_series_path_matches_erfc(z):
    # 0.5 + 1e-12 forces the generic series instead of the erfc identity
    np.testing.assert_allclose(mittag_leffler(0.5 + 1e-12, z), mittag_leffler(0.5, z), rtol=1e-9)


def test_analytic_resolvent_examples():
    np.testing.assert_allclose(analytic_resolvent(ConstantKernel(1.0), -1.0, 1.0), 0.3678794, atol=1e-7)
    np.testing.assert_allclose(analytic_resolvent(LinearKernel(), -1.0, math.pi), -1.0, atol=1e-15)
    np.testing.assert_allclose(analytic_resolvent(FractionalKernel(0.5), -1.0, 1.0), 0.4275836, atol=1e-7)
    t = np.linspace(0, 1, 5)
    assert analytic_resolvent(TabulatedKernel(t, t), -1.0, 1.0) is None


def test_exponential_resolvent_solves_ode():
    # s' = mu*scale*s - b (s - 1) from differentiating the resolvent equation
    k = ExponentialKernel(2.0, 1.0)
    mu, t, h = -3.0, 0.7, 1e-5
    s = analytic_resolvent(k, mu, t)
    ds = (analytic_resolvent(k, mu, t + h) - analytic_resolvent(k, mu, t - h)) / (2 * h)
    s_int, _ = __import__("scipy").integrate.quad(lambda r: analytic_resolvent(k, mu, r), 0, t)
    # d/dt (a*s) = s(t) - b (a*s); a*s = (s - 1)/mu
    np.testing.assert_allclose(ds / mu, s - 2.0 * (s - 1) / mu, rtol=1e-7)
    assert s_int > 0


@pytest.mark.parametrize("spec", [
    {"type": "constant"},
    {"type": "constant", "c": 2.0},
    {"type": "linear"},
    {"type": "fractional", "alpha": 0.5},
    {"type": "exponential", "b": 2.0},
])
def test_spec_roundtrip(spec):
    k = kernel_from_spec(spec)
    assert kernel_from_spec(k.to_spec()) == k


@pytest.mark.parametrize("spec", [
    {"type": "fractinal", "alpha": 0.5},
    {"type": "fractional"},
    {"type": "fractional", "alpha": 2.5},
    {"type": "fractional", "alpha": 0.5, "beta": 1},
    {"type": "exponential", "b": -1.0},
])
def test_spec_errors(spec):
    with pytest.raises(KernelError):
        kernel_from_spec(spec)
