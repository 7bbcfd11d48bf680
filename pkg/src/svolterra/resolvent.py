"""Per-mode resolvent families by product integration.

For each eigenmode the resolvent equation reduces to the scalar Volterra
equation ``s(t) = 1 + mu int_0^t a(t - r) s(r) dr``.  Replacing ``s`` by its
piecewise-linear interpolant and integrating the kernel exactly against it
(``Kernel.cell_weights``) gives a lower-triangular system solved by forward
substitution in the compiled core.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from . import core
from .grid import TimeGrid
from .kernels import FractionalKernel, Kernel, analytic_resolvent, kernel_moments
from .spectral import HilbertSchmidtOperator, SpectralSpace


class SingularStepError(ArithmeticError):
    """``1 - mu * w_0 = 0``: the implicit step cannot be solved."""

    def __init__(self, mu, dt):
        super().__init__(f"singular implicit step for mu={mu} at dt={dt}; retry with another step size")
        self.mu = mu
        self.dt = dt


def _weights(kernel: Kernel, grid: TimeGrid):
    # left[n_steps] would need a cell past T; it cancels inside omega[n] - left[n]
    # (= right[n-1]), so pad with a zero cell instead of evaluating beyond T
    cw = kernel_moments(kernel, grid.dt, grid.n_steps)
    left = np.append(cw.left, 0.0)
    omega = np.append(cw.omega, cw.right[-1])
    return omega, left


def volterra_convolve(kernel: Kernel, grid: TimeGrid, x: np.ndarray, method: str = "auto") -> np.ndarray:
    """``(a * x)(t_n)`` for grid samples ``x[..., n]`` interpolated piecewise linearly.

    ``x`` has time on its last axis; any leading shape is allowed.
    """
    omega, left = _weights(kernel, grid)
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    flat = x.reshape(-1, 1, x.shape[-1])
    conv = core.causal_convolve(omega[None, :], flat, method=method)
    conv -= left[None, None, :] * flat[..., :1]
    return conv.reshape(lead + (x.shape[-1],))


def solve_volterra(kernel: Kernel, mu, grid: TimeGrid, forcing) -> np.ndarray:
    """Solve ``x = f + mu (a * x)`` per mode for forcing of shape ``(P, N, n+1)``."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    omega, left = _weights(kernel, grid)
    denom = 1 - mu * omega[0]
    bad = np.flatnonzero(np.abs(denom) <= 1e-14)
    if bad.size:
        raise SingularStepError(float(mu[bad[0]]), grid.dt)
    return core.volterra_solve(omega, left, mu, forcing)


def solve_scalar_resolvent(kernel: Kernel, mu: float, grid: TimeGrid) -> np.ndarray:
    """Scalar resolvent ``s[n] ~ s(t_n)`` with ``s[0] = 1``."""
    forcing = np.ones((1, 1, grid.n_steps + 1))
    return solve_volterra(kernel, [mu], grid, forcing)[0, 0]


@dataclass(frozen=True, eq=False)
class ResolventFamily:
    """Resolvent ``S(t_n) = diag(s[:, n])`` on a uniform grid."""

    grid: TimeGrid
    s: np.ndarray
    kernel: Kernel
    space: SpectralSpace

    @property
    def n_modes(self) -> int:
        return self.s.shape[0]

    def at(self, t: float) -> np.ndarray:
        return self.s[:, self.grid.index_of(t)].copy()

    def apply(self, n: int, h) -> np.ndarray:
        """``S(t_n) h`` for mode coefficients ``h``."""
        return self.s[:, n] * np.asarray(h, dtype=float)


def build_family(kernel: Kernel, space: SpectralSpace, grid: TimeGrid, workers: int = 1) -> ResolventFamily:
    """Resolvent family for every mode of ``space``.

    Modes are independent; with ``workers > 1`` blocks of modes are solved on a
    thread pool.  The result does not depend on ``workers``.
    """
    mu = space.mu
    forcing = np.ones((1, mu.size, grid.n_steps + 1))
    if workers > 1 and mu.size > 1:
        blocks = np.array_split(np.arange(mu.size), min(workers, mu.size))
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: solve_volterra(kernel, mu[b], grid, forcing[:, b]), blocks))
        s = np.concatenate(parts, axis=1)[0]
    else:
        s = solve_volterra(kernel, mu, grid, forcing)[0]
    s.setflags(write=False)
    return ResolventFamily(grid, s, kernel, space)


def _independent_convolution(kernel: Kernel, grid: TimeGrid, s: np.ndarray, refine: int = 4) -> np.ndarray:
    """``(a * s)(t_n)`` by trapezoid sums on a ``refine``-times finer grid.

    ``s`` is carried to the fine grid with a cubic spline.  A singular kernel
    is handled by subtracting ``s(t_n)``, so the trapezoid integrand
    ``a(t_n - r) (s(r) - s(t_n))`` vanishes at ``r = t_n`` and the remaining
    part ``s(t_n) A(t_n)`` uses the exact antiderivative.
    """
    n1 = grid.n_steps + 1
    h = grid.dt / refine
    fine_t = h * np.arange(grid.n_steps * refine + 1)
    out = np.zeros_like(s)
    if n1 < 4:
        sf = np.stack([np.interp(fine_t, grid.times, row) for row in s])
    else:
        sf = CubicSpline(grid.times, s, axis=1)(fine_t)
    singular = isinstance(kernel, FractionalKernel) and kernel.alpha < 1
    lags = h * np.arange(fine_t.size)
    if singular:
        a_lag = np.zeros_like(lags)
        a_lag[1:] = kernel.value(lags[1:])
    else:
        a_lag = np.asarray(kernel.value(lags), dtype=float)
    for n in range(1, n1):
        j = n * refine
        seg = sf[:, j::-1]  # s(t_n - lag)
        if singular:
            f = a_lag[: j + 1] * (seg - sf[:, j : j + 1])
            out[:, n] = h * (f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1])) + sf[:, j] * kernel.antiderivative(fine_t[j])
        else:
            f = a_lag[: j + 1] * seg
            out[:, n] = h * (f.sum(axis=1) - 0.5 * (f[:, 0] + f[:, -1]))
    return out


def resolvent_residual(f: ResolventFamily, refine: int = 4) -> float:
    """Max defect of the resolvent equation under an independent quadrature."""
    conv = _independent_convolution(f.kernel, f.grid, np.asarray(f.s), refine)
    resid = f.s - 1.0 - f.space.mu[:, None] * conv
    return float(np.max(np.abs(resid)))


def sup_norm(f: ResolventFamily) -> float:
    """``M_T = max_n ||S(t_n)||``; the operator norm of a diagonal family is its largest entry."""
    return float(np.max(np.abs(f.s)))


def _trapezoid_time(values, dt, axis=-1):
    return dt * (np.sum(values, axis=axis) - 0.5 * (np.take(values, 0, axis=axis) + np.take(values, -1, axis=axis)))


def admissibility_check(f: ResolventFamily, B: HilbertSchmidtOperator) -> float:
    """Quadrature value of ``int_0^T sum_k lambda_k |S(r) B e_k|^2 dr``."""
    f.space._check(B.n)
    row_weight = (B.entries**2) @ f.space.lam  # sum_k lambda_k B[j,k]^2
    integrand = row_weight[:, None] * f.s**2
    return float(_trapezoid_time(integrand.sum(axis=0), f.grid.dt))


def oracle_error(f: ResolventFamily):
    """Max ``|s - s_exact|`` over modes and grid times, or ``None`` without a closed form."""
    worst = 0.0
    t = f.grid.times
    for k, mu in enumerate(f.space.mu):
        exact = analytic_resolvent(f.kernel, float(mu), t)
        if exact is None:
            return None
        worst = max(worst, float(np.max(np.abs(f.s[k] - exact))))
    return worst


def convergence_sweep(kernel: Kernel, space: SpectralSpace, T: float, dts, with_oracle: bool = True):
    """Rows ``(dt, residual, oracle_error)`` over the step sizes ``dts``."""
    rows = []
    for dt in dts:
        fam = build_family(kernel, space, TimeGrid.from_horizon(T, dt))
        err = oracle_error(fam) if with_oracle else None
        rows.append((float(dt), resolvent_residual(fam), math.nan if err is None else err))
    return rows


__all__ = [
    "SingularStepError",
    "ResolventFamily",
    "solve_scalar_resolvent",
    "solve_volterra",
    "volterra_convolve",
    "build_family",
    "resolvent_residual",
    "sup_norm",
    "admissibility_check",
    "oracle_error",
    "convergence_sweep",
]
