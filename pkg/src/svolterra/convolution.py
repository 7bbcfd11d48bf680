"""Stochastic convolutions, mild solutions and their Gaussian law.

The discrete convolution uses the left-point (Ito) rule

    W^Psi(t_n) = sum_{j<n} S(t_n - t_j) Psi(t_j) dW_j,

recomputing ``S(t_n - t_j)`` from the stored resolvent rows for every pair;
there is no semigroup shortcut.  Because ``S`` is diagonal, each mode is a
causal lag sum, evaluated either directly (compiled core) or by FFT.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate

from . import core
from .grid import GridError, TimeGrid
from .noise import GAUSSIAN_STREAM, NoisePath, path_generator, sample_increments
from .resolvent import ResolventFamily, _trapezoid_time, admissibility_check
from .spectral import DimensionError, HilbertSchmidtOperator, SpectralSpace, hs_norm


class PsiProcess:
    """Integrand ``Psi(t) = g(t) B`` with a scalar modulation ``g``."""

    B: HilbertSchmidtOperator
    deterministic = True

    def factors(self, grid: TimeGrid) -> np.ndarray:
        """``g(t_j)`` at the left points ``j = 0 .. n_steps - 1``."""
        raise NotImplementedError

    def sq_integral(self, space: SpectralSpace, t: float) -> float:
        """``int_0^t |Psi(r)|^2_{L_2^0} dr`` for deterministic integrands."""
        raise NotImplementedError

    def expected_sq_integral(self, space: SpectralSpace, grid: TimeGrid, **mc) -> float:
        return self.sq_integral(space, grid.T)


@dataclass(frozen=True, eq=False)
class ConstantB(PsiProcess):
    B: HilbertSchmidtOperator

    def factors(self, grid):
        return np.ones(grid.n_steps)

    def sq_integral(self, space, t):
        return hs_norm(self.B, space) ** 2 * t


@dataclass(frozen=True, eq=False)
class DeterministicModulated(PsiProcess):
    phi: Callable[[float], float]
    B: HilbertSchmidtOperator

    def factors(self, grid):
        return np.array([float(self.phi(t)) for t in grid.times[:-1]])

    def sq_integral(self, space, t):
        if t == 0:
            return 0.0
        val, _ = integrate.quad(lambda r: float(self.phi(r)) ** 2, 0.0, t, limit=200, epsabs=1e-13, epsrel=1e-12)
        return hs_norm(self.B, space) ** 2 * val


@dataclass(frozen=True, eq=False)
class AdaptedModulated(PsiProcess):
    """``g = functional(t_j, history)`` using the convolution history up to ``t_j``.

    ``functional(t, hist)`` receives ``hist`` of shape ``(P, N, j+1)`` and
    returns ``P`` scalars; values larger than ``bound`` in magnitude raise.
    """

    functional: Callable[[float, np.ndarray], np.ndarray]
    B: HilbertSchmidtOperator
    bound: float = 1.0
    deterministic = False

    def factors(self, grid):
        raise TypeError("adapted integrands have path-dependent factors")

    def sq_integral(self, space, t):
        raise TypeError("adapted integrands need a Monte Carlo estimate")

    def expected_sq_integral(self, space, grid, family=None, n_paths=1000, seed=0, **_):
        if family is None:
            raise TypeError("Monte Carlo norm of an adapted integrand needs family=")
        dW = sample_increments(space, grid, seed, range(n_paths))
        _, g = convolve_increments(family, self, dW, return_factors=True)
        return float(hs_norm(self.B, space) ** 2 * np.mean(grid.dt * np.sum(g**2, axis=1)))


@dataclass(frozen=True, eq=False)
class SolutionPath:
    grid: TimeGrid
    x: np.ndarray
    provenance: str
    x0: np.ndarray | None = None
    report: dict = field(default_factory=dict)

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.x, axis=0)))


def _apply_B(B: HilbertSchmidtOperator, dW: np.ndarray) -> np.ndarray:
    if B.diagonal_flag:
        return B.diag[None, :, None] * dW
    return np.einsum("jk,pkn->pjn", B.entries, dW)


def _check_family(family: ResolventFamily, psi: PsiProcess, grid: TimeGrid, n_modes: int):
    family.grid.check_same(grid)
    if psi.B.n != family.n_modes or n_modes != family.n_modes:
        raise DimensionError("integrand, noise and resolvent disagree on the number of modes")


def convolve_increments(family: ResolventFamily, psi: PsiProcess, dW: np.ndarray, method: str = "auto",
                        return_factors: bool = False):
    """Discrete ``W^Psi`` for a stack of increments ``dW`` of shape ``(P, N, n)``.

    Returns ``(P, N, n+1)`` values with ``W^Psi(0) = 0``; with
    ``return_factors`` also the ``(P, n)`` modulation values actually used.
    """
    dW = np.asarray(dW, dtype=float)
    P, N, n = dW.shape
    if n != family.grid.n_steps:
        raise GridError("increments and resolvent family use different grids")
    if psi.B.n != N or family.n_modes != N:
        raise DimensionError("integrand, noise and resolvent disagree on the number of modes")
    G = _apply_B(psi.B, dW)
    out = np.zeros((P, N, n + 1))
    if psi.deterministic:
        g = np.broadcast_to(psi.factors(family.grid), (P, n))
        G = G * g[:, None, :]
        out[..., 1:] = core.causal_convolve(np.ascontiguousarray(family.s[:, 1:]), G, method=method)
    else:
        g = np.empty((P, n))
        s = family.s
        for j in range(n):
            gj = np.asarray(psi.functional(family.grid.times[j], out[..., : j + 1]), dtype=float)
            gj = np.broadcast_to(gj, (P,))
            if np.any(np.abs(gj) > psi.bound * (1 + 1e-12)):
                raise ValueError("adapted integrand exceeded its declared bound")
            g[:, j] = gj
            G[..., j] *= gj[:, None]
            # x_{j+1} = sum_{i<=j} s[:, j+1-i] G_i
            out[..., j + 1] = np.einsum("pki,ki->pk", G[..., : j + 1], s[:, j + 1 : 0 : -1])
    return (out, np.array(g)) if return_factors else out


def stochastic_convolution(f: ResolventFamily, psi: PsiProcess, noise: NoisePath, method: str = "auto") -> SolutionPath:
    """``W^Psi(t_n) = sum_{j<n} S(t_n - t_j) Psi(t_j) dW_j`` for one noise path."""
    _check_family(f, psi, noise.grid, noise.n_modes)
    x, g = convolve_increments(f, psi, noise.dW[None], method=method, return_factors=True)
    report = {} if psi.deterministic else {"factors": g[0]}
    return SolutionPath(f.grid, x[0], "convolution", np.zeros(f.n_modes), report)


def condition_value(f: ResolventFamily, psi: PsiProcess, t: float | None = None) -> float:
    """``E int_0^t |S(t - r) Psi(r)|^2_{L_2^0} dr`` by trapezoid quadrature.

    Exact in expectation for deterministic integrands; for adapted ones the
    declared bound gives an upper value.
    """
    n = f.grid.n_steps if t is None else f.grid.index_of(t)
    w = (psi.B.entries**2) @ f.space.lam
    s_rev = f.s[:, n::-1] ** 2  # |s_j(t_n - r)|^2 at r = t_0..t_n
    if psi.deterministic:
        times = f.grid.times[: n + 1]
        if isinstance(psi, ConstantB):
            g2 = np.ones(n + 1)
        else:
            g2 = np.array([float(psi.phi(r)) ** 2 for r in times])
    else:
        g2 = np.full(n + 1, psi.bound**2)
    return float(_trapezoid_time((w[:, None] * s_rev).sum(axis=0) * g2, f.grid.dt))


def mild_solution(f: ResolventFamily, X0, psi: PsiProcess, noise: NoisePath, method: str = "auto") -> SolutionPath:
    """``X(t_n) = S(t_n) X0 + W^Psi(t_n)``; the integrability condition value is kept in ``report``."""
    X0 = np.asarray(X0, dtype=float)
    if X0.shape != (f.n_modes,):
        raise DimensionError("X0 has the wrong number of modes")
    conv = stochastic_convolution(f, psi, noise, method)
    x = f.s * X0[:, None] + conv.x
    report = dict(conv.report, condition_value=condition_value(f, psi))
    return SolutionPath(f.grid, x, "mild", X0, report)


def covariance_quadrature(f: ResolventFamily, B: HilbertSchmidtOperator, t: float) -> np.ndarray:
    """Trapezoid value of ``int_0^t S(r) B Q B^* S^*(r) dr``."""
    n = f.grid.index_of(t)
    f.space._check(B.n)
    BQB = (B.entries * f.space.lam[None, :]) @ B.entries.T
    if n == 0:
        return np.zeros_like(BQB)
    s = f.s[:, : n + 1]
    prod = s[:, None, :] * s[None, :, :]
    return BQB * _trapezoid_time(prod, f.grid.dt)


def discrete_covariance(f: ResolventFamily, B: HilbertSchmidtOperator, t: float) -> np.ndarray:
    """Exact covariance of the discrete left-point convolution at ``t``."""
    n = f.grid.index_of(t)
    BQB = (B.entries * f.space.lam[None, :]) @ B.entries.T
    s = f.s[:, 1 : n + 1]
    return BQB * f.grid.dt * (s @ s.T)


def increment_mean_square(f: ResolventFamily, B: HilbertSchmidtOperator) -> float:
    """``max_n E|W^B(t_{n+1}) - W^B(t_n)|^2`` for the discrete convolution."""
    w = (B.entries**2) @ f.space.lam
    s = f.s
    ds = np.diff(s[:, 1:], axis=1) ** 2  # (s_{m+1} - s_m)^2 for m >= 1
    cum = np.concatenate([np.zeros((s.shape[0], 1)), np.cumsum(ds, axis=1)], axis=1)
    per_n = (w[:, None] * (cum + s[:, 1:2] ** 2)).sum(axis=0) * f.grid.dt
    return float(per_n.max())


def gaussian_variances(f: ResolventFamily, B: HilbertSchmidtOperator, t: float) -> np.ndarray:
    if not B.diagonal_flag:
        raise ValueError("exact Gaussian sampling needs a diagonal B")
    return np.diag(covariance_quadrature(f, B, t)).copy()


def exact_gaussian_sample(f: ResolventFamily, B: HilbertSchmidtOperator, t: float, seed: int, path_index: int) -> np.ndarray:
    """One draw from ``N(0, diag(lambda_k b_k^2 int_0^t s_k^2))``."""
    sd = np.sqrt(gaussian_variances(f, B, t))
    return sd * path_generator(seed, path_index, GAUSSIAN_STREAM).standard_normal(f.n_modes)


def exact_gaussian_samples(f: ResolventFamily, B: HilbertSchmidtOperator, t: float, seed: int, path_indices) -> np.ndarray:
    sd = np.sqrt(gaussian_variances(f, B, t))
    z = np.stack([path_generator(seed, p, GAUSSIAN_STREAM).standard_normal(f.n_modes) for p in path_indices])
    return sd[None, :] * z


def trajectory_l2(path) -> float | np.ndarray:
    """Trapezoid value of ``int_0^T |x(t)|^2 dt``; accepts a path or a ``(..., N, n+1)`` array."""
    if isinstance(path, SolutionPath):
        return float(_trapezoid_time(np.sum(path.x**2, axis=0), path.grid.dt))
    raise TypeError("trajectory_l2 expects a SolutionPath; use trajectory_l2_array for stacks")


def trajectory_l2_array(x: np.ndarray, dt: float) -> np.ndarray:
    return _trapezoid_time(np.sum(x**2, axis=-2), dt)


__all__ = [
    "PsiProcess",
    "ConstantB",
    "DeterministicModulated",
    "AdaptedModulated",
    "SolutionPath",
    "convolve_increments",
    "stochastic_convolution",
    "mild_solution",
    "condition_value",
    "covariance_quadrature",
    "discrete_covariance",
    "increment_mean_square",
    "exact_gaussian_sample",
    "exact_gaussian_samples",
    "trajectory_l2",
    "trajectory_l2_array",
    "admissibility_check",
]
