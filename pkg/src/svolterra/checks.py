"""Residual checks for the strong, weak, mild and Ito-type solution identities.

All identities hold in the continuum limit only; the discrete convolution and
the discrete weak form commit different ``O(dt)`` errors.  Each check
therefore returns a residual, and the convergence statements are made on
medians over many paths under grid refinement.

``A* = A`` throughout (self-adjoint diagonal representation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .convolution import ConstantB, PsiProcess, SolutionPath, _apply_B, convolve_increments
from .grid import GridError, TimeGrid
from .kernels import Kernel, NotDifferentiableError
from .noise import NoisePath, sample_increments
from .resolvent import ResolventFamily, _trapezoid_time, _weights, build_family, solve_volterra, volterra_convolve
from .spectral import HilbertSchmidtOperator, SpectralSpace


@dataclass(frozen=True, eq=False)
class TestFunctional:
    """``xi(t) = xi0 * phi(t)``; ``phi = None`` means the constant 1."""

    __test__ = False  # not a pytest class

    xi0: np.ndarray
    phi: Callable[[np.ndarray], np.ndarray] | None = None
    dphi: Callable[[np.ndarray], np.ndarray] | None = None

    @property
    def constant_flag(self) -> bool:
        return self.phi is None

    def values(self, t):
        return np.ones_like(t) if self.phi is None else np.asarray(self.phi(t), dtype=float)

    def derivatives(self, t):
        if self.phi is None:
            return np.zeros_like(t)
        if self.dphi is None:
            raise ValueError("time-varying test functional needs its derivative dphi")
        return np.asarray(self.dphi(t), dtype=float)


def _stochastic_sums(psi: PsiProcess, dW: np.ndarray, factors: np.ndarray | None, grid: TimeGrid) -> np.ndarray:
    """``int_0^{t_n} Psi dW`` for every n, summed straight from the increments."""
    G = _apply_B(psi.B, dW)
    if factors is None:
        factors = psi.factors(grid)[None, :]
    G = G * factors[:, None, :]
    out = np.zeros(G.shape[:-1] + (G.shape[-1] + 1,))
    np.cumsum(G, axis=-1, out=out[..., 1:])
    return out


def _conv_at(kernel: Kernel, grid: TimeGrid, x: np.ndarray, n: int) -> np.ndarray:
    """``(a * x)(t_n)`` by product integration; ``x`` is ``(..., N, n_steps+1)``."""
    omega, left = _weights(kernel, grid)
    return x[..., n::-1] @ omega[: n + 1] - left[n] * x[..., 0]


def _path_arrays(path: SolutionPath, noise: NoisePath):
    path.grid.check_same(noise.grid)
    x0 = np.zeros(path.x.shape[0]) if path.x0 is None else path.x0
    factors = path.report.get("factors")
    return path.x[None], x0, noise.dW[None], None if factors is None else factors[None]


def _weak_defect(x, x0, xi0, kernel, space, psi, dW, factors, grid, n):
    stoch = _stochastic_sums(psi, dW, factors, grid)[..., n]
    conv = _conv_at(kernel, grid, x, n)
    return (x[..., n] - x0 - space.mu * conv - stoch) @ xi0


def _strong_defect(x, x0, kernel, space, psi, dW, factors, grid, n):
    stoch = _stochastic_sums(psi, dW, factors, grid)[..., n]
    conv = _conv_at(kernel, grid, x, n)
    return x[..., n] - x0 - space.mu * conv - stoch


def weak_residual(path: SolutionPath, xi: TestFunctional, k: Kernel, space: SpectralSpace, psi: PsiProcess,
                  noise: NoisePath, t: float) -> float:
    """``|<x(t),xi> - <X0,xi> - <(a*x)(t), A xi> - <int Psi dW, xi>|``."""
    x, x0, dW, g = _path_arrays(path, noise)
    n = path.grid.index_of(t)
    return float(abs(_weak_defect(x, x0, np.asarray(xi.xi0, float), k, space, psi, dW, g, path.grid, n)[0]))


def strong_residual(path: SolutionPath, k: Kernel, space: SpectralSpace, psi: PsiProcess, noise: NoisePath,
                    t: float) -> float:
    """H-norm of ``x(t) - X0 - A (a*x)(t) - int_0^t Psi dW`` (A is bounded after truncation)."""
    x, x0, dW, g = _path_arrays(path, noise)
    n = path.grid.index_of(t)
    return float(np.linalg.norm(_strong_defect(x, x0, k, space, psi, dW, g, path.grid, n)[0]))


def _ito_defect(x, x0, xi: TestFunctional, kernel, space, B, dW, grid, n):
    if not kernel.differentiable:
        raise NotDifferentiableError(f"{kernel.name} kernel is not differentiable")
    dk = kernel.derivative_kernel()
    a0 = kernel.value_at_zero()
    xi0 = np.asarray(xi.xi0, dtype=float)
    times = grid.times[: n + 1]
    phi = xi.values(times)
    dphi = xi.derivatives(times)
    x_n = x[..., : n + 1]
    dconv = volterra_convolve(dk, grid, x)[..., : n + 1]
    drift = np.einsum("...kn,k->...n", dconv + a0 * x_n, space.mu * xi0) * phi
    drift_int = _trapezoid_time(drift, grid.dt)
    noise_term = np.einsum("...kn,k,n->...", _apply_B(B, dW)[..., :n], xi0, phi[:n])
    test_deriv = _trapezoid_time(np.einsum("...kn,k->...n", x_n, xi0) * dphi, grid.dt)
    return (x[..., n] @ xi0) * phi[n] - (x0 @ xi0) * phi[0] - drift_int - noise_term - test_deriv


def ito_representation_residual(path: SolutionPath, xi: TestFunctional, k: Kernel, space: SpectralSpace,
                                B: HilbertSchmidtOperator, noise: NoisePath, t: float) -> float:
    """Defect of the Ito-type formula for ``<X(t), xi(t)>`` with ``Psi = B``."""
    x, x0, dW, _ = _path_arrays(path, noise)
    n = path.grid.index_of(t)
    return float(abs(_ito_defect(x, x0, xi, k, space, B, dW, path.grid, n)[0]))


def mode_identity_defect(f: ResolventFamily) -> float:
    """``max_{k,n} |mu_k (a*s_k)(t_n) - (s_k(t_n) - 1)|`` with product-integration convolution."""
    conv = volterra_convolve(f.kernel, f.grid, np.asarray(f.s))
    return float(np.max(np.abs(f.space.mu[:, None] * conv - (f.s - 1.0))))


def dirichlet_fubini_gap(f: ResolventFamily, psi: PsiProcess, noise: NoisePath) -> float:
    """Compare ``(a * W^Psi)(T)`` summed path-first and resolvent-first.

    Path-first: convolve the kernel with the simulated convolution.  Resolvent
    first: ``sum_j [sum_{m<n-j} omega_m s(t_{n-j-m})] Psi_j dW_j``.  The two
    finite double sums are the same terms in a different order.
    """
    if not psi.deterministic:
        raise TypeError("needs a deterministic integrand")
    grid = f.grid
    n = grid.n_steps
    x = convolve_increments(f, psi, noise.dW[None], method="direct")[0]
    path_first = _conv_at(f.kernel, grid, x, n)
    omega, _ = _weights(f.kernel, grid)
    G = _apply_B(psi.B, noise.dW[None])[0] * psi.factors(grid)[None, :]
    inner = np.zeros((f.n_modes, n))
    for j in range(n):
        L = n - j
        inner[:, j] = f.s[:, L:0:-1] @ omega[:L]
    resolvent_first = np.sum(inner * G, axis=1)
    return float(np.max(np.abs(path_first - resolvent_first)))


def weak_solution_paths(kernel: Kernel, space: SpectralSpace, grid: TimeGrid, x0, psi: PsiProcess, dW) -> np.ndarray:
    """Solve the discrete weak equation ``x = X0 + A(a*x) + int Psi dW`` directly."""
    if not psi.deterministic:
        raise TypeError("direct weak solve needs a deterministic integrand")
    forcing = np.asarray(x0, float)[None, :, None] + _stochastic_sums(psi, dW, None, grid)
    return solve_volterra(kernel, space.mu, grid, forcing)


@dataclass
class ChainResult:
    n_paths: int
    dt: float
    strong: np.ndarray | None
    weak: np.ndarray
    ito: np.ndarray | None
    mild_weak_gap: np.ndarray | None
    sup_norms: np.ndarray
    skipped: dict
    extra: dict

    def median(self, name):
        vals = getattr(self, name)
        return None if vals is None else float(np.median(vals))


def simulate_mild_batch(family: ResolventFamily, psi: PsiProcess, x0, dW):
    x, g = convolve_increments(family, psi, dW, return_factors=True)
    x = x + family.s[None] * np.asarray(x0, float)[None, :, None]
    return x, (None if psi.deterministic else g)


def residual_batch(kernel: Kernel, space: SpectralSpace, grid: TimeGrid, psi: PsiProcess, x0, xi: TestFunctional,
                   dW: np.ndarray, family: ResolventFamily | None = None, t: float | None = None) -> ChainResult:
    """Strong, weak, Ito and mild-vs-weak residuals for a stack of noise paths."""
    family = family or build_family(kernel, space, grid)
    n = grid.n_steps if t is None else grid.index_of(t)
    x0 = np.zeros(space.n_modes) if x0 is None else np.asarray(x0, float)
    xi0 = np.asarray(xi.xi0, float)
    x, g = simulate_mild_batch(family, psi, x0, dW)
    sup = np.max(np.linalg.norm(x, axis=1), axis=-1)
    skipped = {}
    weak = np.abs(_weak_defect(x, x0, xi0, kernel, space, psi, dW, g, grid, n))
    strong = ito = gap = None
    extra = {}
    if kernel.differentiable:
        strong = np.linalg.norm(_strong_defect(x, x0, kernel, space, psi, dW, g, grid, n), axis=-1)
        if isinstance(psi, ConstantB):
            ito = np.abs(_ito_defect(x, x0, xi, kernel, space, psi.B, dW, grid, n))
        else:
            skipped["ito"] = "integrand is not a constant operator"
    else:
        skipped["strong"] = skipped["ito"] = "kernel not differentiable"
    if psi.deterministic:
        xw = weak_solution_paths(kernel, space, grid, x0, psi, dW)
        gap = np.max(np.linalg.norm(xw - x, axis=1), axis=-1)
        if strong is not None:
            # strong => weak: |<D, xi>| <= |D| |xi| for the same defect vector D
            extra["strong_implies_weak"] = bool(np.all(weak <= strong * np.linalg.norm(xi0) * (1 + 1e-12) + 1e-14))
    else:
        skipped["mild_weak"] = "adapted integrand"
    return ChainResult(dW.shape[0], grid.dt, strong, weak, ito, gap, sup, skipped, extra)


def refinement_sweep(kernel: Kernel, space: SpectralSpace, T: float, dts, psi: PsiProcess, x0, xi: TestFunctional,
                     n_paths: int = 100, seed: int = 42):
    """Residual batches on successively halved grids driven by the same Brownian paths.

    Noise is drawn on the finest grid and summed onto the coarser ones, so the
    comparison is pathwise.
    """
    dts = sorted(dts, reverse=True)
    fine = TimeGrid.from_horizon(T, dts[-1])
    dW_fine = sample_increments(space, fine, seed, range(n_paths))
    out = []
    for dt in dts:
        grid = TimeGrid.from_horizon(T, dt)
        factor = fine.n_steps // grid.n_steps
        if factor * grid.n_steps != fine.n_steps:
            raise GridError("sweep step sizes must be nested by integer factors")
        dW = dW_fine.reshape(n_paths, space.n_modes, grid.n_steps, factor).sum(axis=-1)
        out.append(residual_batch(kernel, space, grid, psi, x0, xi, dW))
    return out


def _ratios(values):
    return [float(a / b) if b > 0 else float("inf") for a, b in zip(values[:-1], values[1:])]


def run_solution_chain(kernel: Kernel, space: SpectralSpace, grid: TimeGrid, psi: PsiProcess, x0=None, xi=None,
                       n_paths: int = 100, seed: int = 42, tolerance: float = 5e-2, dt_sweep=None,
                       min_factor: float = 1.4) -> dict:
    """Strong => weak => mild consistency on shared noise.

    Residual medians are taken relative to each path's sup norm.  With
    ``dt_sweep`` the medians must also drop by ``min_factor`` per halving.
    """
    xi = xi or TestFunctional(np.ones(space.n_modes) / np.sqrt(space.n_modes))
    x0 = np.zeros(space.n_modes) if x0 is None else np.asarray(x0, float)
    dW = sample_increments(space, grid, seed, range(n_paths))
    res = residual_batch(kernel, space, grid, psi, x0, xi, dW)
    scale = np.where(res.sup_norms > 0, res.sup_norms, 1.0)
    checks = {}
    for name in ("strong", "weak", "ito", "mild_weak_gap"):
        vals = getattr(res, name)
        if vals is None:
            continue
        rel = vals / scale
        med = float(np.median(rel))
        checks[name] = {"median": float(np.median(vals)), "median_relative": med, "max": float(np.max(vals)),
                        "pass": med <= tolerance}
    for name, reason in res.skipped.items():
        checks.setdefault(name, {"skipped": reason, "pass": True})
    if "strong_implies_weak" in res.extra:
        checks["strong_implies_weak"] = {"pass": res.extra["strong_implies_weak"]}
    fam = build_family(kernel, space, grid)
    checks["mode_identity"] = {"max": mode_identity_defect(fam), "pass": mode_identity_defect(fam) <= 1e-3}
    if psi.deterministic:
        from .noise import sample_path

        gapf = dirichlet_fubini_gap(fam, psi, sample_path(space, grid, seed, 0))
        checks["dirichlet_fubini"] = {"max": gapf, "pass": gapf <= 1e-10}
    if dt_sweep:
        sweep = refinement_sweep(kernel, space, grid.T, dt_sweep, psi, x0, xi, n_paths, seed)
        for name in ("strong", "weak", "ito"):
            meds = [r.median(name) for r in sweep]
            if None in meds:
                continue
            ratios = _ratios(meds)
            checks[f"{name}_convergence"] = {"dts": [r.dt for r in sweep], "medians": meds, "ratios": ratios,
                                             "pass": all(q >= min_factor for q in ratios)}
    return {"n_paths": n_paths, "dt": grid.dt, "tolerance": tolerance, "adjoint_assumption": "A* = A",
            "kernel_flags": {"completely_positive": kernel.completely_positive,
                             "three_monotone": kernel.three_monotone, "differentiable": kernel.differentiable},
            "checks": checks, "pass": all(c["pass"] for c in checks.values())}


def check_solution_chain(config) -> dict:
    """Run the chain described by a :class:`~svolterra.config.RunConfig`."""
    from .config import build_objects

    obj = build_objects(config)
    v = config.verify
    return run_solution_chain(obj.kernel, obj.space, obj.grid, obj.psi, obj.x0, None, config.paths_verify,
                              config.seed, v["tolerance"], v.get("dt_sweep") or None)


__all__ = [
    "TestFunctional",
    "weak_residual",
    "strong_residual",
    "ito_representation_residual",
    "mode_identity_defect",
    "dirichlet_fubini_gap",
    "weak_solution_paths",
    "residual_batch",
    "refinement_sweep",
    "run_solution_chain",
    "check_solution_chain",
]
