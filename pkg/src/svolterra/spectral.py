"""Truncated eigen-representation of H, U, the operator A and the covariance Q.

A and Q share the eigenbasis ``e_k``: ``A e_k = mu_k e_k`` and
``Q e_k = lambda_k e_k``.  Vectors are arrays of mode coefficients.  Operators
from ``U_0 = Q^{1/2} U`` into H are stored as matrices in ``U``-coordinates,
so the Hilbert-Schmidt norm weights column ``k`` by ``lambda_k``.

Truncation caveat: ``Tr Q = sum(lambda)`` is finite for every finite number
of modes even in the cylindrical case ``lambda_k = 1``; it grows without bound
as modes are added.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DimensionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SpectralSpace:
    mu: np.ndarray
    lam: np.ndarray
    horizon: float = 1.0

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float).reshape(-1)
        lam = np.asarray(self.lam, dtype=float).reshape(-1)
        if mu.shape != lam.shape or mu.size == 0:
            raise DimensionError("mu and lambda must be non-empty and the same length")
        if np.any(lam < 0):
            raise ValueError("Q eigenvalues must be nonnegative")
        if not np.all(np.isfinite(mu)):
            raise ValueError("A eigenvalues must be finite reals")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        mu.setflags(write=False)
        lam.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "lam", lam)

    @classmethod
    def dirichlet(cls, n_modes: int = 64, horizon: float = 1.0, lam=None) -> SpectralSpace:
        """Dirichlet Laplacian spectrum ``mu_k = -k^2``; cylindrical noise by default."""
        k = np.arange(1, n_modes + 1, dtype=float)
        lam = np.ones(n_modes) if lam is None else lam
        return cls(-k * k, lam, horizon)

    @property
    def n_modes(self) -> int:
        return self.mu.size

    @property
    def trace_q(self) -> float:
        return float(self.lam.sum())

    def _check(self, n: int) -> None:
        if n != self.n_modes:
            raise DimensionError(f"expected {self.n_modes} modes, got {n}")


@dataclass(frozen=True, eq=False)
class HilbertSchmidtOperator:
    """Matrix of an operator ``U_0 -> H``; column ``k`` is the image of ``e_k``."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DimensionError("operator entries must be a square matrix")
        e.setflags(write=False)
        object.__setattr__(self, "entries", e)

    @classmethod
    def diagonal(cls, values) -> HilbertSchmidtOperator:
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def identity(cls, n: int) -> HilbertSchmidtOperator:
        return cls(np.eye(n))

    @classmethod
    def zero(cls, n: int) -> HilbertSchmidtOperator:
        return cls(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def diagonal_flag(self) -> bool:
        e = self.entries
        return bool(np.all(e[~np.eye(self.n, dtype=bool)] == 0))

    @property
    def diag(self) -> np.ndarray:
        return np.diag(self.entries).copy()

    def __add__(self, other):
        return HilbertSchmidtOperator(self.entries + other.entries)

    def __mul__(self, c):
        return HilbertSchmidtOperator(c * self.entries)

    __rmul__ = __mul__


def hs_norm(op: HilbertSchmidtOperator, space: SpectralSpace) -> float:
    """``|op|_{L_2^0} = (sum_{j,k} lambda_k op[j,k]^2)^{1/2}``."""
    space._check(op.n)
    return float(np.sqrt(np.sum(space.lam[None, :] * op.entries**2)))


def graph_norm(h, space: SpectralSpace) -> float:
    """Graph norm of ``D(A)``: ``(|h|^2 + |Ah|^2)^{1/2}``."""
    h = np.asarray(h, dtype=float)
    space._check(h.shape[-1])
    return float(np.sqrt(np.sum(h**2 * (1 + space.mu**2))))


def apply_A(h, space: SpectralSpace) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    space._check(h.shape[-1])
    return space.mu * h


def psi_norm_N2(process, space: SpectralSpace, grid, **mc_options) -> float:
    """``{E int_0^T |Psi(t)|^2_{L_2^0} dt}^{1/2}``.

    Exact quadrature for deterministic integrands.  For adapted integrands the
    expectation is estimated by Monte Carlo; pass ``family``, ``n_paths`` and
    ``seed`` through ``mc_options``.
    """
    return float(np.sqrt(process.expected_sq_integral(space, grid, **mc_options)))
