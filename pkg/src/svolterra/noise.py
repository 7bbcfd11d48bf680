"""Truncated cylindrical Wiener increments with counter-style reproducible streams.

Path ``p`` under seed ``s`` draws from a Philox generator keyed by
``SeedSequence(s, spawn_key=(p,))``.  Mode ``k`` always takes normals
``k*n_steps .. (k+1)*n_steps - 1`` of that stream, so a path is a pure function
of ``(seed, path_index, grid)`` and its mode rows do not depend on how many
modes are requested or on the order paths are generated in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import GridError, TimeGrid
from .spectral import SpectralSpace

NOISE_STREAM = 0
GAUSSIAN_STREAM = 1


def path_generator(seed: int, path_index: int, stream: int = NOISE_STREAM) -> np.random.Generator:
    key = (int(path_index),) if stream == NOISE_STREAM else (int(path_index), int(stream))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=key)))


@dataclass(frozen=True, eq=False)
class NoisePath:
    grid: TimeGrid
    dW: np.ndarray
    seed: int
    path_index: int

    @property
    def n_modes(self) -> int:
        return self.dW.shape[0]

    def coarsen(self, factor: int) -> NoisePath:
        """Increments of the same Brownian path on a grid ``factor`` times coarser."""
        if self.grid.n_steps % factor:
            raise GridError("coarsening factor must divide n_steps")
        dW = self.dW.reshape(self.n_modes, -1, factor).sum(axis=2)
        return NoisePath(TimeGrid(self.grid.dt * factor, self.grid.n_steps // factor), dW, self.seed, self.path_index)


def standard_normals(n_modes: int, n_steps: int, seed: int, path_index: int) -> np.ndarray:
    return path_generator(seed, path_index).standard_normal((n_modes, n_steps))


def sample_path(space: SpectralSpace, grid: TimeGrid, seed: int, path_index: int) -> NoisePath:
    """One truncated cylindrical Wiener path: ``dW[k, j] ~ N(0, lambda_k dt)``."""
    z = standard_normals(space.n_modes, grid.n_steps, seed, path_index)
    dW = np.sqrt(space.lam * grid.dt)[:, None] * z
    dW.setflags(write=False)
    return NoisePath(grid, dW, int(seed), int(path_index))


def sample_increments(space: SpectralSpace, grid: TimeGrid, seed: int, path_indices) -> np.ndarray:
    """Stacked increments ``(P, N, n_steps)`` for the given path indices."""
    scale = np.sqrt(space.lam * grid.dt)[:, None]
    out = np.empty((len(path_indices), space.n_modes, grid.n_steps))
    for i, p in enumerate(path_indices):
        out[i] = scale * standard_normals(space.n_modes, grid.n_steps, seed, p)
    return out


def cumulative(noise: NoisePath, t: float) -> np.ndarray:
    """``W(t_n)`` as mode coefficients (prefix sum of increments)."""
    n = noise.grid.index_of(t)
    return noise.dW[:, :n].sum(axis=1)


def cumulative_path(dW: np.ndarray) -> np.ndarray:
    """``W(t_n)`` for all grid times; time on the last axis, ``W(0) = 0``."""
    out = np.zeros(dW.shape[:-1] + (dW.shape[-1] + 1,))
    np.cumsum(dW, axis=-1, out=out[..., 1:])
    return out
