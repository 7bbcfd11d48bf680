"""Uniform time grids on ``[0, T]``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    """Grid mismatch or off-grid time."""


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    n_steps: int

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise GridError("grid step dt must be positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise GridError("grid needs n_steps >= 1")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_horizon(cls, T: float, dt: float) -> TimeGrid:
        """Grid with step ``dt`` covering ``[0, T]``; ``T`` must be a multiple of ``dt``."""
        n = T / dt
        n_round = round(n)
        if n_round < 1 or abs(n - n_round) > 1e-9 * max(1.0, n):
            raise GridError(f"horizon T={T} is not a positive multiple of dt={dt}")
        return cls(float(dt), int(n_round))

    @property
    def T(self) -> float:
        return self.n_steps * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t: float) -> int:
        n = t / self.dt
        n_round = round(n)
        if abs(n - n_round) > 1e-9 * max(1.0, abs(n)) or not 0 <= n_round <= self.n_steps:
            raise GridError(f"time {t} is not a grid point of {self}")
        return int(n_round)

    def refine(self, factor: int = 2) -> TimeGrid:
        return TimeGrid(self.dt / factor, self.n_steps * factor)

    def check_same(self, other: TimeGrid) -> None:
        if self.n_steps != other.n_steps or not math.isclose(self.dt, other.dt, rel_tol=1e-12):
            raise GridError(f"grid mismatch: {self} vs {other}")
