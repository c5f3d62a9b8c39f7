"""Fractional order and time discretisation containers."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = ["FracOrder", "TimeGrid", "TimeSeries", "MIN_TIME_NODES"]

MIN_TIME_NODES = 8


def _frozen(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FracOrder:
    """Derivative order ``alpha`` in ``(0, 2]`` together with ``ceil(alpha)``."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a <= 2.0) or not math.isfinite(a):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha!r}")
        object.__setattr__(self, "alpha", a)

    @property
    def ceil_alpha(self) -> int:
        return 1 if self.alpha <= 1.0 else 2

    def __float__(self) -> float:
        return self.alpha


def as_order(alpha) -> FracOrder:
    return alpha if isinstance(alpha, FracOrder) else FracOrder(alpha)


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Nodes ``0 = t_0 < ... < t_N = T`` on which time series are sampled."""

    nodes: np.ndarray
    uniform: bool = field(default=False)

    def __post_init__(self):
        t = np.asarray(self.nodes, dtype=float)
        if t.ndim != 1 or t.size < MIN_TIME_NODES:
            raise ValueError(f"a time grid needs at least {MIN_TIME_NODES} nodes")
        if t[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if not np.all(np.diff(t) > 0):
            raise ValueError("time nodes must be strictly increasing")
        dt = np.diff(t)
        uniform = bool(np.allclose(dt, dt[0], rtol=1e-12, atol=0.0))
        object.__setattr__(self, "nodes", _frozen(t))
        object.__setattr__(self, "uniform", uniform)

    @classmethod
    def uniform_grid(cls, T: float, n_steps: int) -> "TimeGrid":
        """Uniform grid with ``n_steps`` intervals on ``[0, T]``."""
        if T <= 0:
            raise ValueError("horizon T must be positive")
        return cls(np.linspace(0.0, float(T), int(n_steps) + 1))

    @property
    def T(self) -> float:
        return float(self.nodes[-1])

    @property
    def size(self) -> int:
        return int(self.nodes.size)

    @property
    def step(self) -> float:
        """Step of a uniform grid (largest step otherwise)."""
        return float(np.max(np.diff(self.nodes)))

    def __len__(self) -> int:
        return self.size


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Values of a scalar function on a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if v.shape != (self.grid.size,):
            raise ValueError(
                f"expected {self.grid.size} values for the grid, got shape {v.shape}"
            )
        object.__setattr__(self, "values", _frozen(v))

    @classmethod
    def sample(cls, grid: TimeGrid, func: Callable[[np.ndarray], np.ndarray]) -> "TimeSeries":
        return cls(grid, func(grid.nodes))

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def __len__(self) -> int:
        return self.grid.size
