"""Boundary data extraction and the long-time decay functional."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..fraccalc.grid import TimeGrid, as_order
from ..spectral import GridFunction, RectDomain
from .kernels import kernel_values
from .solver import SpectralField, time_derivative
from .sources import source_coefficients

__all__ = [
    "BoundaryLayout",
    "CauchyData",
    "extract_cauchy",
    "normal_derivative",
    "modal_functional",
    "decay_functional",
    "final_state_norm",
]


@dataclass(frozen=True, eq=False)
class BoundaryLayout:
    """Equispaced sample points on the four walls of the rectangle.

    Walls are listed in the order bottom (``y = 0``), right (``x = L1``),
    top (``y = L2``), left (``x = 0``).  Each horizontal wall carries ``nx``
    points ``x_i = i L1 / (nx + 1)`` and each vertical wall ``ny`` points;
    corners are excluded.  Normals point outwards.
    """

    domain: RectDomain
    nx: int
    ny: int

    @classmethod
    def default(cls, domain: RectDomain) -> "BoundaryLayout":
        return cls(domain, domain.M1, domain.M2)

    def __post_init__(self):
        if self.nx < self.domain.N1 or self.ny < self.domain.N2:
            raise ValueError("need at least as many wall samples as modes along the wall")

    @property
    def xs(self) -> np.ndarray:
        return np.arange(1, self.nx + 1) * self.domain.L1 / (self.nx + 1)

    @property
    def ys(self) -> np.ndarray:
        return np.arange(1, self.ny + 1) * self.domain.L2 / (self.ny + 1)

    @property
    def wall_slices(self) -> dict:
        nx, ny = self.nx, self.ny
        return {
            "bottom": slice(0, nx),
            "right": slice(nx, nx + ny),
            "top": slice(nx + ny, 2 * nx + ny),
            "left": slice(2 * nx + ny, 2 * nx + 2 * ny),
        }

    @property
    def size(self) -> int:
        return 2 * (self.nx + self.ny)

    def points(self):
        """Arrays ``(x, y, nx, ny)`` of sample positions and outward normals."""
        L1, L2 = self.domain.L1, self.domain.L2
        xs, ys = self.xs, self.ys
        zx, zy = np.zeros_like(xs), np.zeros_like(ys)
        px = np.concatenate([xs, zy + L1, xs, zy])
        py = np.concatenate([zx, ys, zx + L2, ys])
        nxv = np.concatenate([zx, zy + 1.0, zx, zy - 1.0])
        nyv = np.concatenate([zx - 1.0, zy, zx + 1.0, zy])
        return px, py, nxv, nyv


@dataclass(frozen=True, eq=False)
class CauchyData:
    """Lateral Cauchy data ``(u, du/dnu)`` on the boundary samples plus final-time data."""

    domain: RectDomain
    grid: TimeGrid
    layout: BoundaryLayout
    u_trace: np.ndarray
    dnu_trace: np.ndarray
    final_snapshot: Optional[GridFunction] = None
    final_velocity: Optional[GridFunction] = None

    def __post_init__(self):
        shape = (self.grid.size, self.layout.size)
        for name in ("u_trace", "dnu_trace"):
            if np.shape(getattr(self, name)) != shape:
                raise ValueError(f"{name} must have shape {shape}")

    def with_traces(self, dnu_trace: np.ndarray) -> "CauchyData":
        """Copy with replaced normal-derivative trace (used for noise studies)."""
        return CauchyData(self.domain, self.grid, self.layout, self.u_trace, np.asarray(dnu_trace),
                          self.final_snapshot, self.final_velocity)


def normal_derivative(domain: RectDomain, coeffs: np.ndarray, layout: BoundaryLayout) -> np.ndarray:
    """``du/dnu`` at the layout's samples for coefficient rows ``(..., K)``."""
    px, py, nxv, nyv = layout.points()
    gx, gy = domain.evaluate_gradient(coeffs, px, py)
    return gx * nxv + gy * nyv


def extract_cauchy(field: SpectralField, alpha=None, layout: Optional[BoundaryLayout] = None) -> CauchyData:
    """Boundary traces and final-time snapshot of a solved field.

    The normal derivative is differentiated term by term; the Dirichlet
    trace is identically zero.  For ``alpha = 2`` the final velocity
    ``du/dt(., T)`` is added, obtained from the cosine-kernel convolution.
    """
    order = as_order(alpha if alpha is not None else field.alpha)
    d = field.domain
    layout = layout or BoundaryLayout.default(d)
    dnu = normal_derivative(d, field.coeffs, layout)
    u_trace = np.zeros_like(dnu)
    snap = GridFunction(d, d.synthesize_values(field.coeffs[-1]))
    vel = None
    if order.alpha == 2.0:
        ut = time_derivative(field)
        vel = GridFunction(d, d.synthesize_values(ut[-1]))
    return CauchyData(d, field.grid, layout, u_trace, dnu, snap, vel)


def modal_functional(model, domain: RectDomain, alpha: float, gamma: float, T: float,
                     n_quad: int = 64, oversample: int = 4) -> np.ndarray:
    """``int_0^T0 k_gamma(T - t) F_n(t) dt`` for every mode, ``T > T0``.

    ``k_gamma(s) = s^(gamma-1) E_{alpha,gamma}(-lambda s^alpha)`` is smooth on
    the integration range, so Gauss-Legendre quadrature on ``[0, T0]`` is used.
    """
    T0 = getattr(model, "T0", None)
    if T0 is None:
        raise ValueError("the source model has no temporal support bound T0")
    if not T > T0:
        raise ValueError(f"need T > T0 (got T={T}, T0={T0})")
    x, w = np.polynomial.legendre.leggauss(n_quad)
    t = 0.5 * T0 * (x + 1.0)
    w = 0.5 * T0 * w
    F = np.array([source_coefficients(model, domain, ti, oversample) for ti in t])
    kv = kernel_values(alpha, gamma, domain.eigenvalues, T - t)
    return np.sum(w[:, None] * kv * F, axis=0)


def decay_functional(field: SpectralField, alpha=None, T: float | None = None, n_quad: int = 64) -> float:
    """``||J^(1-alpha) u(., T)||`` (``alpha <= 1``) or ``||d^(alpha-1) u(., T)||`` (``1 < alpha < 2``).

    Both share the mode-wise closed form
    ``int_0^T0 E_{alpha,1}(-lambda_n (T - t)^alpha) F_n(t) dt``.
    """
    order = as_order(alpha if alpha is not None else field.alpha)
    if order.alpha >= 2.0:
        raise ValueError("the decay functional is defined for 0 < alpha < 2")
    if T is None:
        T = field.grid.T
    if field.model is None:
        raise ValueError("field does not reference its source model")
    vals = modal_functional(field.model, field.domain, order.alpha, 1.0, T, n_quad)
    return float(np.linalg.norm(vals))


def final_state_norm(field: SpectralField, T: float, n_quad: int = 64) -> float:
    """``||u(., T)||`` from the Duhamel formula evaluated after the source switched off."""
    if field.model is None:
        raise ValueError("field does not reference its source model")
    a = field.alpha.alpha
    vals = modal_functional(field.model, field.domain, a, a, T, n_quad)
    return float(np.linalg.norm(vals))
