"""Spectral Duhamel solver for the time-fractional evolution with zero initial state.

For each Dirichlet mode the solution of ``d^alpha u + lambda u = F`` with
vanishing initial data is::

    u_n(t) = int_0^t (t - s)^(alpha-1) E_{alpha,alpha}(-lambda_n (t - s)^alpha) F_n(s) ds,

which for ``alpha = 2`` has the kernel ``sin(sqrt(lambda) s) / sqrt(lambda)``.
The convolution is evaluated by product integration (exact for piecewise
linear ``F_n``), see :mod:`fracsource.forward.kernels`.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from ..fraccalc.grid import FracOrder, TimeGrid, as_order
from ..spectral import RectDomain
from .kernels import KernelWeights, kernel_values
from .sources import source_coefficients, source_rate_coefficients

__all__ = ["SpectralField", "sample_source", "solve_spectral", "time_derivative"]


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Eigen-coefficients ``u_k(t_j)`` of a solution on a time grid.

    Besides the solution the field keeps the sampled source coefficients
    ``F_k(t_j)`` and their time derivatives, which derived quantities
    (time derivatives of ``u``, auxiliary fields) are built from.

    Solutions of the forward problem start from rest (``zero_start``); fields
    derived from them, such as the auxiliary field of the reduction, may carry
    nonzero initial values and an exact initial rate ``initial_rate``.
    """

    domain: RectDomain
    grid: TimeGrid
    alpha: FracOrder
    coeffs: np.ndarray
    source: Optional[np.ndarray] = None
    source_rate: Optional[np.ndarray] = None
    model: Any = None
    zero_start: bool = True
    initial_rate: Optional[np.ndarray] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        shape = (self.grid.size, self.domain.n_modes)
        if c.shape != shape:
            raise ValueError(f"coefficient matrix must have shape {shape}, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("field coefficients must be finite")
        if self.zero_start and np.any(c[0] != 0):
            raise ValueError("fields start from a zero initial state")
        object.__setattr__(self, "coeffs", _readonly(c))
        object.__setattr__(self, "alpha", as_order(self.alpha))
        for name in ("source", "source_rate"):
            v = getattr(self, name)
            if v is not None:
                if np.shape(v) != shape:
                    raise ValueError(f"{name} must have shape {shape}")
                object.__setattr__(self, name, _readonly(v))

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    def values_at(self, j: int) -> np.ndarray:
        """Grid values of ``u(., t_j)``."""
        return self.domain.synthesize_values(self.coeffs[j])


def sample_source(model, domain: RectDomain, grid: TimeGrid, oversample: int = 4, rate: bool = True):
    """Source coefficients (and their time derivatives) at every grid node."""
    if hasattr(model, "check_support"):
        model.check_support(domain, grid.nodes)
    F = np.array([source_coefficients(model, domain, t, oversample, check=False) for t in grid.nodes])
    dF = None
    if rate:
        dF = np.array([source_rate_coefficients(model, domain, t, oversample) for t in grid.nodes])
    return F, dF


def _require_uniform(grid: TimeGrid):
    if not grid.uniform:
        raise ValueError("the spectral solver needs a uniform time grid")


def solve_spectral(model, alpha, grid: TimeGrid, domain: RectDomain, oversample: int = 4) -> SpectralField:
    """Solve the forward problem mode by mode.

    Parameters
    ----------
    model : source model
        :class:`~fracsource.forward.sources.LinearMotion`,
        :class:`~fracsource.forward.sources.Orbit` or
        :class:`~fracsource.forward.sources.ModalSource`.
    alpha : float or FracOrder
        Order in ``(0, 2]``.
    grid : TimeGrid
        Uniform time grid.
    domain : RectDomain
        Rectangle and mode truncation.
    oversample : int
        Refinement of the quadrature grid used to project the source.

    Returns
    -------
    SpectralField
    """
    order = as_order(alpha)
    _require_uniform(grid)
    F, dF = sample_source(model, domain, grid, oversample)
    return solve_from_coefficients(F, order, grid, domain, source_rate=dF, model=model)


def solve_from_coefficients(F, alpha, grid: TimeGrid, domain: RectDomain, source_rate=None, model=None):
    """Duhamel convolution of sampled source coefficients ``F`` (``Nt x K``)."""
    order = as_order(alpha)
    _require_uniform(grid)
    w = KernelWeights(order.alpha, order.alpha, domain.eigenvalues, grid.step, grid.size)
    u = w.apply(np.asarray(F, float))
    return SpectralField(domain, grid, order, u, source=F, source_rate=source_rate, model=model)


def time_derivative(field: SpectralField) -> np.ndarray:
    """``du_k/dt`` at the grid nodes by differentiating the Duhamel formula exactly.

    For ``alpha > 1`` the kernel vanishes at zero and ``u' = k_{alpha-1} * F``.
    For ``alpha <= 1``, ``u'(t) = k_alpha(t) F(0) + (k_alpha * F')(t)``; the
    value at ``t = 0`` is infinite when ``alpha < 1`` and ``F(0) != 0`` and is
    reported as ``nan`` there.
    """
    if field.source is None:
        raise ValueError("field does not carry its source samples")
    a = field.alpha.alpha
    lam = field.domain.eigenvalues
    h = field.grid.step
    n = field.grid.size
    if a > 1.0:
        return KernelWeights(a, a - 1.0, lam, h, n).apply(field.source)
    if field.source_rate is None:
        raise ValueError("field does not carry the source time derivative")
    conv = KernelWeights(a, a, lam, h, n).apply(field.source_rate)
    head = np.empty_like(conv)
    head[1:] = kernel_values(a, a, lam, field.t[1:]) * field.source[0][None, :]
    if a < 1.0:
        head[0] = np.where(field.source[0] == 0, 0.0, np.nan)
    else:
        head[0] = field.source[0]
    return conv + head
