"""Discrete Riemann-Liouville integrals and Caputo / Riemann-Liouville derivatives.

Integrals use product integration: the data are replaced by their piecewise
linear interpolant and the weakly singular kernel is integrated exactly
against it, which is second order for smooth data and exact for piecewise
linear data.  Classical derivatives are taken with second order finite
differences, centred in the interior and one-sided at the two ends
(see :func:`classical_derivative`).

Backward operators act on ``[t, T]``::

    J_{T-}^b h(t) = 1/Gamma(b) * int_t^T (s - t)^(b-1) h(s) ds,
    D_{T-}^b      = d^m/dt^m  o J_{T-}^(m-b),
    d_{T-}^b      = J_{T-}^(m-b) o d^m/dt^m,     m = ceil(b),

with plain time derivatives (no ``(-1)^m`` factor).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import gamma

from .grid import TimeSeries, as_order

__all__ = [
    "ResolutionError",
    "rl_integral",
    "frac_integral",
    "classical_derivative",
    "frac_derivative",
    "PartsResidual",
    "check_parts_identities",
]

_DIRECTIONS = ("forward", "backward")
_KINDS = ("caputo", "riemann_liouville")


class ResolutionError(ValueError):
    """Raised when a grid is too coarse for the requested finite differences."""


def _check_direction(direction: str) -> str:
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
    return direction


def _interval_weights(beta: float, a: np.ndarray, b: np.ndarray, dt: np.ndarray):
    """Weights (left, right) of one interval for the kernel r^(beta-1)/Gamma(beta).

    ``a < b`` are the distances from the evaluation point to the two interval
    ends, ``dt = b - a``.  The left weight multiplies the node farther away.
    """
    a0 = (b**beta - a**beta) / gamma(beta + 1.0)
    a1 = beta * (b ** (beta + 1.0) - a ** (beta + 1.0)) / gamma(beta + 2.0)
    far = (a1 - a * a0) / dt
    return far, a0 - far


def _forward_uniform(beta: float, h: float, g: np.ndarray) -> np.ndarray:
    n = g.shape[0]
    k = np.arange(n - 1, dtype=float)
    # work in units of the step to limit cancellation, then rescale
    far, near = _interval_weights(beta, k, k + 1.0, np.ones_like(k))
    scale = h**beta
    if g.ndim > 1:
        flat = g.reshape(n, -1)
        cols = [_forward_uniform(beta, h, flat[:, j]) for j in range(flat.shape[1])]
        return np.stack(cols, axis=1).reshape(g.shape) if cols else np.zeros_like(g, dtype=float)
    out = np.zeros(n, dtype=np.result_type(g, float))
    # J(t_n) = sum_{j<n} far[n-1-j] g_j + near[n-1-j] g_{j+1}
    out[1:] = (np.convolve(far, g[:-1])[: n - 1] + np.convolve(near, g[1:])[: n - 1]) * scale
    return out


def _forward_general(beta: float, t: np.ndarray, g: np.ndarray) -> np.ndarray:
    n = t.shape[0]
    out = np.zeros(n, dtype=np.result_type(g, float))
    dt = np.diff(t)
    for i in range(1, n):
        a = t[i] - t[1 : i + 1]
        b = t[i] - t[:i]
        far, near = _interval_weights(beta, a, b, dt[:i])
        out[i] = far @ g[:i] + near @ g[1 : i + 1]
    return out


def rl_integral(beta: float, t: np.ndarray, g: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Riemann-Liouville integral of order ``beta >= 0`` of the interpolant of ``g``.

    Works for any non-negative ``beta`` (values above one are used when exact
    antiderivatives of fractional integrals are needed).  The result is exact
    for piecewise linear ``g``.
    """
    _check_direction(direction)
    beta = float(beta)
    if beta < 0 or not math.isfinite(beta):
        raise ValueError(f"integration order must be non-negative, got {beta!r}")
    t = np.asarray(t, dtype=float)
    g = np.asarray(g)
    if beta == 0.0:
        return g.copy()
    if direction == "backward":
        tr = t[-1] - t[::-1]
        return rl_integral(beta, tr, g[::-1], "forward")[::-1]
    if beta == 1.0:
        # cumulative trapezoid, the exact integral of the interpolant
        out = np.zeros(g.shape, dtype=np.result_type(g, float))
        out[1:] = np.cumsum(0.5 * np.diff(t) * (g[1:] + g[:-1]))
        return out
    dt = np.diff(t)
    if np.allclose(dt, dt[0], rtol=1e-12, atol=0.0):
        return _forward_uniform(beta, dt[0], g)
    return _forward_general(beta, t, g)


def frac_integral(beta: float, h: TimeSeries, direction: str = "forward") -> TimeSeries:
    """Forward ``J_{0+}^beta`` or backward ``J_{T-}^beta`` integral, ``0 <= beta <= 1``.

    Parameters
    ----------
    beta : float
        Order in ``[0, 1]``; ``beta = 0`` returns ``h`` unchanged.
    h : TimeSeries
        Sampled integrand.
    direction : {"forward", "backward"}

    Returns
    -------
    TimeSeries
        The integral on the same grid.
    """
    beta = float(beta)
    if not (0.0 <= beta <= 1.0):
        raise ValueError(f"beta must lie in [0, 1], got {beta!r}")
    return TimeSeries(h.grid, rl_integral(beta, h.t, h.values, direction))


def classical_derivative(t: np.ndarray, g: np.ndarray, order: int) -> np.ndarray:
    """``order``-th derivative (1 or 2) by second order finite differences.

    First derivatives use ``numpy.gradient`` with ``edge_order=2``.  Second
    derivatives on uniform grids use the centred three point stencil and the
    four point one-sided stencil ``(2, -5, 4, -1) / dt^2`` at the ends;
    non-uniform grids fall back to differentiating twice.
    """
    if t.size < 3 * order:
        raise ResolutionError(
            f"{t.size} nodes are too few for a derivative of order {order}"
        )
    g = np.asarray(g)
    if order == 1:
        return np.gradient(g, t, edge_order=2, axis=0)
    if order != 2:
        raise ValueError("only first and second derivatives are supported")
    dt = np.diff(t)
    if not np.allclose(dt, dt[0], rtol=1e-12, atol=0.0):
        return np.gradient(np.gradient(g, t, edge_order=2, axis=0), t, edge_order=2, axis=0)
    out = np.empty(g.shape, dtype=np.result_type(g, float))
    out[1:-1] = g[2:] - 2.0 * g[1:-1] + g[:-2]
    out[0] = 2.0 * g[0] - 5.0 * g[1] + 4.0 * g[2] - g[3]
    out[-1] = 2.0 * g[-1] - 5.0 * g[-2] + 4.0 * g[-3] - g[-4]
    return out / dt[0] ** 2


def frac_derivative(
    order: float,
    h: TimeSeries,
    kind: str = "caputo",
    direction: str = "forward",
) -> TimeSeries:
    """Caputo or Riemann-Liouville derivative of order ``0 < order <= 2``.

    With ``m = ceil(order)`` the Caputo derivative is ``J^(m-order)`` applied
    to the ``m``-th finite-difference derivative, while the Riemann-Liouville
    derivative differentiates ``J^(m-order) h`` ``m`` times.  Integer orders
    reduce to classical derivatives for both kinds.
    """
    order = float(order)
    if not (0.0 < order <= 2.0):
        raise ValueError(f"order must lie in (0, 2], got {order!r}")
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    _check_direction(direction)
    m = math.ceil(order)
    t = h.t
    if kind == "caputo":
        d = classical_derivative(t, h.values, m)
        out = rl_integral(m - order, t, d, direction)
    else:
        j = rl_integral(m - order, t, h.values, direction)
        out = classical_derivative(t, j, m)
    return TimeSeries(h.grid, out)


# --------------------------------------------------------------------------
# integration by parts identities
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PartsResidual:
    """Absolute residuals of the fractional integration by parts identities.

    ``second`` is ``None`` for ``alpha <= 1`` where only one identity exists.
    """

    alpha: float
    first: float
    second: Optional[float]


def _pair(t, a, f1, f2) -> float:
    """Exact ``int_0^T a(t) F'(t) dt`` for interpolated ``a``.

    ``f1`` holds ``F`` at the nodes and ``f2`` an antiderivative of ``F``;
    on each interval ``int a F' = [a F] - (da/dt) [F2]``.
    """
    dt = np.diff(t)
    slope = np.diff(a) / dt
    return float(np.sum(np.diff(a * f1) - slope * np.diff(f2)))


def _caputo_pairing(alpha: float, t, h1, h2) -> float:
    """``int_0^T (d_{0+}^alpha h1) h2 dt`` for ``0 < alpha <= 1``."""
    # the Caputo derivative is d/dt J^(1-alpha)(h1 - h1(0))
    base = h1 - h1[0]
    f1 = rl_integral(1.0 - alpha, t, base)
    f2 = rl_integral(2.0 - alpha, t, base)
    return _pair(t, h2, f1, f2)


def _backward_rl_pairing(alpha: float, t, h1, h2) -> tuple[float, np.ndarray]:
    """``int_0^T h1 (D_{T-}^alpha h2) dt`` and ``J_{T-}^(1-alpha) h2``, ``alpha <= 1``."""
    jb = rl_integral(1.0 - alpha, t, h2, "backward")
    # antiderivative of J_{T-}^(1-alpha) h2 is -J_{T-}^(2-alpha) h2
    kb = -rl_integral(2.0 - alpha, t, h2, "backward")
    return _pair(t, h1, jb, kb), jb


def check_parts_identities(alpha, h1: TimeSeries, h2: TimeSeries) -> PartsResidual:
    """Residuals of the forward/backward fractional integration by parts rules.

    For ``alpha <= 1`` the single identity::

        int (d^alpha h1) h2 = [h1 J_{T-}^(1-alpha) h2]_0^T - int h1 D_{T-}^alpha h2

    is assembled.  For ``1 < alpha <= 2`` the two identities::

        int (d^alpha h1) h2 = [h1' J_{T-}^(2-alpha) h2]_0^T - int h1' D_{T-}^(alpha-1) h2
        int h1' D_{T-}^(alpha-1) h2 = [h1 D_{T-}^(alpha-1) h2]_0^T - int h1 D_{T-}^alpha h2

    are assembled.  Every time integral pairs an interpolated factor with an
    exactly integrated fractional integral, so the weak endpoint
    singularities of the backward derivatives do not spoil the quadrature.
    When ``h2(T) != 0`` and ``alpha > 1`` the boundary term and the last
    integral of the second identity both diverge; their divergent parts
    cancel interval by interval and the finite remainder is used.
    """
    order = as_order(alpha)
    a = order.alpha
    if h1.grid is not h2.grid and not np.array_equal(h1.t, h2.t):
        raise ValueError("h1 and h2 must share a time grid")
    t = h1.t
    v1 = np.asarray(h1.values)
    v2 = np.asarray(h2.values)

    if a <= 1.0:
        lhs = _caputo_pairing(a, t, v1, v2)
        pairing, jb = _backward_rl_pairing(a, t, v1, v2)
        rhs = (v1[-1] * jb[-1] - v1[0] * jb[0]) - pairing
        return PartsResidual(a, abs(lhs - rhs), None)

    # alpha > 1: the Caputo derivative of h1 is the (alpha-1) Caputo derivative of h1'
    b = a - 1.0
    d1 = classical_derivative(t, v1, 1)
    lhs = _caputo_pairing(b, t, d1, v2)
    mid, jb = _backward_rl_pairing(b, t, d1, v2)  # int h1' D_{T-}^(alpha-1) h2
    rhs = (d1[-1] * jb[-1] - d1[0] * jb[0]) - mid
    first = abs(lhs - rhs)

    # With G = D_{T-}^(alpha-1) h2 = d/dt J_{T-}^(2-alpha) h2 and h1 represented by a
    # quadratic q on each interval I, int_I q G' = [q G]_I - int_I q' G.  Summed over
    # intervals the values of G at interior nodes and at both ends cancel against the
    # boundary term, leaving sum_I int_I q' G.  Writing q' = slope + kappa (t - m_I):
    #   int_I slope G        = slope [J^(2-alpha) h2]_I
    #   int_I (t - m_I) G    = dt/2 (J_i + J_{i+1}) + [J^(3-alpha) h2]_I
    # since d/dt J_{T-}^(3-alpha) h2 = -J_{T-}^(2-alpha) h2.  A piecewise-linear h1
    # (kappa = 0) would leave an O(dt^(3-alpha)) error from the last intervals, where G
    # is singular when h2(T) != 0.
    dt = np.diff(t)
    kb3 = rl_integral(3.0 - a, t, v2, "backward")
    c2 = classical_derivative(t, v1, 2)
    kappa = 0.5 * (c2[:-1] + c2[1:])
    rhs2 = float(np.sum(np.diff(v1) / dt * np.diff(jb)
                        + kappa * (0.5 * dt * (jb[:-1] + jb[1:]) + np.diff(kb3))))
    second = abs(mid - rhs2)
    return PartsResidual(a, first, second)
