"""Finite-difference reference solver.

Independent of the spectral route: the Laplacian is the 5-point stencil on a
(refined) interior grid and the time derivative is discretized directly.

* ``alpha <= 1``: L1 scheme, implicit in the new level;
* ``1 < alpha < 2``: the Caputo derivative is written as ``J^(2-alpha) v'``
  with ``v = du/dt``, ``v'`` is taken piecewise constant on each step and
  ``v`` is coupled to ``u`` by the trapezoidal rule;
* ``alpha = 2``: leapfrog, replaced by the unconditionally stable
  average-in-time scheme when the step violates the CFL bound.

Memory terms make the cost ``O(Nt^2 M1 M2)``; intended for coarse grids.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu
from scipy.special import gamma

from ..fraccalc.grid import TimeGrid, as_order
from ..spectral import RectDomain
from .solver import SpectralField
from .sources import ModalSource

__all__ = ["StabilityWarning", "laplacian_5pt", "solve_fd_oracle"]


class StabilityWarning(RuntimeWarning):
    """The explicit step is unstable; an implicit step was used instead."""


def laplacian_5pt(domain: RectDomain) -> sp.csc_matrix:
    """``-Laplace`` with zero Dirichlet data on the interior grid, row-major ``(x, y)``."""

    def one_d(n, h):
        return sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]) / h**2

    Ax = one_d(domain.M1, domain.dx)
    Ay = one_d(domain.M2, domain.dy)
    return sp.csc_matrix(sp.kron(Ax, sp.identity(domain.M2)) + sp.kron(sp.identity(domain.M1), Ay))


def _refined(domain: RectDomain, refine: int) -> RectDomain:
    return RectDomain(domain.L1, domain.L2, domain.N1, domain.N2,
                      refine * (domain.M1 + 1) - 1, refine * (domain.M2 + 1) - 1)


def _source_values(model, grid_domain: RectDomain, times) -> np.ndarray:
    X, Y = grid_domain.mesh()
    out = np.empty((len(times), X.size))
    for j, t in enumerate(times):
        if isinstance(model, ModalSource):
            vals = grid_domain.synthesize_values(np.asarray(model.coeffs(t), float))
        else:
            vals = model.evaluate(X, Y, t)
        out[j] = np.ravel(vals)
    return out


def solve_fd_oracle(model, alpha, grid: TimeGrid, domain: RectDomain, refine: int = 2) -> SpectralField:
    """Solve the forward problem by finite differences and project onto the modes.

    Parameters
    ----------
    model : source model
    alpha : float or FracOrder
    grid : TimeGrid
        Uniform time grid.
    domain : RectDomain
        The result is expressed in this domain's modes.
    refine : int
        The spatial grid has ``refine * (M + 1) - 1`` interior points per direction.
    """
    order = as_order(alpha)
    a = order.alpha
    if not grid.uniform:
        raise ValueError("the finite-difference oracle needs a uniform time grid")
    if hasattr(model, "check_support"):
        model.check_support(domain, grid.nodes)
    fine = _refined(domain, refine)
    A = laplacian_5pt(fine)
    I = sp.identity(A.shape[0], format="csc")
    h = grid.step
    nt = grid.size
    F = _source_values(model, fine, grid.nodes)
    U = np.zeros_like(F)

    if a <= 1.0:
        c = h ** (-a) / gamma(2.0 - a)
        k = np.arange(nt)
        b = (k + 1.0) ** (1.0 - a) - k ** (1.0 - a)
        lu = splu(sp.csc_matrix(c * I + A))
        dU = np.zeros_like(F)  # dU[j] = U[j] - U[j-1]
        for n in range(1, nt):
            hist = b[n - 1:0:-1] @ dU[1:n] if n > 1 else 0.0
            U[n] = lu.solve(F[n] + c * U[n - 1] - c * hist)
            dU[n] = U[n] - U[n - 1]
    elif a < 2.0:
        mu = 1.0 / (gamma(3.0 - a) * h**a)
        k = np.arange(nt)
        b = (k + 1.0) ** (2.0 - a) - k ** (2.0 - a)
        lu = splu(sp.csc_matrix(2.0 * mu * I + A))
        V = np.zeros_like(F)
        dV = np.zeros_like(F)
        for n in range(1, nt):
            hist = b[n - 1:0:-1] @ dV[1:n] if n > 1 else 0.0
            rhs = F[n] + 2.0 * mu * (U[n - 1] + h * V[n - 1]) - mu * h * hist
            U[n] = lu.solve(rhs)
            V[n] = 2.0 * (U[n] - U[n - 1]) / h - V[n - 1]
            dV[n] = V[n] - V[n - 1]
    else:
        lam_max = 4.0 / fine.dx**2 + 4.0 / fine.dy**2
        if h * h * lam_max <= 4.0:
            U[1] = 0.5 * h * h * F[0]
            for n in range(1, nt - 1):
                U[n + 1] = 2 * U[n] - U[n - 1] + h * h * (F[n] - A @ U[n])
        else:
            warnings.warn(
                f"leapfrog step {h:g} violates the CFL bound {2 / np.sqrt(lam_max):g}; "
                "using the implicit average-in-time scheme",
                StabilityWarning, stacklevel=2)
            q = 0.25 * h * h
            lu = splu(sp.csc_matrix(I + q * A))
            U[1] = lu.solve(0.5 * h * h * F[0])
            for n in range(1, nt - 1):
                rhs = 2 * U[n] - U[n - 1] - q * (A @ (2 * U[n] + U[n - 1])) + h * h * F[n]
                U[n + 1] = lu.solve(rhs)

    coeffs = fine.project_values(U.reshape(nt, fine.M1, fine.M2))
    coeffs[0] = 0.0
    return SpectralField(domain, grid, order, coeffs, model=model)
