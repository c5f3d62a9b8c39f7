"""Product integration against Mittag-Leffler kernels.

For ``gamma > 0`` the kernel family::

    k_gamma(s) = s^(gamma-1) E_{alpha,gamma}(-lambda s^alpha)

has the exact primitives ``K1 = s^gamma E_{alpha,gamma+1}(-lambda s^alpha)``
and ``K2 = s^(gamma+1) E_{alpha,gamma+2}(-lambda s^alpha)`` (``K1' = k``,
``K2' = K1``).  Replacing the other factor of a convolution by its piecewise
linear interpolant then gives closed-form weights, which are Toeplitz on a
uniform grid.  ``gamma = alpha`` is the Duhamel kernel of the fractional
evolution, ``gamma = 1`` its ``J^(1-alpha)`` image, and so on.
"""
from __future__ import annotations

import numpy as np
from scipy.signal import fftconvolve

from ..fraccalc.mlf import mittag_leffler

__all__ = ["kernel_values", "KernelWeights", "convolve_modes"]


def kernel_values(alpha: float, gamma: float, lam: np.ndarray, s: np.ndarray) -> np.ndarray:
    """``s^(gamma-1) E_{alpha,gamma}(-lam s^alpha)`` on the outer product ``s x lam``."""
    s = np.asarray(s, float)
    lam = np.atleast_1d(np.asarray(lam, float))
    out = np.empty((s.size, lam.size))
    with np.errstate(divide="ignore"):
        pw = s ** (gamma - 1.0)
    for j, lj in enumerate(lam):
        out[:, j] = pw * mittag_leffler(alpha, gamma, -lj * s**alpha)
    return out


class KernelWeights:
    """Toeplitz product-integration weights for ``k_gamma`` on a uniform grid.

    Parameters
    ----------
    alpha, gamma : float
        Kernel parameters, ``0 < alpha <= 2`` and ``gamma > 0``.
    lam : array_like
        Eigenvalues, one per mode.
    step : float
        Uniform time step.
    n_nodes : int
        Number of grid nodes (including ``t = 0``).
    """

    def __init__(self, alpha: float, gamma: float, lam, step: float, n_nodes: int):
        if gamma <= 0:
            raise ValueError("kernel index gamma must be positive")
        self.alpha = float(alpha)
        self.gamma = float(gamma)
        self.lam = np.atleast_1d(np.asarray(lam, float))
        self.step = float(step)
        self.n_nodes = int(n_nodes)
        s = np.arange(self.n_nodes) * self.step
        k1 = np.empty((self.n_nodes, self.lam.size))
        k2 = np.empty_like(k1)
        for j, lj in enumerate(self.lam):
            z = -lj * s**self.alpha
            k1[:, j] = s**self.gamma * mittag_leffler(self.alpha, self.gamma + 1.0, z)
            k2[:, j] = s ** (self.gamma + 1.0) * mittag_leffler(self.alpha, self.gamma + 2.0, z)
        # interval [a, b] = [k h, (k+1) h] measured backwards from the evaluation time
        self.far = k1[1:] - np.diff(k2, axis=0) / self.step
        self.near = np.diff(k1, axis=0) - self.far
        self.k1 = k1
        self.k2 = k2

    def apply(self, F: np.ndarray) -> np.ndarray:
        """``int_0^{t_n} k(t_n - tau) F(tau) dtau`` for ``F`` of shape ``(n_nodes, K)``."""
        return convolve_modes(self.far, self.near, F)


def convolve_modes(far: np.ndarray, near: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Apply Toeplitz weights mode by mode; ``out[0] = 0``.

    ``out[n] = sum_{j<n} far[n-1-j] F[j] + near[n-1-j] F[j+1]``.
    """
    F = np.asarray(F)
    n = F.shape[0]
    if F.ndim == 1:
        return convolve_modes(far[:, None], near[:, None], F[:, None])[:, 0]
    out = np.zeros(F.shape, dtype=np.result_type(F, far))
    if n < 2:
        return out
    if n <= 64:
        for m in range(1, n):
            out[m] = np.sum(far[m - 1 :: -1][:m] * F[:m] + near[m - 1 :: -1][:m] * F[1 : m + 1], axis=0)
        return out
    a = fftconvolve(far[: n - 1], F[:-1], axes=0)[: n - 1]
    b = fftconvolve(near[: n - 1], F[1:], axes=0)[: n - 1]
    out[1:] = a + b
    return out
