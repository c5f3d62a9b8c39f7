"""Dirichlet Laplacian eigensystem on a rectangle.

The eigenfunctions of ``-Laplace`` on ``(0, L1) x (0, L2)`` with zero boundary
values are::

    phi_mn(x, y) = sqrt(4 / (L1 L2)) sin(m pi x / L1) sin(n pi y / L2),
    lambda_mn    = (m pi / L1)^2 + (n pi / L2)^2.

Fields live on the interior tensor grid ``x_i = i L1 / (M1 + 1)``,
``i = 1..M1`` (likewise in ``y``); boundary values are implicitly zero.  On
this grid the discrete sine transform of type I is an exact quadrature for
products of retained modes, which makes projection and synthesis exact
inverses on band-limited data.

Modes are flattened in order of increasing eigenvalue, ties broken by
``(m, n)`` in lexicographic order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "RectDomain",
    "ModeIndex",
    "GridFunction",
    "CoeffVector",
    "eigenpair",
    "project",
    "synthesize",
    "frac_power_norm",
    "gradient",
]


def _readonly(a) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ModeIndex:
    """Mode ``(m, n)`` and its position ``k`` in the flat ordering."""

    m: int
    n: int
    k: int


@dataclass(frozen=True, eq=False)
class RectDomain:
    """Rectangle ``(0, L1) x (0, L2)`` with ``N1 x N2`` retained modes.

    ``M1``, ``M2`` default to ``2 N1``, ``2 N2`` interior grid points.
    """

    L1: float
    L2: float
    N1: int
    N2: int
    M1: int = field(default=0)
    M2: int = field(default=0)

    def __post_init__(self):
        if not (self.L1 > 0 and self.L2 > 0):
            raise ValueError("side lengths must be positive")
        if self.N1 < 1 or self.N2 < 1:
            raise ValueError("at least one mode per direction is required")
        object.__setattr__(self, "L1", float(self.L1))
        object.__setattr__(self, "L2", float(self.L2))
        object.__setattr__(self, "N1", int(self.N1))
        object.__setattr__(self, "N2", int(self.N2))
        M1 = int(self.M1) or 2 * self.N1
        M2 = int(self.M2) or 2 * self.N2
        if M1 < 2 * self.N1 or M2 < 2 * self.N2:
            raise ValueError("grid resolution must satisfy M1 >= 2 N1 and M2 >= 2 N2")
        object.__setattr__(self, "M1", M1)
        object.__setattr__(self, "M2", M2)

    def __eq__(self, other):
        if not isinstance(other, RectDomain):
            return NotImplemented
        return (self.L1, self.L2, self.N1, self.N2, self.M1, self.M2) == (
            other.L1, other.L2, other.N1, other.N2, other.M1, other.M2)

    def __hash__(self):
        return hash((self.L1, self.L2, self.N1, self.N2, self.M1, self.M2))

    # ---------------------------------------------------------------- modes
    @property
    def n_modes(self) -> int:
        return self.N1 * self.N2

    @cached_property
    def _order(self):
        m, n = np.meshgrid(np.arange(1, self.N1 + 1), np.arange(1, self.N2 + 1), indexing="ij")
        m, n = m.ravel(), n.ravel()
        lam = (m * np.pi / self.L1) ** 2 + (n * np.pi / self.L2) ** 2
        # lexsort uses the last key as primary
        order = np.lexsort((n, m, lam))
        return _readonly(m[order]), _readonly(n[order]), _readonly(lam[order])

    @property
    def m_index(self) -> np.ndarray:
        return self._order[0]

    @property
    def n_index(self) -> np.ndarray:
        return self._order[1]

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._order[2]

    @cached_property
    def _lookup(self) -> dict:
        return {(int(m), int(n)): k for k, (m, n) in enumerate(zip(self.m_index, self.n_index))}

    def mode(self, m: int, n: int) -> ModeIndex:
        try:
            return ModeIndex(int(m), int(n), self._lookup[(int(m), int(n))])
        except KeyError:
            raise IndexError(f"mode ({m}, {n}) outside 1..{self.N1} x 1..{self.N2}") from None

    def mode_at(self, k: int) -> ModeIndex:
        if not 0 <= k < self.n_modes:
            raise IndexError(f"flat index {k} outside 0..{self.n_modes - 1}")
        return ModeIndex(int(self.m_index[k]), int(self.n_index[k]), int(k))

    # ---------------------------------------------------------------- grids
    @property
    def x(self) -> np.ndarray:
        return np.arange(1, self.M1 + 1) * self.L1 / (self.M1 + 1)

    @property
    def y(self) -> np.ndarray:
        return np.arange(1, self.M2 + 1) * self.L2 / (self.M2 + 1)

    @property
    def dx(self) -> float:
        return self.L1 / (self.M1 + 1)

    @property
    def dy(self) -> float:
        return self.L2 / (self.M2 + 1)

    def mesh(self):
        """``(X, Y)`` arrays of shape ``(M1, M2)``."""
        return np.meshgrid(self.x, self.y, indexing="ij")

    # ------------------------------------------------------- 1d sine factors
    def sine_x(self, x) -> np.ndarray:
        """``sqrt(2/L1) sin(m pi x / L1)`` for ``m = 1..N1``; shape ``(N1, len(x))``."""
        m = np.arange(1, self.N1 + 1)[:, None]
        return np.sqrt(2.0 / self.L1) * np.sin(m * np.pi * np.asarray(x, float)[None, :] / self.L1)

    def sine_y(self, y) -> np.ndarray:
        n = np.arange(1, self.N2 + 1)[:, None]
        return np.sqrt(2.0 / self.L2) * np.sin(n * np.pi * np.asarray(y, float)[None, :] / self.L2)

    def cosine_x(self, x) -> np.ndarray:
        """x-derivative of :meth:`sine_x`."""
        m = np.arange(1, self.N1 + 1)[:, None]
        k = m * np.pi / self.L1
        return np.sqrt(2.0 / self.L1) * k * np.cos(k * np.asarray(x, float)[None, :])

    def cosine_y(self, y) -> np.ndarray:
        n = np.arange(1, self.N2 + 1)[:, None]
        k = n * np.pi / self.L2
        return np.sqrt(2.0 / self.L2) * k * np.cos(k * np.asarray(y, float)[None, :])

    @cached_property
    def _sx(self):
        return _readonly(self.sine_x(self.x))

    @cached_property
    def _sy(self):
        return _readonly(self.sine_y(self.y))

    # ------------------------------------------------------ batched transforms
    def to_matrix(self, coeffs: np.ndarray) -> np.ndarray:
        """Reshape flat coefficients ``(..., K)`` into ``(..., N1, N2)``."""
        coeffs = np.asarray(coeffs)
        out = np.zeros(coeffs.shape[:-1] + (self.N1, self.N2), dtype=coeffs.dtype)
        out[..., self.m_index - 1, self.n_index - 1] = coeffs
        return out

    def from_matrix(self, mat: np.ndarray) -> np.ndarray:
        return np.asarray(mat)[..., self.m_index - 1, self.n_index - 1]

    def project_values(self, values: np.ndarray) -> np.ndarray:
        """Coefficients ``(..., K)`` of grid values ``(..., M1, M2)``."""
        values = np.asarray(values)
        if values.shape[-2:] != (self.M1, self.M2):
            raise ValueError(f"expected trailing shape {(self.M1, self.M2)}, got {values.shape}")
        mat = np.einsum("ai,...ij,bj->...ab", self._sx, values, self._sy, optimize=True)
        return self.from_matrix(mat) * (self.dx * self.dy)

    def synthesize_values(self, coeffs: np.ndarray) -> np.ndarray:
        """Grid values ``(..., M1, M2)`` of coefficients ``(..., K)``."""
        coeffs = np.asarray(coeffs)
        if coeffs.shape[-1] != self.n_modes:
            raise ValueError(f"expected {self.n_modes} coefficients, got {coeffs.shape[-1]}")
        mat = self.to_matrix(coeffs)
        return np.einsum("ai,...ab,bj->...ij", self._sx, mat, self._sy, optimize=True)

    def evaluate(self, coeffs: np.ndarray, x, y) -> np.ndarray:
        """Evaluate the sine series at scattered points ``(x[j], y[j])``."""
        mat = self.to_matrix(coeffs)
        sx = self.sine_x(np.atleast_1d(x))
        sy = self.sine_y(np.atleast_1d(y))
        return np.einsum("aj,...ab,bj->...j", sx, mat, sy, optimize=True)

    def evaluate_gradient(self, coeffs: np.ndarray, x, y):
        """Gradient ``(d/dx, d/dy)`` of the sine series at scattered points."""
        mat = self.to_matrix(coeffs)
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        gx = np.einsum("aj,...ab,bj->...j", self.cosine_x(x), mat, self.sine_y(y), optimize=True)
        gy = np.einsum("aj,...ab,bj->...j", self.sine_x(x), mat, self.cosine_y(y), optimize=True)
        return gx, gy


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values on the interior ``M1 x M2`` grid of a :class:`RectDomain`."""

    domain: RectDomain
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.dtype.kind not in "fc":
            v = v.astype(float)
        if v.shape != (self.domain.M1, self.domain.M2):
            raise ValueError(
                f"grid function needs shape {(self.domain.M1, self.domain.M2)}, got {v.shape}"
            )
        object.__setattr__(self, "values", _readonly(v))

    @classmethod
    def from_function(cls, domain: RectDomain, func) -> "GridFunction":
        X, Y = domain.mesh()
        return cls(domain, func(X, Y))

    def l2_norm(self) -> float:
        """Grid quadrature of the L2 norm (boundary values are zero)."""
        d = self.domain
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * d.dx * d.dy))


@dataclass(frozen=True, eq=False)
class CoeffVector:
    """Eigen-coefficients ``(h, phi_k)`` in flat mode order."""

    domain: RectDomain
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs)
        if c.dtype.kind not in "fc":
            c = c.astype(float)
        if c.shape != (self.domain.n_modes,):
            raise ValueError(f"expected {self.domain.n_modes} coefficients, got shape {c.shape}")
        object.__setattr__(self, "coeffs", _readonly(c))

    @classmethod
    def zeros(cls, domain: RectDomain) -> "CoeffVector":
        return cls(domain, np.zeros(domain.n_modes))

    @classmethod
    def unit(cls, domain: RectDomain, mode: ModeIndex) -> "CoeffVector":
        c = np.zeros(domain.n_modes)
        c[mode.k] = 1.0
        return cls(domain, c)


def eigenpair(domain: RectDomain, mode: ModeIndex | tuple[int, int]):
    """Eigenvalue and sampled eigenfunction of ``mode``.

    Examples
    --------
    >>> lam, phi = eigenpair(RectDomain(1.0, 1.0, 2, 2), (1, 1))
    >>> round(lam / np.pi**2, 12)
    2.0
    """
    if not isinstance(mode, ModeIndex):
        mode = domain.mode(*mode)
    else:
        mode = domain.mode(mode.m, mode.n)
    lam = float(domain.eigenvalues[mode.k])
    X, Y = domain.mesh()
    phi = (
        np.sqrt(4.0 / (domain.L1 * domain.L2))
        * np.sin(mode.m * np.pi * X / domain.L1)
        * np.sin(mode.n * np.pi * Y / domain.L2)
    )
    return lam, GridFunction(domain, phi)


def project(h: GridFunction) -> CoeffVector:
    """Eigen-coefficients of a grid function by the DST-I quadrature."""
    return CoeffVector(h.domain, h.domain.project_values(h.values))


def synthesize(c: CoeffVector) -> GridFunction:
    """Grid values of ``sum_k c_k phi_k``."""
    return GridFunction(c.domain, c.domain.synthesize_values(c.coeffs))


def frac_power_norm(c: CoeffVector, gamma: float) -> float:
    """``(sum_k |lambda_k^gamma c_k|^2)^(1/2)``, the norm of ``D((-Laplace)^gamma)``."""
    if gamma < -1:
        raise ValueError("gamma must be at least -1")
    w = c.domain.eigenvalues ** float(gamma)
    return float(np.sqrt(np.sum(np.abs(w * c.coeffs) ** 2)))


def gradient(h: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Spectral gradient: term-by-term derivative of the sine series.

    The input is first projected onto the retained modes, so the result is
    exact for band-limited fields.
    """
    d = h.domain
    mat = d.to_matrix(d.project_values(h.values))
    cx = d.cosine_x(d.x)
    cy = d.cosine_y(d.y)
    gx = np.einsum("ai,ab,bj->ij", cx, mat, d._sy, optimize=True)
    gy = np.einsum("ai,ab,bj->ij", d._sx, mat, cy, optimize=True)
    return GridFunction(d, gx), GridFunction(d, gy)
