"""Moving source models.

Two families are supported:

* :class:`LinearMotion`: ``F(x, t) = f(x - p t) [+ g(x - q t)]``;
* :class:`Orbit`: ``F(x, t) = f(x - rho(t)) h(t)`` with ``h`` supported in ``[0, T0]``.

:class:`ModalSource` wraps a callable returning eigen-coefficients directly,
which is how manufactured solutions are fed to the solvers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..fraccalc.grid import TimeSeries
from ..spectral import RectDomain

__all__ = [
    "SupportViolationError",
    "BumpProfile",
    "ProfileSum",
    "LinearMotion",
    "Orbit",
    "ModalSource",
    "source_coefficients",
    "source_rate_coefficients",
    "project_function",
]

_RATE_STEP = 1e-4


class SupportViolationError(ValueError):
    """Raised when a moving profile leaves the domain."""


def _vec(v) -> np.ndarray:
    a = np.asarray(v, dtype=float).reshape(-1)
    if a.shape != (2,):
        raise ValueError(f"expected a 2-vector, got {v!r}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BumpProfile:
    """Smooth compactly supported bump ``A exp(-r^2 / (delta^2 - r^2))``."""

    center: np.ndarray
    delta: float
    amplitude: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "center", _vec(self.center))
        if not self.delta > 0:
            raise ValueError("bump radius must be positive")
        object.__setattr__(self, "delta", float(self.delta))
        object.__setattr__(self, "amplitude", float(self.amplitude))

    def __call__(self, X, Y, shift=(0.0, 0.0)) -> np.ndarray:
        r2 = (X - self.center[0] - shift[0]) ** 2 + (Y - self.center[1] - shift[1]) ** 2
        d2 = self.delta**2
        inside = r2 < d2
        out = np.zeros(np.broadcast(X, Y).shape)
        out[inside] = self.amplitude * np.exp(-r2[inside] / (d2 - r2[inside]))
        return out

    def grad(self, X, Y, shift=(0.0, 0.0)):
        """Analytic gradient ``(f_x, f_y)`` of the shifted bump."""
        dx = X - self.center[0] - shift[0]
        dy = Y - self.center[1] - shift[1]
        r2 = dx**2 + dy**2
        d2 = self.delta**2
        inside = r2 < d2
        val = np.zeros(np.broadcast(X, Y).shape)
        # d/dr2 of -r2/(d2-r2) is -d2/(d2-r2)^2
        fac = np.zeros_like(val)
        fac[inside] = -2.0 * d2 / (d2 - r2[inside]) ** 2
        val[inside] = self.amplitude * np.exp(-r2[inside] / (d2 - r2[inside]))
        return val * fac * dx, val * fac * dy

    def inside(self, domain: RectDomain, shift=(0.0, 0.0)) -> bool:
        cx = self.center[0] + shift[0]
        cy = self.center[1] + shift[1]
        d = self.delta
        return (d <= cx <= domain.L1 - d) and (d <= cy <= domain.L2 - d)

    def fourier(self, xi: np.ndarray) -> np.ndarray:
        """``int f(x) exp(-i xi . x) dx`` for rows of ``xi`` (shape ``(n, 2)``)."""
        from scipy.integrate import quad
        from scipy.special import j0

        xi = np.atleast_2d(np.asarray(xi, float))
        k = np.hypot(xi[:, 0], xi[:, 1])
        d = self.delta

        def radial(kk):
            f = lambda r: np.exp(-r * r / (d * d - r * r)) * j0(kk * r) * r
            return 2 * np.pi * quad(f, 0.0, d, limit=200, epsabs=1e-14, epsrel=1e-12)[0]

        cache: dict[float, float] = {}
        vals = np.empty(k.shape)
        for i, kk in enumerate(k):
            key = round(float(kk), 12)
            if key not in cache:
                cache[key] = radial(kk)
            vals[i] = cache[key]
        phase = np.exp(-1j * (xi @ self.center))
        return self.amplitude * vals * phase


@dataclass(frozen=True, eq=False)
class ProfileSum:
    """Sum of bump profiles, used as a single spatial profile."""

    parts: tuple

    def __post_init__(self):
        parts = tuple(self.parts)
        if not parts:
            raise ValueError("a profile sum needs at least one bump")
        object.__setattr__(self, "parts", parts)

    def __call__(self, X, Y, shift=(0.0, 0.0)) -> np.ndarray:
        return sum(b(X, Y, shift) for b in self.parts)

    def grad(self, X, Y, shift=(0.0, 0.0)):
        gs = [b.grad(X, Y, shift) for b in self.parts]
        return sum(g[0] for g in gs), sum(g[1] for g in gs)

    def inside(self, domain: RectDomain, shift=(0.0, 0.0)) -> bool:
        return all(b.inside(domain, shift) for b in self.parts)

    def fourier(self, xi: np.ndarray) -> np.ndarray:
        return sum(b.fourier(xi) for b in self.parts)


class _SourceBase:
    """Common interface: values, time derivative and support checks."""

    T0: Optional[float] = None

    def evaluate(self, X, Y, t: float) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    def rate(self, X, Y, t: float) -> np.ndarray:
        """``dF/dt``; central differences unless overridden."""
        s = _RATE_STEP
        if t - s < 0:
            return (-3 * self.evaluate(X, Y, t) + 4 * self.evaluate(X, Y, t + s)
                    - self.evaluate(X, Y, t + 2 * s)) / (2 * s)
        return (self.evaluate(X, Y, t + s) - self.evaluate(X, Y, t - s)) / (2 * s)

    def check_support(self, domain: RectDomain, times: Sequence[float]) -> None:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class LinearMotion(_SourceBase):
    """``f(x - p t)`` plus, optionally, ``g(x - q t)``."""

    f: BumpProfile | ProfileSum
    p: np.ndarray
    g: Optional[BumpProfile | ProfileSum] = None
    q: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "p", _vec(self.p))
        if (self.g is None) != (self.q is None):
            raise ValueError("g and q must be given together")
        if self.q is not None:
            object.__setattr__(self, "q", _vec(self.q))
            if np.allclose(self.p, self.q):
                raise ValueError("the two velocities p and q must differ")

    @property
    def two_profiles(self) -> bool:
        return self.g is not None

    def evaluate(self, X, Y, t: float) -> np.ndarray:
        out = self.f(X, Y, self.p * t)
        if self.g is not None:
            out = out + self.g(X, Y, self.q * t)
        return out

    def rate(self, X, Y, t: float) -> np.ndarray:
        fx, fy = self.f.grad(X, Y, self.p * t)
        out = -(self.p[0] * fx + self.p[1] * fy)
        if self.g is not None:
            gx, gy = self.g.grad(X, Y, self.q * t)
            out = out - (self.q[0] * gx + self.q[1] * gy)
        return out

    def check_support(self, domain: RectDomain, times) -> None:
        # motion is linear, so the extreme positions are the end points
        for t in (float(np.min(times)), float(np.max(times))):
            if not self.f.inside(domain, self.p * t):
                raise SupportViolationError(f"profile f leaves the domain by t={t:g}")
            if self.g is not None and not self.g.inside(domain, self.q * t):
                raise SupportViolationError(f"profile g leaves the domain by t={t:g}")


@dataclass(frozen=True, eq=False)
class Orbit(_SourceBase):
    """``f(x - rho(t)) h(t)`` with temporal factor ``h`` vanishing after ``T0``.

    ``rho`` maps times to displacement vectors (array of shape ``(n, 2)`` for
    ``n`` times); ``h`` is a callable or a :class:`TimeSeries` (linearly
    interpolated, zero outside its grid).
    """

    f: BumpProfile
    rho: Callable[[np.ndarray], np.ndarray]
    h: Callable[[np.ndarray], np.ndarray] | TimeSeries
    T0: float = 1.0
    rho_rate: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None)

    def __post_init__(self):
        if not self.T0 > 0:
            raise ValueError("T0 must be positive")
        object.__setattr__(self, "T0", float(self.T0))

    def h_at(self, t) -> np.ndarray:
        t = np.asarray(t, float)
        if isinstance(self.h, TimeSeries):
            val = np.interp(t, self.h.t, np.real(self.h.values), left=0.0, right=0.0)
        else:
            val = np.asarray(self.h(t), float)
        return np.where(t <= self.T0, val, 0.0)

    def rho_at(self, t) -> np.ndarray:
        return np.asarray(self.rho(np.atleast_1d(np.asarray(t, float))), float).reshape(-1, 2)

    def evaluate(self, X, Y, t: float) -> np.ndarray:
        ht = float(self.h_at(t))
        if ht == 0.0:
            return np.zeros(np.broadcast(X, Y).shape)
        return self.f(X, Y, self.rho_at(t)[0]) * ht

    def check_support(self, domain: RectDomain, times) -> None:
        times = np.asarray(times, float)
        active = times[times <= self.T0]
        if active.size == 0:
            return
        fine = np.linspace(0.0, min(self.T0, float(active.max())), 257)
        for r in self.rho_at(fine):
            if not self.f.inside(domain, r):
                raise SupportViolationError("orbit moves the profile out of the domain")


@dataclass(frozen=True, eq=False)
class ModalSource(_SourceBase):
    """Source given directly by its eigen-coefficients ``c(t)`` on ``domain``."""

    domain: RectDomain
    coeffs: Callable[[float], np.ndarray]
    coeffs_rate: Optional[Callable[[float], np.ndarray]] = None
    T0: Optional[float] = None

    def evaluate(self, X, Y, t: float) -> np.ndarray:
        c = np.asarray(self.coeffs(t), float)
        return self.domain.evaluate(c, np.ravel(X), np.ravel(Y)).reshape(np.shape(X))

    def check_support(self, domain: RectDomain, times) -> None:
        if domain != self.domain:
            raise ValueError("modal source defined on a different domain")


def project_function(domain: RectDomain, func, oversample: int = 4) -> np.ndarray:
    """Coefficients of ``func(X, Y)`` using a refined DST-I quadrature grid.

    The refined grid has ``oversample * (M + 1) - 1`` interior points per
    direction, nested with the domain grid.
    """
    fine = RectDomain(domain.L1, domain.L2, domain.N1, domain.N2,
                      oversample * (domain.M1 + 1) - 1, oversample * (domain.M2 + 1) - 1)
    X, Y = fine.mesh()
    return fine.project_values(func(X, Y))


def source_coefficients(model, domain: RectDomain, t: float, oversample: int = 4,
                        check: bool = True) -> np.ndarray:
    """Eigen-coefficients ``(F(., t), phi_k)``."""
    if t < 0:
        raise ValueError("time must be non-negative")
    if isinstance(model, ModalSource):
        return np.asarray(model.coeffs(t), float)
    if check:
        model.check_support(domain, [t])
    return project_function(domain, lambda X, Y: model.evaluate(X, Y, t), oversample)


def source_rate_coefficients(model, domain: RectDomain, t: float, oversample: int = 4) -> np.ndarray:
    """Eigen-coefficients of ``dF/dt`` at time ``t``."""
    if isinstance(model, ModalSource):
        if model.coeffs_rate is not None:
            return np.asarray(model.coeffs_rate(t), float)
        s = _RATE_STEP
        if t - s < 0:
            return (-3 * model.coeffs(t) + 4 * model.coeffs(t + s) - model.coeffs(t + 2 * s)) / (2 * s)
        return (np.asarray(model.coeffs(t + s)) - np.asarray(model.coeffs(t - s))) / (2 * s)
    return project_function(domain, lambda X, Y: model.rate(X, Y, t), oversample)
