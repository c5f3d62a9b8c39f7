"""Reduction of the moving-source problem to a homogeneous one, and its inversion.

For ``F = f(x - p t)`` the operator ``(d/dt + p . grad)`` annihilates the
source, so the auxiliary field::

    v = J^(1-alpha) (d/dt + p.grad) u                         (alpha <= 1)
    v = J^(2-alpha) (d/dt + p.grad)(d/dt + q.grad) u          (1 < alpha <= 2)

solves the source-free equation with initial data ``a = f + g`` and (for
``alpha > 1``) ``b = q.grad f + p.grad g``.  On a bounded domain ``v`` does not
vanish on the boundary; its boundary values are determined by the lateral
Cauchy data of ``u`` and enter each mode as a known forcing ``beta_n(t)``::

    d^alpha v_n + lambda_n v_n = beta_n,   beta_n = -int_{dOmega} v d(phi_n)/dnu.

Everything is computed on eigen-coefficients.  Kernel identities
``J^s k_gamma = k_{gamma+s}`` for ``k_gamma(t) = t^(gamma-1) E_{alpha,gamma}(-lambda t^alpha)``
turn every fractional integral of a derivative of ``u`` into a product
integration of the sampled source, so no numerical differencing of ``u`` is needed.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .fraccalc.grid import as_order
from .fraccalc.operators import classical_derivative, rl_integral
from .forward.data import CauchyData
from .forward.kernels import KernelWeights, kernel_values
from .forward.solver import SpectralField
from .forward.sources import project_function
from .spectral import GridFunction, RectDomain

__all__ = [
    "RankDeficiencyWarning",
    "InitialData",
    "ObservationWindow",
    "Observation",
    "derivative_matrices",
    "auxiliary_field",
    "boundary_forcing",
    "boundary_lift",
    "verify_reduction",
    "observe",
    "temporal_basis",
    "recover_initial_data",
    "transport_invert",
    "ReductionResult",
    "refined_domain",
    "reduce_and_recover",
]


class RankDeficiencyWarning(RuntimeWarning):
    """The least-squares normal equations are numerically singular."""


def _vec(v) -> np.ndarray:
    a = np.asarray(v, float).reshape(-1)
    if a.shape != (2,):
        raise ValueError(f"expected a 2-vector, got {v!r}")
    return a


# ---------------------------------------------------------------- initial data
@dataclass(frozen=True, eq=False)
class InitialData:
    """Initial data ``(a, b)`` of the reduced problem as eigen-coefficients.

    ``b`` is present only for ``alpha > 1``.
    """

    domain: RectDomain
    a_coeffs: np.ndarray
    b_coeffs: Optional[np.ndarray] = None
    condition: float = float("nan")

    @property
    def a(self) -> GridFunction:
        return GridFunction(self.domain, self.domain.synthesize_values(self.a_coeffs))

    @property
    def b(self) -> Optional[GridFunction]:
        if self.b_coeffs is None:
            return None
        return GridFunction(self.domain, self.domain.synthesize_values(self.b_coeffs))

    def on(self, domain: RectDomain):
        """``(a, b)`` synthesized on another grid of the same mode set."""
        a = GridFunction(domain, domain.synthesize_values(self.a_coeffs))
        b = None if self.b_coeffs is None else GridFunction(domain, domain.synthesize_values(self.b_coeffs))
        return a, b

    @classmethod
    def from_motion(cls, model, domain: RectDomain, alpha, oversample: int = 8) -> "InitialData":
        """Truth ``a = f + g``, ``b = q.grad f + p.grad g`` for a LinearMotion model."""
        order = as_order(alpha)
        f, g, p, q = model.f, model.g, model.p, model.q
        a = project_function(domain, f, oversample)
        if g is not None:
            a = a + project_function(domain, g, oversample)
        b = None
        if order.alpha > 1.0:
            if q is None:
                raise ValueError("alpha > 1 needs the second velocity q")

            def bfun(X, Y):
                fx, fy = f.grad(X, Y)
                out = q[0] * fx + q[1] * fy
                if g is not None:
                    gx, gy = g.grad(X, Y)
                    out = out + p[0] * gx + p[1] * gy
                return out

            b = project_function(domain, bfun, oversample)
        return cls(domain, a, b)


# ---------------------------------------------------------------- derivative matrices
def _d1(n: int, L: float) -> np.ndarray:
    """``D[j, k] = int_0^L s_j s_k'`` for ``s_k = sqrt(2/L) sin(k pi x / L)``."""
    j = np.arange(1, n + 1)[:, None]
    k = np.arange(1, n + 1)[None, :]
    odd = (j + k) % 2 == 1
    with np.errstate(divide="ignore", invalid="ignore"):
        D = np.where(odd, 4.0 * j * k / (L * (j * j - k * k)), 0.0)
    return D


def derivative_matrices(domain: RectDomain):
    """Matrices of ``d/dx``, ``d/dy``, ``d2/dx2``, ``d2/dy2``, ``d2/dxdy`` in the sine basis.

    Entry ``[n, m]`` is ``(D phi_m, phi_n)``; applied to the coefficients of a
    function vanishing on the boundary they give the exact coefficients of
    its derivative, up to truncation of the mode sum.
    """
    m1, m2 = domain.m_index - 1, domain.n_index - 1
    D1x = _d1(domain.N1, domain.L1)
    D1y = _d1(domain.N2, domain.L2)
    same1 = m1[:, None] == m1[None, :]
    same2 = m2[:, None] == m2[None, :]
    Dx = D1x[m1[:, None], m1[None, :]] * same2
    Dy = D1y[m2[:, None], m2[None, :]] * same1
    Dxx = np.diag(-((domain.m_index * np.pi / domain.L1) ** 2))
    Dyy = np.diag(-((domain.n_index * np.pi / domain.L2) ** 2))
    Dxy = D1x[m1[:, None], m1[None, :]] * D1y[m2[:, None], m2[None, :]]
    return Dx, Dy, Dxx, Dyy, Dxy


def _advection(domain: RectDomain, p, q=None):
    Dx, Dy, Dxx, Dyy, Dxy = derivative_matrices(domain)
    P = p[0] * Dx + p[1] * Dy
    if q is None:
        return P, None, None
    Q = q[0] * Dx + q[1] * Dy
    H = p[0] * q[0] * Dxx + p[1] * q[1] * Dyy + (p[0] * q[1] + p[1] * q[0]) * Dxy
    return P, Q, H


# ---------------------------------------------------------------- auxiliary field
def auxiliary_field(u: SpectralField, alpha=None, p=None, q=None) -> SpectralField:
    """Apply the source-annihilating operators to a solved field.

    Parameters
    ----------
    u : SpectralField
        Forward solution carrying its source samples and their time derivatives.
    alpha : float or FracOrder, optional
        Defaults to the order of ``u``.
    p, q : 2-vectors
        Velocities of the two profiles; ``q`` is required for ``alpha > 1``.

    Returns
    -------
    SpectralField
        Coefficients of ``v`` on the same grids, with ``zero_start=False`` and,
        for ``alpha > 1``, the exact ``dv/dt`` at ``t = 0`` in ``initial_rate``.
    """
    order = as_order(alpha if alpha is not None else u.alpha)
    a = order.alpha
    if p is None:
        raise ValueError("the velocity p is required")
    p = _vec(p)
    if a > 1.0 and q is None:
        raise ValueError("alpha > 1 needs the second velocity q")
    if a <= 1.0:
        q = None
    else:
        q = _vec(q)
    if u.source is None or u.source_rate is None:
        raise ValueError("the field must carry its source samples and their time derivatives")
    d = u.domain
    lam = d.eigenvalues
    h = u.grid.step
    n = u.grid.size
    F = np.asarray(u.source)
    dF = np.asarray(u.source_rate)
    P, Q, H = _advection(d, p, q)
    k1 = kernel_values(a, 1.0, lam, u.t)
    w1 = KernelWeights(a, 1.0, lam, h, n)
    conv_F = w1.apply(F)
    v = k1 * F[0][None, :] + w1.apply(dF)
    rate = None
    if q is None:
        v += conv_F @ P.T
    else:
        w2 = KernelWeights(a, 2.0, lam, h, n)
        v += conv_F @ (P + Q).T + w2.apply(F) @ H.T
        rate = dF[0] + (P + Q) @ F[0]
    return SpectralField(d, u.grid, order, v, model=u.model, zero_start=False, initial_rate=rate)


# ---------------------------------------------------------------- boundary forcing
def _wall_geometry(domain: RectDomain):
    """Per wall: (name, normal, tangential length, tangential mode count, tangential index, amplitude)."""
    L1, L2 = domain.L1, domain.L2
    m, n = domain.m_index, domain.n_index
    ax = np.sqrt(2.0 / L1) * m * np.pi / L1
    ay = np.sqrt(2.0 / L2) * n * np.pi / L2
    # d(phi_n)/dnu restricted to a wall = amplitude * s_{tangential index}(tau)
    return [
        ("bottom", (0.0, -1.0), L1, domain.N1, m, -ay),
        ("right", (1.0, 0.0), L2, domain.N2, n, ax * (-1.0) ** m),
        ("top", (0.0, 1.0), L1, domain.N1, m, ay * (-1.0) ** n),
        ("left", (-1.0, 0.0), L2, domain.N2, n, -ax),
    ]


def boundary_forcing(data: CauchyData, alpha, p, q=None) -> np.ndarray:
    """Modal forcing ``beta_n(t)`` of the auxiliary field, from lateral data only.

    On a straight wall ``u = 0`` forces ``u_tt = u_tautau = 0`` and, away from
    the source, ``u_nunu = 0``; the boundary values of ``v`` are therefore::

        v = (p.nu) J^(1-alpha) du/dnu                                       (alpha <= 1)
        v = ((p+q).nu) J^(2-alpha) d/dt du/dnu + c J^(2-alpha) d/dtau du/dnu (alpha > 1)

    with ``c = (p_x q_y + p_y q_x) nu_x`` on vertical and ``... nu_y`` on
    horizontal walls.  Traces are expanded in the wall's sine basis (exact for
    band-limited fields), so tangential derivatives and wall integrals are
    analytic.
    """
    order = as_order(alpha)
    a = order.alpha
    p = _vec(p)
    q = None if (a <= 1.0 or q is None) else _vec(q)
    if a > 1.0 and q is None:
        raise ValueError("alpha > 1 needs the second velocity q")
    d = data.domain
    lay = data.layout
    t = data.grid.nodes
    beta = np.zeros((t.size, d.n_modes))
    taus = {"bottom": lay.xs, "top": lay.xs, "left": lay.ys, "right": lay.ys}
    for name, nu, Lw, Nw, tidx, amp in _wall_geometry(d):
        tau = taus[name]
        dtau = Lw / (tau.size + 1)
        k = np.arange(1, Nw + 1)
        S = np.sqrt(2.0 / Lw) * np.sin(np.outer(tau, k) * np.pi / Lw)
        G = data.dnu_trace[:, lay.wall_slices[name]] @ S * dtau  # (Nt, Nw) wall sine coefficients
        if q is None:
            V = (p @ nu) * rl_integral(1.0 - a, t, G)
        else:
            JG = rl_integral(2.0 - a, t, G)
            c = (p[0] * q[1] + p[1] * q[0]) * (nu[0] if nu[0] != 0 else nu[1])
            V = ((p + q) @ nu) * classical_derivative(t, JG, 1) + c * JG @ _d1(Nw, Lw).T
        beta -= amp[None, :] * V[:, tidx - 1]
    return beta


def boundary_lift(data: CauchyData, alpha, p, q=None) -> np.ndarray:
    """Coefficients of the zero-initial-data response to :func:`boundary_forcing`."""
    order = as_order(alpha)
    beta = boundary_forcing(data, order, p, q)
    w = KernelWeights(order.alpha, order.alpha, data.domain.eigenvalues, data.grid.step, data.grid.size)
    return w.apply(beta)


# ---------------------------------------------------------------- verification
def _caputo_modes(alpha: float, t: np.ndarray, v: np.ndarray, rate: Optional[np.ndarray] = None) -> np.ndarray:
    """Caputo derivative of mode histories ``v`` (rows are times).

    Fractional orders use the Riemann-Liouville form applied to ``v`` minus
    its Taylor start, ``d^m/dt^m J^(m-alpha) (v - v(0) - t v'(0))``: the
    product-integrated ``J`` absorbs the ``t^alpha`` cusp of the Mittag-Leffler
    modes that a finite difference taken first would smear.
    """
    if alpha == 1.0:
        return classical_derivative(t, v, 1)
    if alpha == 2.0:
        return classical_derivative(t, v, 2)
    m = int(np.ceil(alpha))
    w = v - v[0]
    if m == 2 and rate is not None:
        w = w - t[:, None] * np.asarray(rate)[None, :]
    return classical_derivative(t, rl_integral(m - alpha, t, w), m)


def verify_reduction(v: SpectralField, alpha, truth: Optional[InitialData] = None,
                     forcing: Optional[np.ndarray] = None, t_min: Optional[float] = None) -> dict:
    """Residuals of the reduced problem.

    ``pde_residual`` is the relative ``L2(Omega x (t_min, T))`` norm of
    ``d^alpha v_n + lambda_n v_n - beta_n`` against ``lambda_n v_n``; the Caputo
    derivative comes from the discrete operators of :mod:`fracsource.fraccalc`,
    so the first nodes (``t < t_min``, default two steps) are excluded.
    Without ``forcing`` the boundary contribution ``beta_n`` is taken as zero.
    Initial-data errors compare ``v(0)`` and the exact initial rate with the truth.
    """
    order = as_order(alpha)
    t = v.grid.nodes
    if t_min is None:
        t_min = 2 * v.grid.step
    c = np.asarray(v.coeffs)
    lam = v.domain.eigenvalues
    report = {"pde_residual": 0.0, "ic_error_a": 0.0, "ic_error_b": None}
    lv = lam[None, :] * c
    keep = t >= t_min - 1e-14
    den = np.sqrt(np.trapezoid(np.sum(lv[keep] ** 2, axis=1), t[keep]))
    if den > 0:
        res = _caputo_modes(order.alpha, t, c, v.initial_rate) + lv
        if forcing is not None:
            res = res - forcing
        num = np.sqrt(np.trapezoid(np.sum(res[keep] ** 2, axis=1), t[keep]))
        report["pde_residual"] = float(num / den)
    if truth is not None:
        na = np.linalg.norm(truth.a_coeffs)
        report["ic_error_a"] = float(np.linalg.norm(c[0] - truth.a_coeffs) / na) if na > 0 else float(np.linalg.norm(c[0]))
        if truth.b_coeffs is not None and v.initial_rate is not None:
            nb = np.linalg.norm(truth.b_coeffs)
            e = np.linalg.norm(v.initial_rate - truth.b_coeffs)
            report["ic_error_b"] = float(e / nb) if nb > 0 else float(e)
    return report


# ---------------------------------------------------------------- observation and fit
@dataclass(frozen=True)
class ObservationWindow:
    """Boundary collar ``omega`` of a given width and the observed time interval start ``t0``."""

    collar_width: float
    t0: float = 0.0

    def mask(self, domain: RectDomain) -> np.ndarray:
        w = self.collar_width
        if not 0 < w < min(domain.L1, domain.L2) / 2:
            raise ValueError("collar width must lie in (0, min(L1, L2) / 2)")
        X, Y = domain.mesh()
        return (X < w) | (X > domain.L1 - w) | (Y < w) | (Y > domain.L2 - w)

    @classmethod
    def default(cls, domain: RectDomain) -> "ObservationWindow":
        return cls(0.15 * min(domain.L1, domain.L2))


@dataclass(frozen=True, eq=False)
class Observation:
    """Samples of a field on ``omega x [t0, T]``: ``values[j, i]`` at ``(times[j], points[i])``."""

    domain: RectDomain
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if np.shape(self.values) != (self.times.size, self.x.size):
            raise ValueError("values must have shape (n_times, n_points)")


def observe(field: SpectralField, window: ObservationWindow, offset: Optional[np.ndarray] = None,
            stride: int = 1) -> Observation:
    """Sample ``field`` (minus optional coefficient ``offset``) on the collar grid points."""
    d = field.domain
    mask = window.mask(d)
    X, Y = d.mesh()
    sel = (field.t >= window.t0 - 1e-14)
    idx = np.flatnonzero(sel)[::stride]
    c = np.asarray(field.coeffs)[idx]
    if offset is not None:
        c = c - np.asarray(offset)[idx]
    vals = d.synthesize_values(c)[:, mask]
    return Observation(d, field.t[idx], X[mask], Y[mask], vals)


def temporal_basis(alpha: float, lam: np.ndarray, t: np.ndarray):
    """``E_{alpha,1}(-lambda t^alpha)`` and ``t E_{alpha,2}(-lambda t^alpha)`` on ``t x lam``."""
    return kernel_values(alpha, 1.0, lam, t), kernel_values(alpha, 2.0, lam, t)


def recover_initial_data(obs: Observation, alpha, n_modes: Optional[int] = None, mu: float = 0.0,
                         lift: Optional[np.ndarray] = None) -> InitialData:
    """Fit ``(a_n, b_n)`` to windowed observations.

    Minimizes ``sum |v_obs - sum_n (a_n E_{alpha,1} + b_n t E_{alpha,2}) phi_n|^2
    + mu sum_n lambda_n (a_n^2 + b_n^2)`` over the first ``n_modes`` modes
    (``b`` only for ``alpha > 1``).  ``lift`` are samples already aligned with
    ``obs`` (same shape) and are subtracted first.  The normal equations are
    assembled in factored form: the spatial Gram matrix of the modes on the
    collar times the temporal Gram matrix, entrywise.
    """
    order = as_order(alpha)
    a = order.alpha
    d = obs.domain
    K = d.n_modes if n_modes is None else int(n_modes)
    if not 1 <= K <= d.n_modes:
        raise ValueError("n_modes must lie between 1 and the number of retained modes")
    if mu < 0:
        raise ValueError("mu must be non-negative")
    vals = np.asarray(obs.values, float)
    if lift is not None:
        vals = vals - np.asarray(lift, float)
    lam = d.eigenvalues[:K]
    S = d.evaluate(np.eye(d.n_modes)[:K], obs.x, obs.y).T  # (points, K)
    E1, E2 = temporal_basis(a, lam, obs.times)
    bases = [E1] if a <= 1.0 else [E1, E2]
    W = S.T @ S
    proj = vals @ S  # (times, K)
    nb = len(bases)
    A = np.zeros((nb * K, nb * K))
    r = np.zeros(nb * K)
    for i, Bi in enumerate(bases):
        r[i * K:(i + 1) * K] = np.sum(Bi * proj, axis=0)
        for j, Bj in enumerate(bases):
            A[i * K:(i + 1) * K, j * K:(j + 1) * K] = W * (Bi.T @ Bj)
    reg = mu * np.tile(lam, nb)
    A[np.diag_indices_from(A)] += reg
    scale = np.sqrt(np.diag(A))
    scale[scale == 0] = 1.0
    As = A / np.outer(scale, scale)
    ev = np.linalg.eigvalsh(As)
    cond = float(ev[-1] / ev[0]) if ev[0] > 0 else float("inf")
    if cond > 1e12:
        warnings.warn(f"normal equations are ill-conditioned (condition number {cond:.3g})",
                      RankDeficiencyWarning, stacklevel=2)
    sol = np.linalg.lstsq(As, r / scale, rcond=None)[0] / scale
    a_c = np.zeros(d.n_modes)
    a_c[:K] = sol[:K]
    b_c = None
    if nb == 2:
        b_c = np.zeros(d.n_modes)
        b_c[:K] = sol[K:]
    return InitialData(d, a_c, b_c, condition=cond)


# ---------------------------------------------------------------- transport inversion
def transport_invert(a: GridFunction, b: GridFunction, p, q):
    """Split ``a = f + g``, ``b = q.grad f + p.grad g`` into ``(f, g)``.

    ``f`` solves ``(q - p).grad f = b - p.grad a``; it is integrated along the
    characteristics of direction ``(q - p)`` starting from zero outside the
    support (upwind line integrals of the bilinear interpolant of the right
    hand side, trapezoidal in arc length).  Then ``g = a - f``.
    """
    from scipy.interpolate import RegularGridInterpolator

    p = _vec(p)
    q = _vec(q)
    dvec = q - p
    speed = float(np.hypot(*dvec))
    if speed < 1e-12:
        raise ValueError("degenerate transport direction: q and p coincide")
    e = dvec / speed
    d = a.domain
    ax, ay = _grid_gradient(a)
    rhs = (b.values - p[0] * ax - p[1] * ay) / speed
    xs = np.concatenate([[0.0], d.x, [d.L1]])
    ys = np.concatenate([[0.0], d.y, [d.L2]])
    padded = np.zeros((xs.size, ys.size))
    padded[1:-1, 1:-1] = rhs
    interp = RegularGridInterpolator((xs, ys), padded, bounds_error=False, fill_value=0.0)
    ds = 0.5 * min(d.dx, d.dy)
    n_steps = int(np.ceil(np.hypot(d.L1, d.L2) / ds)) + 1
    X, Y = d.mesh()
    x0, y0 = X.ravel(), Y.ravel()
    s = np.arange(n_steps) * ds
    f = np.empty(x0.size)
    chunk = max(1, 2_000_000 // n_steps)
    for i in range(0, x0.size, chunk):
        px = x0[i:i + chunk, None] - s[None, :] * e[0]
        py = y0[i:i + chunk, None] - s[None, :] * e[1]
        vals = interp(np.stack([px.ravel(), py.ravel()], axis=-1)).reshape(px.shape)
        f[i:i + chunk] = (np.sum(vals, axis=1) - 0.5 * vals[:, 0]) * ds
    f = f.reshape(X.shape)
    return GridFunction(d, f), GridFunction(d, a.values - f)


def _grid_gradient(h: GridFunction):
    """Centred differences with the zero boundary values of the grid functions."""
    d = h.domain
    v = np.pad(h.values, 1)
    gx = (v[2:, 1:-1] - v[:-2, 1:-1]) / (2 * d.dx)
    gy = (v[1:-1, 2:] - v[1:-1, :-2]) / (2 * d.dy)
    return gx, gy


# ---------------------------------------------------------------- pipeline
@dataclass(frozen=True, eq=False)
class ReductionResult:
    """Outputs of :func:`reduce_and_recover`."""

    aux: SpectralField
    initial: InitialData
    f: GridFunction
    g: GridFunction


def refined_domain(domain: RectDomain, refine: int) -> RectDomain:
    """Same modes on a grid refined ``refine`` times per direction."""
    return RectDomain(domain.L1, domain.L2, domain.N1, domain.N2,
                      refine * (domain.M1 + 1) - 1, refine * (domain.M2 + 1) - 1)


def reduce_and_recover(u: SpectralField, data: CauchyData, alpha, p, q=None,
                       window: Optional[ObservationWindow] = None, mu: float = 0.0,
                       n_modes: Optional[int] = None, refine: int = 4, stride: int = 1) -> ReductionResult:
    """Auxiliary field, collar fit of its initial data, and transport inversion.

    For ``alpha <= 1`` only ``a = f`` is available and ``g`` is returned as zero.
    The recovered ``(a, b)`` are synthesized on a grid refined ``refine`` times
    before the characteristic integration.
    """
    order = as_order(alpha)
    if order.alpha <= 1.0:
        q = None
    window = window or ObservationWindow.default(u.domain)
    v = auxiliary_field(u, order, p, q)
    lift = boundary_lift(data, order, p, q)
    obs = observe(v, window, offset=lift, stride=stride)
    init = recover_initial_data(obs, order, n_modes, mu)
    fine = refined_domain(u.domain, refine)
    a, b = init.on(fine)
    if b is None:
        f, g = a, GridFunction(fine, np.zeros_like(a.values))
    else:
        f, g = transport_invert(a, b, p, q)
    return ReductionResult(v, init, f, g)
