"""Self-check suite behind the ``verify`` subcommand.

Each check returns a named value, a threshold, the relation it must satisfy
and the margin (ratio of threshold to value for upper bounds, value to
threshold for lower bounds; above one means passing).  ``coarsen`` divides
every time resolution used by the checks, which is how the convergence
checks are shown to fail informatively on under-resolved runs.
"""
from __future__ import annotations

import contextlib
import math
import time

import numpy as np
from scipy.special import gamma as gamma_fn

from ..fraccalc import TimeGrid, TimeSeries, check_parts_identities, identity_table, mittag_leffler
from ..forward import BumpProfile, LinearMotion, ModalSource, Orbit, ProfileSum, SpectralField
from ..forward import decay_functional, extract_cauchy, solve_spectral
from ..fourier_recon import (
    XiGrid,
    backward_identity_residuals,
    compute_IT,
    data_functional,
    estimate_spectrum,
    flipped_boundary_sign,
)
from ..reduction import ObservationWindow, observe, recover_initial_data, reduce_and_recover, temporal_basis
from ..spectral import RectDomain

__all__ = ["verify_all"]


def _row(group: str, name: str, value: float, threshold: float, relation: str = "<") -> dict:
    value = float(value)
    if relation == "<":
        ok = value < threshold
        margin = threshold / value if value > 0 else math.inf
    else:
        ok = value >= threshold
        margin = value / threshold if threshold > 0 else math.inf
    return {"group": group, "check": name, "value": value, "relation": relation, "threshold": threshold,
            "margin": margin, "passed": bool(ok)}


def _steps(n: int, coarsen: int) -> int:
    return max(8, n // coarsen)


# ---------------------------------------------------------------- groups
def _special_functions() -> list[dict]:
    rng = np.random.default_rng(0)
    z = rng.uniform(0.0, 20.0, 100)
    rows = [
        _row("mlf", "E_{1,1}(-z) = exp(-z), 100 points",
             np.max(np.abs(mittag_leffler(1.0, 1.0, -z) - np.exp(-z))), 1e-10),
        _row("mlf", "E_{2,1}(-z^2) = cos z, 100 points",
             np.max(np.abs(mittag_leffler(2.0, 1.0, -(z / 4) ** 2) - np.cos(z / 4))), 1e-10),
    ]
    a = rng.uniform(0.1, 2.0, 100)
    b = rng.uniform(0.1, 3.0, 100)
    e0 = max(abs(float(mittag_leffler(ai, bi, 0.0)) - 1.0 / gamma_fn(bi)) for ai, bi in zip(a, b))
    rows.append(_row("mlf", "E_{a,b}(0) = 1/Gamma(b), 100 points", e0, 1e-10))
    return rows


def _operators(coarsen: int) -> list[dict]:
    rows = [_row("fraccalc", r["check"], r["residual"], r["tolerance"] * (1 + 1e-12))
            for r in identity_table(_steps(512, coarsen))]
    # observed order of the second parts identity for alpha = 1.5
    res = []
    for n in (_steps(256, coarsen), _steps(512, coarsen)):
        g = TimeGrid.uniform_grid(1.0, n)
        t = g.nodes
        res.append(check_parts_identities(1.5, TimeSeries(g, t**3), TimeSeries(g, t)).second)
    rows.append(_row("fraccalc", "observed order of parts identity 2 (alpha=1.5)",
                     math.log2(res[0] / res[1]), 1.8, ">="))
    return rows


def _forward(coarsen: int) -> list[dict]:
    d = RectDomain(1.0, 1.0, 8, 8)
    k = d.mode(1, 1).k
    lam = d.eigenvalues[k]
    rows = []
    grid = TimeGrid.uniform_grid(1.0, _steps(511, coarsen))
    for alpha in (0.7, 1.5):
        e = np.zeros(d.n_modes)
        e[k] = 1.0
        src = ModalSource(d, lambda t, a=alpha: (gamma_fn(3) / gamma_fn(3 - a) * t ** (2 - a) + lam * t * t) * e)
        u = solve_spectral(src, alpha, grid, d)
        ex = grid.nodes**2
        err = np.sqrt(np.trapezoid((u.coeffs[:, k] - ex) ** 2, grid.nodes) / np.trapezoid(ex**2, grid.nodes))
        rows.append(_row("forward", f"manufactured t^2 phi_11 (alpha={alpha})", err, 1e-4))
    return rows


def _pulse(t, T0=1.0):
    s = np.asarray(t, float) / T0
    out = np.zeros_like(s)
    on = (s > 0) & (s < 1)
    out[on] = np.exp(-1.0 / (s[on] * (1.0 - s[on])))
    return out


def _circle(t):
    t = np.asarray(t, float)
    return np.stack([0.1 * np.cos(2 * np.pi * t) - 0.1, 0.1 * np.sin(2 * np.pi * t)], axis=-1)


def _decay(coarsen: int) -> list[dict]:
    d = RectDomain(1.0, 1.0, 8, 8)
    orb = Orbit(BumpProfile((0.5, 0.5), 0.2), _circle, _pulse, 1.0)
    Ts = np.array([2.0, 4.0, 8.0, 16.0])
    rows = []
    n_quad = max(4, 64 // coarsen)
    for alpha in (0.5, 0.8, 1.2):
        u = SpectralField(d, TimeGrid.uniform_grid(1.0, 10), alpha, np.zeros((11, d.n_modes)), model=orb)
        vals = np.array([decay_functional(u, alpha, T, n_quad=n_quad) for T in Ts])
        slope = np.polyfit(np.log(Ts - 1.0), np.log(vals), 1)[0]
        rows.append(_row("decay", f"decay slope + alpha (alpha={alpha})", abs(slope + alpha), 0.15))
    return rows


def _backward() -> list[dict]:
    rows = []
    for alpha in (0.5, 1.5):
        res = backward_identity_residuals(alpha, 1.0, (1.0, 0.5))
        for name, val in res.items():
            rows.append(_row("backward", f"{name} (alpha={alpha})", val, 1e-4))
    return rows


def _duality(coarsen: int, flip: bool) -> list[dict]:
    f = BumpProfile((0.5, 0.5), 0.25)
    model = Orbit(f, _circle, _pulse, 1.0)
    d = RectDomain(1.0, 1.0, 16, 16)
    grid = TimeGrid.uniform_grid(0.5, _steps(512, coarsen))
    rng = np.random.default_rng(3)
    alphas = (0.7, 1.0, 1.5, 2.0)
    data = {a: extract_cauchy(solve_spectral(model, a, grid, d)) for a in alphas}
    r = 4.0 * np.sqrt(rng.uniform(size=20))
    th = rng.uniform(0, 2 * np.pi, 20)
    xi = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    ctx = flipped_boundary_sign() if flip else contextlib.nullcontext()
    res = []
    with ctx:
        for i, x in enumerate(xi):
            a = alphas[i % 4]
            src = f.fourier(x[None, :])[0] * compute_IT(x, model, a, 0.5, grid=grid)[0]
            res.append(abs(data_functional(data[a], a, 0.5, x)[0] - src) / abs(src))
        g = XiGrid.for_profile(f)
        zero = data[0.7]
        zero = type(zero)(zero.domain, zero.grid, zero.layout, 0 * zero.u_trace, 0 * zero.dnu_trace,
                          type(zero.final_snapshot)(zero.domain, 0 * zero.final_snapshot.values))
        est = estimate_spectrum(zero, model, 0.7, g)
    return [_row("duality", "max duality residual, 20 probes", max(res), 1e-3),
            _row("duality", "zero data gives zero spectrum", np.nanmax(np.abs(est.fhat)), 1e-12)]


def _reduction(coarsen: int) -> list[dict]:
    rows = []
    d = RectDomain(1.0, 1.0, 6, 6)
    grid = TimeGrid.uniform_grid(1.0, 64)
    for alpha in (0.7, 1.5):
        E1, _ = temporal_basis(alpha, d.eigenvalues, grid.nodes)
        v = SpectralField(d, grid, alpha, E1 * 0.0, zero_start=False)
        rec = recover_initial_data(observe(v, ObservationWindow.default(d)), alpha)
        worst = np.max(np.abs(rec.a_coeffs))
        if rec.b_coeffs is not None:
            worst = max(worst, np.max(np.abs(rec.b_coeffs)))
        rows.append(_row("reduction", f"zero observation gives zero data (alpha={alpha})", worst, 1e-10))
    # a small end-to-end recovery
    d = RectDomain(1.0, 1.0, 12, 12)
    f = ProfileSum((BumpProfile((0.42, 0.45), 0.3), BumpProfile((0.58, 0.55), 0.3, 0.8)))
    p = np.array([0.05, 0.0])
    u = solve_spectral(LinearMotion(f, p), 0.7, TimeGrid.uniform_grid(1.0, _steps(128, coarsen)), d)
    res = reduce_and_recover(u, extract_cauchy(u), 0.7, p, None, ObservationWindow(0.3), refine=2)
    X, Y = res.f.domain.mesh()
    ft = f(X, Y)
    rows.append(_row("reduction", "recovered f relative L2 error (alpha=0.7)",
                     np.linalg.norm(res.f.values - ft) / np.linalg.norm(ft), 0.05))
    return rows


def verify_all(coarsen: int = 1, flip_boundary_sign: bool = False) -> dict:
    """Run every self-check and aggregate pass/fail.

    Parameters
    ----------
    coarsen : int
        Divide the time resolution of every check by this factor.
    flip_boundary_sign : bool
        Run the duality checks with the flux sign flipped (mutation canary).

    Returns
    -------
    dict
        ``{"checks": [...], "timings": {...}, "passed": bool}``.
    """
    if coarsen < 1:
        raise ValueError("coarsen must be a positive integer")
    groups = [
        ("mlf", _special_functions),
        ("fraccalc", lambda: _operators(coarsen)),
        ("forward", lambda: _forward(coarsen)),
        ("decay", lambda: _decay(coarsen)),
        ("backward", _backward),
        ("duality", lambda: _duality(coarsen, flip_boundary_sign)),
        ("reduction", lambda: _reduction(coarsen)),
    ]
    checks, timings = [], {}
    for name, fn in groups:
        t0 = time.perf_counter()
        checks.extend(fn())
        timings[name] = round(time.perf_counter() - t0, 3)
    return {"coarsen": coarsen, "flip_boundary_sign": flip_boundary_sign, "checks": checks,
            "timings": timings, "passed": all(c["passed"] for c in checks)}
