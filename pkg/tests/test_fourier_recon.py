"""Tests for the spectral route: test functions, I_T, duality identity, estimation, inversion."""
import numpy as np
import pytest

from fracsource.fraccalc import TimeGrid
from fracsource.fraccalc.operators import classical_derivative, rl_integral
from fracsource.forward import BumpProfile, Orbit, decay_functional, extract_cauchy, solve_spectral
from fracsource.fourier_recon import (
    SpectrumEstimate,
    XiGrid,
    backward_identity_residuals,
    boundary_functional,
    compute_IT,
    data_functional,
    denominator_radius,
    estimate_spectrum,
    eval_test_function,
    flipped_boundary_sign,
    invert_spectrum,
    processed_IT,
    temporal_integral,
    wave_frequency,
)
from fracsource.spectral import RectDomain

ALPHAS = (0.7, 1.0, 1.5, 2.0)
T0 = 1.0
T_OBS = 0.5
PROFILE = BumpProfile((0.5, 0.5), 0.25)
# reference inversion settings
RADIUS, TAPER, MU = 0.35, 15.0, 1e-8


def pulse(t, scale=1.0):
    s = np.asarray(t, float) / T0
    out = np.zeros_like(s)
    inside = (s > 0) & (s < 1)
    out[inside] = np.exp(-1.0 / (s[inside] * (1.0 - s[inside])))
    return scale * out


def circle(t):
    t = np.asarray(t, float)
    return np.stack([0.1 * np.cos(2 * np.pi * t) - 0.1, 0.1 * np.sin(2 * np.pi * t)], axis=-1)


def orbit(scale=1.0, profile=PROFILE):
    return Orbit(profile, circle, lambda t: pulse(t, scale), T0)


MODEL = orbit()
OUT = RectDomain(1.0, 1.0, 16, 16, 63, 63)


@pytest.fixture(scope="module")
def runs():
    """Reference forward runs observed inside the active window (N=16, 512 steps)."""
    d = RectDomain(1.0, 1.0, 16, 16)
    out = {}
    for a in ALPHAS:
        grid = TimeGrid.uniform_grid(T_OBS, 512)
        out[a] = extract_cauchy(solve_spectral(MODEL, a, grid, d))
    return out


@pytest.fixture(scope="module")
def xigrid():
    return XiGrid.for_profile(PROFILE)


def truth_spectrum(xi):
    return PROFILE.fourier(np.atleast_2d(xi)) / (2 * np.pi)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


# ---------------------------------------------------------------- grids and test functions
def test_xigrid_structure(xigrid):
    xi = xigrid.samples
    assert xi.shape == (289, 2)
    assert np.allclose(xi[xigrid.zero_index], 0.0)
    assert np.allclose(xi[xigrid.negation_index], -xi)
    rim = abs(PROFILE.fourier(np.array([[xigrid.xi_max, 0.0]]))[0])
    peak = abs(PROFILE.fourier(np.zeros((1, 2)))[0])
    assert 0.0099 * peak <= rim <= 0.02 * peak


def test_xigrid_rejects_even_size():
    with pytest.raises(ValueError):
        XiGrid(3.0, 16)


def test_test_function_trivial_cases():
    x = np.random.default_rng(0).uniform(0, 1, (7, 2))
    t = np.linspace(0.0, 0.9, 5)
    assert np.allclose(eval_test_function(1.0, 1.0, t, x, (0.0, 0.0)), 1.0, atol=1e-14)
    xi = np.array([1.3, -0.4])
    assert np.allclose(eval_test_function(2.0, 1.0, 0.0, x, xi)[0], np.exp(-1j * x @ xi), atol=1e-14)


def test_test_function_singularity_and_horizon():
    x = np.zeros((1, 2))
    with pytest.raises(ValueError, match="singular"):
        eval_test_function(0.6, 1.0, 1.0, x, (1.0, 0.0))
    with pytest.raises(ValueError):
        eval_test_function(1.5, 1.0, 1.2, x, (1.0, 0.0))
    # alpha >= 1 is finite at t = T
    assert np.isfinite(eval_test_function(1.5, 1.0, 1.0, x, (1.0, 0.0))).all()
    assert np.isfinite(eval_test_function(2.0, 1.0, 1.0, x, (1.0, 0.0))).all()


def test_wave_frequency_is_odd():
    xi = np.random.default_rng(1).normal(size=(20, 2))
    xi[0] = (0.0, 1.0)
    w = wave_frequency(xi)
    assert np.allclose(wave_frequency(-xi), -w)
    assert np.allclose(np.abs(w), np.hypot(*xi.T))


@pytest.mark.parametrize("alpha", [0.3, 0.7, 1.0, 1.3, 1.7])
@pytest.mark.parametrize("xi", [(0.0, 0.0), (1.0, 0.5), (4.0, 3.0)])
def test_backward_identities(alpha, xi):
    res = backward_identity_residuals(alpha, 1.0, xi)
    for name, value in res.items():
        assert value < 1e-4, (name, value)
    if alpha > 1:
        assert "D_alpha_minus_1_at_T" in res


# ---------------------------------------------------------------- I_T and its processed values
def test_IT_alpha1_zero_frequency_is_integral_of_h():
    T = 2.0
    IT = compute_IT((0.0, 0.0), MODEL, 1.0, T)[0]
    assert abs(IT - temporal_integral(MODEL)) < 1e-8 * abs(temporal_integral(MODEL))
    assert abs(IT.imag) < 1e-15


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_processed_IT_zero_frequency(alpha):
    model = orbit(scale=1.0 / temporal_integral(orbit()))  # int h = 1
    assert abs(temporal_integral(model) - 1.0) < 1e-12
    for T in (2.0, 6.0):
        assert abs(processed_IT((0.0, 0.0), model, alpha, T)[0] - 1.0) < 1e-6


@pytest.mark.parametrize("alpha", [0.5, 1.5])
def test_processed_IT_matches_fractional_calculus_of_history(alpha):
    """J^(1-alpha) or d^(alpha-1) applied in T to the I_T(0) history."""
    model = orbit(scale=1.0 / temporal_integral(orbit()))
    grid = TimeGrid.uniform_grid(3.0, 192)
    t = grid.nodes
    hist = np.array([compute_IT((0.0, 0.0), model, alpha, tj, grid=grid)[0].real for tj in t[1:]])
    hist = np.concatenate([[0.0], hist])
    if alpha < 1:
        proc = rl_integral(1.0 - alpha, t, hist)
    else:
        proc = classical_derivative(t, rl_integral(2.0 - alpha, t, hist), 1)
    assert abs(proc[-1] - 1.0) < 2e-3
    assert abs(proc[-1] - processed_IT((0.0, 0.0), model, alpha, 3.0)[0]) < 2e-3


def test_processed_IT_alpha2_is_plain():
    xi = np.array([[0.7, -0.2]])
    assert np.allclose(processed_IT(xi, MODEL, 2.0, 1.5), compute_IT(xi, MODEL, 2.0, 1.5))


@pytest.mark.parametrize("alpha", [0.7, 1.5])
def test_denominator_radius(alpha):
    T = 2.0
    eps = denominator_radius(MODEL, alpha, T)
    assert eps > 0.5
    H = abs(temporal_integral(MODEL))
    rng = np.random.default_rng(2)
    r = eps * np.sqrt(rng.uniform(size=50))
    th = rng.uniform(0, 2 * np.pi, 50)
    xi = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    assert np.all(np.abs(processed_IT(xi, MODEL, alpha, T)) >= 0.5 * H * (1 - 1e-3))


# ---------------------------------------------------------------- duality identity
def _probes(n=20, seed=3):
    rng = np.random.default_rng(seed)
    r = 4.0 * np.sqrt(rng.uniform(size=n))
    th = rng.uniform(0, 2 * np.pi, n)
    xi = np.stack([r * np.cos(th), r * np.sin(th)], axis=1)
    alphas = [ALPHAS[i % 4] for i in range(n)]
    return xi, alphas


def _duality_residuals(runs):
    xi, alphas = _probes()
    out = []
    for x, a in zip(xi, alphas):
        data = runs[a]
        source = PROFILE.fourier(x[None, :])[0] * compute_IT(x, MODEL, a, T_OBS, grid=data.grid)[0]
        out.append(abs(data_functional(data, a, T_OBS, x)[0] - source) / abs(source))
    return np.array(out)


def test_duality_identity(runs):
    res = _duality_residuals(runs)
    assert res.max() < 1e-3, res


def test_duality_mutation_canary(runs):
    with flipped_boundary_sign():
        res = _duality_residuals(runs)
    assert res.max() > 1e-2
    assert _duality_residuals(runs).max() < 1e-3  # restored on exit


def test_data_functional_of_zero_field(runs):
    data = runs[1.0]
    zero = type(data)(data.domain, data.grid, data.layout, 0 * data.u_trace, 0 * data.dnu_trace,
                      data.final_snapshot.__class__(data.domain, 0 * data.final_snapshot.values))
    assert np.all(data_functional(zero, 1.0, xi=(1.0, 2.0)) == 0)


def test_data_functional_argument_checks(runs):
    data = runs[2.0]
    with pytest.raises(ValueError, match="final time"):
        data_functional(data, 2.0, T=0.25, xi=(1.0, 0.0))
    no_vel = type(data)(data.domain, data.grid, data.layout, data.u_trace, data.dnu_trace,
                        data.final_snapshot, None)
    with pytest.raises(ValueError, match="velocity"):
        data_functional(no_vel, 2.0, xi=(1.0, 0.0))
    no_snap = type(data)(data.domain, data.grid, data.layout, data.u_trace, data.dnu_trace)
    with pytest.raises(ValueError, match="snapshot"):
        data_functional(no_snap, 1.0, xi=(1.0, 0.0))


# ---------------------------------------------------------------- estimation
@pytest.mark.parametrize("alpha", ALPHAS)
def test_finite_T_estimate_accuracy(runs, xigrid, alpha):
    est = estimate_spectrum(runs[alpha], MODEL, alpha, xigrid)
    v = est.valid_mask
    assert v.sum() >= 100
    assert rel(est.fhat[v], truth_spectrum(xigrid.samples)[v]) < 1e-2
    assert np.all(np.isnan(est.fhat[~v]))
    assert est.conjugate_asymmetry() < 1e-10


def test_zero_data_gives_zero_spectrum(runs, xigrid):
    data = runs[0.7]
    snap = data.final_snapshot
    zero = type(data)(data.domain, data.grid, data.layout, 0 * data.u_trace, 0 * data.dnu_trace,
                      snap.__class__(data.domain, 0 * snap.values))
    est = estimate_spectrum(zero, MODEL, 0.7, xigrid)
    assert np.nanmax(np.abs(est.fhat)) < 1e-12
    rec = invert_spectrum(est, RADIUS, TAPER, MU, OUT)
    assert np.max(np.abs(rec.values)) == 0.0


def test_estimate_rejects_vanishing_temporal_integral(runs, xigrid):
    odd = Orbit(PROFILE, circle, lambda t: pulse(2 * np.asarray(t)) - pulse(2 * np.asarray(t) - 1), T0)
    with pytest.raises(ValueError, match="not identifiable"):
        estimate_spectrum(runs[1.0], odd, 1.0, xigrid)


def test_estimate_all_masked_and_mode_errors(runs, xigrid):
    with pytest.raises(ValueError, match="masked"):
        estimate_spectrum(runs[1.0], MODEL, 1.0, xigrid, eps_div=1e6)
    with pytest.raises(ValueError, match="mode"):
        estimate_spectrum(runs[1.0], MODEL, 1.0, xigrid, mode="bogus")
    with pytest.raises(ValueError, match="final time"):
        estimate_spectrum(runs[1.0], MODEL, 1.0, xigrid, T=0.25)


def test_masking_threshold_excludes_small_denominators(runs, xigrid):
    est = estimate_spectrum(runs[1.0], MODEL, 1.0, xigrid)
    H = abs(temporal_integral(MODEL))
    assert est.eps_div == pytest.approx(1e-3 * H)
    assert np.all(np.abs(est.denom[~est.valid_mask]) < est.eps_div)
    assert np.all(np.abs(est.denom[est.valid_mask]) >= est.eps_div)


@pytest.mark.parametrize("alpha", [0.5, 0.8, 1.2])
def test_boundary_only_estimate_decays_at_zero_frequency(alpha):
    """At xi = 0 the error is the neglected volume term; it decays at the rate of decay_functional."""
    d = RectDomain(1.0, 1.0, 24, 24)
    g = XiGrid(1.0, 3)
    target = truth_spectrum(np.zeros(2))[0]
    Ts = np.array([2.0, 4.0, 8.0, 16.0])
    errs, decay = [], []
    for T in Ts:
        grid = TimeGrid.uniform_grid(T, int(48 * T))
        field = solve_spectral(MODEL, alpha, grid, d)
        est = estimate_spectrum(extract_cauchy(field), MODEL, alpha, g, mode="large_T_boundary_only")
        errs.append(abs(est.fhat[g.zero_index] - target) / abs(target))
        decay.append(decay_functional(field))
    assert np.all(np.diff(errs) < 0)
    slope = np.polyfit(np.log(Ts - T0), np.log(errs), 1)[0]
    rate = np.polyfit(np.log(Ts - T0), np.log(decay), 1)[0]
    assert abs(slope - rate) < 0.1, (slope, rate)


def test_wave_final_term_does_not_decay():
    """For alpha = 2 on a bounded domain the final-time term keeps its size."""
    d = RectDomain(1.0, 1.0, 12, 12)
    xi = np.array([[1.0, 0.5]])
    mags = []
    for T in (2.0, 4.0, 8.0, 16.0):
        grid = TimeGrid.uniform_grid(T, int(48 * T))
        data = extract_cauchy(solve_spectral(MODEL, 2.0, grid, d))
        volume = data_functional(data, 2.0, xi=xi) - boundary_functional(data, 2.0, xi)[-1]
        mags.append(abs(volume[0]))
    assert mags[-1] > 0.5 * max(mags)


# ---------------------------------------------------------------- inversion
def exact_estimate(grid):
    xi = grid.samples
    return SpectrumEstimate(grid, truth_spectrum(xi), np.ones(len(xi), bool), np.ones(len(xi)), OUT)


def test_invert_exact_samples(xigrid):
    X, Y = OUT.mesh()
    truth = PROFILE(X, Y)
    rec = invert_spectrum(exact_estimate(xigrid), RADIUS, TAPER, MU)
    assert rel(rec.values, truth) < 5e-2


def test_invert_graceful_under_high_frequency_masking(xigrid):
    X, Y = OUT.mesh()
    truth = PROFILE(X, Y)
    est = exact_estimate(xigrid)
    base = rel(invert_spectrum(est, RADIUS, TAPER, MU).values, truth)
    keep = np.hypot(*xigrid.samples.T) <= 0.8 * xigrid.xi_max
    fh = np.where(keep, est.fhat, np.nan)
    masked = SpectrumEstimate(xigrid, fh, keep, est.denom, OUT)
    err = rel(invert_spectrum(masked, RADIUS, TAPER, MU).values, truth)
    assert err < 2 * base


def test_invert_argument_checks(xigrid):
    est = exact_estimate(xigrid)
    with pytest.raises(ValueError, match="not feasible"):
        invert_spectrum(est, 0.6, TAPER, MU)
    with pytest.raises(ValueError):
        invert_spectrum(est, RADIUS, TAPER, -1.0)
    with pytest.raises(ValueError, match="not feasible"):
        invert_spectrum(est, 0.3, TAPER, MU, center=(0.2, 0.5))


@pytest.mark.parametrize("alpha", ALPHAS)
def test_pipeline_noiseless(runs, xigrid, alpha):
    X, Y = OUT.mesh()
    est = estimate_spectrum(runs[alpha], MODEL, alpha, xigrid)
    rec = invert_spectrum(est, RADIUS, TAPER, MU, OUT)
    assert rel(rec.values, PROFILE(X, Y)) < 5e-2


@pytest.mark.parametrize("alpha", [0.7, 2.0])
def test_pipeline_noisy(runs, xigrid, alpha):
    data = runs[alpha]
    rng = np.random.default_rng(7)
    tr = data.dnu_trace
    noisy = data.with_traces(tr + 0.01 * np.sqrt(np.mean(tr**2)) * rng.standard_normal(tr.shape))
    est = estimate_spectrum(noisy, MODEL, alpha, xigrid)
    X, Y = OUT.mesh()
    errs = [rel(invert_spectrum(est, RADIUS, TAPER, mu, OUT).values, PROFILE(X, Y)) for mu in (1e-8, 1e-6)]
    assert min(errs) < 0.15
