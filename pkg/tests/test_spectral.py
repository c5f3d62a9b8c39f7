import numpy as np
import pytest

from fracsource.spectral import (
    CoeffVector,
    GridFunction,
    RectDomain,
    eigenpair,
    frac_power_norm,
    gradient,
    project,
    synthesize,
)

PI2 = np.pi**2


@pytest.fixture
def square():
    return RectDomain(1.0, 1.0, 8, 8)


def test_eigenvalue_examples(square):
    assert eigenpair(square, (1, 1))[0] == pytest.approx(2 * PI2, rel=1e-14)
    assert eigenpair(square, (2, 1))[0] == pytest.approx(5 * PI2, rel=1e-14)
    assert eigenpair(RectDomain(2.0, 1.0, 3, 3), (1, 1))[0] == pytest.approx(1.25 * PI2, rel=1e-14)


def test_flat_ordering(square):
    lam = square.eigenvalues
    assert np.all(np.diff(lam) >= 0)
    assert lam[0] == pytest.approx(PI2 * 2)
    # (1,2) and (2,1) tie; lexicographic order puts (1,2) first
    assert (square.mode_at(1).m, square.mode_at(1).n) == (1, 2)
    assert (square.mode_at(2).m, square.mode_at(2).n) == (2, 1)
    for k in range(square.n_modes):
        md = square.mode_at(k)
        assert square.mode(md.m, md.n).k == k


def test_mode_errors(square):
    with pytest.raises(IndexError):
        square.mode(9, 1)
    with pytest.raises(IndexError):
        square.mode_at(64)


def test_resolution_invariant():
    with pytest.raises(ValueError):
        RectDomain(1.0, 1.0, 8, 8, M1=15, M2=16)
    with pytest.raises(ValueError):
        RectDomain(0.0, 1.0, 2, 2)


def test_eigenfunction_has_unit_norm(square):
    _, phi = eigenpair(square, (3, 2))
    assert phi.l2_norm() == pytest.approx(1.0, rel=1e-13)


def test_project_eigenfunction_is_unit_vector(square):
    md = square.mode(1, 1)
    _, phi = eigenpair(square, md)
    c = project(phi).coeffs
    e = np.zeros(square.n_modes)
    e[md.k] = 1.0
    np.testing.assert_allclose(c, e, atol=1e-13)


def test_synthesize_zero(square):
    assert np.all(synthesize(CoeffVector.zeros(square)).values == 0)


@pytest.mark.parametrize("dom", [RectDomain(1.0, 1.0, 8, 8), RectDomain(2.0, 1.3, 6, 9, 20, 25)])
def test_round_trip(dom):
    rng = np.random.default_rng(0)
    c = rng.normal(size=dom.n_modes)
    back = project(synthesize(CoeffVector(dom, c))).coeffs
    assert np.max(np.abs(back - c)) < 1e-12
    cz = c + 1j * rng.normal(size=dom.n_modes)
    back = project(synthesize(CoeffVector(dom, cz))).coeffs
    assert np.max(np.abs(back - cz)) < 1e-12


def test_parseval():
    dom = RectDomain(1.5, 1.0, 7, 5, 16, 12)
    c = np.random.default_rng(1).normal(size=dom.n_modes)
    h = synthesize(CoeffVector(dom, c))
    assert h.l2_norm() == pytest.approx(np.linalg.norm(c), rel=1e-10)


def test_frac_power_norm_examples(square):
    e11 = CoeffVector.unit(square, square.mode(1, 1))
    assert frac_power_norm(e11, 1.0) == pytest.approx(2 * PI2, rel=1e-14)
    c = np.random.default_rng(2).normal(size=square.n_modes)
    assert frac_power_norm(CoeffVector(square, c), 0.0) == pytest.approx(np.linalg.norm(c))
    two = np.zeros(square.n_modes)
    two[square.mode(1, 1).k] = 1.0
    two[square.mode(2, 1).k] = 1.0
    assert frac_power_norm(CoeffVector(square, two), 0.5) == pytest.approx(np.sqrt(7 * PI2), rel=1e-14)
    with pytest.raises(ValueError):
        frac_power_norm(e11, -1.5)


def test_frac_power_norm_monotone(square):
    c = CoeffVector(square, np.ones(square.n_modes))
    vals = [frac_power_norm(c, g) for g in np.linspace(-1, 2, 13)]
    assert np.all(np.diff(vals) > 0)


def test_gradient_of_first_mode(square):
    _, phi = eigenpair(square, (1, 1))
    gx, gy = gradient(phi)
    X, Y = square.mesh()
    np.testing.assert_allclose(gx.values, 2 * np.pi * np.cos(np.pi * X) * np.sin(np.pi * Y), atol=1e-12)
    np.testing.assert_allclose(gy.values, 2 * np.pi * np.sin(np.pi * X) * np.cos(np.pi * Y), atol=1e-12)


def test_gradient_of_zero(square):
    gx, gy = gradient(GridFunction(square, np.zeros((16, 16))))
    assert not gx.values.any() and not gy.values.any()


def test_gradient_matches_finite_differences():
    errs = []
    for M in [32, 64]:
        dom = RectDomain(1.0, 1.0, 4, 4, M, M)
        c = np.random.default_rng(3).normal(size=dom.n_modes)
        h = synthesize(CoeffVector(dom, c))
        gx, _ = gradient(h)
        fd = np.gradient(h.values, dom.dx, axis=0)
        errs.append(np.max(np.abs(gx.values - fd)[1:-1, :]))
    assert errs[0] / errs[1] > 3.5


def test_evaluate_scattered(square):
    c = np.random.default_rng(4).normal(size=square.n_modes)
    X, Y = square.mesh()
    vals = square.evaluate(c, X.ravel(), Y.ravel()).reshape(X.shape)
    np.testing.assert_allclose(vals, square.synthesize_values(c), atol=1e-12)
