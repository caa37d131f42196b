import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lorentzlab import harmonics as sph
from lorentzlab.errors import PoleError


# --------------------------------------------------------------------------
# Gamma machinery
# --------------------------------------------------------------------------

def test_gamma_half():
    assert_allclose(math.exp(sph.log_gamma(0.5)), math.sqrt(math.pi),
                    rtol=1e-14)


def test_log_gamma_against_mpmath():
    import mpmath
    for x in (0.1, 0.7, 1.0, 2.5, 17.3, 250.0, 4000.0):
        want = float(mpmath.log(mpmath.gamma(x)))
        got = sph.log_gamma(x)
        assert abs(got - want) <= 1e-13 * max(1.0, abs(want))


def test_log_gamma_pole():
    with pytest.raises(PoleError):
        sph.log_gamma(0.0)
    with pytest.raises(PoleError):
        sph.log_gamma(-1.5)


def test_pochhammer_values():
    assert sph.pochhammer(-2.3, 0) == 1.0
    assert_allclose(sph.pochhammer(3, 4), 360.0, rtol=1e-13)
    import mpmath
    for a in (-3.5, -1.0, 0.25, 2.0, 11.5):
        for m in (1, 2, 5, 9):
            want = float(mpmath.rf(a, m))
            assert_allclose(sph.pochhammer(a, m), want,
                            rtol=1e-12, atol=1e-12)


def test_pochhammer_hits_zero():
    assert sph.pochhammer(-2.0, 4) == 0.0


# --------------------------------------------------------------------------
# terminating 2F1
# --------------------------------------------------------------------------

def test_2f1_at_zero():
    assert sph.gauss_2f1_terminating(-4, 0.3, 1.7, 0.0) == 1.0


def test_2f1_two_term():
    for b, c, x in ((-0.5, 1.0, 0.3), (2.0, 0.7, -1.2)):
        got = sph.gauss_2f1_terminating(-1, b, c, x)
        assert_allclose(got, 1.0 - b * x / c, rtol=1e-14)


def test_2f1_tan_identity():
    xi = 0.6
    got = sph.gauss_2f1_terminating(-1, -0.5, 1.0, -math.tan(xi) ** 2)
    assert_allclose(got, 1.0 - math.tan(xi) ** 2 / 2.0, rtol=1e-14)


def test_2f1_pole_error():
    with pytest.raises(PoleError):
        sph.gauss_2f1_terminating(-5, 0.3, -2.0, 0.5)


def test_2f1_requires_termination():
    with pytest.raises(ValueError):
        sph.gauss_2f1_terminating(0.5, 0.3, 1.0, 0.2)


# --------------------------------------------------------------------------
# zonal polynomials
# --------------------------------------------------------------------------

def test_phi_normalization():
    for n in (2, 3, 4, 7):
        for m in (0, 1, 2, 5, 12):
            assert_allclose(sph.phi_poly(n, m, 1.0), 1.0, atol=1e-12)


def test_phi_degree_one_is_x():
    x = np.linspace(-1, 1, 11)
    for n in (2, 3, 6):
        assert_allclose(sph.phi_poly(n, 1, x), x, atol=1e-14)


def test_phi_32_is_legendre():
    x = np.linspace(-1, 1, 21)
    assert_allclose(sph.phi_poly(3, 2, x), (3 * x * x - 1) / 2, atol=1e-14)


def test_phi_is_polynomial_of_degree_m():
    # evaluating at m+2 Chebyshev nodes and interpolating reproduces all
    # sample values
    n, m = 4, 9
    nodes = np.cos(np.pi * np.arange(m + 2) / (m + 1))
    vals = sph.phi_poly(n, m, nodes)
    coef = np.polynomial.polynomial.polyfit(nodes, vals, m)
    dense = np.linspace(-1, 1, 101)
    assert_allclose(np.polynomial.polynomial.polyval(dense, coef),
                    sph.phi_poly(n, m, dense), atol=1e-10)


def test_phi_domain_error():
    with pytest.raises(ValueError):
        sph.phi_poly(3, 2, 1.5)


def test_phi_matches_zonal_harmonic():
    # phi_2^3(x_1) spans the (m=2, l=0) sector of the S^2 basis
    model = sph.get_sphere_model(3, 4)
    vals = sph.phi_poly(3, 2, model.quad.nodes[:, 0])
    f = sph.SphericalFunction.from_samples(model, vals)
    l0 = dict(model.block_slices(2))[0]
    inside = np.linalg.norm(f.coeffs[2][l0])
    total = math.sqrt(sum(float(c @ c) for c in f.coeffs.values()))
    assert inside >= (1 - 1e-12) * total


# --------------------------------------------------------------------------
# quadrature
# --------------------------------------------------------------------------

def test_quadrature_normalization():
    for n in (2, 3, 4):
        q = sph.sphere_quadrature(n, 12)
        assert_allclose(math.fsum(q.weights), 1.0, atol=1e-13)
        assert np.all(q.weights > 0)
        assert_allclose(sph.integrate(np.ones(len(q.weights)), q), 1.0,
                        atol=1e-13)


def test_quadrature_x_squared():
    for n in (2, 3, 5):
        q = sph.sphere_quadrature(n, 8)
        for i in range(n):
            assert_allclose(sph.integrate(q.nodes[:, i] ** 2, q), 1.0 / n,
                            atol=1e-13)


def test_quadrature_exactness_exhaustive():
    # all monomials up to the rule degree
    for n, d in ((2, 9), (3, 7), (4, 5)):
        q = sph.sphere_quadrature(n, d)

        def rec(prefix, rem, k):
            if k == 1:
                for a in range(rem + 1):
                    yield prefix + (a,)
                return
            for a in range(rem + 1):
                yield from rec(prefix + (a,), rem - a, k - 1)

        for alpha in rec((), d, n):
            got = sph.integrate(np.prod(q.nodes ** np.asarray(alpha), axis=1), q)
            assert abs(got - sph.sphere_monomial_integral(n, alpha)) <= 1e-12


def test_quadrature_harmonic_orthogonality():
    model = sph.get_sphere_model(3, 3)
    v2 = model.node_values(2)
    v3 = model.node_values(3)
    w = model.quad.weights
    cross = v2.T @ (w[:, None] * v3)
    assert np.abs(cross).max() <= 1e-12
    gram = v3.T @ (w[:, None] * v3)
    assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-12


# --------------------------------------------------------------------------
# harmonic bases
# --------------------------------------------------------------------------

def test_harmonic_dims():
    assert all(sph.harmonic_dim(2, m) == 2 for m in range(1, 6))
    assert sph.harmonic_dim(2, 0) == 1
    assert sph.harmonic_dim(3, 2) == 5


def test_harmonic_dim_matches_laplacian_nullspace():
    # brute-force oracle: flat Laplacian on degree-2 monomials in 3 vars
    monos = [(2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]
    lap = np.zeros((3, 6))   # image lives in degree-0: constants only
    for j, a in enumerate(monos):
        for i in range(3):
            if a[i] >= 2:
                lap[0, j] += a[i] * (a[i] - 1)
    rank = np.linalg.matrix_rank(lap)
    assert 6 - rank == 5 == sph.harmonic_dim(3, 2)


def test_basis_gram_identity():
    for n, mm in ((2, 10), (3, 8), (4, 6)):
        model = sph.get_sphere_model(n, mm)
        w = model.quad.weights
        allv = np.concatenate([model.node_values(m) for m in model.degrees],
                              axis=1)
        g = allv.T @ (w[:, None] * allv)
        assert np.abs(g - np.eye(g.shape[0])).max() <= 1e-10


def test_basis_elements_are_harmonic_polynomials():
    # flat-Laplacian membership, checked ambiently by finite differences
    rng = np.random.default_rng(42)
    for n, m in ((3, 5), (4, 4)):
        model = sph.get_sphere_model(n, m)
        pts = rng.normal(size=(20, n)) * 0.4
        h = 1e-3
        acc = np.zeros((20, model.dim(m)))
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            acc += (model.basis_values(m, pts + e)
                    - 2 * model.basis_values(m, pts)
                    + model.basis_values(m, pts - e)) / h ** 2
        scale = np.abs(model.basis_values(m, pts)).max() * m * m
        assert np.abs(acc).max() <= 1e-4 * max(scale, 1.0)


def test_basis_elements_are_laplace_eigenfunctions():
    # finite-difference sphere Laplacian via the rotation Casimir:
    # sum of second derivatives along all Theta_ij rotations
    from scipy.linalg import expm
    from lorentzlab import liealg as la
    n, m = 3, 4
    model = sph.get_sphere_model(n, m)
    gens = la.generators(n)
    pts = model.quad.nodes
    c = np.zeros(model.dim(m))
    c[1] = 1.0
    f = sph.SphericalFunction.from_coeffs(model, {m: c})
    h = 1e-3
    acc = np.zeros(len(pts))
    for th in gens.thetas.values():
        R = expm(h * th.mat)[:n, :n]
        Rm = expm(-h * th.mat)[:n, :n]
        acc += (f.evaluate(pts @ R.T) - 2 * f.samples
                + f.evaluate(pts @ Rm.T)) / h ** 2
    want = -m * (m + n - 2)
    got = sph.integrate(acc * f.samples, model.quad)
    assert abs(got - want) <= 5e-3 * abs(want)


# --------------------------------------------------------------------------
# spherical functions: Parseval, synthesis
# --------------------------------------------------------------------------

def test_parseval_band_limited():
    rng = np.random.default_rng(10)
    model = sph.get_sphere_model(3, 10)
    coeffs = {m: rng.normal(size=model.dim(m)) for m in range(11)}
    f = sph.SphericalFunction.from_coeffs(model, coeffs)
    par = math.fsum(float(c @ c) for c in f.coeffs.values())
    l2 = sph.integrate(f.samples ** 2, model.quad)
    assert abs(par - l2) <= 1e-9 * max(1.0, l2)


def test_synthesis_analysis_roundtrip():
    rng = np.random.default_rng(11)
    model = sph.get_sphere_model(4, 6)
    coeffs = {m: rng.normal(size=model.dim(m)) for m in range(7)}
    f = sph.SphericalFunction.from_coeffs(model, coeffs)
    f2 = sph.SphericalFunction.from_samples(model, f.samples)
    for m in coeffs:
        assert_allclose(f2.coeffs[m], coeffs[m], atol=1e-9)
    assert f2.leakage <= 1e-9


# --------------------------------------------------------------------------
# restriction
# --------------------------------------------------------------------------

def test_restrict_constant():
    model = sph.get_sphere_model(3, 6)
    one = sph.SphericalFunction.from_samples(
        model, np.ones(len(model.quad.weights)))
    r = sph.restrict(one)
    assert np.abs(r.samples - 1.0).max() <= 1e-10


def test_restrict_kills_x1_multiples():
    # the (m=1, l=0) basis element is proportional to x_1
    model = sph.get_sphere_model(3, 6)
    c = np.zeros(model.dim(1))
    c[0] = 1.0   # l=0 sector of degree 1
    f = sph.SphericalFunction.from_coeffs(model, {1: c})
    corr = np.corrcoef(f.samples, model.quad.nodes[:, 0])[0, 1]
    assert abs(abs(corr) - 1.0) <= 1e-12
    r = sph.restrict(f)
    assert max(np.abs(v).max() for v in r.coeffs.values()) <= 1e-12


def test_restrict_parity():
    rng = np.random.default_rng(12)
    model = sph.get_sphere_model(3, 8)
    for m in (4, 5):
        f = sph.SphericalFunction.from_coeffs(
            model, {m: rng.normal(size=model.dim(m))})
        r = sph.restrict(f)
        for l, c in r.coeffs.items():
            if (m - l) % 2 == 1:
                assert np.abs(c).max() <= 1e-10


# --------------------------------------------------------------------------
# embedding V_l -> W_m
# --------------------------------------------------------------------------

def test_embed_l_equals_m():
    rng = np.random.default_rng(13)
    model = sph.get_sphere_model(3, 6)
    sub = model.submodel
    h = sph.SphericalFunction.from_coeffs(
        sub, {3: rng.normal(size=sub.dim(3))})
    e = sph.embed_vtilde(h, 3, model)
    # phi_0 = 1: the embedded function restricted to the equator equals h
    r = sph.restrict(e)
    assert_allclose(r.coeffs[3], h.coeffs[3], atol=1e-10)


def test_embed_zonal_sector():
    model = sph.get_sphere_model(3, 6)
    sub = model.submodel
    h = sph.SphericalFunction.from_samples(
        sub, np.ones(len(sub.quad.weights)))
    e = sph.embed_vtilde(h, 2, model)
    assert e.leakage <= 1e-8
    # image sits in the l=0 sector of W_2 (the zonal-in-x1 harmonic)
    l0 = dict(model.block_slices(2))[0]
    total = math.sqrt(float(e.coeffs[2] @ e.coeffs[2]))
    inside = np.linalg.norm(e.coeffs[2][l0])
    assert inside >= (1 - 1e-10) * total


def test_embed_membership_and_schur_constant():
    rng = np.random.default_rng(14)
    for n in (3, 4):
        model = sph.get_sphere_model(n, 8)
        sub = model.submodel
        for (l, m) in ((1, 5), (2, 6), (0, 4)):
            h = sph.SphericalFunction.from_coeffs(
                sub, {l: rng.normal(size=sub.dim(l))})
            e = sph.embed_vtilde(h, m, model)
            assert e.leakage <= 1e-8
            r = sph.restrict(e)
            ratio = r.coeffs[l] / h.coeffs[l]
            # restrict . embed is a Schur scalar on each V_l
            assert np.abs(ratio - ratio.mean()).max() <= 1e-8 * (
                1.0 + abs(ratio.mean()))


def test_embed_parity_violation():
    model = sph.get_sphere_model(3, 6)
    sub = model.submodel
    h = sph.SphericalFunction.from_coeffs(sub, {2: np.ones(sub.dim(2))})
    with pytest.raises(ValueError):
        sph.embed_vtilde(h, 5, model)
