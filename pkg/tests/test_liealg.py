import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.linalg import expm

from lorentzlab import liealg as la
from lorentzlab.errors import (BranchCutError, DimensionMismatchError,
                               InvalidDimensionError, MembershipError)


def random_alg(n, rng, scale=1.0):
    return la.random_algebra_element(n, rng, scale)


# --------------------------------------------------------------------------
# generators
# --------------------------------------------------------------------------

def test_generator_membership_exact():
    for n in (2, 3, 4, 5):
        gens = la.generators(n)
        J = la.lorentz_form(n)
        for g in list(gens.basis) + [gens.U, gens.Ut]:
            assert np.array_equal(J @ g.mat.T @ J, -g.mat)
            assert np.trace(g.mat) == 0.0


def test_explicit_u_matrices_are_integer():
    gens = la.generators(3)
    assert np.array_equal(gens.U.mat, np.array([
        [0, 0, 0, 0], [0, 0, 1, 1], [0, -1, 0, 0], [0, 1, 0, 0]],
        dtype=float))
    assert np.array_equal(gens.Ut.mat, np.array([
        [0, 0, 0, 0], [0, 0, -1, 1], [0, 1, 0, 0], [0, 1, 0, 0]],
        dtype=float))


def test_bracket_yn_u_exact():
    # [Y_n, U] = -U entrywise exactly, integer arithmetic
    for n in (2, 3, 5):
        gens = la.generators(n)
        assert np.array_equal(la.bracket(gens.Yn, gens.U).mat, -gens.U.mat)
        assert np.array_equal(la.bracket(gens.Yn, gens.Ut).mat, gens.Ut.mat)


def test_bracket_self_is_zero():
    gens = la.generators(4)
    for y in gens.ys:
        assert np.abs(la.bracket(y, y).mat).max() == 0.0


def test_u_ut_brackets_to_yn():
    # oracle: direct matrix multiplication; the scalar is computed, and
    # the frozen value for this basis is -2
    for n in (2, 3, 4):
        gens = la.generators(n)
        br = gens.U.mat @ gens.Ut.mat - gens.Ut.mat @ gens.U.mat
        assert_allclose(br, -2.0 * gens.Yn.mat, atol=1e-14)


def test_invalid_dimension():
    with pytest.raises(InvalidDimensionError):
        la.generators(1)


def test_bracket_antisymmetry_random():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = random_alg(3, rng), random_alg(3, rng)
        s = la.bracket(a, b).mat + la.bracket(b, a).mat
        assert np.abs(s).max() == 0.0


def test_bracket_dimension_mismatch():
    a = la.generators(2).U
    b = la.generators(3).U
    with pytest.raises(DimensionMismatchError):
        la.bracket(a, b)


def test_jacobi_identity():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4):
        for _ in range(30):
            a, b, c = (random_alg(n, rng) for _ in range(3))
            j = (la.bracket(la.bracket(a, b), c).mat
                 + la.bracket(la.bracket(b, c), a).mat
                 + la.bracket(la.bracket(c, a), b).mat)
            assert np.abs(j).max() <= 1e-10 * max(
                 1.0, a.norm() * b.norm() * c.norm())


# --------------------------------------------------------------------------
# Killing form
# --------------------------------------------------------------------------

def test_killing_y3_u_value():
    # independent oracle: B(x, y) = (n-1) tr(xy) for so(n,1)
    gens = la.generators(3)
    want = 2.0 * np.trace(gens.Yn.mat @ gens.U.mat)
    assert_allclose(la.killing_form(gens.Yn, gens.U), want, atol=1e-12)
    assert want == 0.0   # different root spaces are Killing orthogonal


def test_killing_matches_trace_formula():
    rng = np.random.default_rng(2)
    for n in (2, 3, 4):
        for _ in range(10):
            a, b = random_alg(n, rng), random_alg(n, rng)
            want = (n - 1) * np.trace(a.mat @ b.mat)
            assert_allclose(la.killing_form(a, b), want, rtol=1e-10,
                            atol=1e-9)


def test_killing_symmetry_and_invariance():
    rng = np.random.default_rng(3)
    for _ in range(20):
        a, b, x = (random_alg(3, rng) for _ in range(3))
        assert_allclose(la.killing_form(a, b), la.killing_form(b, a),
                        rtol=1e-12, atol=1e-12)
        inv = (la.killing_form(la.bracket(x, a), b)
               + la.killing_form(a, la.bracket(x, b)))
        assert abs(inv) <= 1e-9 * max(1.0, a.norm() * b.norm() * x.norm())


# --------------------------------------------------------------------------
# exp / log
# --------------------------------------------------------------------------

def test_exp_zero_is_identity():
    z = la.AlgebraElement(3, np.zeros((4, 4)))
    assert np.array_equal(la.exp_matrix(z).mat, np.eye(4))


def test_log_exp_small_u():
    gens = la.generators(3)
    v = la.AlgebraElement(3, 0.05 * gens.U.mat)
    w = la.log_principal(la.exp_matrix(v))
    assert np.abs(w.mat - v.mat).max() <= 1e-10


def test_log_exp_conjugated():
    rng = np.random.default_rng(4)
    gens = la.generators(3)
    g = la.exp_matrix(random_alg(3, rng, 0.5))
    v = 0.05 * gens.U.mat
    gv = g.mat @ v @ g.inverse_matrix()
    w = la.log_principal(la.exp_matrix(la.AlgebraElement(3, gv)))
    assert np.abs(w.mat - gv).max() <= 1e-9


def test_exp_log_roundtrip_ball():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(200):
        v = random_alg(3, rng, 0.02)
        if v.norm() > 0.1:
            continue
        w = la.log_principal(la.exp_matrix(v))
        worst = max(worst, np.abs(w.mat - v.mat).max() / max(v.norm(), 1e-30))
    assert worst <= 1e-9


def test_log_branch_cut_error():
    gens = la.generators(3)
    g = la.exp_matrix(la.AlgebraElement(3, np.pi * gens.thetas[(1, 2)].mat))
    with pytest.raises(BranchCutError):
        la.log_principal(g)


# --------------------------------------------------------------------------
# Iwasawa
# --------------------------------------------------------------------------

def test_iwasawa_identity():
    f = la.iwasawa(la.GroupElement.identity(3))
    assert abs(f.t) <= 1e-14
    assert np.abs(f.k.mat - np.eye(4)).max() <= 1e-12
    assert np.abs(f.nu.mat - np.eye(4)).max() <= 1e-12


def test_iwasawa_pure_a():
    gens = la.generators(3)
    f = la.iwasawa(la.exp_matrix(1.3 * gens.Yn))
    assert_allclose(f.t, 1.3, atol=1e-12)
    assert np.abs(f.k.mat - np.eye(4)).max() <= 1e-10


def test_iwasawa_reconstruction_random():
    rng = np.random.default_rng(6)
    for n in (2, 3, 4):
        gens = la.generators(n)
        for _ in range(30):
            g = la.exp_matrix(random_alg(n, rng, 0.5))
            f = la.iwasawa(g)
            rec = f.k.mat @ expm(f.t * gens.Yn.mat) @ f.nu.mat
            assert np.abs(rec - g.mat).max() <= 1e-10
            # k in the SO(n) block, nu = exp(w), w in g_1
            assert np.abs(f.k.mat[n, :n]).max() <= 1e-12
            w = la.log_principal(f.nu)
            parts = la.root_space_decompose(w)
            assert np.abs(parts.g_minus.mat).max() <= 1e-9
            assert np.abs(parts.m.mat).max() <= 1e-9
            assert np.abs(parts.a.mat).max() <= 1e-9


def test_iwasawa_large_elements():
    # shearing pushes |g| to ~1e6; relative reconstruction must hold
    gens = la.generators(3)
    for s in (1e2, 1e3):
        us = la.exp_matrix(la.AlgebraElement(3, s * gens.U.mat))
        g = la.GroupElement(3, us.mat @ expm(0.3 * gens.Yn.mat))
        f = la.iwasawa(g)
        rec = f.k.mat @ expm(f.t * gens.Yn.mat) @ f.nu.mat
        scale = max(1.0, np.abs(g.mat).max())
        assert np.abs(rec - g.mat).max() <= 1e-10 * scale
        assert f.cond >= 1.0


def test_exp_matrix_nilpotent_exact():
    gens = la.generators(3)
    for s in (10.0, 1e4):
        got = la.exp_matrix(la.AlgebraElement(3, s * gens.U.mat)).mat
        U = gens.U.mat
        want = np.eye(4) + s * U + 0.5 * s * s * (U @ U)
        assert np.array_equal(got, want)


# --------------------------------------------------------------------------
# root space decomposition
# --------------------------------------------------------------------------

def test_root_space_u_is_g_minus():
    gens = la.generators(3)
    parts = la.root_space_decompose(gens.U)
    assert np.abs(parts.m.mat).max() == 0.0
    assert np.abs(parts.a.mat).max() == 0.0
    assert np.abs(parts.g_plus.mat).max() == 0.0
    assert np.array_equal(parts.g_minus.mat, gens.U.mat)


def test_root_space_yn_is_a():
    gens = la.generators(4)
    parts = la.root_space_decompose(gens.Yn)
    assert np.array_equal(parts.a.mat, gens.Yn.mat)
    assert np.abs(parts.g_minus.mat).max() == 0.0


def test_root_space_resum_and_eigen():
    rng = np.random.default_rng(7)
    gens = la.generators(4)
    for _ in range(20):
        v = random_alg(4, rng)
        parts = la.root_space_decompose(v)
        total = (parts.g_minus.mat + parts.m.mat + parts.a.mat
                 + parts.g_plus.mat)
        assert np.abs(total - v.mat).max() <= 1e-12 * max(1.0, v.norm())
        for comp, lam in ((parts.g_minus, -1.0), (parts.g_plus, 1.0),
                          (parts.m, 0.0), (parts.a, 0.0)):
            r = la.bracket(gens.Yn, comp).mat - lam * comp.mat
            assert np.abs(r).max() <= 1e-12 * max(1.0, v.norm())


# --------------------------------------------------------------------------
# weight decomposition
# --------------------------------------------------------------------------

def test_weight_decomposition_n3():
    wd = la.sl2_weight_decompose(3)
    # brute-force oracle: Vperp of so(3,1) is a single highest-weight-2
    # string of dimension 3
    assert [c.varsigma for c in wd.vperp_components] == [2]
    assert len(wd.vperp_components[0].vectors) == 3


def test_weight_decomposition_dims():
    for n in (4, 5):
        wd = la.sl2_weight_decompose(n)
        dim_vperp = sum(c.varsigma + 1 for c in wd.vperp_components)
        assert dim_vperp == n * (n + 1) // 2 - 3


def test_weight_string_relations():
    for n in (3, 4):
        gens = la.generators(n)
        wd = la.sl2_weight_decompose(n)
        for comp in wd.vperp_components:
            vs = comp.varsigma
            v0 = comp.vectors[0]
            # ad(U)^{vs+1} annihilates the string
            cur = v0
            for _ in range(vs + 1):
                cur = la.bracket(gens.U, cur)
            assert np.abs(cur.mat).max() <= 1e-10
            for i, v in enumerate(comp.vectors):
                r = la.bracket(gens.Yn, v).mat - 0.5 * (vs - 2 * i) * v.mat
                assert np.abs(r).max() <= 1e-10
                if i < vs:
                    r2 = (la.bracket(gens.U, v).mat
                          - (i + 1) * comp.vectors[i + 1].mat)
                    assert np.abs(r2).max() <= 1e-10


def test_weight_killing_orthogonality():
    wd = la.sl2_weight_decompose(4)
    for comp in wd.vperp_components:
        for v in comp.vectors:
            for e in wd.sl2_part:
                assert abs(la.killing_form(v, e)) <= 1e-9


def test_adjoint_flow_formula():
    # Ad(u^s) v coefficients match the binomial expansion
    import math
    rng = np.random.default_rng(8)
    gens = la.generators(3)
    wd = la.sl2_weight_decompose(3)
    comp = wd.vperp_components[0]
    b = rng.normal(size=3)
    v = sum(bi * vi.mat for bi, vi in zip(b, comp.vectors))
    for s in (0.5, 3.0, 12.0):
        u = expm(s * gens.U.mat)
        got = u @ v @ np.linalg.inv(u)
        want = np.zeros_like(got)
        for nn in range(3):
            coef = sum(b[i] * math.comb(nn, i) * s ** (nn - i)
                       for i in range(nn + 1))
            want += coef * comp.vectors[nn].mat
        assert np.abs(got - want).max() <= 1e-10 * max(1.0, s ** 2)


# --------------------------------------------------------------------------
# centralizer
# --------------------------------------------------------------------------

def test_centralizer_dims_vs_nullspace():
    for n, want in ((3, 2), (4, 4)):
        cb = la.centralizer_basis(n)
        assert len(cb) == want
        adU = la.ad_matrix(la.generators(n).U)
        sv = np.linalg.svd(adU, compute_uv=False)
        assert int(np.sum(sv < 1e-9)) == want


def test_centralizer_brackets_vanish():
    for n in (3, 4, 5):
        gens = la.generators(n)
        for b in la.centralizer_basis(n):
            assert np.abs(la.bracket(b, gens.U).mat).max() <= 1e-12


# --------------------------------------------------------------------------
# membership guards
# --------------------------------------------------------------------------

def test_algebra_membership_rejects():
    with pytest.raises(MembershipError):
        la.AlgebraElement(2, np.eye(3))


def test_group_membership_rejects():
    with pytest.raises(MembershipError):
        la.GroupElement(2, 2.0 * np.eye(3))


def test_so21_factor_roundtrip():
    rng = np.random.default_rng(9)
    wd = la.sl2_weight_decompose(3)
    gens = la.generators(3)
    for scale in (1e-2, 1e-5):
        v1 = scale * (0.3 * gens.U.mat - 0.2 * gens.Ut.mat
                      + 0.1 * gens.Yn.mat)
        vp = scale * 0.4 * wd.vperp_components[0].vectors[1].mat
        g = la.GroupElement(3, expm(v1) @ expm(vp))
        h2, alpha, v = la.so21_factor(wd, g)
        sl2m = sum(a * e.mat for a, e in zip(alpha, wd.sl2_part))
        rec = expm(sl2m) @ expm(v.mat)
        assert np.abs(rec - g.mat).max() <= 1e-12
        # Vperp part has no sl2 component
        sl2c, _ = la.weight_coordinates(wd, v)
        assert np.abs(sl2c).max() <= 1e-12
