"""Exact structure of g = so(n,1) and G = SO(n,1).

Conventions
-----------
G is defined inside SL(n+1,R) by J g^T J = g^{-1} with J = diag(I_n, -1),
and g = so(n,1) by J v^T J = -v.  Generators:

    Y_k     = [[0, e_k], [e_k^T, 0]]                 (boosts)
    Theta_ij = [[E_ji - E_ij, 0], [0, 0]]            (rotations, i < j)

The distinguished nilpotents are stored with integer entries,

    U  = [[0,  e_{n-1}, e_{n-1}], [-e_{n-1}^T, 0, 0], [e_{n-1}^T, 0, 0]]
    Ut = [[0, -e_{n-1}, e_{n-1}], [ e_{n-1}^T, 0, 0], [e_{n-1}^T, 0, 0]]

(blocks of sizes n-1, 1, 1), and satisfy [Y_n, U] = -U, [Y_n, Ut] = Ut.
{U, Y_n, Ut} spans an sl2 subalgebra; the scalar in [U, Ut] = c Y_n is
computed, never hard-coded.  The 2x2 picture used by the shearing module is

    U -> [[0,0],[1,0]],   Y_n -> [[1/2,0],[0,-1/2]],   Ut -> [[0,1],[0,0]]

so that exp(tU) -> [[1,0],[t,1]] and a^t u^s a^{-t} = u^{s e^{-t}}.

All checks use tolerances relative to the matrix scale, since shearing
experiments push group elements to norms ~1e6.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm, logm

from .errors import (
    BranchCutError,
    DimensionMismatchError,
    FactorizationError,
    InvalidDimensionError,
    MembershipError,
)

_ALG_TOL = 1e-12
_GRP_TOL = 1e-10


def lorentz_form(n: int) -> np.ndarray:
    """J = diag(I_n, -1) as an (n+1)x(n+1) array."""
    J = np.eye(n + 1)
    J[n, n] = -1.0
    return J


def _check_dim(n):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise InvalidDimensionError(f"need integer n >= 2, got {n!r}")


@dataclass(frozen=True)
class AlgebraElement:
    """Element of so(n,1), stored as its (n+1)x(n+1) matrix."""

    n: int
    mat: np.ndarray

    def __post_init__(self):
        _check_dim(self.n)
        m = np.asarray(self.mat, dtype=float)
        if m.shape != (self.n + 1, self.n + 1):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match n={self.n}")
        object.__setattr__(self, "mat", m)
        J = lorentz_form(self.n)
        scale = max(1.0, np.abs(m).max())
        if np.abs(J @ m.T @ J + m).max() > _ALG_TOL * scale:
            raise MembershipError("matrix is not in so(n,1): J v^T J != -v")
        if abs(np.trace(m)) > _ALG_TOL * scale:
            raise MembershipError("matrix is not traceless")

    def __add__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._same(other)
        return AlgebraElement(self.n, self.mat + other.mat)

    def __sub__(self, other: "AlgebraElement") -> "AlgebraElement":
        self._same(other)
        return AlgebraElement(self.n, self.mat - other.mat)

    def __rmul__(self, c: float) -> "AlgebraElement":
        return AlgebraElement(self.n, float(c) * self.mat)

    def __neg__(self) -> "AlgebraElement":
        return AlgebraElement(self.n, -self.mat)

    def norm(self) -> float:
        return float(np.linalg.norm(self.mat))

    def _same(self, other):
        if self.n != other.n:
            raise DimensionMismatchError(
                f"dimension mismatch: {self.n} vs {other.n}")


@dataclass(frozen=True)
class GroupElement:
    """Element of SO(n,1), stored as its (n+1)x(n+1) matrix."""

    n: int
    mat: np.ndarray

    def __post_init__(self):
        _check_dim(self.n)
        m = np.asarray(self.mat, dtype=float)
        if m.shape != (self.n + 1, self.n + 1):
            raise DimensionMismatchError(
                f"matrix shape {m.shape} does not match n={self.n}")
        object.__setattr__(self, "mat", m)
        J = lorentz_form(self.n)
        scale = max(1.0, np.abs(m).max() ** 2)
        if np.abs(J @ m.T @ J @ m - np.eye(self.n + 1)).max() > _GRP_TOL * scale:
            raise MembershipError("matrix is not in SO(n,1): J g^T J g != I")
        det_scale = max(1.0, np.abs(m).max() ** (self.n + 1))
        if abs(np.linalg.det(m) - 1.0) > _GRP_TOL * det_scale:
            raise MembershipError("matrix does not have determinant 1")

    @classmethod
    def identity(cls, n: int) -> "GroupElement":
        return cls(n, np.eye(n + 1))

    def inverse(self) -> "GroupElement":
        # exact inverse from the defining relation, no linear solve
        J = lorentz_form(self.n)
        return GroupElement(self.n, J @ self.mat.T @ J)

    def inverse_matrix(self) -> np.ndarray:
        J = lorentz_form(self.n)
        return J @ self.mat.T @ J

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        if self.n != other.n:
            raise DimensionMismatchError(
                f"dimension mismatch: {self.n} vs {other.n}")
        return GroupElement(self.n, self.mat @ other.mat)


@dataclass(frozen=True)
class Generators:
    """The basis {Y_k, Theta_ij} plus the distinguished U, Ut."""

    n: int
    ys: tuple                      # Y_1 .. Y_n
    thetas: dict                   # (i, j) -> Theta_ij, 1 <= i < j <= n
    U: AlgebraElement
    Ut: AlgebraElement
    basis: tuple = field(default=())    # fixed ordering, dim(g) elements

    @property
    def Yn(self) -> AlgebraElement:
        return self.ys[-1]


def _basis_matrices(n):
    out = []
    for k in range(n):
        m = np.zeros((n + 1, n + 1))
        m[k, n] = 1.0
        m[n, k] = 1.0
        out.append(m)
    for i in range(n):
        for j in range(i + 1, n):
            m = np.zeros((n + 1, n + 1))
            m[j, i] = 1.0
            m[i, j] = -1.0
            out.append(m)
    return out


_GEN_CACHE: dict = {}


def generators(n: int) -> Generators:
    """Generators of so(n,1): Y_k (1<=k<=n), Theta_ij (i<j), and U, Ut."""
    _check_dim(n)
    if n in _GEN_CACHE:
        return _GEN_CACHE[n]
    mats = _basis_matrices(n)
    ys = tuple(AlgebraElement(n, mats[k]) for k in range(n))
    thetas = {}
    idx = n
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            thetas[(i, j)] = AlgebraElement(n, mats[idx])
            idx += 1
    # explicit integer matrices for U and Ut, coordinates n-1, n, n+1
    u = np.zeros((n + 1, n + 1))
    u[n - 2, n - 1] = 1.0
    u[n - 2, n] = 1.0
    u[n - 1, n - 2] = -1.0
    u[n, n - 2] = 1.0
    ut = np.zeros((n + 1, n + 1))
    ut[n - 2, n - 1] = -1.0
    ut[n - 2, n] = 1.0
    ut[n - 1, n - 2] = 1.0
    ut[n, n - 2] = 1.0
    gens = Generators(
        n=n,
        ys=ys,
        thetas=thetas,
        U=AlgebraElement(n, u),
        Ut=AlgebraElement(n, ut),
        basis=tuple(AlgebraElement(n, m) for m in mats),
    )
    _GEN_CACHE[n] = gens
    return gens


def bracket(a: AlgebraElement, b: AlgebraElement) -> AlgebraElement:
    """Matrix commutator [a, b] = ab - ba."""
    a._same(b)
    return AlgebraElement(a.n, a.mat @ b.mat - b.mat @ a.mat)


def _coords(n, mats):
    """Expand matrices in the generator basis (columns of the basis Gram)."""
    gens = generators(n)
    B = np.stack([g.mat.ravel() for g in gens.basis], axis=1)
    # basis matrices are orthogonal w.r.t. the Frobenius inner product
    sq = np.sum(B * B, axis=0)
    return (B.T @ np.asarray(mats).reshape(len(mats), -1).T) / sq[:, None]


_AD_CACHE: dict = {}


def _ad_matrices(n):
    """ad(e_i) in generator-basis coordinates, for each basis element e_i."""
    if n in _AD_CACHE:
        return _AD_CACHE[n]
    gens = generators(n)
    dim = len(gens.basis)
    brs = []
    for e in gens.basis:
        rows = [bracket(e, f).mat for f in gens.basis]
        brs.append(_coords(n, rows))      # dim x dim, columns = [e, f_j]
    _AD_CACHE[n] = (gens, brs)
    return _AD_CACHE[n]


def ad_matrix(a: AlgebraElement) -> np.ndarray:
    """Matrix of ad(a) on g in generator-basis coordinates."""
    gens, brs = _ad_matrices(a.n)
    ca = _coords(a.n, [a.mat])[:, 0]
    dim = len(gens.basis)
    out = np.zeros((dim, dim))
    for ci, br in zip(ca, brs):
        if ci != 0.0:
            out += ci * br
    return out


def killing_form(a: AlgebraElement, b: AlgebraElement) -> float:
    """B(a,b) = trace(ad a . ad b), computed over the full generator basis."""
    a._same(b)
    return float(np.trace(ad_matrix(a) @ ad_matrix(b)))


def exp_matrix(a: AlgebraElement) -> GroupElement:
    """Matrix exponential so(n,1) -> SO(n,1).

    Exactly nilpotent arguments (unipotent one-parameter subgroups at
    large times) are summed by the terminating series; Pade scaling and
    squaring loses absolute accuracy on those.
    """
    m = a.mat
    powers = [np.eye(a.n + 1), m]
    while len(powers) <= a.n + 1 and np.abs(powers[-1]).max() != 0.0:
        powers.append(powers[-1] @ m)
    if np.abs(powers[-1]).max() == 0.0:
        fact = 1.0
        out = powers[0].copy()
        for k in range(1, len(powers) - 1):
            fact *= k
            out += powers[k] / fact
        return GroupElement(a.n, out)
    return GroupElement(a.n, expm(m))


def log_principal(g: GroupElement) -> AlgebraElement:
    """Principal matrix logarithm SO(n,1) -> so(n,1).

    Valid when every eigenvalue of g stays off the closed negative real
    axis (equivalently |Im log lambda| < pi); conjugation-stable since
    Ad g preserves spectra.
    """
    eig = np.linalg.eigvals(g.mat)
    if np.any((eig.real <= 0) & (np.abs(eig.imag) < 1e-14)):
        raise BranchCutError("eigenvalue on the negative real axis")
    w = logm(g.mat)
    if np.abs(w.imag).max() > 1e-9 * max(1.0, np.abs(w.real).max()):
        raise BranchCutError("logarithm left the real form")
    return AlgebraElement(g.n, w.real)


# ---------------------------------------------------------------------------
# Iwasawa decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IwasawaFactors:
    k: GroupElement
    t: float
    nu: GroupElement
    cond: float      # condition number of g, reported for precision tracking


def _lightcone_basis(n):
    """Orthonormal columns (f_+, e_1, ..., e_{n-1}, f_-) with
    f_+- = (+-e_n + e_{n+1})/sqrt(2).  In this basis AN is upper triangular
    with positive diagonal, so Iwasawa reduces to a QR factorization
    (Gram-Schmidt on columns in the documented order)."""
    s = np.zeros((n + 1, n + 1))
    r = 1.0 / np.sqrt(2.0)
    s[n - 1, 0] = r
    s[n, 0] = r
    for i in range(n - 1):
        s[i, i + 1] = 1.0
    s[n - 1, n] = -r
    s[n, n] = r
    return s


def iwasawa(g: GroupElement) -> IwasawaFactors:
    """g = k exp(t Y_n) nu with k in the SO(n) block and nu in exp(g_1)."""
    n = g.n
    S = _lightcone_basis(n)
    gp = S.T @ g.mat @ S
    cond = float(np.linalg.cond(gp))
    q, r = np.linalg.qr(gp)
    sgn = np.sign(np.diag(r))
    sgn[sgn == 0] = 1.0
    q = q * sgn[None, :]
    r = r * sgn[:, None]
    if r[0, 0] <= 0:
        raise FactorizationError("element not in the identity component")
    t = float(np.log(r[0, 0]))
    k = GroupElement(n, S @ q @ S.T)
    # N-coordinates from the first row of R; nu rebuilt in closed form
    # (exp of a 3-step nilpotent), which keeps nu exactly in G even when
    # the source element is large.
    x = r[0, 1:n] / (np.sqrt(2.0) * r[0, 0])
    V = _vperp_pm(n, x, +1.0)
    nu = GroupElement(n, np.eye(n + 1) + V + V @ V / 2.0)
    return IwasawaFactors(k=k, t=t, nu=nu, cond=cond)


# ---------------------------------------------------------------------------
# Root space decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RootSpaceParts:
    """Components of v in g_{-1} + m + a + g_1 (ad(Y_n)-eigenvalues -1,0,0,+1)."""

    g_minus: AlgebraElement
    m: AlgebraElement
    a: AlgebraElement
    g_plus: AlgebraElement


def _vperp_pm(n, x, sign):
    """Matrix of V_x^{+-} = [[0, -+x, x], [+-x^T, 0, 0], [x^T, 0, 0]]."""
    m = np.zeros((n + 1, n + 1))
    m[: n - 1, n - 1] = -sign * x
    m[: n - 1, n] = x
    m[n - 1, : n - 1] = sign * x
    m[n, : n - 1] = x
    return m


def root_space_decompose(v: AlgebraElement) -> RootSpaceParts:
    """Split v along the root space decomposition relative to a = R Y_n."""
    n = v.n
    m = v.mat
    a_part = np.zeros_like(m)
    a_part[n - 1, n] = m[n - 1, n]
    a_part[n, n - 1] = m[n - 1, n]
    m_part = np.zeros_like(m)
    m_part[: n - 1, : n - 1] = m[: n - 1, : n - 1]
    c = m[: n - 1, n - 1]          # rotation column into coordinate n
    q = m[: n - 1, n]              # boost column
    x_plus = (q - c) / 2.0
    x_minus = (q + c) / 2.0
    return RootSpaceParts(
        g_minus=AlgebraElement(n, _vperp_pm(n, x_minus, -1.0)),
        m=AlgebraElement(n, m_part),
        a=AlgebraElement(n, a_part),
        g_plus=AlgebraElement(n, _vperp_pm(n, x_plus, +1.0)),
    )


# ---------------------------------------------------------------------------
# sl2-weight decomposition of g = sl2 + Vperp
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WeightString:
    """One ad-irreducible component of Vperp with highest weight varsigma.

    vectors[i] = v_i satisfy ad(U) v_i = (i+1) v_{i+1} and
    ad(Y_n) v_i = ((varsigma - 2i)/2) v_i.
    """

    varsigma: int
    vectors: tuple


@dataclass(frozen=True)
class WeightDecomposition:
    n: int
    sl2_part: tuple                  # (U, Y_n, Ut)
    vperp_components: tuple          # WeightString, sorted by varsigma desc


_WD_CACHE: dict = {}


def sl2_weight_decompose(n: int) -> WeightDecomposition:
    """Killing-orthogonal splitting g = span{U, Y_n, Ut} + Vperp with Vperp
    decomposed into ad-irreducible weight strings."""
    _check_dim(n)
    if n < 3:
        raise InvalidDimensionError("weight decomposition needs n >= 3")
    if n in _WD_CACHE:
        return _WD_CACHE[n]
    gens = generators(n)
    dim = len(gens.basis)
    sl2 = (gens.U, gens.Yn, gens.Ut)
    csl2 = _coords(n, [e.mat for e in sl2])          # dim x 3

    # Killing Gram matrix on the generator basis
    ads = [ad_matrix(e) for e in gens.basis]
    K = np.empty((dim, dim))
    for i in range(dim):
        for j in range(i, dim):
            K[i, j] = K[j, i] = np.trace(ads[i] @ ads[j])

    # Vperp = Killing-orthocomplement of the sl2 span
    cond = csl2.T @ K                                # 3 x dim
    _, _, vh = np.linalg.svd(cond)
    perp = vh[3:].T                                  # dim x (dim-3), orthonormal

    adY = ad_matrix(gens.Yn)
    adU = ad_matrix(gens.U)
    adUt = ad_matrix(gens.Ut)

    def into_perp(mat):
        return perp.T @ mat @ perp

    aY, aU, aUt = into_perp(adY), into_perp(adU), into_perp(adUt)

    comps = []
    used = 0
    for vs in (2, 1, 0):
        lam = vs / 2.0
        stack = np.vstack([aUt, aY - lam * np.eye(perp.shape[1])])
        _, sv, vh2 = np.linalg.svd(stack)
        null_dim = int(np.sum(sv < 1e-9))
        if null_dim == 0:
            continue
        tops = vh2[-null_dim:]
        for top in tops:
            vecs = [top / np.linalg.norm(top)]
            for i in range(vs):
                vecs.append(aU @ vecs[-1] / (i + 1))
            mats = []
            for c in vecs:
                full = perp @ c
                mat = sum(ci * b.mat for ci, b in zip(full, gens.basis))
                mats.append(AlgebraElement(n, mat))
            comps.append(WeightString(varsigma=vs, vectors=tuple(mats)))
            used += vs + 1
    if used != dim - 3:
        raise FactorizationError(
            f"weight strings cover {used} of {dim - 3} Vperp dimensions")
    comps.sort(key=lambda c: -c.varsigma)
    wd = WeightDecomposition(n=n, sl2_part=sl2, vperp_components=tuple(comps))
    _WD_CACHE[n] = wd
    return wd


def weight_basis_matrix(wd: WeightDecomposition) -> np.ndarray:
    """Columns: U, Y_n, Ut, then each string's v_0..v_vs, flattened."""
    cols = [e.mat.ravel() for e in wd.sl2_part]
    for comp in wd.vperp_components:
        cols.extend(v.mat.ravel() for v in comp.vectors)
    return np.stack(cols, axis=1)


def weight_coordinates(wd: WeightDecomposition, a: AlgebraElement):
    """Coordinates of a in the (sl2, strings) basis: (sl2 triple coords,
    list of per-string coefficient arrays b_0..b_vs)."""
    B = weight_basis_matrix(wd)
    sol, *_ = np.linalg.lstsq(B, a.mat.ravel(), rcond=None)
    out, pos = [], 3
    for comp in wd.vperp_components:
        k = comp.varsigma + 1
        out.append(np.array(sol[pos:pos + k]))
        pos += k
    return np.array(sol[:3]), out


# ---------------------------------------------------------------------------
# Centralizer of U
# ---------------------------------------------------------------------------

def centralizer_basis(n: int) -> list:
    """Basis of ker(ad U): the so(n-2) block plus the (n-1)-parameter
    nilpotent family [[0, u, u], [-u^T, 0, 0], [u^T, 0, 0]]."""
    _check_dim(n)
    if n < 3:
        raise InvalidDimensionError("centralizer block form needs n >= 3")
    out = []
    for i in range(n - 2):
        for j in range(i + 1, n - 2):
            m = np.zeros((n + 1, n + 1))
            m[j, i] = 1.0
            m[i, j] = -1.0
            out.append(AlgebraElement(n, m))
    for k in range(n - 1):
        x = np.zeros(n - 1)
        x[k] = 1.0
        m = np.zeros((n + 1, n + 1))
        m[: n - 1, n - 1] = x
        m[: n - 1, n] = x
        m[n - 1, : n - 1] = -x
        m[n, : n - 1] = x
        out.append(AlgebraElement(n, m))
    return out


# ---------------------------------------------------------------------------
# so(2,1) <-> 2x2 picture and the h*exp(v) factorization
# ---------------------------------------------------------------------------

def random_algebra_element(n: int, rng, scale: float = 1.0) -> AlgebraElement:
    """Random element with generator-basis coefficients ~ N(0, scale^2)."""
    gens = generators(n)
    mat = sum(rng.normal(0.0, scale) * b.mat for b in gens.basis)
    return AlgebraElement(n, mat)


def sl2_to_2x2(coords) -> np.ndarray:
    """(x, y, z) with a = x U + y Y_n + z Ut  ->  2x2 matrix."""
    x, y, z = coords
    return np.array([[y / 2.0, z], [x, -y / 2.0]])


def sl2_from_2x2(m) -> np.ndarray:
    """Inverse of sl2_to_2x2 for traceless 2x2 matrices."""
    return np.array([m[1][0], m[0][0] - m[1][1], m[0][1]], dtype=float)


def so21_factor(wd: WeightDecomposition, g: GroupElement,
                max_iter: int = 60, tol: float = 1e-13):
    """Factor g = h exp(v) with h in the SO(2,1) subgroup and v in Vperp.

    Returns (h_2x2, alpha_coords, v: AlgebraElement).  Valid on a
    neighborhood of the identity (the zeta chart of the multiplication map).
    """
    n = g.n
    B = weight_basis_matrix(wd)
    Bp = np.linalg.pinv(B)

    def split(mat):
        c = Bp @ mat.ravel()
        return c

    alpha = np.zeros(3)
    gm = g.mat
    for _ in range(max_iter):
        sl2_mat = (alpha[0] * wd.sl2_part[0].mat
                   + alpha[1] * wd.sl2_part[1].mat
                   + alpha[2] * wd.sl2_part[2].mat)
        rem = expm(-sl2_mat) @ gm
        eig = np.linalg.eigvals(rem)
        if np.any((eig.real <= 0) & (np.abs(eig.imag) < 1e-14)):
            raise FactorizationError("left the logarithm chart")
        w = logm(rem).real
        c = split(w)
        if np.linalg.norm(c[:3]) < tol:
            break
        alpha = alpha + c[:3]
    else:
        raise FactorizationError("h*exp(v) factorization did not converge")
    v_mat = w - (c[0] * wd.sl2_part[0].mat
                 + c[1] * wd.sl2_part[1].mat
                 + c[2] * wd.sl2_part[2].mat)
    h2 = expm(sl2_to_2x2(alpha))
    return h2, alpha, AlgebraElement(n, v_mat)
