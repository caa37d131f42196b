"""Numerically realized spherical representations pi_nu of SO(n,1).

Conventions
-----------
RepContext with parameter nu in (0, rho) realizes the unitarily equivalent
pair pi_{-nu} (on S^{n-1}) / pi_flat_{1/2-nu} (on S^{n-2}), so that the
restriction map f -> f|_{x_1=0} intertwines them.  The group acts through
the light-cone picture: for a unit vector u and xi_u = (u, 1),

    y = g^{-1} xi_u,   e^{H} = y_{n+1},   u' = y_{1:n} / y_{n+1},
    (pi_{-nu}(g) f)(u) = y_{n+1}^{nu - rho} f(u'),

with rho = (n-1)/2.  The unitarizing norm is ||f||^2 = sum_m d_m ||f_m||^2
with d_m = (rho+nu)_m / (rho-nu)_m, and the Sobolev weight of order s is
(1 + c_n(0,nu) - 2 c_{K_n}(m))^s, following Delta = Box_G - 2 Box_K (the
printed "+ c_K" variant makes the base negative and is treated as an
erratum).

No hand-derived differential-operator formulas: Lie-algebra actions come
from Richardson-extrapolated differences of the group action, so the
realization cannot inherit transcription errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as _sciint
from scipy.linalg import expm

from . import harmonics as sph
from . import liealg as la
from .errors import ParameterRangeError, QuadratureError

# ---------------------------------------------------------------------------
# Casimir scalars and norm weights
# ---------------------------------------------------------------------------


def _as_tuple(hw, length):
    if np.isscalar(hw):
        out = [0] * length
        if length:
            out[-1] = int(hw)
        elif hw:
            raise ValueError(f"rank-0 weight must be 0, got {hw}")
        return tuple(out)
    hw = tuple(int(v) for v in hw)
    if len(hw) != length:
        raise ValueError(f"highest weight {hw} has length {len(hw)}, "
                         f"expected {length}")
    return hw


def casimir_scalar(n: int, highest_weight, nu: float) -> float:
    """Casimir scalar c_n(hw, nu) = rho_n^2 - nu^2 - <hw, hw + 2 rho_M>."""
    rho = (n - 1) / 2.0
    hw = _as_tuple(highest_weight, (n - 1) // 2)
    if any(a < 0 for a in hw[1:]) or any(
            hw[i] > hw[i + 1] for i in range(len(hw) - 1)):
        raise ValueError(f"malformed M-highest weight {hw}")
    if n % 2 == 0:
        pairing = sum(a * (a + 2 * i - 1) for i, a in enumerate(hw, start=1))
    else:
        pairing = sum(a * (a + 2 * i - 2) for i, a in enumerate(hw, start=1))
    return rho * rho - nu * nu - pairing


def casimir_k_scalar(n: int, highest_weight) -> float:
    """Casimir scalar of K_n = SO(n) on the highest-weight-hw irreducible.

    Spherical case: pass an integer m for hw = (0, ..., 0, m); the value is
    then -m(m + n - 2), the sphere-Laplacian eigenvalue on W_m.
    """
    hw = _as_tuple(highest_weight, math.ceil((n - 1) / 2))
    if any(a < 0 for a in hw[1:]) or any(
            hw[i] > hw[i + 1] for i in range(len(hw) - 1)):
        raise ValueError(f"malformed K-highest weight {hw}")
    if n % 2 == 0:
        return -float(sum(a * (a + 2 * i - 2) for i, a in enumerate(hw, 1)))
    return -float(sum(a * (a + 2 * i - 1) for i, a in enumerate(hw, 1)))


def d_coefficient(n: int, nu: float, m) -> float:
    """d_m(-nu) = (rho+nu)_m / (rho-nu)_m, evaluated in log space.

    This is the Pochhammer ratio normalized to d_0 = 1 (the paper's second
    Gamma expression drops a Gamma(rho-nu) factor; the ratio is taken as
    authoritative).  Accepts real m >= 0 for integral-test extensions.
    """
    rho = (n - 1) / 2.0
    if abs(nu) >= rho:
        raise ParameterRangeError(f"|nu|={abs(nu)} must be < rho={rho}")
    if m == 0:
        return 1.0
    return math.exp(math.lgamma(rho + nu + m) - math.lgamma(rho + nu)
                    - math.lgamma(rho - nu + m) + math.lgamma(rho - nu))


def sobolev_weight(n: int, nu: float, s: float, m) -> float:
    """(1 + c_n(0,nu) - 2 c_{K_n}(m))^s with the positivity convention."""
    rho = (n - 1) / 2.0
    base = 1.0 + (rho * rho - nu * nu) + 2.0 * m * (m + n - 2.0)
    if base <= 0:
        raise ParameterRangeError(
            f"Sobolev base {base} <= 0 at m={m} (nu={nu})")
    return base ** s


# ---------------------------------------------------------------------------
# Representation context
# ---------------------------------------------------------------------------

@dataclass
class RepContext:
    """One truncated complementary-series model with its weighted norms."""

    n: int
    nu: float
    m_max: int
    s: float = 0.0
    quad_degree: int | None = None
    model: sph.SphereModel = field(init=False, repr=False)

    def __post_init__(self):
        if self.m_max < 4:
            raise ParameterRangeError("m_max must be >= 4")
        rho = self.rho
        if not (abs(self.nu) < rho):
            raise ParameterRangeError(
                f"need |nu| < rho = {rho}, got nu = {self.nu}")
        qd = self.quad_degree or (2 * self.m_max + 4)
        if qd < 2 * self.m_max + 4:
            raise QuadratureError(
                f"quadrature exactness {qd} < 2*m_max+4 = {2 * self.m_max + 4}")
        self.quad_degree = qd
        self.model = sph.get_sphere_model(self.n, self.m_max, qd)

    @property
    def rho(self) -> float:
        return (self.n - 1) / 2.0

    @property
    def rho_flat(self) -> float:
        return (self.n - 2) / 2.0

    @property
    def quad(self) -> sph.QuadratureRule:
        return self.model.quad

    def d(self, m) -> float:
        return d_coefficient(self.n, self.nu, m)

    def w(self, m) -> float:
        return sobolev_weight(self.n, self.nu, self.s, m)

    def d_flat(self, l) -> float:
        return d_coefficient(self.n - 1, self.nu - 0.5, l)

    def w_flat(self, l) -> float:
        return sobolev_weight(self.n - 1, self.nu - 0.5, self.s, l)

    def subcontext(self) -> "RepContext":
        return RepContext(self.n - 1, self.nu - 0.5, self.m_max,
                          self.s, self.quad_degree)

    def require_branching_range(self):
        if not (self.rho_flat < self.nu < self.rho):
            raise ParameterRangeError(
                f"branching needs rho_flat = {self.rho_flat} < nu < "
                f"rho = {self.rho}, got nu = {self.nu}")

    def hilbert_norm(self, f: sph.SphericalFunction) -> float:
        return math.sqrt(math.fsum(
            self.d(m) * float(c @ c) for m, c in f.coeffs.items()))

    def sobolev_norm(self, f: sph.SphericalFunction) -> float:
        return math.sqrt(math.fsum(
            self.w(m) * self.d(m) * float(c @ c)
            for m, c in f.coeffs.items()))


# ---------------------------------------------------------------------------
# Group action
# ---------------------------------------------------------------------------

def conformal_action(g_inv_mat: np.ndarray, points: np.ndarray):
    """Boundary action: points (N, n) -> (moved points, e^H array)."""
    n = points.shape[1]
    xi = np.concatenate([points, np.ones((points.shape[0], 1))], axis=1)
    y = xi @ g_inv_mat.T
    eh = y[:, n]
    if np.any(eh <= 0):
        raise ParameterRangeError("element not in the identity component")
    moved = y[:, :n] / eh[:, None]
    # renormalize against fp drift off the sphere
    moved /= np.linalg.norm(moved, axis=1)[:, None]
    return moved, eh


def pi_action(ctx: RepContext, g: la.GroupElement,
              f: sph.SphericalFunction) -> sph.SphericalFunction:
    """pi_{-nu}(g) f, sampled at the quadrature nodes and re-projected.

    Truncation leakage beyond m_max is reported on the result.
    """
    moved, eh = conformal_action(g.inverse_matrix(), ctx.quad.nodes)
    mult = eh ** (ctx.nu - ctx.rho)
    vals = mult * f.evaluate(moved)
    return sph.SphericalFunction.from_samples(ctx.model, vals)


def _action_samples(ctx, g_mat_inv, f):
    moved, eh = conformal_action(g_mat_inv, ctx.quad.nodes)
    return (eh ** (ctx.nu - ctx.rho)) * f.evaluate(moved)


def lie_derivative(ctx: RepContext, X: la.AlgebraElement,
                   f: sph.SphericalFunction,
                   step: float | None = None) -> sph.SphericalFunction:
    """d/dt pi(exp(tX)) f at t = 0, central difference with one Richardson
    extrapolation (O(h^4)); h is scaled by the band limit of f."""
    h = step if step is not None else 0.04 / (1.0 + f.degree_max())
    if h < 1e-8:
        raise ParameterRangeError(f"difference step {h} underflows")
    J = la.lorentz_form(ctx.n)

    def shifted(t):
        gm = expm(t * X.mat)
        return _action_samples(ctx, J @ gm.T @ J, f)

    d1 = (shifted(h) - shifted(-h)) / (2 * h)
    d2 = (shifted(h / 2) - shifted(-h / 2)) / h
    return sph.SphericalFunction.from_samples(ctx.model, (4 * d2 - d1) / 3.0)


def _second_lie(ctx, X, f, h):
    J = la.lorentz_form(ctx.n)

    def shifted(t):
        gm = expm(t * X.mat)
        return _action_samples(ctx, J @ gm.T @ J, f)

    f0 = f.samples

    def d2(hh):
        return (shifted(hh) - 2 * f0 + shifted(-hh)) / (hh * hh)

    return (4.0 * d2(h / 2) - d2(h)) / 3.0


def apply_casimir_numeric(ctx: RepContext, f: sph.SphericalFunction,
                          step: float | None = None) -> sph.SphericalFunction:
    """Box_n f = (-sum_k Y_k^2 + sum_{i<j} Theta_ij^2) f via iterated
    numerical Lie derivatives.  On a truncated pi_nu model this recovers
    c_n(0, nu) f up to truncation and step error."""
    h = step if step is not None else 0.05 / (1.0 + f.degree_max())
    gens = la.generators(ctx.n)
    acc = np.zeros_like(f.samples)
    for y in gens.ys:
        acc -= _second_lie(ctx, y, f, h)
    for th in gens.thetas.values():
        acc += _second_lie(ctx, th, f, h)
    return sph.SphericalFunction.from_samples(ctx.model, acc)


def casimir_defect(ctx: RepContext, f: sph.SphericalFunction,
                   step: float | None = None):
    """(scalar estimate, relative residual) of Box f = c f."""
    bf = apply_casimir_numeric(ctx, f, step)
    num = math.fsum(float(bf.coeffs[m] @ f.coeffs[m]) for m in f.coeffs)
    den = math.fsum(float(c @ c) for c in f.coeffs.values())
    c_est = num / den
    res = math.sqrt(max(math.fsum(
        float((bf.coeffs[m] - c_est * f.coeffs[m])
              @ (bf.coeffs[m] - c_est * f.coeffs[m])) for m in f.coeffs), 0.0))
    return c_est, res / math.sqrt(den)


# ---------------------------------------------------------------------------
# Operator matrices (for invariant distributions)
# ---------------------------------------------------------------------------

def _stacked_values(ctx):
    model = ctx.model
    return np.concatenate([model.node_values(m) for m in model.degrees],
                          axis=1)


def basis_degrees(ctx) -> np.ndarray:
    model = ctx.model
    return np.concatenate([np.full(model.dim(m), m) for m in model.degrees])


def transfer_matrix(ctx: RepContext, g: la.GroupElement) -> np.ndarray:
    """L2 matrix T[i,j] = <e_i, pi(g) e_j> over the stacked basis."""
    model = ctx.model
    moved, eh = conformal_action(g.inverse_matrix(), ctx.quad.nodes)
    mult = eh ** (ctx.nu - ctx.rho)
    V = _stacked_values(ctx)
    moved_vals = model.basis_values_all(moved)
    Vp = np.concatenate([moved_vals[m] for m in model.degrees], axis=1)
    return V.T @ ((ctx.quad.weights * mult)[:, None] * Vp)


def lie_derivative_matrix(ctx: RepContext, X: la.AlgebraElement,
                          step: float | None = None) -> np.ndarray:
    """L2 matrix of d pi(X) by Richardson differences of transfer matrices."""
    h = step if step is not None else 0.04 / (1.0 + ctx.m_max)

    def t(tt):
        return transfer_matrix(ctx, la.GroupElement(ctx.n, expm(tt * X.mat)))

    d1 = (t(h) - t(-h)) / (2 * h)
    d2 = (t(h / 2) - t(-h / 2)) / h
    return (4 * d2 - d1) / 3.0


@dataclass
class InvariantDistribution:
    """Dual coefficients of a flow-invariant distribution (truncated)."""

    order_s: float
    coeffs: np.ndarray          # dual coefficients over the stacked basis
    yn_eigenvalue: float
    residual: float
    eigen_residual: float


def invariant_distributions(ctx: RepContext, tolerance: float = 1e-6,
                            step: float | None = None) -> list:
    """Invariant distributions of the unipotent flow on the truncated n=2
    complementary-series model.

    Finds the near-null right singular vectors of the truncated dpi(U)
    transpose in the dual Sobolev-(-s) pairing.  Test functions stop one
    K-type below the truncation: dpi(U) shifts K-types by exactly one, so
    against that test space the equations satisfied by the true
    distributions carry no truncation boundary error.  The Y_n dual action
    restricted to the kernel is then diagonalized (the kernel arrives as an
    arbitrarily rotated pair) and each eigenvector is returned with its
    measured eigenvalue, provided its annihilation residual is below
    tolerance.
    """
    if ctx.n != 2:
        raise ParameterRangeError("invariant distributions: n = 2 model only")
    if not (0 < ctx.nu < 0.5):
        raise ParameterRangeError("need 0 < nu < 1/2")
    if ctx.m_max < 64:
        raise ParameterRangeError("truncation must be >= 64 K-types")
    gens = la.generators(2)
    A = lie_derivative_matrix(ctx, gens.U, step)
    B = lie_derivative_matrix(ctx, gens.Yn, step)
    degs = basis_degrees(ctx)
    omega_dual = np.array([ctx.w(m) * ctx.d(m) for m in degs])
    s_test = ctx.s + 1.0
    omega_test = np.array(
        [sobolev_weight(ctx.n, ctx.nu, s_test, m) * ctx.d(m) for m in degs])
    test = degs <= ctx.m_max - 1
    M = ((A[:, test].T / np.sqrt(omega_test[test])[:, None])
         * np.sqrt(omega_dual)[None, :])
    _, svals, vt = np.linalg.svd(M, full_matrices=True)
    n_null = (M.shape[1] - M.shape[0]) + int(np.sum(svals < tolerance))
    if n_null == 0:
        return []
    xis = vt[M.shape[1] - n_null:, :]                  # rows: scaled kernel
    Ds = (np.sqrt(omega_dual)[None, :] * xis).T        # columns: dual coeffs

    # diagonalize the Y_n dual action on the kernel, pairing restricted to
    # the uncorrupted test rows
    wt = np.where(test, 1.0 / omega_dual, 0.0)
    BD = B.T @ Ds
    G = Ds.T @ (wt[:, None] * Ds)
    T = Ds.T @ (wt[:, None] * BD)
    mu, vec = np.linalg.eig(np.linalg.solve(G, T))
    out = []
    for i in np.argsort(mu.real):
        if abs(mu[i].imag) > 1e-6:
            continue
        D = Ds @ vec[:, i].real
        xi = D / np.sqrt(omega_dual)
        resid = float(np.linalg.norm(M @ xi) / np.linalg.norm(xi))
        if resid > tolerance:
            continue
        r = B.T @ D - mu[i].real * D
        eig_res = math.sqrt(float((r * wt) @ r) / float((D * wt) @ D))
        out.append(InvariantDistribution(
            order_s=ctx.s, coeffs=D / math.sqrt(float((D * wt) @ D)),
            yn_eigenvalue=float(mu[i].real),
            residual=resid, eigen_residual=eig_res))
    return out


# ---------------------------------------------------------------------------
# Restriction block norms and branching sums
# ---------------------------------------------------------------------------

def res_block_norm_formula(n: int, m, l) -> float:
    """Raw Gamma-ratio formula for ||Res_{m,l}||^2_{L2} (uncalibrated
    measure normalization); 0 for parity-forbidden blocks."""
    if isinstance(m, (int, np.integer)) and isinstance(l, (int, np.integer)):
        if (m - l) % 2 == 1:
            return 0.0
    logv = (math.log(2 * m + n - 2) + math.lgamma(n / 2.0)
            + math.lgamma((n + m + l - 2) / 2.0)
            + math.lgamma((m - l + 1) / 2.0)
            - math.lgamma((n - 1) / 2.0) - math.lgamma(0.5)
            - math.lgamma((m - l + 2) / 2.0)
            - math.lgamma((n + m + l - 1) / 2.0))
    return math.exp(logv)


def restriction_block_matrix(ctx: RepContext, m: int, l: int) -> np.ndarray:
    """L2 matrix of P_l . Res on W_m (probability measures both sides)."""
    sub = ctx.model.submodel
    eq = np.concatenate(
        [np.zeros((len(sub.quad.weights), 1)), sub.quad.nodes], axis=1)
    R = ctx.model.basis_values(m, eq)            # N_sub x dim W_m
    Z = sub.node_values(l)                       # N_sub x dim V_l
    return Z.T @ (sub.quad.weights[:, None] * R)


def res_block_norm_numeric(ctx: RepContext, m: int, l: int) -> float:
    """Largest singular value of the restriction block W_m -> V_l (L2)."""
    if ctx.n < 3:
        raise ParameterRangeError("restriction needs n >= 3")
    if 2 * m + 2 > ctx.quad.degree:
        raise QuadratureError(
            f"quadrature degree {ctx.quad.degree} < 2m+2 = {2 * m + 2}")
    M = restriction_block_matrix(ctx, m, abs(l))
    sv = np.linalg.svd(M, compute_uv=False)
    return float(sv[0]) if len(sv) else 0.0


_CALIB_CACHE: dict = {}


def res_calibration(ctx: RepContext) -> float:
    """Measure-normalization constant fixed once per n at m = l = 0:
    calibrated formula := raw formula * calibration matches the
    probability-measure numeric norms (constancy over (m,l) is a test)."""
    if ctx.n not in _CALIB_CACHE:
        num = res_block_norm_numeric(ctx, 0, 0) ** 2
        _CALIB_CACHE[ctx.n] = num / res_block_norm_formula(ctx.n, 0, 0)
    return _CALIB_CACHE[ctx.n]


def sobolev_block_factor(ctx: RepContext, m, l) -> float:
    """(W^s_G, W^s_H)-rescaling of an L2 block norm (squared)."""
    return (ctx.w_flat(l) * ctx.d_flat(l)) / (ctx.w(m) * ctx.d(m))


@dataclass(frozen=True)
class BlockNormTable:
    """||Res_{m,l}|| in the L2, Hilbert and Sobolev scales."""

    n: int
    nu: float
    s: float
    entries: dict      # (m, l) -> (l2, hilbert, sobolev)


def block_norm_table(ctx: RepContext, m_cap: int | None = None) -> BlockNormTable:
    ctx.require_branching_range()
    m_cap = m_cap if m_cap is not None else ctx.m_max
    entries = {}
    for m in range(m_cap + 1):
        for l in range(m + 1):
            if (m - l) % 2 == 1:
                entries[(m, l)] = (0.0, 0.0, 0.0)
                continue
            l2 = res_block_norm_numeric(ctx, m, l)
            hil = l2 * math.sqrt(ctx.d_flat(l) / ctx.d(m))
            sob = hil * math.sqrt(ctx.w_flat(l) / ctx.w(m))
            entries[(m, l)] = (l2, hil, sob)
    return BlockNormTable(n=ctx.n, nu=ctx.nu, s=ctx.s, entries=entries)


@dataclass(frozen=True)
class BranchingSum:
    l: int
    m_cutoff: int
    partial_sum: float
    tail_bound: float
    diverges: bool


def _branching_term(ctx, l, k, calib):
    """Squared Sobolev-scale block norm at m = l + 2k, real k allowed."""
    m = l + 2.0 * k
    val = res_block_norm_formula(ctx.n, m, l) * calib
    return val * sobolev_block_factor(ctx, m, l)


def branching_sum(ctx: RepContext, l: int, m_cutoff: int) -> BranchingSum:
    """sum over m >= |l|, m - l even, m <= cutoff of the squared
    Sobolev-scale block norms, plus an integral-test tail bound.

    For nu <= rho_flat (with s = 0) the series diverges; the tail is then
    infinite and the result is flagged.
    """
    l = abs(int(l))
    calib = res_calibration(ctx)
    K = max((m_cutoff - l) // 2, 0)
    terms = [_branching_term(ctx, l, k, calib) for k in range(K + 1)]
    partial = math.fsum(terms)
    p = 2.0 * (ctx.nu + ctx.s)
    if p <= 1.0:
        return BranchingSum(l=l, m_cutoff=m_cutoff, partial_sum=partial,
                            tail_bound=math.inf, diverges=True)
    # integral test on the continuous extension: finite quadrature window
    # plus an analytic power-law remainder (term ~ k^{-p}, p > 1)
    fn = lambda k: _branching_term(ctx, l, k, calib)
    L = max(4 * K, 4 * l, 2000)
    tail_int, _ = _sciint.quad(fn, K, L, limit=200)
    amp = max(fn(L) * (1 + 2 * L) ** p, fn(2 * L) * (1 + 4 * L) ** p)
    remainder = 1.1 * amp * (1 + 2 * L) ** (1 - p) / (2 * (p - 1))
    tail = fn(K + 1) + tail_int + remainder
    return BranchingSum(l=l, m_cutoff=m_cutoff, partial_sum=partial,
                        tail_bound=tail, diverges=False)


# ---------------------------------------------------------------------------
# Operator-norm identity  ||Res||^2 = sup_l sum_m ||Res_{m,l}||^2
# ---------------------------------------------------------------------------

def embed_h(n: int, h_mat: np.ndarray) -> la.GroupElement:
    """SO(n-1,1) acting on (x_2, ..., x_{n+1}), fixing the equator axis."""
    full = np.eye(n + 1)
    full[1:, 1:] = h_mat
    return la.GroupElement(n, full)


@dataclass(frozen=True)
class OperatorNormReport:
    sup_block_sums: float
    power_iteration: float
    per_l_sums: dict
    rank_one_defect: float
    random_bound_violations: int
    equivariance_defect: float


def operator_norm_identity_check(ctx: RepContext, l_max: int,
                                 m_cutoff: int, seed: int = 0,
                                 n_random: int = 10) -> OperatorNormReport:
    """Compare sup_l of blockwise sums against a direct power-iteration
    estimate of Res between Sobolev-orthonormalized truncated models."""
    ctx.require_branching_range()
    m_cutoff = min(m_cutoff, ctx.m_max)
    model, sub = ctx.model, ctx.model.submodel
    rng = np.random.default_rng(seed)

    # full Sobolev-orthonormal matrix of Res, stacked over degrees
    degs_g = [(m, j) for m in range(m_cutoff + 1) for j in range(model.dim(m))]
    eq = np.concatenate(
        [np.zeros((len(sub.quad.weights), 1)), sub.quad.nodes], axis=1)
    cols = []
    for m in range(m_cutoff + 1):
        R = model.basis_values(m, eq) / math.sqrt(ctx.w(m) * ctx.d(m))
        cols.append(R)
    Rfull = np.concatenate(cols, axis=1)
    rows = []
    for l in range(min(l_max, sub.m_max) + 1):
        Z = sub.node_values(l) * math.sqrt(ctx.w_flat(l) * ctx.d_flat(l))
        rows.append(Z.T @ (sub.quad.weights[:, None] * Rfull))
    Rhat = np.concatenate(rows, axis=0)

    # power iteration on Rhat^T Rhat
    v = rng.normal(size=Rhat.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(200):
        w = Rhat.T @ (Rhat @ v)
        nw = np.linalg.norm(w)
        if nw == 0:
            break
        v = w / nw
        new = math.sqrt(nw)
        if abs(new - est) < 1e-13 * max(est, 1.0):
            est = new
            break
        est = new

    per_l = {}
    for l in range(min(l_max, sub.m_max) + 1):
        per_l[l] = math.fsum(
            res_block_norm_numeric(ctx, m, l) ** 2 * sobolev_block_factor(ctx, m, l)
            for m in range(l, m_cutoff + 1) if (m - l) % 2 == 0)
    sup_sum = max(per_l.values())

    # rank-one sanity: f in a single (m, l) sector
    m0 = min(4, m_cutoff)
    slc = dict(model.block_slices(m0))[2]
    c = np.zeros(model.dim(m0))
    c[slc] = rng.normal(size=slc.stop - slc.start)
    f = sph.SphericalFunction.from_coeffs(model, {m0: c})
    rf = sph.restrict(f)
    got = (math.sqrt(ctx.w_flat(2) * ctx.d_flat(2)) * np.linalg.norm(rf.coeffs[2])
           / ctx.sobolev_norm(f))
    want = res_block_norm_numeric(ctx, m0, 2) * math.sqrt(
        sobolev_block_factor(ctx, m0, 2))
    rank_one_defect = abs(got - want)

    # random band-limited functions never exceed the estimated norm
    sub_ctx = ctx.subcontext()
    violations = 0
    for _ in range(n_random):
        coeffs = {m: rng.normal(size=model.dim(m))
                  for m in range(m_cutoff + 1)}
        f = sph.SphericalFunction.from_coeffs(model, coeffs)
        rn = _flat_sobolev_norm(ctx, sph.restrict(f))
        if rn > max(est, sup_sum ** 0.5) * ctx.sobolev_norm(f) * (1 + 1e-8):
            violations += 1

    # H-equivariance of Res
    gens_h = la.generators(ctx.n - 1)
    hm = expm(0.2 * gens_h.U.mat + 0.1 * gens_h.Yn.mat)
    h_full = embed_h(ctx.n, hm)
    h_sub = la.GroupElement(ctx.n - 1, hm)
    coeffs = {m: rng.normal(size=model.dim(m)) for m in range(min(4, m_cutoff) + 1)}
    f = sph.SphericalFunction.from_coeffs(model, coeffs)
    lhs = sph.restrict(pi_action(ctx, h_full, f))
    rhs = pi_action(sub_ctx, h_sub, sph.restrict(f))
    num = math.sqrt(math.fsum(float((lhs.coeffs[l] - rhs.coeffs[l])
                                    @ (lhs.coeffs[l] - rhs.coeffs[l]))
                              for l in lhs.coeffs))
    den = math.sqrt(math.fsum(float(c @ c) for c in rhs.coeffs.values()))
    equiv = num / max(den, 1e-300)

    return OperatorNormReport(
        sup_block_sums=sup_sum, power_iteration=est ** 2, per_l_sums=per_l,
        rank_one_defect=rank_one_defect,
        random_bound_violations=violations,
        equivariance_defect=equiv)


def _flat_sobolev_norm(ctx, f_sub: sph.SphericalFunction) -> float:
    return math.sqrt(math.fsum(
        ctx.w_flat(l) * ctx.d_flat(l) * float(c @ c)
        for l, c in f_sub.coeffs.items()))
