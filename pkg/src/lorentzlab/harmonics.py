"""Special functions and spherical-harmonic analysis on S^{n-1}.

Basis construction
------------------
Degree-m harmonics on S^{n-1} are built in separated form: with t = x_1
(the equator coordinate of the restriction map f -> f|_{x_1=0}) and
y = (x_2, ..., x_n),

    e_{m,l,j}(x) = G^{lam_l}_{m-l}(t, |x|) * h_{l,j}(y),    lam_l = l + (n-2)/2,

where h_{l,j} runs over the degree-l harmonic basis of S^{n-2} evaluated on
the ambient coordinates y, and G^{lam}_k(t, r) = r^k C^lam_k(t/r) is the
homogenized Gegenbauer polynomial, evaluated by its three-term recurrence
(no coefficient cancellation, stable up to high degree).  Each element is a
degree-m harmonic polynomial exactly (classical separation of variables);
only the normalization is floating point.  For n = 2 the basis is
{Re z^m, Im z^m}, evaluated through complex powers.

The column blocks for fixed l realize the K-flat-irreducible subspaces of
W_m, so restriction to the equator is block diagonal by construction.

All spheres carry the probability measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import InvalidDimensionError, PoleError, QuadratureError

# ---------------------------------------------------------------------------
# Gamma machinery
# ---------------------------------------------------------------------------


def log_gamma(x: float) -> float:
    """log Gamma(x) for x > 0."""
    if x <= 0:
        raise PoleError(f"log_gamma needs a positive argument, got {x}")
    return math.lgamma(x)


def pochhammer(a: float, m: int) -> float:
    """(a)_m = a (a+1) ... (a+m-1), via log-Gamma with sign tracking."""
    if m < 0:
        raise ValueError("pochhammer needs m >= 0")
    if m == 0:
        return 1.0
    if a > 0:
        return math.exp(math.lgamma(a + m) - math.lgamma(a))
    factors = a + np.arange(m)
    if np.any(factors == 0.0):
        return 0.0
    sign = -1.0 if np.sum(factors < 0) % 2 else 1.0
    return sign * math.exp(math.fsum(np.log(np.abs(factors))))


def gauss_2f1_terminating(a: float, b: float, c: float, x) -> float:
    """Terminating Gauss hypergeometric sum F(a, b, c, x).

    One of a, b must be a nonpositive integer; raises PoleError if c hits a
    nonpositive integer before the series terminates.  Compensated
    summation, exact term recurrence.
    """
    ks = []
    for p in (a, b):
        if p <= 0 and abs(p - round(p)) < 1e-12:
            ks.append(int(-round(p)))
    if not ks:
        raise ValueError("series does not terminate: neither a nor b is a "
                         "nonpositive integer")
    K = min(ks)
    if c <= 0 and abs(c - round(c)) < 1e-12 and -round(c) < K:
        raise PoleError(f"c={c} hits a pole before termination at k={K}")
    x = np.asarray(x, dtype=float)
    term = np.ones_like(x)
    terms = [term]
    for k in range(K):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1.0))) * x
        terms.append(term)
    if x.ndim == 0:
        return math.fsum(float(t) for t in terms)
    return np.sum(terms, axis=0)


def phi_poly(n: int, m: int, x):
    """Zonal polynomial phi_m^n(x) = cos^m(xi) F(-m/2, -(m-1)/2, (n-1)/2,
    -tan^2 xi) with x = cos xi, extended continuously to x = 0.

    Normalized so phi_m^n(1) = 1; a polynomial of degree m on [-1, 1].
    """
    if n < 2 or m < 0:
        raise InvalidDimensionError(f"need n >= 2, m >= 0, got {(n, m)}")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise ValueError("argument outside [-1, 1]")
    a, b, c = -m / 2.0, -(m - 1) / 2.0, (n - 1) / 2.0
    K = m // 2
    # cos^m F(...,-tan^2) = sum_k t_k x^{m-2k} (x^2-1)^k, t_0 = 1
    acc = np.zeros_like(x)
    term = np.ones_like(x) * x ** m if m else np.ones_like(x)
    acc += term
    tk = 1.0
    w = x * x - 1.0
    for k in range(K):
        tk *= (a + k) * (b + k) / ((c + k) * (k + 1.0))
        power = m - 2 * (k + 1)
        acc = acc + tk * (x ** power) * (w ** (k + 1))
    return acc if acc.ndim else float(acc)


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes/weights on S^{n-1} integrating polynomials of total degree
    <= degree exactly against the probability measure."""

    n: int
    degree: int
    nodes: np.ndarray       # (N, n) unit vectors
    weights: np.ndarray     # (N,) positive, summing to 1


def sphere_monomial_integral(n: int, alpha) -> float:
    """Exact integral of prod x_i^{alpha_i} over S^{n-1}, probability measure."""
    alpha = tuple(int(a) for a in alpha)
    if len(alpha) != n:
        raise ValueError("exponent tuple length must equal n")
    if any(a % 2 for a in alpha):
        return 0.0
    beta = [a // 2 for a in alpha]
    s = sum(beta)
    logv = (math.fsum(math.lgamma(b + 0.5) for b in beta)
            + math.lgamma(n / 2.0)
            - (n / 2.0) * math.log(math.pi)
            - math.lgamma(s + n / 2.0))
    return math.exp(logv)


def _verify_quadrature(rule: QuadratureRule, n_checks: int = 160):
    """Spot-verify exactness on monomials (exhaustive at low degree)."""
    n, d = rule.n, rule.degree
    rng = np.random.default_rng(12345 + 1000 * n + d)
    alphas = []
    if n == 2:
        count = (d + 1) * (d + 2) // 2
    else:
        count = math.comb(d + n, n)
    if count <= n_checks:
        # all exponent multi-indices with |alpha| <= d
        def rec(prefix, rem, k):
            if k == 1:
                for a in range(rem + 1):
                    alphas.append(prefix + (a,))
                return
            for a in range(rem + 1):
                rec(prefix + (a,), rem - a, k - 1)
        rec((), d, n)
    else:
        for _ in range(n_checks):
            deg = int(rng.integers(0, d + 1))
            cuts = np.sort(rng.integers(0, deg + 1, size=n - 1))
            parts = np.diff(np.concatenate([[0], cuts, [deg]]))
            alphas.append(tuple(int(p) for p in parts))
    for alpha in alphas:
        vals = np.prod(rule.nodes ** np.asarray(alpha)[None, :], axis=1)
        got = math.fsum(rule.weights * vals)
        want = sphere_monomial_integral(n, alpha)
        if abs(got - want) > 1e-12:
            raise QuadratureError(
                f"monomial {alpha}: quadrature {got} vs exact {want}")


_QUAD_CACHE: dict = {}


def sphere_quadrature(n: int, degree: int, verify: bool = True) -> QuadratureRule:
    """Product Gauss-Jacobi (polar coordinate x_1) x recursive sub-sphere rule."""
    if n < 2:
        raise InvalidDimensionError("spheres S^{n-1} need n >= 2")
    if degree < 1:
        raise ValueError("degree must be >= 1")
    key = (n, degree)
    if key in _QUAD_CACHE:
        return _QUAD_CACHE[key]
    if n == 2:
        M = degree + 1
        phi = 2.0 * np.pi * np.arange(M) / M
        nodes = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        weights = np.full(M, 1.0 / M)
    else:
        p = (degree + 2) // 2
        a = (n - 3) / 2.0
        t, wt = roots_jacobi(p, a, a)
        wt = wt / wt.sum()
        sub = sphere_quadrature(n - 1, degree, verify=False)
        r = np.sqrt(np.maximum(1.0 - t * t, 0.0))
        nodes = np.empty((p * len(sub.weights), n))
        weights = np.empty(p * len(sub.weights))
        for i in range(p):
            sl = slice(i * len(sub.weights), (i + 1) * len(sub.weights))
            nodes[sl, 0] = t[i]
            nodes[sl, 1:] = r[i] * sub.nodes
            weights[sl] = wt[i] * sub.weights
    rule = QuadratureRule(n=n, degree=degree, nodes=nodes, weights=weights)
    if verify:
        _verify_quadrature(rule)
    _QUAD_CACHE[key] = rule
    return rule


def integrate(values, rule: QuadratureRule) -> float:
    """Compensated quadrature sum (order independent)."""
    return math.fsum(np.asarray(values) * rule.weights)


# ---------------------------------------------------------------------------
# Harmonic basis evaluation (raw, un-normalized)
# ---------------------------------------------------------------------------

def _raw_basis_values(n: int, m_max: int, pts: np.ndarray) -> dict:
    """dict m -> (N, dim W_m) matrix of the separated harmonic basis,
    evaluated ambiently (pts need not be unit vectors)."""
    N = pts.shape[0]
    out = {}
    if n == 2:
        z = pts[:, 0] + 1j * pts[:, 1]
        zp = np.ones(N, dtype=complex)
        out[0] = np.ones((N, 1))
        for m in range(1, m_max + 1):
            zp = zp * z if m > 1 else z.copy()
            out[m] = np.stack([zp.real, zp.imag], axis=1)
        return out
    sub = _raw_basis_values(n - 1, m_max, pts[:, 1:])
    rho2 = np.sum(pts * pts, axis=1)
    t = pts[:, 0]
    blocks = {m: [] for m in range(m_max + 1)}
    for l in range(m_max + 1):
        lam = l + (n - 2) / 2.0
        g_prev = np.zeros(N)
        g = np.ones(N)
        for k in range(0, m_max - l + 1):
            if k > 0:
                g_next = (2.0 * (k + lam - 1.0) * t * g
                          - (k + 2.0 * lam - 2.0) * rho2 * g_prev) / k
                g_prev, g = g, g_next
            blocks[l + k].append(g[:, None] * sub[l])
    for m in range(m_max + 1):
        out[m] = np.concatenate(blocks[m], axis=1)
    return out


def _block_slices(n: int, m: int):
    """l-sector column slices of the degree-m basis: list of (l, slice)."""
    if n == 2:
        return [(m, slice(0, 1 if m == 0 else 2))]
    start, out = 0, []
    for l in range(m + 1):
        d = harmonic_dim(n - 1, l)
        out.append((l, slice(start, start + d)))
        start += d
    return out


def harmonic_dim(n: int, m: int) -> int:
    """dim W_m on S^{n-1}."""
    if n == 2:
        return 1 if m == 0 else 2
    if m == 0:
        return 1
    return (math.comb(m + n - 1, n - 1) - math.comb(m + n - 3, n - 1)
            if m >= 2 else n)


# ---------------------------------------------------------------------------
# Sphere model: quadrature + orthonormalized bases + transforms
# ---------------------------------------------------------------------------

class SphereModel:
    """Quadrature rule plus orthonormal harmonic bases up to m_max."""

    def __init__(self, n: int, m_max: int, quad_degree: int | None = None):
        if n < 2:
            raise InvalidDimensionError("need n >= 2")
        self.n = n
        self.m_max = m_max
        self.quad = sphere_quadrature(n, quad_degree or (2 * m_max + 4))
        raw = _raw_basis_values(n, m_max, self.quad.nodes)
        self._colscale = {}
        self._node_values = {}
        w = self.quad.weights
        for m, V in raw.items():
            nrm = np.sqrt(np.einsum("ij,ij->j", V * w[:, None], V))
            if np.any(nrm < 1e-13):
                raise QuadratureError(f"degenerate basis column at degree {m}")
            self._colscale[m] = 1.0 / nrm
            self._node_values[m] = V * self._colscale[m][None, :]
        self._sub = None

    @property
    def degrees(self):
        return range(self.m_max + 1)

    def dim(self, m: int) -> int:
        return self._node_values[m].shape[1]

    @property
    def submodel(self) -> "SphereModel":
        """Model of the equator sphere S^{n-2} with matching truncation."""
        if self.n < 3:
            raise InvalidDimensionError("S^0 has no model")
        if self._sub is None:
            self._sub = SphereModel(self.n - 1, self.m_max, self.quad.degree)
        return self._sub

    def node_values(self, m: int) -> np.ndarray:
        return self._node_values[m]

    def basis_values(self, m: int, points: np.ndarray) -> np.ndarray:
        """Orthonormal degree-m basis at arbitrary (ambient) points."""
        raw = _raw_basis_values(self.n, m, np.asarray(points, dtype=float))
        return raw[m] * self._colscale[m][None, :]

    def basis_values_all(self, points: np.ndarray) -> dict:
        raw = _raw_basis_values(self.n, self.m_max,
                                np.asarray(points, dtype=float))
        return {m: raw[m] * self._colscale[m][None, :] for m in self.degrees}

    def block_slices(self, m: int):
        return _block_slices(self.n, m)

    # -- transforms ---------------------------------------------------------

    def analyze(self, samples: np.ndarray) -> dict:
        """Weighted projections onto each orthonormal basis."""
        ws = self.quad.weights * samples
        return {m: self._node_values[m].T @ ws for m in self.degrees}

    def synthesize(self, coeffs: dict, points: np.ndarray | None = None):
        if points is None:
            vals = {m: self._node_values[m] for m in coeffs}
        else:
            vals = {m: self.basis_values(m, points) for m in coeffs}
        N = next(iter(vals.values())).shape[0]
        out = np.zeros(N)
        for m, c in coeffs.items():
            out += vals[m] @ c
        return out


_MODEL_CACHE: dict = {}


def get_sphere_model(n: int, m_max: int, quad_degree: int | None = None) -> SphereModel:
    key = (n, m_max, quad_degree)
    if key not in _MODEL_CACHE:
        _MODEL_CACHE[key] = SphereModel(n, m_max, quad_degree)
    return _MODEL_CACHE[key]


def harmonic_basis(n: int, m: int) -> np.ndarray:
    """Orthonormal basis of W_m as a (nodes, dim) value matrix at the nodes
    of a degree-(2m+4) quadrature rule (see get_sphere_model for reuse)."""
    return get_sphere_model(n, m).node_values(m)


# ---------------------------------------------------------------------------
# Spherical functions
# ---------------------------------------------------------------------------

@dataclass
class SphericalFunction:
    """Function on S^{n-1}: quadrature samples + harmonic coefficients."""

    model: SphereModel
    coeffs: dict
    samples: np.ndarray
    leakage: float = 0.0     # residual mass beyond the truncation

    @property
    def n(self) -> int:
        return self.model.n

    @classmethod
    def from_samples(cls, model: SphereModel, samples) -> "SphericalFunction":
        samples = np.asarray(samples, dtype=float)
        coeffs = model.analyze(samples)
        recon = model.synthesize(coeffs)
        nrm = math.sqrt(max(integrate(samples * samples, model.quad), 0.0))
        res = math.sqrt(max(integrate((samples - recon) ** 2, model.quad), 0.0))
        return cls(model=model, coeffs=coeffs, samples=samples,
                   leakage=res / max(nrm, 1e-300))

    @classmethod
    def from_coeffs(cls, model: SphereModel, coeffs: dict) -> "SphericalFunction":
        coeffs = {m: np.asarray(c, dtype=float) for m, c in coeffs.items()}
        full = {m: coeffs.get(m, np.zeros(model.dim(m))) for m in model.degrees}
        return cls(model=model, coeffs=full, samples=model.synthesize(full))

    @classmethod
    def from_callable(cls, model: SphereModel, fn) -> "SphericalFunction":
        return cls.from_samples(model, fn(model.quad.nodes))

    def norm_l2(self) -> float:
        return math.sqrt(math.fsum(
            float(c @ c) for c in self.coeffs.values()))

    def degree_max(self) -> int:
        degs = [m for m, c in self.coeffs.items() if np.abs(c).max() > 1e-13]
        return max(degs) if degs else 0

    def evaluate(self, points) -> np.ndarray:
        return self.model.synthesize(self.coeffs, np.asarray(points))


def restrict(f: SphericalFunction) -> SphericalFunction:
    """Equator restriction f -> f|_{x_1 = 0}, expanded on S^{n-2}."""
    model = f.model
    if model.n < 3:
        raise InvalidDimensionError("restriction needs n >= 3")
    sub = model.submodel
    eq = np.concatenate([np.zeros((len(sub.quad.weights), 1)), sub.quad.nodes],
                        axis=1)
    return SphericalFunction.from_samples(sub, f.evaluate(eq))


def embed_vtilde(h: SphericalFunction, m: int,
                 model: SphereModel) -> SphericalFunction:
    """Lift h in V_l (degree-l harmonics of S^{n-2}) into W_m on S^{n-1} by
    h(x_2,...,x_n) * phi^{n+2l}_{m-l}(x_1).

    The phi index pair is the one that actually lands in W_m (with
    n' = n + 2l the Gegenbauer index matches the separated harmonic basis);
    membership is verified and the projection residual stored on the result.
    """
    l = h.degree_max()
    if l > m:
        raise ValueError(f"need |l| <= m, got l={l} > m={m}")
    if (m - l) % 2:
        raise ValueError(f"parity violation: m - l = {m - l} is odd")
    pts = model.quad.nodes
    hvals = model.submodel.synthesize({l: h.coeffs[l]}, pts[:, 1:])
    vals = hvals * phi_poly(model.n + 2 * l, m - l, pts[:, 0])
    proj = {m: model.node_values(m).T @ (model.quad.weights * vals)}
    out = SphericalFunction.from_coeffs(model, proj)
    nrm = math.sqrt(max(integrate(vals * vals, model.quad), 1e-300))
    res = math.sqrt(max(integrate((vals - out.samples) ** 2, model.quad), 0.0))
    out.leakage = res / nrm
    return out
