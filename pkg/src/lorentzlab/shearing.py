"""Quantitative shearing toolkit: sublevel-interval solvers for the
closeness conditions, effective gaps, the large-interval proposition,
epsilon-block construction/merging, and group-level shearing experiments.

All implied constants are explicit parameters (slack_C, proof_C); defaults
come from the proofs (Vandermonde inverse norms, the l/(l-1) <= 2 step in
the large-interval argument).  Closeness is measured in the Frobenius
metric; every verified conclusion is an exponent statement insensitive to
the bi-Lipschitz class near the identity.

Group-level only: the lattice-shifting branch of the block merging is
represented but always takes the trivial branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from . import liealg as la
from .errors import HolderViolationError, ParameterRangeError

# ---------------------------------------------------------------------------
# Interval families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IntervalFamily:
    """Ordered disjoint closed intervals in [0, inf); the last right
    endpoint may be math.inf (flagged unbounded)."""

    intervals: tuple     # of (l, r) pairs, l <= r, strictly increasing

    def __post_init__(self):
        prev = -math.inf
        for (l, r) in self.intervals:
            if not (l <= r):
                raise ValueError(f"empty interval [{l}, {r}]")
            if l <= prev:
                raise ValueError("intervals must be disjoint and ordered")
            prev = r

    @property
    def unbounded(self) -> bool:
        return bool(self.intervals) and math.isinf(self.intervals[-1][1])

    def measure(self, cap: float | None = None) -> float:
        tot = 0.0
        for (l, r) in self.intervals:
            if cap is not None:
                if l >= cap:
                    break
                r = min(r, cap)
            tot += r - l
        return tot

    def gaps(self) -> list:
        return [self.intervals[i + 1][0] - self.intervals[i][1]
                for i in range(len(self.intervals) - 1)]

    def contains(self, t: float) -> bool:
        return any(l <= t <= r for (l, r) in self.intervals)

    def intersect(self, other: "IntervalFamily") -> "IntervalFamily":
        out = []
        for (a, b) in self.intervals:
            for (c, d) in other.intervals:
                lo, hi = max(a, c), min(b, d)
                if lo <= hi:
                    out.append((lo, hi))
        return IntervalFamily(tuple(sorted(out)))


@dataclass(frozen=True)
class ShearingParams:
    """Explicit constants for the closeness and block machinery.

    gap_exponent is the effective-gap exponent (distinct from the half sum
    of roots); delta = 3*gap_exponent/4 and the admissible measure loss
    sigma_max follow the choices made in the shearing proof.
    """

    eta: float = 0.5
    gap_exponent: float = 0.2
    eps: float = 0.05
    slack_C: float = 1.0
    holder_m: float = 2.0
    theta: float | None = None

    def __post_init__(self):
        if not (0 < self.eta < 1):
            raise ParameterRangeError("eta must be in (0,1)")
        if not (0 < self.gap_exponent < 1):
            raise ParameterRangeError("gap_exponent must be in (0,1)")
        if not (0 < self.eps < 1):
            raise ParameterRangeError("eps must be in (0,1)")
        if self.theta is None:
            object.__setattr__(
                self, "theta", solovay_theta(self.gap_exponent))
        if not (0 < self.theta < 1):
            raise ParameterRangeError("theta must be in (0,1)")

    @property
    def delta(self) -> float:
        return 0.75 * self.gap_exponent

    @property
    def sigma_max(self) -> float:
        return self.gap_exponent / (4.0 + 6.0 * self.gap_exponent)


def xi_exponent(rho: float, k: int) -> float:
    """xi(rho, k) from the gap-merging recursion l_{j+1} <= 3 l_j^{1+rho}:
    each merge divides the usable exponent by (1+rho)."""
    if k < 1:
        raise ValueError("k >= 1")
    return (1.0 + rho) ** (-(k - 1))


# ---------------------------------------------------------------------------
# Sublevel solvers
# ---------------------------------------------------------------------------

def _envelope(t, eps, eta, slack_C):
    return slack_C * np.maximum(eps, np.maximum(t, 0.0) ** (1.0 - eta))


def _bisect(f, a, b, fa, fb):
    # sign change bracketing; endpoint accuracy 1e-10 * max(1, |t|)
    for _ in range(200):
        m = 0.5 * (a + b)
        if (b - a) <= 1e-10 * max(1.0, abs(m)):
            return m
        fm = f(m)
        if fm == 0.0:
            return m
        if (fa < 0) != (fm < 0):
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)


def _sublevel(sq_fn, env_fn, t_cut: float, grid_points: int = 4000,
              focus=()):
    """{t >= 0 : sq_fn(t) <= env_fn(t)^2} as interval list; the region
    beyond t_cut is guaranteed outside.

    focus points get dense logarithmic refinement windows: sublevel
    components cluster around polynomial roots and can be far thinner than
    any global grid."""
    lin = np.linspace(0.0, min(1.0, t_cut), grid_points // 4)
    if t_cut > 1.0:
        geo = np.geomspace(1.0, t_cut, grid_points)
        ts = np.concatenate([lin, geo])
    else:
        ts = lin
    windows = []
    for c in focus:
        if not (0.0 < c < t_cut) or not np.isfinite(c):
            continue
        offs = c * np.geomspace(1e-14, 1.0, 80)
        windows.append(np.clip(c + offs, 0.0, t_cut))
        windows.append(np.clip(c - offs, 0.0, t_cut))
        windows.append(np.array([c]))
    if windows:
        ts = np.concatenate([ts] + windows)
    ts = np.unique(ts)
    f = lambda t: sq_fn(t) - env_fn(t) ** 2
    vals = sq_fn(ts) - env_fn(ts) ** 2
    inside = vals <= 0.0
    out = []
    cur = None
    for i in range(len(ts)):
        if inside[i] and cur is None:
            if i == 0:
                cur = 0.0
            else:
                cur = _bisect(f, ts[i - 1], ts[i], vals[i - 1], vals[i])
        elif not inside[i] and cur is not None:
            right = _bisect(f, ts[i - 1], ts[i], vals[i - 1], vals[i])
            if not out or cur > out[-1][1]:
                out.append((cur, right))
            else:
                out[-1] = (out[-1][0], right)
            cur = None
    if cur is not None:
        out.append((cur, t_cut))
    return out


def power_sublevel_intervals(coeffs, eps: float, eta: float,
                             slack_C: float = 1.0,
                             grid_points: int = 4000) -> IntervalFamily:
    """{t >= 0 : |p(t)| <= slack_C * max(eps, t^{1-eta})} for the
    polynomial p with coefficients coeffs[i] t^i.

    The zero polynomial (and any polynomial of degree 0 below the
    envelope's eventual growth) yields an unbounded family.
    """
    if eps <= 0 or not (0 < eta < 1):
        raise ParameterRangeError("need eps > 0 and eta in (0,1)")
    c = np.asarray(coeffs, dtype=float)
    nz = np.nonzero(np.abs(c) > 0.0)[0]
    if len(nz) == 0:
        return IntervalFamily(((0.0, math.inf),))
    k = int(nz[-1])
    if k == 0:
        # constant polynomial: inside from the point the envelope catches up
        v = abs(c[0])
        if v <= slack_C * eps:
            return IntervalFamily(((0.0, math.inf),))
        t_star = (v / slack_C) ** (1.0 / (1.0 - eta))
        return IntervalFamily(((t_star, math.inf),))
    ak = abs(c[k])
    # beyond t_cut the leading term dominates both the rest and the envelope
    t1 = max((2.0 * k * abs(c[i]) / ak) ** (1.0 / (k - i)) for i in range(k))
    t2 = (2.0 * slack_C / ak) ** (1.0 / (k - 1.0 + eta))
    t_eps = eps ** (1.0 / (1.0 - eta))
    t3 = (2.0 * slack_C * eps / ak) ** (1.0 / k)
    t_cut = 2.0 * max(t1, t2, t_eps, t3, 1.0)
    poly = np.polynomial.Polynomial(c)
    sq = lambda t: poly(t) ** 2
    env = lambda t: _envelope(t, eps, eta, slack_C)
    focus = [float(r.real) for r in np.polynomial.Polynomial(c[:k + 1]).roots()
             if abs(r.imag) < 1e-9 * (1 + abs(r.real)) and r.real > 0]
    if k >= 2:
        focus += [float(r.real) for r in poly.deriv().roots()
                  if abs(r.imag) < 1e-9 * (1 + abs(r.real)) and r.real > 0]
    ivs = _sublevel(sq, env, t_cut, grid_points=grid_points, focus=focus)
    return IntervalFamily(tuple(ivs))


def vector_sublevel_intervals(coeff_rows, bound: float) -> IntervalFamily:
    """{t >= 0 : sqrt(sum_r P_r(t)^2) <= bound} for polynomials P_r."""
    rows = [np.asarray(r, dtype=float) for r in coeff_rows]
    if all(np.abs(r).max() == 0.0 for r in rows if len(r)) or not rows:
        return IntervalFamily(((0.0, math.inf),))
    polys = [np.polynomial.Polynomial(r) for r in rows]
    degs = [int(np.nonzero(np.abs(r) > 0)[0][-1]) if np.abs(r).max() > 0 else 0
            for r in rows]
    kmax = max(degs)
    if kmax == 0:
        v = math.sqrt(sum(float(r[0]) ** 2 for r in rows if len(r)))
        return (IntervalFamily(((0.0, math.inf),)) if v <= bound
                else IntervalFamily(()))
    # crude but safe domination cut
    t_cut = 1.0
    for r, d in zip(rows, degs):
        if d == kmax:
            ak = abs(r[d])
            others = max((2.0 * (kmax + 1) * abs(r[i]) / ak) ** (1.0 / (d - i))
                         for i in range(d)) if d > 0 and np.abs(r[:d]).max() > 0 else 1.0
            t_cut = max(t_cut, 2.0 * others,
                        2.0 * (2.0 * bound / ak) ** (1.0 / d))
    sq = lambda t: sum(p(t) ** 2 for p in polys)
    env = lambda t: bound * np.ones_like(np.asarray(t, dtype=float))
    focus = []
    for p in polys:
        focus += [float(r.real) for r in p.roots()
                  if abs(r.imag) < 1e-9 * (1 + abs(r.real)) and r.real > 0]
    ivs = _sublevel(sq, env, t_cut, focus=focus)
    return IntervalFamily(tuple(ivs))


def so21_closeness_intervals(h2, params: ShearingParams) -> IntervalFamily:
    """Solutions of |-b s^2 + (a-d) s| <= slack_C max(eps, s^{1-eta}) for
    h = [[a, b], [c, d]] close to the identity (at most two intervals)."""
    (a, b), (c, d) = np.asarray(h2)
    eps = params.eps
    if max(abs(b), abs(c), abs(a - 1), abs(d - 1)) >= 1.0:
        raise ParameterRangeError("h is not near the identity")
    fam = power_sublevel_intervals([0.0, a - d, -b], eps, params.eta,
                                   params.slack_C)
    return fam


def vperp_closeness_intervals(weight_coords, eps: float,
                              slack_C: float = 1.0) -> IntervalFamily:
    """{s : ||Ad u^s . v|| <= slack_C eps} for v given by weight-basis
    coordinates (one array b_0..b_vs per irreducible component)."""
    rows = []
    for bcoef in weight_coords:
        bcoef = np.asarray(bcoef, dtype=float)
        vs = len(bcoef) - 1
        for nn in range(vs + 1):
            # coefficient polynomial of v_nn after Ad u^s, degree nn
            poly = np.zeros(nn + 1)
            for i in range(nn + 1):
                poly[nn - i] = bcoef[i] * math.comb(nn, i)
            rows.append(poly)
    return vector_sublevel_intervals(rows, slack_C * eps)


def g_closeness_intervals(wd: la.WeightDecomposition, g: la.GroupElement,
                          params: ShearingParams):
    """Closeness family of g = h exp(v): the pairwise intersection of the
    SO(2,1)-family and the Vperp-family.  Returns (family, h2, coords)."""
    if np.abs(g.mat - np.eye(g.n + 1)).max() >= 1.0:
        raise ParameterRangeError("g is not near the identity")
    h2, _, v = la.so21_factor(wd, g)
    _, coords = la.weight_coordinates(wd, v)
    fam_h = so21_closeness_intervals(h2, params)
    fam_v = vperp_closeness_intervals(coords, params.eps, params.slack_C)
    return fam_h.intersect(fam_v), h2, coords


# ---------------------------------------------------------------------------
# Effective gaps and the large-interval proposition
# ---------------------------------------------------------------------------

def effective_gap(I, J, gap_exponent: float) -> bool:
    """d(I, J) >= min(|I|, |J|)^{1+rho}, inclusive at the boundary."""
    (a, b), (c, d) = I, J
    if c < a:
        (a, b), (c, d) = (c, d), (a, b)
    if c <= b:
        raise ValueError("intervals overlap")
    gap = c - b
    m = min(b - a, d - c)
    return gap >= m ** (1.0 + gap_exponent)


def default_proof_constant(rho: float) -> float:
    """Constant C(rho) in the generation-ratio estimate: the l/(l-1) <= 2
    slack times the (3/4)-power bookkeeping, 2 * (4/3)^{1+3 rho}."""
    return 2.0 * (4.0 / 3.0) ** (1.0 + 3.0 * rho)


def solovay_theta(gap_exponent: float, proof_C: float | None = None,
                  tail_terms: int | None = None) -> float:
    """theta(rho) = prod_{m>=0} (1 + C (3/4)^{m rho})^{-1}, truncated with a
    geometric tail bound below 1e-15 of the log."""
    rho = gap_exponent
    if not (0 < rho < 1):
        raise ParameterRangeError("gap exponent must be in (0,1)")
    C = default_proof_constant(rho) if proof_C is None else proof_C
    if C <= 0:
        raise ParameterRangeError("proof constant must be positive")
    q = 0.75 ** rho
    if tail_terms is None:
        # log-sum tail <= C q^{M+1} / (1-q)
        tail_terms = int(math.log(1e-15 * (1 - q) / C) / math.log(q)) + 2
    logs = math.fsum(-math.log1p(C * q ** m) for m in range(tail_terms))
    return math.exp(logs)


@dataclass(frozen=True)
class SearchResult:
    interval: tuple | None
    violation: str | None
    bad_measure: float
    theta_lambda: float


def large_interval_search(good: IntervalFamily, bad: IntervalFamily,
                          lam: float, gap_exponent: float,
                          theta: float | None = None) -> SearchResult:
    """Find a good interval of length > (3/4) lam, or identify the violated
    hypothesis when the bad measure is below theta*lam and none exists."""
    theta = solovay_theta(gap_exponent) if theta is None else theta
    bad_measure = bad.measure()
    for (l, r) in good.intervals:
        if (r - l) > 0.75 * lam:
            return SearchResult(interval=(l, r), violation=None,
                                bad_measure=bad_measure,
                                theta_lambda=theta * lam)
    if bad_measure >= theta * lam:
        return SearchResult(interval=None,
                            violation="bad measure >= theta*lambda "
                                      "(proposition conclusion holds)",
                            bad_measure=bad_measure,
                            theta_lambda=theta * lam)
    # hypotheses must fail; identify which
    ivs = good.intervals
    for i in range(len(ivs)):
        for j in range(i + 1, len(ivs)):
            if not effective_gap(ivs[i], ivs[j], gap_exponent):
                return SearchResult(
                    interval=None,
                    violation=f"good intervals {i} and {j} lack an "
                              f"effective gap",
                    bad_measure=bad_measure, theta_lambda=theta * lam)
    for i, (l, r) in enumerate(bad.intervals):
        if (r - l) < 1.0:
            return SearchResult(
                interval=None,
                violation=f"bad interval {i} has length {r - l} < 1",
                bad_measure=bad_measure, theta_lambda=theta * lam)
    return SearchResult(
        interval=None,
        violation="no violation found: inconsistent with the proposition",
        bad_measure=bad_measure, theta_lambda=theta * lam)


def random_solovay_partition(rng, gap_exponent: float, lam: float,
                             theta: float | None = None):
    """Random partition of [0, lam] into good/bad intervals satisfying the
    gap and length hypotheses with bad measure < theta*lam.

    Decoration goods are kept at length <= 1 so that every pairwise gap
    requirement reduces to the >= 1 bad-interval length; validity is
    guaranteed by construction.
    """
    theta = solovay_theta(gap_exponent) if theta is None else theta
    budget = theta * lam * rng.uniform(0.05, 0.95)
    if budget < 1.0:
        return IntervalFamily(((0.0, lam),)), IntervalFamily(())
    n_bad = int(rng.integers(1, max(2, min(int(budget), 40))))
    lengths = rng.uniform(1.0, max(1.0 + 1e-9, budget / n_bad), size=n_bad)
    lengths *= min(1.0, (budget * 0.999) / lengths.sum())
    if lengths.min() < 1.0:
        n_bad = int(budget)
        lengths = np.full(n_bad, budget / n_bad * 0.999)
    # dominant good plus small decorations around bad separators
    goods, bads = [], []
    total_bad = float(lengths.sum())
    n_deco = n_bad - 1
    deco = rng.uniform(0.05, 1.0, size=n_deco) if n_deco else np.array([])
    dominant = lam - total_bad - float(deco.sum())
    if dominant <= 0.75 * lam:
        # shrink decorations to keep the dominant interval dominant
        deco *= 0.0
        dominant = lam - total_bad
    side = rng.integers(0, 2)
    pos = 0.0
    if side == 0:
        goods.append((0.0, dominant))
        pos = dominant
        for i in range(n_bad):
            bads.append((pos, pos + lengths[i]))
            pos += lengths[i]
            if i < n_deco and deco[i] > 0:
                goods.append((pos, pos + deco[i]))
                pos += deco[i]
    else:
        for i in range(n_bad):
            bads.append((pos, pos + lengths[i]))
            pos += lengths[i]
            if i < n_deco and deco[i] > 0:
                goods.append((pos, pos + deco[i]))
                pos += deco[i]
        goods.append((pos, lam))
    goods = sorted(goods)
    # absorb rounding into the last interval
    hi = max(max(r for _, r in goods), max((r for _, r in bads), default=0.0))
    if abs(hi - lam) > 1e-9 * lam:
        raise AssertionError("partition does not tile [0, lam]")
    return IntervalFamily(tuple(goods)), IntervalFamily(tuple(sorted(bads)))


def cantor_adversarial_partition(gap_exponent: float, lam: float):
    """Valid partition with every good interval <= (3/4) lam: geometric
    generations with minimal admissible gaps (the proof's worst case)."""
    rho = gap_exponent
    goods, bads = [], []
    pos = 0.0
    size = 0.75 * lam
    while lam - pos > 1.0 and size >= 1e-6:
        size = min(size, lam - pos - 1.0)
        if size <= 0:
            break
        goods.append((pos, pos + size))
        pos += size
        gap = max(1.0, min(size, lam - pos) ** (1.0 + rho))
        gap = min(gap, lam - pos)
        if gap < 1.0:
            break
        bads.append((pos, pos + gap))
        pos += gap
        size = 0.75 * size
    if lam - pos > 0:
        if bads and abs(bads[-1][1] - pos) < 1e-12:
            bads[-1] = (bads[-1][0], lam)
        else:
            bads.append((pos, lam))
    return IntervalFamily(tuple(goods)), IntervalFamily(tuple(bads))


# ---------------------------------------------------------------------------
# Vandermonde coefficient-bound certificate
# ---------------------------------------------------------------------------

def vandermonde_constant(k: int, eta: float) -> float:
    """Certified constant C(k, eta): twice the max-row-sum norm of the
    inverse of M[j, i] = (j/k)^{i-1+eta}."""
    if k < 1:
        raise ValueError("k >= 1")
    M = np.array([[((j + 1) / k) ** (i + eta)
                   for i in range(k)] for j in range(k)])
    return 2.0 * float(np.abs(np.linalg.inv(M)).sum(axis=1).max())


def coefficient_bounds_ok(coeffs, family: IntervalFamily, eta: float,
                          slack_C: float = 1.0,
                          constant: float | None = None) -> bool:
    """Check |v_i| <= slack_C * C(k, eta) * lbar_1^{1-i-eta} for i >= 1."""
    c = np.asarray(coeffs, dtype=float)
    k = len(c) - 1
    if k < 1 or np.abs(c[1:]).max() == 0.0:
        return True
    if not family.intervals:
        return False
    lbar1 = family.intervals[0][1]
    if family.intervals[0][0] > 0.0:
        return False
    if math.isinf(lbar1):
        return False
    C = (vandermonde_constant(k, eta) if constant is None else constant)
    return all(abs(c[i]) <= slack_C * C * lbar1 ** (1.0 - i - eta) + 1e-300
               for i in range(1, k + 1))


# ---------------------------------------------------------------------------
# Epsilon blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EpsilonBlock:
    """Maximal sampled stretch on which two orbits stay eps-close, with the
    factored displacement h2 exp(v) certifying the closeness at the start.

    h2 is the 2x2 SO(2,1)-part, coords the per-component weight-basis
    coordinates of the Vperp-part.
    """

    s_start: float
    s_end: float
    gx: la.GroupElement        # base points at the block start
    gy: la.GroupElement
    s_samples: np.ndarray
    t_samples: np.ndarray
    h2: np.ndarray = None
    coords: tuple = None

    @property
    def length(self) -> float:
        return self.s_end - self.s_start


def conjugate_structural(h2: np.ndarray, coords, s: float, t: float):
    """(h2, coords) of g -> the same data for u^t g u^{-s}.

    u normalizes both the SO(2,1) subgroup and Vperp, so the two parts
    transform independently: the 2x2 part by u2(t) h2 u2(-s), the weight
    coordinates by the binomial adjoint formula.  This avoids the
    catastrophic cancellation of forming u^t g u^{-s} as a matrix product
    at large s.
    """
    a, b = h2[0]
    c, d = h2[1]
    new_h2 = np.array([
        [a - b * s, b],
        [c + t * a - s * d - b * s * t, d + b * t],
    ])
    new_coords = []
    for bcoef in coords:
        bcoef = np.asarray(bcoef, dtype=float)
        vs = len(bcoef) - 1
        out = np.zeros(vs + 1)
        for nn in range(vs + 1):
            out[nn] = sum(bcoef[i] * math.comb(nn, i) * s ** (nn - i)
                          for i in range(nn + 1))
        new_coords.append(out)
    return new_h2, tuple(new_coords)


def structural_family(h2: np.ndarray, coords,
                      params: ShearingParams) -> IntervalFamily:
    """Closeness family of the displacement given by (h2, coords)."""
    fam_h = so21_closeness_intervals(h2, params)
    fam_v = vperp_closeness_intervals(coords, params.eps, params.slack_C)
    return fam_h.intersect(fam_v)


def d_frobenius(m1: np.ndarray, m2: np.ndarray) -> float:
    return float(np.linalg.norm(m1 - m2))


def check_holder(s: np.ndarray, t: np.ndarray, eta: float, m: float,
                 max_pairs: int = 4_000_000):
    """|(t' - t) - (s' - s)| <= (s' - s)^{1-eta} whenever the larger of the
    two increments is >= m.  Raises with the offending index pair."""
    n = len(s)
    stride = max(1, int(n * n / max_pairs))
    idx = np.arange(0, n, 1)
    for off in range(1, n, stride if n * n > max_pairs else 1):
        i = idx[:-off]
        j = idx[off:]
        ds = s[j] - s[i]
        dt = t[j] - t[i]
        mask = np.maximum(ds, dt) >= m
        bad = np.abs(dt - ds) > ds ** (1.0 - eta) + 1e-12
        viol = np.nonzero(mask & bad)[0]
        if len(viol):
            raise HolderViolationError(
                f"Holder inequality fails between samples "
                f"{i[viol[0]]} and {j[viol[0]]}")


def build_blocks(gx: la.GroupElement, gy: la.GroupElement, time_map,
                 sample_times, params: ShearingParams,
                 wd: la.WeightDecomposition | None = None,
                 trivial_time: bool = False) -> list:
    """beta_0: maximal eps-blocks along the sampled orbit pair.

    Block lengths are capped by the first closeness interval of the current
    displacement; each block starts and ends at sample times.  The initial
    displacement is factored once; all conjugates are tracked structurally
    (2x2 part plus weight coordinates), never as large matrix products.
    """
    n = gx.n
    wd = wd or la.sl2_weight_decompose(n)
    s = np.asarray(sample_times, dtype=float)
    t = np.asarray([time_map(v) for v in s], dtype=float)
    if np.any(np.diff(t) < 0):
        raise ValueError("time map must be increasing")
    if not trivial_time:
        check_holder(s, t, params.eta, params.holder_m)
    gens = la.generators(n)
    U = gens.U.mat
    U2 = U @ U       # U^3 = 0: u^s = I + sU + s^2 U^2 / 2 exactly

    def u_power(s):
        return np.eye(n + 1) + s * U + 0.5 * s * s * U2

    disp0 = la.GroupElement(n, gy.mat @ gx.inverse_matrix())
    if d_frobenius(disp0.mat, np.eye(n + 1)) >= params.eps:
        raise ParameterRangeError("initial displacement exceeds eps")
    h2_0, _, v0 = la.so21_factor(wd, disp0)
    _, coords0 = la.weight_coordinates(wd, v0)
    blocks = []
    i = 0
    N = len(s)
    while i < N:
        h2_i, coords_i = conjugate_structural(h2_0, coords0, s[i], t[i])
        if _structural_distance(wd, h2_i, coords_i) >= params.eps:
            i += 1
            continue
        fam = structural_family(h2_i, coords_i, params)
        lbar1 = fam.intervals[0][1] if (fam.intervals
                                        and fam.intervals[0][0] == 0.0) else 0.0
        j = i
        while j + 1 < N and (s[j + 1] - s[i]) <= lbar1:
            h2_j, coords_j = conjugate_structural(
                h2_0, coords0, s[j + 1], t[j + 1])
            if _structural_distance(wd, h2_j, coords_j) >= params.eps:
                break
            j += 1
        blocks.append(EpsilonBlock(
            s_start=s[i], s_end=s[j],
            gx=la.GroupElement(n, u_power(s[i]) @ gx.mat),
            gy=la.GroupElement(n, u_power(t[i]) @ gy.mat),
            s_samples=s[i:j + 1], t_samples=t[i:j + 1],
            h2=h2_i, coords=coords_i))
        i = j + 1
    return blocks


def _structural_distance(wd: la.WeightDecomposition, h2: np.ndarray,
                         coords) -> float:
    """Frobenius distance to the identity of the element with the given
    structural data, reconstructed through small matrices only."""
    n = wd.n
    tr = h2[0, 0] + h2[1, 1]
    if tr <= 0 or np.abs(h2 - np.eye(2)).max() > 0.5:
        return math.inf
    from scipy.linalg import logm as _logm
    x2 = np.real(_logm(h2))
    cx = la.sl2_from_2x2(x2)
    sl2_mat = (cx[0] * wd.sl2_part[0].mat + cx[1] * wd.sl2_part[1].mat
               + cx[2] * wd.sl2_part[2].mat)
    vmat = np.zeros_like(sl2_mat)
    for bcoef, comp in zip(coords, wd.vperp_components):
        for bi, vec in zip(bcoef, comp.vectors):
            vmat += bi * vec.mat
    full = expm(sl2_mat) @ expm(vmat)
    return d_frobenius(full, np.eye(n + 1))


def merge_blocks(blocks: list, params: ShearingParams,
                 wd: la.WeightDecomposition | None = None) -> list:
    """beta_rho: concatenate consecutive blocks whose closeness intervals
    lack an effective gap (the merge test uses the construction's
    l_{k+1} - lbar_k <= lbar_k^{1+2 rho} form); group level, so the
    lattice-shifting branch never fires."""
    if not blocks:
        return []
    n = blocks[0].gx.n
    wd = wd or la.sl2_weight_decompose(n)
    rho2 = 1.0 + 2.0 * params.gap_exponent
    out = []
    i = 0
    while i < len(blocks):
        cur = blocks[i]
        fam = structural_family(cur.h2, cur.coords, params)
        ivs = list(fam.intervals)
        j = i
        k = 0
        while k + 1 < len(ivs):
            lbar_k = ivs[k][1]
            l_next = ivs[k + 1][0]
            if math.isinf(lbar_k) or l_next - lbar_k > lbar_k ** rho2:
                break
            # absorb the beta_0 blocks ending inside the next interval
            j_max = j
            for jj in range(j + 1, len(blocks)):
                rel_end = blocks[jj].s_end - cur.s_start
                if ivs[k + 1][0] <= rel_end <= ivs[k + 1][1]:
                    j_max = jj
                elif rel_end > ivs[k + 1][1]:
                    break
            if j_max == j:
                break
            j = j_max
            k += 1
        if j > i:
            last = blocks[j]
            out.append(EpsilonBlock(
                s_start=cur.s_start, s_end=last.s_end, gx=cur.gx, gy=cur.gy,
                s_samples=np.concatenate([b.s_samples
                                          for b in blocks[i:j + 1]]),
                t_samples=np.concatenate([b.t_samples
                                          for b in blocks[i:j + 1]]),
                h2=cur.h2, coords=cur.coords))
        else:
            out.append(cur)
        i = j + 1
    return out


# ---------------------------------------------------------------------------
# Shearing experiment
# ---------------------------------------------------------------------------

@dataclass
class ShearingRow:
    lam: float
    applicable: bool
    s_lambda: float | None
    entries: dict            # name -> value


@dataclass
class ShearingReport:
    direction: str
    magnitude: float
    rows: list
    sup_exponents: dict      # name -> sup_lambda log|entry| / log lambda
    slopes: dict             # name -> OLS slope of log|entry| vs log lambda
    predictions: dict        # name -> predicted exponent bound


def displacement_element(n: int, direction: str, magnitude: float,
                         wd: la.WeightDecomposition | None = None) -> la.GroupElement:
    """exp(magnitude * X) for the named direction: 'b' (opposite
    unipotent), 'ad' (diagonal), 'u' (flow direction), or 'v0' (top weight
    vector of a highest-weight-2 component)."""
    gens = la.generators(n)
    if direction == "b":
        X = gens.Ut.mat
    elif direction == "ad":
        X = gens.Yn.mat
    elif direction == "u":
        X = gens.U.mat
    elif direction == "v0":
        wd = wd or la.sl2_weight_decompose(n)
        comp = next(c for c in wd.vperp_components if c.varsigma == 2)
        X = comp.vectors[0].mat / np.linalg.norm(comp.vectors[0].mat)
    else:
        raise ValueError(f"unknown direction {direction!r}")
    return la.GroupElement(n, expm(magnitude * X))


def matched_time_map(h2: np.ndarray):
    """Time reparametrization cancelling the growing lower-left entry of
    u^t h u^{-s}: t(s) = s - (c + (a-d)s - b s^2) / (a - b s).

    This is the reparametrization the Holder slack exists to allow; with it
    the eps-blocks extend to the full closeness intervals.  Valid while
    a - b s stays away from 0.
    """
    (a, b), (c, d) = h2

    def tmap(s):
        den = a - b * s
        if den <= 0.25:
            raise ParameterRangeError("matched time map left its chart")
        return s - (c + (a - d) * s - b * s * s) / den

    return tmap


def shearing_experiment(n: int, direction: str, magnitude: float,
                        lambda_grid, params: ShearingParams,
                        samples_per_lambda: int = 300) -> ShearingReport:
    """Group-level verification of the shearing exponents.

    For each lambda, orbits are sampled with the matched Holder time map;
    when a block spanning more than (3/4) lambda exists (the proposition's
    applicability), the factored displacement (s_lambda, h_lambda,
    v_lambda) at its start is recorded.  The verified quantity per entry is
    the pointwise exponent sup_lambda log|entry| / log lambda over the
    applicable lambdas, an O-bound check; an OLS slope is reported
    alongside.
    """
    wd = la.sl2_weight_decompose(n)
    g = displacement_element(n, direction, magnitude, wd)
    gx = la.GroupElement.identity(n)
    h2_0, _, v0 = la.so21_factor(wd, g)
    tmap = matched_time_map(h2_0)
    rows = []
    comp_sizes = [c.varsigma for c in wd.vperp_components]
    for lam in lambda_grid:
        ss = np.unique(np.concatenate([
            np.linspace(0.0, lam, samples_per_lambda),
            np.geomspace(max(lam * 1e-6, 1e-3), lam, samples_per_lambda)]))
        try:
            blocks = build_blocks(gx, g, tmap, ss, params, wd)
            blocks = merge_blocks(blocks, params, wd)
        except (HolderViolationError, ParameterRangeError):
            rows.append(ShearingRow(lam=lam, applicable=False,
                                    s_lambda=None, entries={}))
            continue
        big = next((b for b in blocks if b.length > 0.75 * lam), None)
        if big is None:
            rows.append(ShearingRow(lam=lam, applicable=False,
                                    s_lambda=None, entries={}))
            continue
        h2, coords = big.h2, big.coords
        entries = {
            "b": abs(h2[0, 1]),
            "a_minus_d": abs(h2[0, 0] - h2[1, 1]),
            "c": abs(h2[1, 0]),
        }
        for ci, bc in enumerate(coords):
            vs = comp_sizes[ci]
            for i, val in enumerate(bc):
                entries[f"v{ci}_{i}_of_{vs}"] = abs(float(val))
        rows.append(ShearingRow(lam=lam, applicable=True,
                                s_lambda=big.s_start, entries=entries))

    rho = params.gap_exponent
    predictions = {"b": -(1.0 + 2.0 * rho), "a_minus_d": -2.0 * rho}
    for ci, vs in enumerate(comp_sizes):
        for i in range(vs + 1):
            predictions[f"v{ci}_{i}_of_{vs}"] = \
                -(1.0 + 2.0 * rho) * (vs - i) / 2.0
    sup_exp, slopes = {}, {}
    names = set()
    for r in rows:
        names.update(r.entries)
    for name in names:
        pts = [(r.lam, r.entries[name]) for r in rows
               if r.applicable and r.entries.get(name, 0.0) > 1e-300]
        if not pts:
            continue
        exps = [math.log(v) / math.log(lam) for lam, v in pts if lam > 1.0]
        if exps:
            sup_exp[name] = max(exps)
        if len(pts) >= 2:
            xs = np.log([p[0] for p in pts])
            ys = np.log([p[1] for p in pts])
            A = np.vstack([xs, np.ones_like(xs)]).T
            slopes[name] = float(np.linalg.lstsq(A, ys, rcond=None)[0][0])
    return ShearingReport(direction=direction, magnitude=magnitude,
                          rows=rows, sup_exponents=sup_exp, slopes=slopes,
                          predictions=predictions)
