"""Time-change algebra over an abstract measured-flow interface.

The cocycle/inverse/conjugacy machinery is flow-agnostic; it is exercised
on torus toys (where ergodicity is certifiable) and on group-level
trajectories.  The time-changed flow is realized through the (xi, z)
reparametrization, never by integrating the rescaled vector field, so
sharply varying densities cost nothing in stiffness.

Observables and densities are loadable from a declarative config: a
constant plus cosine terms with frequency vectors, which makes means (and
flow derivatives) exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterRangeError

# ---------------------------------------------------------------------------
# Flows
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FlowSystem:
    """Measure-preserving flow: evolve(x, t), with an optional sampler for
    the invariant measure and an optional batched orbit map
    evolve_times(x, ts) -> (len(ts), dim)."""

    name: str
    dim: int
    evolve: callable
    sampler: callable | None = None     # rng, size -> points
    evolve_times: callable | None = None


def torus_linear_flow(omega) -> FlowSystem:
    """Linear flow x -> x + t omega on the torus R^d / Z^d."""
    omega = np.asarray(omega, dtype=float)

    def evolve(x, t):
        return (np.asarray(x) + t * omega) % 1.0

    def evolve_times(x, ts):
        return (np.asarray(x)[None, :]
                + np.asarray(ts)[:, None] * omega[None, :]) % 1.0

    def sampler(rng, size):
        return rng.random(size=(size, len(omega)))

    return FlowSystem(name="torus-linear", dim=len(omega), evolve=evolve,
                      sampler=sampler, evolve_times=evolve_times)


def torus_twist_flow() -> FlowSystem:
    """Shear flow (x, y) -> (x + t y, y) on T^2: Lebesgue-preserving, with
    polynomial (rate-1) decay of correlations for smooth x-observables."""

    def evolve(p, t):
        p = np.asarray(p)
        out = p.copy()
        out[..., 0] = (p[..., 0] + t * p[..., 1]) % 1.0
        return out

    def evolve_times(p, ts):
        p = np.asarray(p)
        out = np.broadcast_to(p, (len(ts), 2)).copy()
        out[:, 0] = (p[0] + np.asarray(ts) * p[1]) % 1.0
        return out

    def sampler(rng, size):
        return rng.random(size=(size, 2))

    return FlowSystem(name="torus-twist", dim=2, evolve=evolve,
                      sampler=sampler, evolve_times=evolve_times)


def group_unipotent_flow(n: int) -> FlowSystem:
    """u^t left-translation on SO(n,1) matrices (no invariant measure)."""
    from scipy.linalg import expm
    from . import liealg as la
    U = la.generators(n).U.mat

    def evolve(g, t):
        return expm(t * U) @ np.asarray(g)

    return FlowSystem(name=f"so({n},1)-unipotent", dim=(n + 1) ** 2,
                      evolve=evolve, sampler=None)


# ---------------------------------------------------------------------------
# Trig observables from declarative configs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrigObservable:
    """const + sum_k amp_k cos(2 pi freq_k . x + phase_k) on the torus."""

    const: float
    amps: tuple
    freqs: tuple       # tuples of ints
    phases: tuple

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = np.full(x.shape[:-1], self.const)
        for a, k, p in zip(self.amps, self.freqs, self.phases):
            val = val + a * np.cos(2 * np.pi * (x @ np.asarray(k)) + p)
        return val

    @property
    def mean(self) -> float:
        return self.const

    def flow_derivative(self, omega) -> "TrigObservable":
        """Directional derivative along the linear flow with frequency
        vector omega (exact)."""
        omega = np.asarray(omega, dtype=float)
        amps, freqs, phases = [], [], []
        for a, k, p in zip(self.amps, self.freqs, self.phases):
            rate = 2 * np.pi * float(np.asarray(k) @ omega)
            if rate == 0.0:
                continue
            # d/dt a cos(theta) = -a rate sin(theta) = a rate cos(theta + pi/2)
            amps.append(a * rate)
            freqs.append(k)
            phases.append(p + math.pi / 2)
        return TrigObservable(const=0.0, amps=tuple(amps),
                              freqs=tuple(freqs), phases=tuple(phases))

    def bound(self) -> float:
        return abs(self.const) + math.fsum(abs(a) for a in self.amps)


def observable_from_config(cfg) -> TrigObservable:
    """Build a TrigObservable from a dict or JSON text:
    {"const": 1.0, "terms": [{"amp": .., "freq": [..], "phase": ..}, ..]}"""
    if isinstance(cfg, str):
        cfg = json.loads(cfg)
    terms = cfg.get("terms", [])
    return TrigObservable(
        const=float(cfg.get("const", 0.0)),
        amps=tuple(float(t["amp"]) for t in terms),
        freqs=tuple(tuple(int(v) for v in t["freq"]) for t in terms),
        phases=tuple(float(t.get("phase", 0.0)) for t in terms))


# ---------------------------------------------------------------------------
# Time changes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeChange:
    """Positive density tau with mean 1 (enforced by rescaling at
    construction) and certified bounds on tau and 1/tau."""

    tau: callable
    inf_tau: float
    sup_tau: float

    @classmethod
    def from_trig(cls, obs: TrigObservable) -> "TimeChange":
        if obs.mean <= 0:
            raise ParameterRangeError("density must have positive mean")
        scale = 1.0 / obs.mean
        dev = math.fsum(abs(a) for a in obs.amps) * scale
        if dev >= 1.0:
            raise ParameterRangeError(
                f"density not certifiably positive (oscillation {dev} >= 1)")
        fn = lambda x: scale * obs(x)
        return cls(tau=fn, inf_tau=1.0 - dev, sup_tau=1.0 + dev)

    @classmethod
    def from_callable(cls, fn, flow: FlowSystem, rng, n_samples: int = 4096,
                      bounds=None) -> "TimeChange":
        """Mean-1 normalization by Monte Carlo (statistical tolerance)."""
        if flow.sampler is None:
            raise ParameterRangeError("flow has no invariant sampler")
        pts = flow.sampler(rng, n_samples)
        vals = np.asarray([fn(p) for p in pts], dtype=float)
        mean = float(vals.mean())
        if mean <= 0 or vals.min() <= 0:
            raise ParameterRangeError("density must be positive")
        scale = 1.0 / mean
        lo = bounds[0] * scale if bounds else float(vals.min()) * scale * 0.5
        hi = bounds[1] * scale if bounds else float(vals.max()) * scale * 2.0
        return cls(tau=lambda x: scale * fn(x), inf_tau=lo, sup_tau=hi)


_GL_CACHE: dict = {}


def _gl_nodes(deg):
    if deg not in _GL_CACHE:
        _GL_CACHE[deg] = np.polynomial.legendre.leggauss(deg)
    return _GL_CACHE[deg]


def _orbit_values(fn, flow, x, ts):
    if flow.evolve_times is not None:
        pts = flow.evolve_times(x, ts)
        try:
            vals = np.asarray(fn(pts), dtype=float)
            if vals.shape == (len(ts),):
                return vals
        except Exception:
            pass
        return np.array([fn(p) for p in pts], dtype=float)
    return np.array([fn(flow.evolve(x, s)) for s in ts], dtype=float)


def orbit_integral(fn, flow: FlowSystem, x, t: float,
                   tol: float = 1e-10) -> float:
    """int_0^t fn(u^s x) ds: composite Gauss-Legendre on unit-length chunks
    with adaptive order escalation until two consecutive orders agree to
    tol * max(1, |t|); compensated chunk summation (order independent)."""
    if t == 0.0:
        return 0.0
    edges = np.linspace(0.0, t, max(2, int(abs(t)) + 1))
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    budget = tol * max(1.0, abs(t))
    prev = None
    for deg in (12, 20, 32, 52, 84):
        nodes, weights = _gl_nodes(deg)
        ts = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
        vals = _orbit_values(fn, flow, x, ts).reshape(len(mid), deg)
        pieces = vals @ weights
        cur = math.fsum(pieces * half)
        if prev is not None and abs(cur - prev) <= budget:
            return cur
        prev = cur
    return prev


def cocycle_xi(tc: TimeChange, flow: FlowSystem, x, t: float,
               tol: float = 1e-10) -> float:
    """xi(x, t) = int_0^t tau(u^s x) ds by adaptive quadrature."""
    return orbit_integral(tc.tau, flow, x, t, tol)


def inverse_z(tc: TimeChange, flow: FlowSystem, x, t: float,
              tol: float = 1e-10) -> float:
    """z(x, t) solving t = xi(x, z): safeguarded Newton inside the
    bi-Lipschitz bracket [t/sup tau, t/inf tau]."""
    if t == 0.0:
        return 0.0
    vals = sorted((t / tc.sup_tau, t / tc.inf_tau))
    lo, hi = vals[0] - 1e-9, vals[1] + 1e-9
    z = t
    for _ in range(60):
        r = cocycle_xi(tc, flow, x, z) - t
        if abs(r) <= tol:
            return float(z)
        if r > 0:
            hi = min(hi, z)
        else:
            lo = max(lo, z)
        step = r / max(tc.tau(flow.evolve(x, z)), tc.inf_tau)
        z_new = z - step
        if not (lo <= z_new <= hi):
            z_new = 0.5 * (lo + hi)
        z = z_new
    return float(z)


def time_changed_evolve(tc: TimeChange, flow: FlowSystem, x, t: float):
    """phi^{U,tau}_t(x) = u^{z(x,t)} x (same orbit, new parametrization)."""
    return flow.evolve(x, inverse_z(tc, flow, x, t))


# ---------------------------------------------------------------------------
# Transfer-function conjugacy
# ---------------------------------------------------------------------------

def synthetic_pair(tau1: TrigObservable, f: TrigObservable, omega):
    """(tc1, tc2) cohomologous via transfer function f: tau2 = tau1 - Uf.

    Raises if the perturbed density loses positivity."""
    uf = f.flow_derivative(omega)
    tau2 = TrigObservable(
        const=tau1.const,
        amps=tau1.amps + tuple(-a for a in uf.amps),
        freqs=tau1.freqs + uf.freqs,
        phases=tau1.phases + uf.phases)
    return TimeChange.from_trig(tau1), TimeChange.from_trig(tau2)


def psi_conjugacy(tc2: TimeChange, f, flow: FlowSystem, x):
    """psi_f(x) = u^{z_f(x)} x where f(x) = xi_2(x, z_f(x))."""
    fx = float(f(x))
    if fx == 0.0:
        return np.asarray(x)
    return flow.evolve(x, inverse_z(tc2, flow, x, fx))


def conjugacy_defect(tc1: TimeChange, tc2: TimeChange, f, flow: FlowSystem,
                     x, t_grid) -> np.ndarray:
    """|| psi_f(phi^{U,tau1}_t x) - phi^{U,tau2}_t(psi_f x) || over t_grid
    (torus metric)."""
    psi_x = psi_conjugacy(tc2, f, flow, x)
    out = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        lhs = psi_conjugacy(tc2, f, flow, time_changed_evolve(tc1, flow, x, t))
        rhs = time_changed_evolve(tc2, flow, psi_x, t)
        d = np.abs(np.asarray(lhs) - np.asarray(rhs))
        d = np.minimum(d, 1.0 - d)       # torus distance
        out[i] = float(np.max(d))
    return out


# ---------------------------------------------------------------------------
# Correlation decay and ergodic averages
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CorrelationFit:
    D_fit: float | None
    sigma_fit: float | None
    verdict: str            # 'fit', 'no-decay', 'constant'
    correlations: np.ndarray
    t_grid: np.ndarray


def correlation_decay_fit(alpha, flow: FlowSystem, t_grid, n_samples: int,
                          seed: int = 0) -> CorrelationFit:
    """Empirical |<alpha, alpha o u^t> - (int alpha)^2| against t, log-log
    fitted on local maxima of the (possibly oscillating) decay envelope.

    This is an empirical estimator; membership of a density in the
    polynomial-mixing class cannot be certified at desk scale.
    """
    rng = np.random.default_rng(np.random.Philox(seed))
    if flow.sampler is None:
        raise ParameterRangeError("flow has no invariant sampler")
    pts = flow.sampler(rng, n_samples)
    a0 = np.asarray(alpha(pts), dtype=float)
    mean = a0.mean()
    t_grid = np.asarray(t_grid, dtype=float)
    cors = np.empty(len(t_grid))
    for i, t in enumerate(t_grid):
        at = np.asarray(alpha(flow.evolve(pts, t)), dtype=float)
        cors[i] = float(np.mean(a0 * at) - mean * mean)
    ac = np.abs(cors)
    if ac.max() < 1e-12:
        return CorrelationFit(None, None, "constant", cors, t_grid)
    # envelope: local maxima of |C|
    peaks = [i for i in range(1, len(ac) - 1)
             if ac[i] >= ac[i - 1] and ac[i] >= ac[i + 1] and ac[i] > 0]
    if len(peaks) < 3:
        peaks = list(np.argsort(ac)[-5:])
    ts, vs = t_grid[peaks], ac[peaks]
    keep = (ts > 0) & (vs > 0)
    ts, vs = ts[keep], vs[keep]
    if len(ts) < 3 or vs.max() / max(vs.min(), 1e-300) < 3.0:
        return CorrelationFit(None, None, "no-decay", cors, t_grid)
    A = np.vstack([np.log(ts), np.ones_like(ts)]).T
    sol, *_ = np.linalg.lstsq(A, np.log(vs), rcond=None)
    slope, intercept = float(sol[0]), float(sol[1])
    if slope >= -0.05:
        return CorrelationFit(None, None, "no-decay", cors, t_grid)
    return CorrelationFit(D_fit=math.exp(intercept), sigma_fit=-slope,
                          verdict="fit", correlations=cors, t_grid=t_grid)


def ergodic_average(f, flow: FlowSystem, x, T: float,
                    tol: float = 1e-10) -> float:
    """S_{x,T}(f) = (1/T) int_0^T f(u^t x) dt, adaptive quadrature."""
    if T == 0.0:
        return float(f(x))
    return orbit_integral(f, flow, x, T, tol) / T


def cohomology_drift(tc1: TimeChange, tc2: TimeChange, f, flow: FlowSystem,
                     x, T_grid) -> np.ndarray:
    """int_0^T (tau1 - tau2)(u^t x) dt - [f(u^T x) - f(x)] over T_grid.

    Identically ~0 for a cohomologous pair with transfer function f; for a
    mean-mismatched pair it drifts linearly with slope |mean tau1 - tau2|.
    """
    out = np.empty(len(T_grid))
    for i, T in enumerate(T_grid):
        lhs = (orbit_integral(tc1.tau, flow, x, T)
               - orbit_integral(tc2.tau, flow, x, T))
        out[i] = lhs - (float(f(flow.evolve(x, T))) - float(f(x)))
    return out


@dataclass(frozen=True)
class EquiboundednessReport:
    verdict: str                 # per the Gottschalk-Hedlund dichotomy
    sup_norm: float
    slope: float
    norms: np.ndarray
    T_grid: np.ndarray


def gh_equibounded_test(g, flow: FlowSystem, x_samples, T_grid,
                        bound_hint: float | None = None,
                        slope_tol: float = 0.25) -> EquiboundednessReport:
    """Estimate sup_T || int_0^T g o phi_t dt ||_{L2} empirically and
    classify.

    linear-growth requires the growth rate to be consistent with a nonzero
    spatial mean of g (the ergodic theorem); growth without a mean (small
    divisors within the observation window) stays inconclusive.
    """
    T_grid = np.asarray(T_grid, dtype=float)
    x_samples = np.asarray(x_samples, dtype=float)
    norms = np.empty(len(T_grid))
    for i, T in enumerate(T_grid):
        vals = [T * ergodic_average(g, flow, x, T, tol=1e-8)
                for x in x_samples]
        norms[i] = math.sqrt(float(np.mean(np.square(vals))))
    A = np.vstack([T_grid, np.ones_like(T_grid)]).T
    slope = float(np.linalg.lstsq(A, norms, rcond=None)[0][0])
    sup_norm = float(norms.max())
    rel_slope = slope * (T_grid[-1] - T_grid[0]) / max(sup_norm, 1e-12)
    mean_g = float(np.mean([g(x) for x in x_samples]))
    growing = rel_slope > 0.5 and norms[-1] > 2.0 * norms[0]
    if growing and abs(mean_g) > 1e-9 and (
            abs(mean_g) / 3.0 <= abs(slope) <= 3.0 * abs(mean_g)):
        verdict = "linear-growth"
    elif not growing and bound_hint is not None \
            and sup_norm <= 1.05 * bound_hint:
        verdict = "coboundary-consistent"
    elif not growing and norms[-1] <= 1.2 * sup_norm \
            and rel_slope <= slope_tol:
        verdict = "coboundary-consistent"
    else:
        verdict = "inconclusive"
    return EquiboundednessReport(verdict=verdict, sup_norm=sup_norm,
                                 slope=slope, norms=norms, T_grid=T_grid)
