import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from lorentzlab import timechange as tch
from lorentzlab.errors import ParameterRangeError

OMEGA = np.array([1.0, 0.5 * (math.sqrt(5) - 1)])


def _flow():
    return tch.torus_linear_flow(OMEGA)


def _tau():
    return tch.observable_from_config({
        "const": 1.0,
        "terms": [{"amp": 0.25, "freq": [1, 0]},
                  {"amp": 0.15, "freq": [0, 1], "phase": 0.7}]})


# --------------------------------------------------------------------------
# flows
# --------------------------------------------------------------------------

def test_flow_property():
    rng = np.random.default_rng(0)
    for flow in (_flow(), tch.torus_twist_flow()):
        for _ in range(20):
            x = rng.random(2)
            s, t = rng.uniform(-5, 5, size=2)
            lhs = flow.evolve(flow.evolve(x, s), t)
            rhs = flow.evolve(x, s + t)
            assert np.abs(lhs - rhs).max() <= 1e-10
        assert np.abs(flow.evolve(x, 0.0) - x).max() == 0.0


def test_group_flow():
    flow = tch.group_unipotent_flow(3)
    g = np.eye(4)
    g1 = flow.evolve(flow.evolve(g, 1.5), 2.5)
    g2 = flow.evolve(g, 4.0)
    assert np.abs(g1 - g2).max() <= 1e-10


# --------------------------------------------------------------------------
# config loading
# --------------------------------------------------------------------------

def test_observable_from_json_text():
    obs = tch.observable_from_config('{"const": 2.0, "terms": []}')
    assert obs.mean == 2.0
    pts = np.random.default_rng(1).random((7, 2))
    assert np.all(obs(pts) == 2.0)


def test_timechange_positivity_guard():
    with pytest.raises(ParameterRangeError):
        tch.TimeChange.from_trig(tch.observable_from_config(
            {"const": 1.0, "terms": [{"amp": 1.5, "freq": [1, 0]}]}))


def test_timechange_from_callable_mean_one():
    # tau == 2 before renormalization: scaled to mean 1
    rng = np.random.default_rng(10)
    tc = tch.TimeChange.from_callable(lambda p: 2.0, _flow(), rng,
                                      n_samples=512, bounds=(2.0, 2.0))
    assert abs(tc.tau(np.array([0.3, 0.4])) - 1.0) <= 1e-12
    assert abs(tc.inf_tau - 1.0) <= 1e-12


# --------------------------------------------------------------------------
# cocycle
# --------------------------------------------------------------------------

def test_cocycle_tau_one():
    one = tch.TimeChange.from_trig(tch.TrigObservable(1.0, (), (), ()))
    x = np.array([0.3, 0.9])
    for t in (5.0, -2.5, 17.0):
        assert_allclose(tch.cocycle_xi(one, _flow(), x, t), t, atol=1e-12)


def test_cocycle_zero_time():
    tc = tch.TimeChange.from_trig(_tau())
    assert tch.cocycle_xi(tc, _flow(), np.array([0.1, 0.2]), 0.0) == 0.0


def test_cocycle_identity():
    tc = tch.TimeChange.from_trig(_tau())
    flow = _flow()
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = rng.random(2)
        t, s = rng.uniform(-8, 8, size=2)
        lhs = tch.cocycle_xi(tc, flow, x, t + s)
        rhs = (tch.cocycle_xi(tc, flow, x, t)
               + tch.cocycle_xi(tc, flow, flow.evolve(x, t), s))
        assert abs(lhs - rhs) <= 1e-8


def test_cocycle_bilipschitz():
    tc = tch.TimeChange.from_trig(_tau())
    flow = _flow()
    x = np.array([0.7, 0.1])
    for t in (0.5, 3.0, 25.0):
        xi = tch.cocycle_xi(tc, flow, x, t)
        assert tc.inf_tau * t <= xi <= tc.sup_tau * t


# --------------------------------------------------------------------------
# inverse
# --------------------------------------------------------------------------

def test_inverse_constant_density():
    # tau == c without renormalization: z = t / c
    tc = tch.TimeChange(tau=lambda p: 2.0, inf_tau=2.0, sup_tau=2.0)
    z = tch.inverse_z(tc, _flow(), np.array([0.2, 0.4]), 3.0)
    assert_allclose(z, 1.5, atol=1e-10)


def test_inverse_roundtrips():
    tc = tch.TimeChange.from_trig(_tau())
    flow = _flow()
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = rng.random(2)
        t = rng.uniform(-30, 30)
        z = tch.inverse_z(tc, flow, x, t)
        assert abs(tch.cocycle_xi(tc, flow, x, z) - t) <= 1e-9
        xi = tch.cocycle_xi(tc, flow, x, t)
        assert abs(tch.inverse_z(tc, flow, x, xi) - t) <= 1e-8


# --------------------------------------------------------------------------
# time-changed flow
# --------------------------------------------------------------------------

def test_evolve_tau_one_is_identity_reparam():
    one = tch.TimeChange.from_trig(tch.TrigObservable(1.0, (), (), ()))
    flow = _flow()
    x = np.array([0.25, 0.6])
    for t in (0.7, 12.0):
        assert np.abs(tch.time_changed_evolve(one, flow, x, t)
                      - flow.evolve(x, t)).max() <= 1e-10


def test_evolve_orbit_equality():
    # the time-changed orbit is the same point set, reparametrized
    tc = tch.TimeChange.from_trig(_tau())
    flow = _flow()
    x = np.array([0.15, 0.85])
    for t in (0.5, 4.0, 21.0):
        pt = tch.time_changed_evolve(tc, flow, x, t)
        z = tch.inverse_z(tc, flow, x, t)
        assert np.abs(pt - flow.evolve(x, z)).max() <= 1e-8


def test_evolve_measure_invariance():
    # Birkhoff average along phi^{U,tau} converges to the mu_tau average
    tau = _tau()
    tc = tch.TimeChange.from_trig(tau)
    flow = _flow()
    g = tch.observable_from_config(
        {"const": 0.3, "terms": [{"amp": 0.2, "freq": [1, 0]}]})
    # int g dmu_tau = const*1 + overlap of the cos(2 pi x) terms
    want = 0.3 + 0.2 * 0.25 * 0.5
    x = np.array([0.4, 0.1])
    T = 2000.0
    zT = tch.inverse_z(tc, flow, x, T)
    got = tch.orbit_integral(lambda p: g(p) * tc.tau(p), flow, x, zT) / T
    assert abs(got - want) <= 5e-3


# --------------------------------------------------------------------------
# transfer conjugacy
# --------------------------------------------------------------------------

def test_conjugacy_identity_for_zero_transfer():
    tau = _tau()
    tc1, tc2 = tch.synthetic_pair(tau, tch.TrigObservable(0.0, (), (), ()),
                                  OMEGA)
    d = tch.conjugacy_defect(tc1, tc2, lambda p: 0.0, _flow(),
                             np.array([0.3, 0.2]), np.linspace(0, 10, 5))
    assert d.max() == 0.0


def test_conjugacy_defect_small():
    tau = _tau()
    f = tch.observable_from_config(
        {"const": 0.0, "terms": [{"amp": 0.05, "freq": [1, 1]}]})
    tc1, tc2 = tch.synthetic_pair(tau, f, OMEGA)
    d = tch.conjugacy_defect(tc1, tc2, f, _flow(), np.array([0.2, 0.55]),
                             np.linspace(0.0, 100.0, 21))
    assert d.max() <= 1e-6
    # stays bounded out to t = 1e3
    far = tch.conjugacy_defect(tc1, tc2, f, _flow(), np.array([0.2, 0.55]),
                               np.array([500.0, 1000.0]))
    assert far.max() <= 1e-6


def test_synthetic_pair_positivity_guard():
    tau = _tau()
    f = tch.observable_from_config(
        {"const": 0.0, "terms": [{"amp": 5.0, "freq": [1, 1]}]})
    with pytest.raises(ParameterRangeError):
        tch.synthetic_pair(tau, f, OMEGA)


def test_mean_mismatch_drift():
    tau = _tau()
    tc1 = tch.TimeChange.from_trig(tau)
    gap = 0.02
    tc2 = tch.TimeChange(tau=lambda p: tc1.tau(p) + gap,
                         inf_tau=tc1.inf_tau + gap,
                         sup_tau=tc1.sup_tau + gap)
    tg = np.linspace(10.0, 200.0, 20)
    drift = tch.cohomology_drift(tc1, tc2, lambda p: 0.0, _flow(),
                                 np.array([0.2, 0.55]), tg)
    A = np.vstack([tg, np.ones_like(tg)]).T
    slope = abs(np.linalg.lstsq(A, drift, rcond=None)[0][0])
    assert abs(slope - gap) <= 0.1 * gap


# --------------------------------------------------------------------------
# correlation decay
# --------------------------------------------------------------------------

def test_correlation_constant_observable():
    fit = tch.correlation_decay_fit(
        lambda p: np.ones(np.asarray(p).shape[:-1]), _flow(),
        np.linspace(0.5, 20, 40), 5000, seed=4)
    assert fit.verdict == "constant"


def test_correlation_twist_rate():
    alpha = tch.observable_from_config(
        {"const": 0.5, "terms": [{"amp": 1.0, "freq": [1, 0]}]})
    fit = tch.correlation_decay_fit(alpha, tch.torus_twist_flow(),
                                    np.linspace(0.5, 60, 240), 200000,
                                    seed=5)
    assert fit.verdict == "fit"
    assert abs(fit.sigma_fit - 1.0) <= 0.2


def test_correlation_rotation_rejected():
    alpha = tch.observable_from_config(
        {"const": 0.5, "terms": [{"amp": 1.0, "freq": [1, 0]}]})
    fit = tch.correlation_decay_fit(alpha, _flow(),
                                    np.linspace(0.5, 60, 240), 50000,
                                    seed=6)
    assert fit.verdict == "no-decay"


# --------------------------------------------------------------------------
# ergodic averages
# --------------------------------------------------------------------------

def test_ergodic_average_constant():
    got = tch.ergodic_average(lambda p: 4.2 * np.ones(np.shape(p)[:-1]),
                              _flow(), np.array([0.1, 0.8]), 13.0)
    assert_allclose(got, 4.2, atol=1e-10)


def test_ergodic_average_coboundary_rate():
    # explicit Fourier solution: each mode contributes <= 2|a| / (rate T)
    f = tch.observable_from_config(
        {"const": 0.0, "terms": [{"amp": 0.4, "freq": [1, 1]},
                                 {"amp": 0.3, "freq": [2, -1]}]})
    flow = _flow()
    C = sum(2 * abs(a) / abs(2 * math.pi * (np.asarray(k) @ OMEGA))
            for a, k in zip(f.amps, f.freqs))
    x = np.array([0.33, 0.77])
    for T in (10.0, 100.0, 1000.0):
        got = abs(tch.ergodic_average(f, flow, x, T))
        assert got <= (C + 1e-9) / T


def test_ergodic_average_linearity():
    flow = _flow()
    x = np.array([0.5, 0.2])
    f1 = tch.observable_from_config(
        {"const": 0.1, "terms": [{"amp": 0.5, "freq": [1, 0]}]})
    f2 = tch.observable_from_config(
        {"const": -0.2, "terms": [{"amp": 0.3, "freq": [0, 1]}]})
    lhs = tch.ergodic_average(lambda p: 2 * f1(p) - 3 * f2(p), flow, x, 7.0)
    rhs = (2 * tch.ergodic_average(f1, flow, x, 7.0)
           - 3 * tch.ergodic_average(f2, flow, x, 7.0))
    assert abs(lhs - rhs) <= 1e-9


# --------------------------------------------------------------------------
# Gottschalk-Hedlund
# --------------------------------------------------------------------------

def test_gh_coboundary():
    f = tch.observable_from_config(
        {"const": 0.0, "terms": [{"amp": 0.4, "freq": [1, 1]},
                                 {"amp": 0.25, "freq": [2, 1]}]})
    g = f.flow_derivative(OMEGA)
    rng = np.random.default_rng(7)
    xs = rng.random((40, 2))
    bound = 2 * math.sqrt(sum(a * a / 2 for a in f.amps))
    rep = tch.gh_equibounded_test(g, _flow(), xs, np.linspace(5, 120, 12),
                                  bound_hint=bound)
    assert rep.verdict == "coboundary-consistent"
    assert rep.sup_norm <= 1.05 * bound


def test_gh_linear_growth():
    g = tch.observable_from_config(
        {"const": 0.2, "terms": [{"amp": 0.4, "freq": [1, 1]}]})
    rng = np.random.default_rng(8)
    xs = rng.random((40, 2))
    rep = tch.gh_equibounded_test(g, _flow(), xs, np.linspace(5, 120, 12))
    assert rep.verdict == "linear-growth"


def test_gh_small_divisor_inconclusive():
    flow = tch.torus_linear_flow([1.0, 0.5000001])
    g = tch.observable_from_config(
        {"const": 0.0, "terms": [{"amp": 0.3, "freq": [1, -2]}]})
    rng = np.random.default_rng(9)
    xs = rng.random((40, 2))
    rep = tch.gh_equibounded_test(g, flow, xs, np.linspace(5, 120, 12))
    assert rep.verdict == "inconclusive"
