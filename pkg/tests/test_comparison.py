import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from fintime.comparison import (
    DivergentIntegralError,
    MalformedSamplesError,
    barrier_integral,
    barrier_inverse,
    check_comparison,
    check_gronwall_power,
    comparison_solution,
    cumulative_gain,
    settling_time_bound,
)
from fintime.functions import ComparisonNonlinearity, GainFunction, RateSpec
from oracles import barrier_by_quad, euler_fine, piecewise_integral, power_closed_form

SQRT = ComparisonNonlinearity.power(0.5)
UNIT = RateSpec(GainFunction.constant(1.0), SQRT)


# barrier integral -----------------------------------------------------------

def test_barrier_examples():
    assert barrier_integral(SQRT, 1.0) == 2.0
    assert barrier_integral(ComparisonNonlinearity.power(0.75), 16.0) == pytest.approx(8.0, rel=1e-15)
    assert barrier_integral(SQRT, 0.0) == 0.0


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.75, 0.9])
@pytest.mark.parametrize("v", [1e-6, 0.3, 1.0, 16.0])
def test_barrier_quadrature_path_matches_closed_form(alpha, v):
    g = ComparisonNonlinearity.power(alpha)
    exact = barrier_integral(g, v)
    assert barrier_integral(g, v, method="quadrature") == pytest.approx(exact, rel=1e-10)
    assert barrier_integral(g.as_callable(), v) == pytest.approx(exact, rel=1e-10)


def test_barrier_table_against_scipy():
    g = ComparisonNonlinearity.table([0.5, 1.0, 2.0], [0.6, 1.0, 1.5], beta=0.5)
    for v in (0.2, 0.7, 1.5, 3.0):
        assert barrier_integral(g, v) == pytest.approx(barrier_by_quad(g, v), rel=1e-7)


def test_barrier_divergent():
    # g(v) = v is not integrable against 1/g at 0; declaring beta < 1 is a lie
    g = ComparisonNonlinearity.from_callable(lambda v: v, beta=0.99, m=1.0)
    with pytest.raises(DivergentIntegralError):
        barrier_integral(g, 1.0)


def test_barrier_negative_argument():
    with pytest.raises(ValueError):
        barrier_integral(SQRT, -1.0)


@given(st.floats(0.05, 0.95), st.floats(1e-3, 50.0), st.floats(1e-3, 50.0))
def test_barrier_strictly_increasing(alpha, a, b):
    assume(abs(a - b) > 1e-6)
    g = ComparisonNonlinearity.power(alpha)
    lo, hi = sorted([a, b])
    assert barrier_integral(g, lo) < barrier_integral(g, hi)


@given(st.floats(0.1, 0.9), st.floats(1e-3, 10.0))
def test_barrier_inverse_round_trip(alpha, v):
    g = ComparisonNonlinearity.power(alpha).as_callable()
    y = barrier_integral(g, v)
    assert barrier_inverse(g, y) == pytest.approx(v, rel=1e-9)


# cumulative gain ------------------------------------------------------------

def test_cumulative_gain_examples():
    assert cumulative_gain(GainFunction.piecewise([0, 1], [1]), 0, 2) == 1.0
    assert cumulative_gain(GainFunction.exponential(0.2, -0.5), 0, math.inf) == pytest.approx(0.4)
    assert cumulative_gain(GainFunction.constant(3.0), 1.0, 1.0) == 0.0


# settling time --------------------------------------------------------------

def test_settling_examples():
    cert = settling_time_bound(UNIT, 0.0, 1.0)
    assert cert.T_bound == pytest.approx(2.0, abs=1e-12)
    assert cert.G_v0 == 2.0
    zero = settling_time_bound(UNIT, 3.5, 0.0)
    assert zero.T_bound == 3.5 and zero.bounded
    exp_rate = RateSpec(GainFunction.exponential(0.2, -0.5), SQRT)
    assert settling_time_bound(exp_rate, 0.0, 0.01).T_bound == pytest.approx(2 * math.log(2), rel=1e-10)


def test_settling_unbounded_when_tail_too_small():
    exp_rate = RateSpec(GainFunction.exponential(0.2, -0.5), SQRT)
    cert = settling_time_bound(exp_rate, 0.0, 1.0)
    assert not cert.bounded
    assert cert.to_dict()["T_bound"] == "unbounded"
    # the inequality is strict: tail == G is still unbounded
    edge = settling_time_bound(exp_rate, 0.0, 0.04)
    assert not edge.bounded


def test_settling_infimum_on_flat_gain():
    # c vanishes on [1, 3): the cumulative gain reaches G exactly at t = 1
    c = GainFunction.piecewise([0, 1, 3, 10], [1.0, 0.0, 1.0])
    cert = settling_time_bound(RateSpec(c, SQRT), 0.0, 0.25)
    assert cert.T_bound == pytest.approx(1.0, abs=1e-12)


def test_certificate_residual_invariant(rng):
    for _ in range(30):
        edges = np.concatenate([[0.0], np.cumsum(rng.uniform(0.2, 1.0, 5))])
        values = rng.uniform(0.0, 2.0, 5)
        c = GainFunction.piecewise(edges, values)
        rate = RateSpec(c, ComparisonNonlinearity.power(rng.uniform(0.1, 0.9)))
        v0 = rng.uniform(0.0, 1.0)
        cert = settling_time_bound(rate, 0.0, v0)
        if cert.bounded:
            assert c.cumulative(0.0, cert.T_bound) == pytest.approx(cert.G_v0, abs=1e-10)
            assert cert.T_bound >= 0.0
        else:
            assert cert.tail_mass <= cert.G_v0


@given(st.floats(1e-4, 5.0), st.floats(1e-4, 5.0), st.floats(0.1, 0.9))
def test_settling_monotone_in_v0(a, b, alpha):
    rate = RateSpec(GainFunction.constant(0.7), ComparisonNonlinearity.power(alpha))
    lo, hi = sorted([a, b])
    assert settling_time_bound(rate, 0.0, lo).T_bound <= settling_time_bound(rate, 0.0, hi).T_bound


@given(st.floats(0.1, 1.0), st.floats(1e-3, 2.0))
def test_settling_monotone_in_gain(lam, v0):
    base = GainFunction.exponential(1.0, -0.1)
    fast = settling_time_bound(RateSpec(base, SQRT), 0.0, v0)
    slow = settling_time_bound(RateSpec(base.scaled(lam), SQRT), 0.0, v0)
    if slow.bounded:
        assert fast.T_bound <= slow.T_bound + 1e-12


# comparison solution --------------------------------------------------------

def test_comparison_examples():
    assert comparison_solution(UNIT, 0.0, 1.0, 1.0) == pytest.approx(0.25, abs=1e-15)
    assert comparison_solution(UNIT, 0.0, 1.0, 3.0) == 0.0
    assert comparison_solution(UNIT, 0.0, 0.0, 5.0) == 0.0
    with pytest.raises(ValueError):
        comparison_solution(UNIT, 1.0, 1.0, 0.0)


def test_comparison_zero_at_bound_positive_before(rng):
    for _ in range(40):
        rate = RateSpec(GainFunction.exponential(rng.uniform(0.2, 2), rng.uniform(-0.5, 0.5)),
                        ComparisonNonlinearity.power(rng.uniform(0.1, 0.9)))
        v0 = rng.uniform(1e-3, 1.0)
        cert = settling_time_bound(rate, 0.0, v0)
        if not cert.bounded:
            continue
        assert comparison_solution(rate, 0.0, v0, cert.T_bound) <= 1e-6
        assert comparison_solution(rate, 0.0, v0, 0.99 * cert.T_bound) > 0


@given(st.floats(0.1, 0.9), st.floats(0.01, 3.0), st.floats(0, 1), st.floats(0, 1))
def test_semigroup(alpha, v0, u, w):
    rate = RateSpec(GainFunction.exponential(0.8, -0.2), ComparisonNonlinearity.power(alpha))
    s, t = sorted([3 * u, 3 * w])
    direct = comparison_solution(rate, 0.0, v0, t)
    restarted = comparison_solution(rate, s, comparison_solution(rate, 0.0, v0, s), t)
    assert restarted == pytest.approx(direct, abs=1e-7)


def test_general_path_matches_power_closed_form(rng):
    for _ in range(200):
        alpha = rng.uniform(0.1, 0.9)
        edges = np.concatenate([[0.0], np.cumsum(rng.uniform(0.1, 1.0, 4))])
        values = rng.uniform(0.0, 1.5, 4)
        c = GainFunction.piecewise(edges, values)
        v0 = rng.uniform(0.05, 2.0)
        t = rng.uniform(0.0, edges[-1] + 1)
        g = ComparisonNonlinearity.power(alpha).as_callable()
        numeric = comparison_solution(RateSpec(c, g), 0.0, v0, t)
        exact = power_closed_form(alpha, v0, piecewise_integral(edges, values, 0.0, t))
        assert numeric == pytest.approx(exact, rel=1e-7, abs=1e-12)


# Gronwall and comparison checks --------------------------------------------

def _phi_samples(rate, v0, t1=3.0, n=301):
    ts = np.linspace(0.0, t1, n)
    return ts, np.array([comparison_solution(rate, 0.0, v0, t) for t in ts])


def test_gronwall_examples():
    c = GainFunction.constant(1.0)
    ts, phi = _phi_samples(UNIT, 1.0)
    assert check_gronwall_power(ts, phi, c, 0.5)
    bad = check_gronwall_power(ts, np.ones_like(ts), c, 0.5)
    assert not bad and bad.first_violation[0] > 0
    # a uniformly scaled-down phi decays too slowly relative to its own
    # start; the two-sided sample oracle and the checker must agree on that
    scaled = phi * (1 - 1e-3)
    oracle = scaled ** 0.5 - np.maximum(scaled[0] ** 0.5 - 0.5 * ts, 0.0)
    res = check_gronwall_power(ts, scaled, c, 0.5)
    assert oracle.max() > 1e-6 and not res
    assert res.first_violation[0] == ts[np.argmax(oracle > 1e-6)]
    # restarting phi from a smaller value is dominated and passes
    ts2, lower = _phi_samples(UNIT, 1.0 - 1e-3)
    assert check_gronwall_power(ts2, lower, c, 0.5)


def test_gronwall_malformed():
    c = GainFunction.constant(1.0)
    with pytest.raises(MalformedSamplesError):
        check_gronwall_power([0, 2, 1], [1, 1, 1], c, 0.5)
    with pytest.raises(MalformedSamplesError):
        check_gronwall_power([0, 1], [1, -1], c, 0.5)
    with pytest.raises(ValueError):
        check_gronwall_power([0, 1], [1, 1], c, 1.5)


def test_check_comparison_examples():
    ts, phi = _phi_samples(UNIT, 1.0)
    assert check_comparison(ts, phi, UNIT)
    bumped = phi.copy()
    bumped[1:] += 0.1
    res = check_comparison(ts, bumped, UNIT)
    assert not res and res.first_violation[0] == ts[1]


def test_check_comparison_against_euler_with_slack():
    # Euler for a concave-in-time decreasing solution undershoots, so the
    # fine-step samples sit below the true solution of v' = -g(v) - 0.01
    ts, vs = euler_fine(lambda t, v: -math.sqrt(v) - 0.01, 0.0, 1.0, 3.0, 30000)
    assert check_comparison(ts, vs, UNIT)
