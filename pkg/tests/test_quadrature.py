import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ihoc.errors import BudgetExceeded, Divergent, NonFinite
from ihoc.quadrature import (exponential_tail, integrate_finite, integrate_semi_infinite,
                             power_tail)


def test_zero_integrand_finite():
    r = integrate_finite(lambda t: np.zeros_like(t), 0.0, 1.0)
    assert r.value == 0.0 and r.abs_error_estimate == 0.0


def test_exponential_on_truncated_interval():
    r = integrate_finite(lambda t: np.exp(-2 * t), 0.0, 40.0, 1e-12)
    assert abs(r.value - 0.5) < 1e-10
    assert r.abs_error_estimate <= 1e-10


def test_weibull_density_against_antiderivative():
    # d/dt [-(1/k) e^{-t^k}] = t^{k-1} e^{-t^k}
    k, eps = 0.5, 1e-12
    exact = (math.exp(-eps**k) - math.exp(-40.0**k)) / k
    r = integrate_finite(lambda t: t ** (k - 1) * np.exp(-t**k), eps, 40.0, 1e-10)
    assert abs(r.value - exact) < 1e-6
    assert abs(exact - 1.99641447) < 1e-8


def test_nan_inside_interval_is_reported():
    with pytest.raises(NonFinite):
        integrate_finite(lambda t: np.where(t > 0.5, np.nan, 1.0), 0.0, 1.0)


def test_budget_exceeded():
    with pytest.raises(BudgetExceeded):
        integrate_finite(lambda t: np.sin(1.0 / np.maximum(t, 1e-300)), 0.0, 1.0, 1e-14, max_evals=200)


def test_certified_exponential_tail():
    r = integrate_semi_infinite(lambda t: np.exp(-2 * t), 1e-10, exponential_tail(1.0, 2.0))
    assert abs(r.value - 0.5) < 1e-10
    assert r.certified
    assert r.tail_bound <= 1e-10


def test_power_law_without_certifier():
    r = integrate_semi_infinite(lambda t: (1 + t) ** -2.0, 1e-8)
    assert abs(r.value - 1.0) < 1e-8
    assert not r.certified


def test_power_tail_certifier():
    r = integrate_semi_infinite(lambda t: (1 + t) ** -3.0, 1e-9, power_tail(1.0, 3.0))
    assert abs(r.value - 0.5) < 1e-9
    assert r.certified


@pytest.mark.parametrize("a", [0.0, 20.0, 400.0])
def test_offset_start(a):
    r = integrate_semi_infinite(lambda t: (1 + t) ** -2.0, 1e-10, a=a)
    assert abs(r.value - 1.0 / (1.0 + a)) < 1e-10


@pytest.mark.parametrize("g", [lambda t: np.exp(0.1 * t), lambda t: 1.0 / (1.0 + t),
                               lambda t: (1.0 + t) ** -0.5])
def test_divergent_integrands(g):
    with pytest.raises(Divergent):
        integrate_semi_infinite(g, 1e-9)


def test_singular_left_endpoint():
    k = 0.5
    r = integrate_semi_infinite(lambda t: t ** (k - 1) * np.exp(-t**k), 1e-9)
    assert abs(r.value - 1.0 / k) < 1e-7


def test_error_fields_non_negative():
    r = integrate_semi_infinite(lambda t: np.exp(-t), 1e-9)
    assert r.abs_error_estimate >= 0 and r.tail_bound >= 0 and r.truncation_T > 0


def test_value_monotone_in_truncation():
    g = lambda t: np.exp(-0.5 * t)  # noqa: E731
    vals = [integrate_finite(g, 0.0, T, 1e-12).value for T in (5, 10, 20, 40)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_certified_tail_bounds_later_truncations():
    cert = exponential_tail(1.0, 1.5)
    g = lambda t: np.exp(-1.5 * t)  # noqa: E731
    T1 = 8.0
    v1 = integrate_finite(g, 0.0, T1, 1e-13).value
    for T2 in (10.0, 16.0, 30.0):
        v2 = integrate_finite(g, 0.0, T2, 1e-13).value
        assert abs(v2 - v1) <= cert(T1) + 1e-13


rates = st.floats(0.2, 5.0)
coefs = st.floats(-3.0, 3.0)


@settings(max_examples=40, deadline=None)
@given(r1=rates, r2=rates, a=coefs, b=coefs)
def test_linearity_on_exponential_mixtures(r1, r2, a, b):
    g1 = lambda t: np.exp(-r1 * t)  # noqa: E731
    g2 = lambda t: np.exp(-r2 * t)  # noqa: E731
    i1 = integrate_semi_infinite(g1, 1e-10)
    i2 = integrate_semi_infinite(g2, 1e-10)
    mix = integrate_semi_infinite(lambda t: a * g1(t) + b * g2(t), 1e-10)
    budget = 2 * (i1.total_error * abs(a) + i2.total_error * abs(b) + mix.total_error) + 1e-12
    assert abs(mix.value - (a * i1.value + b * i2.value)) <= budget
    assert abs(mix.value - (a / r1 + b / r2)) < 1e-8
