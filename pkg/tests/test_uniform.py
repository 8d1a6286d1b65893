import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackedge.equilibrium import closed_form_uniform
from stackedge.model import MarketParams, PriceSchedule, esp_profit, reward_coefficient
from stackedge.uniform import (optimize_uniform, profit_derivative_uniform,
                               profit_second_derivative_uniform,
                               reduced_profit_uniform)

from conftest import random_instance

A200 = 13976.6861003131415041889535275
# (100 - 0.6) / 100 * 99/100 * a(200), exact decimal arithmetic
SYMMETRIC_PROFIT = 13753.8977238741500286121816083


def test_reduced_profit_symmetric_value(params):
    assert reduced_profit_uniform(100.0, [200.0] * 100, params) == pytest.approx(
        SYMMETRIC_PROFIT, rel=1e-13)


def test_zero_profit_at_unit_cost(params, rng):
    t = random_instance(rng)
    assert reduced_profit_uniform(params.unit_cost, t, params) == 0.0
    assert reduced_profit_uniform(0.5 * params.unit_cost, t, params) < 0


def test_limit_is_harmonic_capacity(params, rng):
    t = random_instance(rng)
    limit = (t.size - 1) / np.sum(1.0 / reward_coefficient(t, params))
    assert reduced_profit_uniform(1e12, t, params) == pytest.approx(limit, rel=1e-12)


def test_matches_profit_of_closed_form(params, rng):
    for _ in range(30):
        t = random_instance(rng)
        p = float(rng.uniform(1, 100))
        x = closed_form_uniform(t, p, params).demands
        direct = esp_profit(x, PriceSchedule.uniform(p, t.size), params)
        assert reduced_profit_uniform(p, t, params) == pytest.approx(direct, rel=1e-10)


def test_derivatives_match_finite_differences(params, rng):
    for _ in range(30):
        t = random_instance(rng)
        p = float(rng.uniform(0.01, 100))
        h = 1e-4 * p
        fd = (reduced_profit_uniform(p + h, t, params) - reduced_profit_uniform(p - h, t, params)) / (2 * h)
        assert profit_derivative_uniform(p, t, params) == pytest.approx(fd, rel=1e-6)
        fd2 = (profit_derivative_uniform(p + h, t, params)
               - profit_derivative_uniform(p - h, t, params)) / (2 * h)
        assert profit_second_derivative_uniform(p, t, params) == pytest.approx(fd2, rel=1e-6)


@settings(max_examples=100)
@given(st.floats(1e-3, 99.0), st.floats(1e-3, 1.0))
def test_increasing_and_concave(p, frac):
    params = MarketParams()
    t = [150.0, 200.0, 260.0]
    h = frac * (100.0 - p) / 2 + 1e-6
    lo, mid, hi = (reduced_profit_uniform(v, t, params) for v in (p, p + h, p + 2 * h))
    assert lo < mid < hi
    assert profit_derivative_uniform(p, t, params) > 0
    assert profit_second_derivative_uniform(p, t, params) < 0


def test_no_cost_flat_profit(params):
    free = params.replace(electricity_cost=0.0)
    t = [120.0, 250.0]
    assert profit_derivative_uniform(3.0, t, free) == 0.0
    assert reduced_profit_uniform(3.0, t, free) == reduced_profit_uniform(90.0, t, free)


def test_invalid_price(params):
    with pytest.raises(ValueError):
        reduced_profit_uniform(0.0, [100.0, 200.0], params)
    with pytest.raises(ValueError):
        optimize_uniform([100.0], params)


@pytest.mark.parametrize("cap", [10.0, 55.0, 100.0, 400.0])
def test_optimum_tracks_cap(params, cap):
    market = params.replace(price_cap=cap)
    opt = optimize_uniform([200.0] * 100, market)
    assert opt.price == cap
    assert opt.scan_max_profit <= opt.profit * (1 + 1e-12)
    assert opt.equilibrium.converged


def test_default_optimum(params, default_sizes):
    opt = optimize_uniform(default_sizes, params)
    assert opt.price == 100.0 and opt.profit_path == "reduced"
    assert opt.profit == pytest.approx(opt.equilibrium.esp_profit, rel=1e-6)
    assert opt.to_dict()["prices"] == [100.0] * 100


def test_non_interior_cap_uses_dynamics(params):
    # a tiny cap pushes every demand to the upper bound
    opt = optimize_uniform([200.0, 210.0], params.replace(price_cap=1.0))
    assert opt.profit_path == "dynamics"
    assert opt.profit == pytest.approx(opt.equilibrium.esp_profit)
