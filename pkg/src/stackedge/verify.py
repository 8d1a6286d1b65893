"""Invariant battery run by ``stackedge verify`` on one scenario."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .discriminatory import (cost_term_hessian, optimize_discriminatory,
                             profit_discriminatory, profit_gradient,
                             vi_monotonicity_probe)
from .equilibrium import (SolverConfig, best_response,
                          closed_form_discriminatory, deviation_gains,
                          solve_mdg, stationary_response)
from .model import (MarketParams, PriceSchedule, block_sizes, miner_utilities,
                    reward_coefficient, simulate_mining_race, win_probabilities)
from .uniform import optimize_uniform

log = logging.getLogger(__name__)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
MIN_RACE_TRIALS = 100_000


@dataclass
class CheckResult:
    name: str
    status: str
    detail: str


def nash_check(t, prices, params: MarketParams, config: SolverConfig,
               grid_points: int, perturb: float = 0.0) -> CheckResult:
    eq = solve_mdg(t, prices, params, config)
    x = eq.demands.copy()
    if perturb:
        x[0] = min(max(x[0] * (1 + perturb), params.demand_min), params.demand_max)
    gains = deviation_gains(x, prices, params, t, grid_points)
    utilities = miner_utilities(x, prices, params, t)
    allowed = 1e-8 * np.maximum(1.0, np.abs(utilities))
    worst = int(np.argmax(gains / allowed))
    ok = eq.converged and bool(np.all(gains <= allowed))
    return CheckResult("nash_deviation", PASS if ok else FAIL,
                       f"max gain {gains[worst]:.3g} (miner {worst}, allowed {allowed[worst]:.3g}),"
                       f" converged={eq.converged}")


def closed_form_check(t, prices, params: MarketParams, config: SolverConfig) -> CheckResult:
    closed = closed_form_discriminatory(t, prices, params)
    if not closed.interior:
        return CheckResult("closed_form_agreement", INCONCLUSIVE, "closed form not interior")
    eq = solve_mdg(t, prices, params, config)
    rel = float(np.max(np.abs(eq.demands - closed.demands) / np.abs(closed.demands)))
    return CheckResult("closed_form_agreement", PASS if rel < 1e-6 else FAIL,
                       f"sup relative difference {rel:.3g}")


def gradient_check(t, params: MarketParams, rng: np.random.Generator,
                   points: int = 20) -> CheckResult:
    rewards = reward_coefficient(t, params)
    worst = 0.0
    for _ in range(points):
        p = rewards / rewards.max() * params.price_cap * rng.uniform(0.98, 1.0, t.size)
        grad = profit_gradient(p, t, params)
        h = 1e-4 * p
        fd = np.empty_like(p)
        for i in range(t.size):
            e = np.zeros_like(p)
            e[i] = h[i]
            fd[i] = (profit_discriminatory(p + e, t, params)
                     - profit_discriminatory(p - e, t, params)) / (2 * h[i])
        scale = max(float(np.max(np.abs(grad))), 1e-12)
        worst = max(worst, float(np.max(np.abs(fd - grad))) / scale)
    hess = cost_term_hessian(np.full(t.size, params.price_cap), t, params)
    v = rng.standard_normal((100, t.size))
    quad = float(np.max(np.einsum("ki,ij,kj->k", v, hess, v)))
    ok = worst < 1e-5 and quad <= 1e-10
    return CheckResult("profit_gradient", PASS if ok else FAIL,
                       f"max relative error {worst:.3g}, max v.Hv {quad:.3g}")


def standard_function_check(t, prices, params: MarketParams, rng: np.random.Generator,
                            samples: int = 1000) -> CheckResult:
    """Positivity, monotonicity and scalability of miners' best responses.

    States keep the opponents' total demand below ``a_i / (4 p_i)``, the
    range in which the unclamped best response grows with that total.
    """
    n = t.size
    if n < 2:
        return CheckResult("standard_function", INCONCLUSIVE, "needs two or more miners")
    rewards = reward_coefficient(t, params)
    bound = rewards / (4 * prices)
    floor = (n - 1) * params.demand_min
    eligible = np.flatnonzero(bound > floor)
    if eligible.size == 0:
        return CheckResult("standard_function", INCONCLUSIVE, "no eligible miner")
    failures = []
    for _ in range(samples):
        i = int(rng.choice(eligible))
        total = rng.uniform(floor, bound[i])
        others = params.demand_min + (total - floor) * rng.dirichlet(np.ones(n - 1))
        bigger_total = rng.uniform(total, bound[i])
        bigger = others + (bigger_total - total) * rng.dirichlet(np.ones(n - 1))
        x = np.insert(others, i, params.demand_min)
        x2 = np.insert(bigger, i, params.demand_min)
        k = rng.uniform(1.0, 3.0)
        if stationary_response(i, x, prices, params, t) <= 0:
            failures.append("positivity")
        if best_response(i, x2, prices, params, t) < best_response(i, x, prices, params, t):
            failures.append("monotonicity")
        if not k * best_response(i, x, prices, params, t) > best_response(i, k * x, prices, params, t):
            failures.append("scalability")
    if failures:
        return CheckResult("standard_function", FAIL, f"{len(failures)} violations: {sorted(set(failures))}")
    return CheckResult("standard_function", PASS, f"{samples} states")


def race_check(t, x, params: MarketParams, trials: int, seed: int) -> CheckResult:
    freq = simulate_mining_race(x, params, t, trials, seed)
    prob = win_probabilities(x, params, t)
    band = 3 * np.sqrt(prob * (1 - prob) / trials)
    inside = bool(np.all(np.abs(freq - prob) <= band))
    worst = float(np.max(np.abs(freq - prob) / np.where(band > 0, band, 1.0)))
    detail = f"{trials} trials, worst deviation at {worst:.2f} of the 3-sigma band"
    if trials < MIN_RACE_TRIALS:
        return CheckResult("monte_carlo_race", INCONCLUSIVE,
                           f"{detail}; below the {MIN_RACE_TRIALS} trial minimum")
    return CheckResult("monte_carlo_race", PASS if inside else FAIL, detail)


def pricing_checks(t, params: MarketParams, config: SolverConfig, optimizer_options: dict) -> list[CheckResult]:
    if t.size < 2:
        return [CheckResult("pricing", INCONCLUSIVE, "needs two or more miners")]
    uni = optimize_uniform(t, params, config)
    disc = optimize_discriminatory(t, params, config=config, **optimizer_options)
    at_cap = uni.price == params.price_cap and uni.scan_max_profit <= uni.profit * (1 + 1e-12)
    dominance = disc.profit >= uni.profit - 1e-6 * abs(uni.profit)
    return [
        CheckResult("uniform_optimum_at_cap", PASS if at_cap else FAIL,
                    f"p*={uni.price:g}, profit={uni.profit:.12g}"),
        CheckResult("discriminatory_dominance", PASS if dominance and disc.converged else FAIL,
                    f"profit {disc.profit:.12g} vs uniform {uni.profit:.12g},"
                    f" mean price {disc.prices.mean():.6g}, converged={disc.converged}"),
    ]


def vi_check(t, params: MarketParams, samples: int, seed: int) -> CheckResult:
    if t.size < 3:
        return CheckResult("vi_monotonicity", INCONCLUSIVE, "needs three or more miners")
    probe = vi_monotonicity_probe(t, params, samples, seed)
    if not probe.found_points:
        return CheckResult("vi_monotonicity", INCONCLUSIVE, "no sampled points in the concave region")
    return CheckResult("vi_monotonicity", PASS if probe.worst > 0 else FAIL,
                       f"{probe.pairs} pairs, min inner product {probe.worst:.3g}")


def run_battery(profiles, prices, params: MarketParams, config: SolverConfig | None = None,
                seed: int = 0, trials: int = 1_000_000, grid_points: int = 1000,
                samples: int = 1000, perturb: float = 0.0,
                optimizer_options: dict | None = None) -> list[CheckResult]:
    config = config or SolverConfig()
    t = block_sizes(profiles)
    if not isinstance(prices, PriceSchedule):
        prices = PriceSchedule(np.broadcast_to(np.asarray(prices, dtype=float), t.shape))
    prices = prices.prices
    rng = np.random.default_rng(seed)
    results = [nash_check(t, prices, params, config, grid_points, perturb)]
    if t.size >= 2:
        results.append(closed_form_check(t, prices, params, config))
        results.append(gradient_check(t, params, rng))
    results.append(standard_function_check(t, prices, params, rng, samples))
    eq = solve_mdg(t, prices, params, config)
    results.append(race_check(t, eq.demands, params, trials, seed))
    results.extend(pricing_checks(t, params, config, optimizer_options or {}))
    results.append(vi_check(t, params, samples, seed))
    return results
