"""Stage II: Nash equilibrium of the miners' demand game.

Given prices, every miner maximizes ``a_i x_i / sum(x) - p_i x_i`` over
``[demand_min, demand_max]``, where ``a_i`` is its reward coefficient.
The first-order condition gives the best response
``sqrt(a_i S / p_i) - S`` with ``S`` the opponents' total demand, and
summing it over miners gives the interior equilibrium in closed form.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .model import (EquilibriumReport, MarketParams, Profiles, block_sizes,
                    check_demands, esp_profit, miner_utilities,
                    reward_coefficient, _prices)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-9
    max_iterations: int = 10_000
    damping: float = 0.5

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")


@dataclass(frozen=True)
class ConditionCheck:
    """Outcome of the sufficient uniqueness condition.

    ``lhs`` and ``worst_miner`` refer to the miner with the largest
    left-hand side; ``miner_holds`` has the per-miner verdicts.
    """

    holds: bool
    lhs: float
    rhs: float
    worst_miner: int
    miner_holds: np.ndarray

    def to_dict(self) -> dict:
        return {"holds": bool(self.holds), "lhs": float(self.lhs),
                "rhs": float(self.rhs), "worst_miner": int(self.worst_miner)}


@dataclass(frozen=True)
class ClosedFormSolution:
    demands: np.ndarray
    total: float
    interior: bool


def _price_over_reward(profiles: Profiles, p, params: MarketParams):
    t = block_sizes(profiles)
    prices = _prices(p, t.size)
    if np.any(prices <= 0):
        raise ValueError("prices must be strictly positive")
    return prices / reward_coefficient(t, params)


def stationary_response(i: int, x, p, params: MarketParams, profiles: Profiles) -> float:
    """Unclamped best response of miner ``i`` (may fall outside the bounds)."""
    x = check_demands(x)
    n = x.size
    if n < 2:
        raise ValueError("best response needs at least one opponent")
    if not 0 <= i < n:
        raise IndexError(f"miner index {i} out of range for {n} miners")
    prices = _prices(p, n)
    if prices[i] <= 0:
        raise ValueError("price must be strictly positive")
    a_i = reward_coefficient(block_sizes(profiles)[i], params)
    others = x.sum() - x[i]
    return float(np.sqrt(a_i * others / prices[i]) - others)


def best_response(i: int, x, p, params: MarketParams, profiles: Profiles) -> float:
    value = stationary_response(i, x, p, params, profiles)
    return float(np.clip(value, params.demand_min, params.demand_max))


def best_responses(x: np.ndarray, prices: np.ndarray, rewards: np.ndarray,
                   params: MarketParams) -> np.ndarray:
    """All clamped best responses at once (no validation)."""
    others = x.sum() - x
    raw = np.sqrt(rewards * others / prices) - others
    return np.clip(raw, params.demand_min, params.demand_max)


def check_uniqueness_discriminatory(profiles: Profiles, p, params: MarketParams) -> ConditionCheck:
    """Test ``2 (N-1) p_i / a_i < sum_j p_j / a_j`` for every miner.

    Summing the N inequalities gives ``2 (N-1) < N``, so for two or more
    miners at least one of them always fails and ``holds`` is False.  The
    per-miner verdicts remain informative.
    """
    q = _price_over_reward(profiles, p, params)
    n = q.size
    lhs = 2.0 * (n - 1) * q
    rhs = float(q.sum())
    worst = int(np.argmax(lhs))
    per_miner = lhs < rhs
    return ConditionCheck(bool(per_miner.all()), float(lhs[worst]), rhs, worst, per_miner)


def check_uniqueness_uniform(profiles: Profiles, params: MarketParams, price: float = 1.0) -> ConditionCheck:
    # a common price cancels from both sides
    n = block_sizes(profiles).size
    return check_uniqueness_discriminatory(profiles, np.full(n, float(price)), params)


def closed_form_discriminatory(profiles: Profiles, p, params: MarketParams) -> ClosedFormSolution:
    """Interior equilibrium ``x_i = K - K^2 p_i / a_i``, ``K = (N-1) / sum(p_j / a_j)``.

    ``K`` is also the total demand.  ``interior`` is False when some
    ``x_i`` leaves ``[demand_min, demand_max]``; the demands are then not
    an equilibrium of the bounded game.
    """
    q = _price_over_reward(profiles, p, params)
    n = q.size
    if n < 2:
        raise ValueError("closed form needs at least two miners")
    total = (n - 1) / q.sum()
    demands = total - total * total * q
    interior = bool(np.all(demands >= params.demand_min) and np.all(demands <= params.demand_max))
    return ClosedFormSolution(demands, float(total), interior)


def closed_form_uniform(profiles: Profiles, price: float, params: MarketParams) -> ClosedFormSolution:
    n = block_sizes(profiles).size
    return closed_form_discriminatory(profiles, np.full(n, float(price)), params)


def _is_interior(x: np.ndarray, params: MarketParams) -> bool:
    return bool(np.all(x > params.demand_min) and np.all(x < params.demand_max))


def solve_mdg(profiles: Profiles, p, params: MarketParams,
              config: SolverConfig | None = None, x0=None) -> EquilibriumReport:
    """Damped Jacobi best-response dynamics.

    Starts from ``x0`` (all ``demand_min`` by default) and stops once the
    sup-norm distance between the demands and their best responses falls
    below ``config.tolerance``.  Simultaneous updates
    overshoot on the aggregate demand when there are many miners, so the
    damping is halved whenever the gap grows while reversing direction.
    Growth in a steady direction (demands climbing from the floor) keeps
    the damping.
    Running out of iterations is reported through ``converged=False``, not
    raised.
    """
    config = config or SolverConfig()
    t = block_sizes(profiles)
    n = t.size
    if n < 1:
        raise ValueError("need at least one miner")
    prices = _prices(p, n)
    if np.any(prices < params.min_price):
        raise ValueError(f"prices must be at least {params.min_price}")
    rewards = reward_coefficient(t, params)

    if n == 1:
        # the single miner always wins, so its utility only falls with demand
        x = np.array([params.demand_min])
        return EquilibriumReport(x, miner_utilities(x, prices, params, t),
                                 esp_profit(x, prices, params), 0, True, True, False, 0.0)

    if x0 is None:
        x = np.full(n, params.demand_min)
    else:
        x = np.clip(np.asarray(x0, dtype=float).reshape(-1), params.demand_min, params.demand_max)
        if x.size != n:
            raise ValueError("x0 length does not match the number of miners")

    damping = config.damping
    converged = False
    iterations = 0
    previous = np.inf
    last_gap = np.zeros(n)
    for iterations in range(1, config.max_iterations + 1):
        gap = best_responses(x, prices, rewards, params) - x
        size = float(np.max(np.abs(gap)))
        if size > previous and float(gap @ last_gap) < 0:
            damping *= 0.5
        previous, last_gap = size, gap
        step = damping * gap
        x = x + step
        if size < config.tolerance:
            converged = True
            # damped steps only approach a binding bound; land on it
            target = best_responses(x, prices, rewards, params)
            bound = (target == params.demand_min) | (target == params.demand_max)
            x[bound] = target[bound]
            break
    residual = float(np.max(np.abs(best_responses(x, prices, rewards, params) - x)))
    if not converged:
        log.warning("best-response dynamics stopped after %d iterations (residual %.3g)",
                    iterations, residual)
    check = check_uniqueness_discriminatory(t, prices, params)
    return EquilibriumReport(
        demands=x,
        utilities=miner_utilities(x, prices, params, t),
        esp_profit=esp_profit(x, prices, params),
        iterations=iterations,
        converged=converged,
        uniqueness_condition_holds=check.holds,
        interior=_is_interior(x, params),
        residual=residual,
    )


def deviation_gains(x, p, params: MarketParams, profiles: Profiles,
                    grid_points: int = 1000) -> np.ndarray:
    """Best unilateral utility improvement available to each miner.

    Candidates are ``grid_points`` equally spaced demands plus the clamped
    stationary point, so a coarse grid cannot hide an interior optimum.
    """
    if grid_points < 1:
        raise ValueError("grid_points must be >= 1")
    x = check_demands(x)
    t = block_sizes(profiles)
    n = x.size
    prices = _prices(p, n)
    rewards = reward_coefficient(t, params)
    current = rewards * x / x.sum() - prices * x
    if n == 1:
        grid = np.linspace(params.demand_min, params.demand_max, grid_points)
        best = rewards[0] - prices[0] * grid
        return np.array([max(0.0, float(best.max() - current[0]))])
    grid = np.linspace(params.demand_min, params.demand_max, grid_points)
    others = x.sum() - x
    stationary = np.clip(np.sqrt(rewards * others / prices) - others,
                         params.demand_min, params.demand_max)
    cand = np.concatenate([np.broadcast_to(grid, (n, grid_points)), stationary[:, None]], axis=1)
    utility = rewards[:, None] * cand / (cand + others[:, None]) - prices[:, None] * cand
    return np.maximum(utility.max(axis=1) - current, 0.0)


def verify_nash(x, p, params: MarketParams, profiles: Profiles, grid_points: int = 1000) -> float:
    return float(deviation_gains(x, p, params, profiles, grid_points).max())
