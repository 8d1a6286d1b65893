"""Stage I with a separate price for every miner.

With ``q_i = p_i / a_i``, ``Q = sum(q)`` and ``K = (N-1) / Q`` the
interior Stage II demands are ``x_i = K (1 - K q_i)`` and sum to ``K``.
The ESP profit then splits into a revenue part ``g(p) = sum(p_i x_i)``,
which is invariant to scaling all prices, and a cost part
``f(p) = -c T K``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .equilibrium import SolverConfig, closed_form_discriminatory, solve_mdg
from .model import (DISCRIMINATORY, EquilibriumReport, MarketParams,
                    PriceSchedule, Profiles, block_sizes, reward_coefficient,
                    _prices)

log = logging.getLogger(__name__)

_NOISE = 1e3 * np.finfo(float).eps


def _setup(p, profiles: Profiles, params: MarketParams):
    t = block_sizes(profiles)
    n = t.size
    if n < 2:
        raise ValueError("discriminatory pricing needs at least two miners")
    prices = _prices(p, n)
    if np.any(prices < params.min_price):
        raise ValueError(f"every price must be at least {params.min_price}")
    return prices, reward_coefficient(t, params)


def _profit(prices: np.ndarray, rewards: np.ndarray, unit_cost: float) -> float:
    n = prices.size
    q = prices / rewards
    total = (n - 1) / q.sum()
    demands = total - total * total * q
    return float((prices - unit_cost) @ demands)


def _gradient(prices: np.ndarray, rewards: np.ndarray, unit_cost: float) -> np.ndarray:
    n = prices.size
    q = prices / rewards
    total = (n - 1) / q.sum()
    d_total = -total * total / ((n - 1) * rewards)
    spread = prices.sum() - 2.0 * total * (prices @ q) - unit_cost
    return d_total * spread + total - 2.0 * total * total * q


def revenue_term(p, profiles: Profiles, params: MarketParams) -> float:
    """``g(p) = sum_i p_i x_i`` at the closed-form equilibrium."""
    prices, rewards = _setup(p, profiles, params)
    return _profit(prices, rewards, 0.0)


def cost_term(p, profiles: Profiles, params: MarketParams) -> float:
    """``f(p) = -c T (N-1) / sum(p_j / a_j)``, minus the service cost."""
    prices, rewards = _setup(p, profiles, params)
    return -params.unit_cost * (prices.size - 1) / float(np.sum(prices / rewards))


def profit_discriminatory(p, profiles: Profiles, params: MarketParams) -> float:
    """``sum_i (p_i - c T) x_i`` with ``x`` from the closed form."""
    prices, rewards = _setup(p, profiles, params)
    return _profit(prices, rewards, params.unit_cost)


def profit_gradient(p, profiles: Profiles, params: MarketParams) -> np.ndarray:
    prices, rewards = _setup(p, profiles, params)
    return _gradient(prices, rewards, params.unit_cost)


def cost_term_gradient(p, profiles: Profiles, params: MarketParams) -> np.ndarray:
    prices, rewards = _setup(p, profiles, params)
    q_sum = float(np.sum(prices / rewards))
    return (prices.size - 1) * params.unit_cost / (rewards * q_sum**2)


def cost_term_hessian(p, profiles: Profiles, params: MarketParams) -> np.ndarray:
    """Rank-one, negative semidefinite Hessian of the cost part."""
    prices, rewards = _setup(p, profiles, params)
    q_sum = float(np.sum(prices / rewards))
    inv = 1.0 / rewards
    return -2.0 * (prices.size - 1) * params.unit_cost / q_sum**3 * np.outer(inv, inv)


@dataclass(frozen=True)
class RegimeCheck:
    """Sign regime of the profit in each price.

    ``delta[i] = sum_{j != i} (a_i + a_j) (1 - N q_j / Q)``.  The profit is
    concave in ``p_i`` where ``delta[i] <= 0`` and the price-ratio floor
    ``q_i >= Q / (N-1)^2`` holds.
    """

    delta: np.ndarray
    concave_region: bool
    condition_22_holds: bool
    ratio_floor_holds: np.ndarray

    def to_dict(self) -> dict:
        return {"delta": [float(v) for v in self.delta],
                "concave_region": bool(self.concave_region),
                "condition_22_holds": bool(self.condition_22_holds)}


def _delta(prices: np.ndarray, rewards: np.ndarray) -> np.ndarray:
    n = prices.size
    q = prices / rewards
    w = q / q.sum()
    # expanded form of the pairwise sum; see the naive double loop in the tests
    return 2.0 * n * rewards * w - 2.0 * rewards + rewards.sum() - n * float(rewards @ w)


def regime_check(p, profiles: Profiles, params: MarketParams, tol: float = 0.0) -> RegimeCheck:
    """``tol`` is a relative slack on ``delta <= 0``, scaled by ``sum(a)``."""
    prices, rewards = _setup(p, profiles, params)
    delta = _delta(prices, rewards)
    q = prices / rewards
    n = prices.size
    floor = q >= q.sum() / (n - 1) ** 2
    concave = bool(delta.max() <= tol * rewards.sum())
    return RegimeCheck(delta, concave, bool(floor.all()), floor)


@dataclass
class DiscriminatoryOptimum:
    schedule: PriceSchedule
    profit: float
    equilibrium: EquilibriumReport
    regime: RegimeCheck
    converged: bool
    steps: int
    gradient_norm: float
    closed_form_interior: bool

    @property
    def prices(self) -> np.ndarray:
        return self.schedule.prices

    def to_dict(self) -> dict:
        return {
            "scheme": DISCRIMINATORY,
            "prices": [float(v) for v in self.prices],
            "mean_price": float(self.prices.mean()),
            "profit": float(self.profit),
            "converged": bool(self.converged),
            "steps": int(self.steps),
            "gradient_norm": float(self.gradient_norm),
            "closed_form_interior": bool(self.closed_form_interior),
            "at_cap": int(np.sum(self.prices >= self.schedule.prices.max())),
            "equilibrium": self.equilibrium.to_dict(),
            "regime": self.regime.to_dict(),
        }


def _projected_gradient(prices, grad, lower, upper):
    pg = grad.copy()
    pg[(prices >= upper) & (grad > 0)] = 0.0
    pg[(prices <= lower) & (grad < 0)] = 0.0
    return pg


def optimize_discriminatory(profiles: Profiles, params: MarketParams,
                            step: float = 1.0, max_steps: int = 50_000,
                            tolerance: float = 1e-8,
                            config: SolverConfig | None = None,
                            verbose: bool = False) -> DiscriminatoryOptimum:
    """Projected gradient ascent over the box ``[min_price, price_cap]^N``.

    Starts from every price at the cap.  Trial steps use the
    Barzilai-Borwein length (``step`` for the first one) and are halved
    until the Armijo sufficient-increase test passes.
    """
    t = block_sizes(profiles)
    n = t.size
    if n < 2:
        raise ValueError("discriminatory pricing needs at least two miners")
    rewards = reward_coefficient(t, params)
    lower, upper = params.min_price, params.price_cap
    cost = params.unit_cost

    p = np.full(n, upper)
    value = _profit(p, rewards, cost)
    grad = _gradient(p, rewards, cost)
    trial = step
    converged = False
    gnorm = float(np.max(np.abs(_projected_gradient(p, grad, lower, upper))))
    k = 0
    for k in range(1, max_steps + 1):
        if gnorm < tolerance:
            converged = True
            k -= 1
            break
        s = trial
        slope = 0.0
        while s >= 1e-20:
            p_new = np.clip(p + s * grad, lower, upper)
            move = p_new - p
            slope = float(grad @ move)
            value_new = _profit(p_new, rewards, cost)
            grad_new = _gradient(p_new, rewards, cost)
            gain = value_new - value
            if abs(gain) < _NOISE * abs(value):
                # profit differences are rounding noise here; the trapezoid
                # rule on the gradients measures the increase instead
                gain = 0.5 * float((grad + grad_new) @ move)
            if gain >= 1e-4 * slope:
                break
            s *= 0.5
        if not np.any(move) or s < 1e-20:
            break
        curvature = -float(move @ (grad_new - grad))
        trial = float(move @ move) / curvature if curvature > 0 else 2.0 * s
        p, value, grad = p_new, value_new, grad_new
        gnorm = float(np.max(np.abs(_projected_gradient(p, grad, lower, upper))))
        if verbose:
            regime = regime_check(p, t, params)
            log.info("step %d profit %.12g |pg| %.3g concave_region=%s",
                     k, value, gnorm, regime.concave_region)
    else:
        converged = gnorm < tolerance

    if not converged:
        log.warning("projected gradient ascent stopped after %d steps (|pg| %.3g)", k, gnorm)
    schedule = PriceSchedule(p, DISCRIMINATORY)
    closed = closed_form_discriminatory(t, p, params)
    x0 = np.clip(closed.demands, params.demand_min, params.demand_max)
    eq = solve_mdg(t, schedule, params, config, x0=x0)
    profit = value if closed.interior else eq.esp_profit
    return DiscriminatoryOptimum(schedule, profit, eq, regime_check(p, t, params),
                                 converged, k, gnorm, closed.interior)


@dataclass(frozen=True)
class MonotonicityProbe:
    worst: float
    pairs: int
    candidates: int

    @property
    def found_points(self) -> bool:
        return self.pairs > 0


def _in_region(prices, rewards, tol) -> bool:
    n = prices.size
    q = prices / rewards
    if not np.all(q >= q.sum() / (n - 1) ** 2):
        return False
    return bool(_delta(prices, rewards).max() <= tol * rewards.sum())


def sample_concave_region(profiles: Profiles, params: MarketParams, count: int,
                          rng: np.random.Generator, max_candidates: int | None = None,
                          tol: float = 1e-12) -> list[np.ndarray]:
    """Draw price vectors from the concave region by rejection.

    The region sits around the ray ``p ∝ a`` (where every ``delta`` is 0)
    and is often thin, so candidates are built around that ray: a random
    scale, plus with probability 1/2 a tilt towards miners with larger
    ``a`` and some noise.
    """
    t = block_sizes(profiles)
    rewards = reward_coefficient(t, params)
    n = t.size
    harmonic = n / np.sum(1.0 / rewards)
    max_candidates = max_candidates or 50 * count
    found = []
    for _ in range(max_candidates):
        if len(found) == count:
            break
        shift = np.zeros(n)
        if rng.random() < 0.5:
            kappa = rng.uniform(0.0, 1.0) / rewards.max()
            shift = kappa * (rewards - harmonic)
            shift = shift + rng.uniform(0.0, 0.3) * kappa * np.ptp(rewards) * rng.standard_normal(n)
            # keep sum(w) = 1 so the shift only tilts the price ratios
            shift -= np.sum(shift / rewards) / np.sum(1.0 / rewards)
        weights = (1.0 + shift / rewards) / n
        if np.any(weights <= 0):
            continue
        p = rewards * weights
        p = p / p.max() * rng.uniform(params.min_price, params.price_cap)
        p = np.maximum(p, params.min_price)
        if _in_region(p, rewards, tol):
            found.append(p)
    return found


def vi_inner_product(p, p2, profiles: Profiles, params: MarketParams) -> float:
    """``(F(p) - F(p2)) . (p - p2)`` with ``F = -grad(profit)``."""
    prices, rewards = _setup(p, profiles, params)
    prices2, _ = _setup(p2, profiles, params)
    field = _gradient(prices2, rewards, params.unit_cost) - _gradient(prices, rewards, params.unit_cost)
    return float(field @ (prices - prices2))


def vi_monotonicity_probe(profiles: Profiles, params: MarketParams,
                          samples: int = 1000, seed: int = 0) -> MonotonicityProbe:
    """Smallest ``(F(p) - F(p')) . (p - p')`` over sampled region pairs.

    ``F = -grad(profit)``; strict monotonicity of ``F`` on the region means
    every value is positive.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    t = block_sizes(profiles)
    points = sample_concave_region(t, params, 2 * samples, rng)
    pairs = len(points) // 2
    if pairs == 0:
        log.warning("no price vectors found in the concave region")
        return MonotonicityProbe(float("nan"), 0, 2 * samples)
    worst = min(vi_inner_product(points[2 * k], points[2 * k + 1], t, params)
                for k in range(pairs))
    return MonotonicityProbe(worst, pairs, 2 * samples)
