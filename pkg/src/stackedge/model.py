"""Mining economics: domain types and closed-form payoff functions.

Miners buy edge-computing demand ``x_i`` at unit price ``p_i``.  A miner's
chance of producing the block that reaches consensus is its share of the
total demand, discounted by the orphaning probability of its block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

UNIFORM = "uniform"
DISCRIMINATORY = "discriminatory"
SCHEMES = (UNIFORM, DISCRIMINATORY)


@dataclass(frozen=True)
class MinerProfile:
    """One miner: 1-based ``id`` and the size ``block_size`` of its block."""

    id: int
    block_size: float

    def __post_init__(self):
        if self.id < 1:
            raise ValueError(f"miner id must be >= 1, got {self.id}")
        if not math.isfinite(self.block_size) or self.block_size < 1:
            raise ValueError(f"block_size must be >= 1, got {self.block_size}")


@dataclass(frozen=True)
class MarketParams:
    """Economy-wide constants.

    ``poisson_rate`` and ``mining_time`` default to one block per 600 time
    units and the matching expected inter-block time; neither is a measured
    quantity.
    """

    fixed_reward: float = 1e4
    variable_reward_factor: float = 20.0
    poisson_rate: float = 1.0 / 600.0
    delay_factor: float = 5e-3
    electricity_cost: float = 1e-3
    mining_time: float = 600.0
    demand_min: float = 1e-2
    demand_max: float = 100.0
    price_cap: float = 100.0
    min_price: float = 1e-9

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValueError(f"{name} must be finite, got {value}")
        for name in ("fixed_reward", "poisson_rate", "delay_factor",
                     "mining_time", "demand_min", "demand_max", "price_cap",
                     "min_price"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("variable_reward_factor", "electricity_cost"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative, got {getattr(self, name)}")
        if self.demand_min >= self.demand_max:
            raise ValueError("demand_min must be below demand_max")
        if self.min_price >= self.price_cap:
            raise ValueError("min_price must be below price_cap")

    @property
    def unit_cost(self) -> float:
        """Service cost per demand unit, ``c * T``."""
        return self.electricity_cost * self.mining_time

    def replace(self, **changes) -> "MarketParams":
        fields = {name: getattr(self, name) for name in self.__dataclass_fields__}
        fields.update(changes)
        return MarketParams(**fields)


@dataclass(frozen=True)
class PriceSchedule:
    prices: np.ndarray
    scheme: str = DISCRIMINATORY

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float).reshape(-1)
        prices.setflags(write=False)
        object.__setattr__(self, "prices", prices)
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown pricing scheme {self.scheme!r}")
        if prices.size == 0:
            raise ValueError("price schedule is empty")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise ValueError("prices must be finite and strictly positive")
        if self.scheme == UNIFORM and np.any(prices != prices[0]):
            raise ValueError("uniform schedule with unequal prices")

    @classmethod
    def uniform(cls, price: float, n: int) -> "PriceSchedule":
        return cls(np.full(n, float(price)), UNIFORM)

    def __len__(self):
        return self.prices.size

    def check_cap(self, params: MarketParams) -> None:
        if np.any(self.prices > params.price_cap) or np.any(self.prices < params.min_price):
            raise ValueError(
                f"prices must lie in [{params.min_price}, {params.price_cap}]")


@dataclass
class EquilibriumReport:
    demands: np.ndarray
    utilities: np.ndarray
    esp_profit: float
    iterations: int
    converged: bool
    uniqueness_condition_holds: bool
    interior: bool
    residual: float = field(default=float("nan"))

    def to_dict(self) -> dict:
        return {
            "demands": [float(v) for v in self.demands],
            "utilities": [float(v) for v in self.utilities],
            "esp_profit": float(self.esp_profit),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "uniqueness_condition_holds": bool(self.uniqueness_condition_holds),
            "interior": bool(self.interior),
            "residual": float(self.residual),
        }


Profiles = Union[Sequence[MinerProfile], np.ndarray, Sequence[float]]


def make_profiles(block_sizes: Sequence[float]) -> list[MinerProfile]:
    return [MinerProfile(i + 1, float(t)) for i, t in enumerate(block_sizes)]


def block_sizes(profiles: Profiles) -> np.ndarray:
    """Block sizes as a float array; accepts profiles or raw sizes."""
    if isinstance(profiles, np.ndarray):
        return profiles.astype(float).reshape(-1)
    items = list(profiles)
    if items and isinstance(items[0], MinerProfile):
        ids = [m.id for m in items]
        if len(set(ids)) != len(ids):
            raise ValueError("miner ids must be unique")
        return np.array([m.block_size for m in items], dtype=float)
    return np.asarray(items, dtype=float).reshape(-1)


def check_demands(x, params: MarketParams | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size == 0:
        raise ValueError("demand profile is empty")
    if not np.all(np.isfinite(x)) or np.any(x < 0):
        raise ValueError("demands must be finite and nonnegative")
    if x.sum() <= 0:
        raise ValueError("total demand must be strictly positive")
    if params is not None:
        slack = 1e-12 * params.demand_max
        if np.any(x < params.demand_min - slack) or np.any(x > params.demand_max + slack):
            raise ValueError(
                f"demands must lie in [{params.demand_min}, {params.demand_max}]")
    return x


def _prices(p, n: int) -> np.ndarray:
    prices = p.prices if isinstance(p, PriceSchedule) else np.asarray(p, dtype=float).reshape(-1)
    if prices.size == 1 and n > 1:
        prices = np.full(n, float(prices[0]))
    if prices.size != n:
        raise ValueError(f"length mismatch: {prices.size} prices for {n} miners")
    return prices


def _index(i: int, n: int) -> int:
    if not 0 <= i < n:
        raise IndexError(f"miner index {i} out of range for {n} miners")
    return i


def relative_power(x, i: int) -> float:
    """Share ``x_i / sum(x)`` of the total demand (``i`` is 0-based)."""
    x = check_demands(x)
    return float(x[_index(i, x.size)] / x.sum())


def orphan_probability(t, params: MarketParams):
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("block size must be nonnegative")
    value = -np.expm1(-params.poisson_rate * params.delay_factor * t_arr)
    return float(value) if value.ndim == 0 else value


def reward_coefficient(t, params: MarketParams):
    """Orphan-discounted block reward ``(R + r t) exp(-lambda z t)``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("block size must be nonnegative")
    value = ((params.fixed_reward + params.variable_reward_factor * t_arr)
             * np.exp(-params.poisson_rate * params.delay_factor * t_arr))
    return float(value) if value.ndim == 0 else value


def win_probability(x, i: int, params: MarketParams, profiles: Profiles) -> float:
    t = block_sizes(profiles)
    x = check_demands(x)
    if t.size != x.size:
        raise ValueError("length mismatch between demands and profiles")
    alpha = relative_power(x, i)
    return alpha * math.exp(-params.poisson_rate * params.delay_factor * t[i])


def win_probabilities(x, params: MarketParams, profiles: Profiles) -> np.ndarray:
    t = block_sizes(profiles)
    x = check_demands(x)
    if t.size != x.size:
        raise ValueError("length mismatch between demands and profiles")
    return x / x.sum() * np.exp(-params.poisson_rate * params.delay_factor * t)


def miner_utility(x, p, i: int, params: MarketParams, profiles: Profiles) -> float:
    x = check_demands(x)
    prices = _prices(p, x.size)
    t = block_sizes(profiles)
    if t.size != x.size:
        raise ValueError("length mismatch between demands and profiles")
    i = _index(i, x.size)
    return float(reward_coefficient(t[i], params) * x[i] / x.sum() - prices[i] * x[i])


def miner_utilities(x, p, params: MarketParams, profiles: Profiles) -> np.ndarray:
    x = check_demands(x)
    prices = _prices(p, x.size)
    t = block_sizes(profiles)
    if t.size != x.size:
        raise ValueError("length mismatch between demands and profiles")
    return reward_coefficient(t, params) * x / x.sum() - prices * x


def esp_profit(x, p, params: MarketParams) -> float:
    """Revenue minus service cost: ``sum(p_i x_i) - c T sum(x_i)``."""
    x = np.asarray(x, dtype=float).reshape(-1)
    prices = _prices(p, x.size)
    return float(prices @ x - params.unit_cost * x.sum())


def simulate_mining_race(x, params: MarketParams, profiles: Profiles,
                         trials: int, seed: int) -> np.ndarray:
    """Monte Carlo estimate of each miner's win probability.

    Each trial draws a provisional winner in proportion to demand, then
    discards the block with the winner's orphaning probability.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    x = check_demands(x)
    t = block_sizes(profiles)
    if t.size != x.size:
        raise ValueError("length mismatch between demands and profiles")
    rng = np.random.default_rng(seed)
    counts = np.zeros(x.size, dtype=np.int64)
    orphan = np.atleast_1d(orphan_probability(t, params))
    alpha = x / x.sum()
    chunk = 1 << 20
    remaining = trials
    while remaining:
        m = min(chunk, remaining)
        winners = rng.choice(x.size, size=m, p=alpha)
        kept = winners[rng.random(m) >= orphan[winners]]
        counts += np.bincount(kept, minlength=x.size)
        remaining -= m
    return counts / trials
