"""Stage I under a single price for every miner."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .equilibrium import SolverConfig, closed_form_uniform, solve_mdg
from .model import EquilibriumReport, MarketParams, PriceSchedule, Profiles, block_sizes, reward_coefficient


def _harmonic_capacity(profiles: Profiles, params: MarketParams) -> float:
    """``(N-1) / sum(1/a_j)``, the profit ceiling as the price grows."""
    t = block_sizes(profiles)
    if t.size < 2:
        raise ValueError("uniform pricing needs at least two miners")
    return (t.size - 1) / float(np.sum(1.0 / reward_coefficient(t, params)))


def _check_price(p: float) -> None:
    if not p > 0:
        raise ValueError(f"price must be positive, got {p}")


def reduced_profit_uniform(p: float, profiles: Profiles, params: MarketParams) -> float:
    """ESP profit with the interior equilibrium substituted in."""
    _check_price(p)
    return (p - params.unit_cost) / p * _harmonic_capacity(profiles, params)


def profit_derivative_uniform(p: float, profiles: Profiles, params: MarketParams) -> float:
    _check_price(p)
    return params.unit_cost / p**2 * _harmonic_capacity(profiles, params)


def profit_second_derivative_uniform(p: float, profiles: Profiles, params: MarketParams) -> float:
    _check_price(p)
    return -2.0 * params.unit_cost / p**3 * _harmonic_capacity(profiles, params)


@dataclass
class UniformOptimum:
    price: float
    profit: float
    equilibrium: EquilibriumReport
    reduced_profit: float
    # "reduced" when the closed-form equilibrium at the cap is interior,
    # otherwise "dynamics" (profit taken from the solved equilibrium)
    profit_path: str
    scan_max_profit: float

    @property
    def schedule(self) -> PriceSchedule:
        return PriceSchedule.uniform(self.price, self.equilibrium.demands.size)

    def to_dict(self) -> dict:
        return {
            "scheme": "uniform",
            "prices": [float(self.price)] * self.equilibrium.demands.size,
            "price": float(self.price),
            "profit": float(self.profit),
            "reduced_profit": float(self.reduced_profit),
            "profit_path": self.profit_path,
            "scan_max_profit": float(self.scan_max_profit),
            "equilibrium": self.equilibrium.to_dict(),
        }


def optimize_uniform(profiles: Profiles, params: MarketParams,
                     config: SolverConfig | None = None,
                     scan_points: int = 1000) -> UniformOptimum:
    """Optimal uniform price, which is always the price cap.

    The reduced profit is strictly increasing in the price, so the cap is
    returned directly; a grid scan over ``(0, cap]`` is kept as a guard and
    raises if any grid price beats the cap.
    """
    t = block_sizes(profiles)
    if t.size < 2:
        raise ValueError("uniform pricing needs at least two miners")
    cap = params.price_cap
    reduced = reduced_profit_uniform(cap, t, params)

    grid = np.linspace(cap / scan_points, cap, scan_points)
    scan = (grid - params.unit_cost) / grid * _harmonic_capacity(t, params)
    scan_max = float(scan.max())
    if scan_max > reduced * (1 + 1e-12) + 1e-12:
        raise RuntimeError("grid scan found a uniform price beating the cap")

    closed = closed_form_uniform(t, cap, params)
    x0 = np.clip(closed.demands, params.demand_min, params.demand_max)
    eq = solve_mdg(t, PriceSchedule.uniform(cap, t.size), params, config, x0=x0)
    if closed.interior:
        return UniformOptimum(cap, reduced, eq, reduced, "reduced", scan_max)
    return UniformOptimum(cap, eq.esp_profit, eq, reduced, "dynamics", scan_max)
