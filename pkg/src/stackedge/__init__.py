"""Stackelberg pricing of edge-computing service for blockchain miners.

Stage II (:mod:`stackedge.equilibrium`) finds the miners' demand
equilibrium for given prices; Stage I (:mod:`stackedge.uniform`,
:mod:`stackedge.discriminatory`) picks the provider's prices.
"""

from .discriminatory import (DiscriminatoryOptimum, RegimeCheck, optimize_discriminatory,
                             profit_discriminatory, profit_gradient, regime_check,
                             vi_monotonicity_probe)
from .equilibrium import (ConditionCheck, SolverConfig, best_response,
                          check_uniqueness_discriminatory, check_uniqueness_uniform,
                          closed_form_discriminatory, closed_form_uniform, solve_mdg,
                          verify_nash)
from .experiments import ScenarioSpec, SweepResult, run_scenario, sample_profiles, sweep
from .model import (DISCRIMINATORY, UNIFORM, EquilibriumReport, MarketParams, MinerProfile,
                    PriceSchedule, esp_profit, miner_utility, orphan_probability,
                    relative_power, reward_coefficient, simulate_mining_race,
                    win_probability)
from .uniform import (UniformOptimum, optimize_uniform, profit_derivative_uniform,
                      reduced_profit_uniform)

__version__ = "0.1.0"
