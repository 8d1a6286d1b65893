"""Random scenarios and parameter sweeps over the two pricing schemes."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .discriminatory import optimize_discriminatory
from .equilibrium import SolverConfig
from .model import DISCRIMINATORY, SCHEMES, UNIFORM, MarketParams, MinerProfile, make_profiles
from .uniform import optimize_uniform

log = logging.getLogger(__name__)

AXES = ("n_miners", "variable_reward_factor", "fixed_reward", "block_mean", "block_var")
CSV_HEADER = ("axis", "scheme", "value", "mean_total_demand", "sd_total_demand",
              "mean_profit", "sd_profit", "mean_price", "replications")


@dataclass(frozen=True)
class ScenarioSpec:
    n_miners: int = 100
    block_mean: float = 200.0
    block_var: float = 5.0
    market: MarketParams = field(default_factory=MarketParams)
    seed: int = 0
    replications: int = 20

    def __post_init__(self):
        if self.n_miners < 1:
            raise ValueError("n_miners must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.block_var < 0:
            raise ValueError("block_var must be nonnegative")
        if self.block_mean <= 0:
            raise ValueError("block_mean must be positive")

    def with_axis(self, axis: str, value) -> "ScenarioSpec":
        if axis == "n_miners":
            if float(value) != int(value):
                raise ValueError(f"n_miners must be an integer, got {value}")
            return replace(self, n_miners=int(value))
        if axis in ("block_mean", "block_var"):
            return replace(self, **{axis: float(value)})
        if axis in ("variable_reward_factor", "fixed_reward"):
            return replace(self, market=self.market.replace(**{axis: float(value)}))
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}")


def sample_profiles(spec: ScenarioSpec, replication: int = 0) -> list[MinerProfile]:
    """Block sizes from Normal(block_mean, block_var), redrawn while below 1."""
    if spec.block_var < 0:
        raise ValueError("block_var must be nonnegative")
    rng = np.random.default_rng(spec.seed + replication)
    sd = float(np.sqrt(spec.block_var))
    sizes = rng.normal(spec.block_mean, sd, spec.n_miners)
    low = sizes < 1
    while low.any():
        sizes[low] = rng.normal(spec.block_mean, sd, int(low.sum()))
        low = sizes < 1
    return make_profiles(sizes)


@dataclass
class ReplicationRecord:
    replication: int
    prices: np.ndarray
    profit: float
    demands: np.ndarray
    converged: bool
    error: str | None = None

    @property
    def price(self) -> float:
        return float(np.mean(self.prices))

    @property
    def total_demand(self) -> float:
        return float(np.sum(self.demands))


@dataclass
class ScenarioResult:
    scheme: str
    records: list[ReplicationRecord]

    def _column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records if r.error is None])

    @property
    def replications(self) -> int:
        return sum(r.error is None for r in self.records)

    def mean(self, name: str) -> float:
        col = self._column(name)
        return float(col.mean()) if col.size else float("nan")

    def sd(self, name: str) -> float:
        col = self._column(name)
        return float(col.std(ddof=1)) if col.size > 1 else 0.0


def _solve(profiles, scheme: str, market: MarketParams, config: SolverConfig | None):
    if scheme == UNIFORM:
        opt = optimize_uniform(profiles, market, config)
        return (np.full(len(profiles), opt.price), opt.profit, opt.equilibrium,
                opt.equilibrium.converged)
    opt = optimize_discriminatory(profiles, market, config=config)
    return opt.prices, opt.profit, opt.equilibrium, opt.converged and opt.equilibrium.converged


def run_scenario(spec: ScenarioSpec, scheme: str,
                 config: SolverConfig | None = None) -> ScenarioResult:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    records = []
    for rep in range(spec.replications):
        profiles = sample_profiles(spec, rep)
        try:
            prices, profit, eq, converged = _solve(profiles, scheme, spec.market, config)
        except (ValueError, RuntimeError, FloatingPointError) as exc:
            log.warning("replication %d failed: %s", rep, exc)
            records.append(ReplicationRecord(rep, np.array([np.nan]), np.nan,
                                             np.array([np.nan]), False, str(exc)))
            continue
        records.append(ReplicationRecord(rep, np.asarray(prices), float(profit),
                                         eq.demands.copy(), bool(converged)))
    return ScenarioResult(scheme, records)


@dataclass
class SweepResult:
    axis: str
    scheme: str
    value: float
    mean_total_demand: float
    sd_total_demand: float
    mean_profit: float
    sd_profit: float
    mean_price: float
    replications: int
    normalized_demand: float = float("nan")
    normalized_profit: float = float("nan")


def _sweep_point(args) -> SweepResult:
    spec, scheme, axis, value, config = args
    result = run_scenario(spec.with_axis(axis, value), scheme, config)
    return SweepResult(axis, scheme, float(value),
                       result.mean("total_demand"), result.sd("total_demand"),
                       result.mean("profit"), result.sd("profit"),
                       result.mean("price"), result.replications)


def normalize(results: Sequence[SweepResult]) -> list[SweepResult]:
    """Scale demand and profit by their maxima over ``results``."""
    demand_max = max(r.mean_total_demand for r in results)
    profit_max = max(abs(r.mean_profit) for r in results)
    return [replace(r, normalized_demand=r.mean_total_demand / demand_max,
                    normalized_profit=r.mean_profit / profit_max) for r in results]


def resolve_workers(workers: int | None = None) -> int:
    """Worker count; ``None`` reads ``STACKEDGE_THREADS`` (0 means all CPUs)."""
    if workers is None:
        raw = os.environ.get("STACKEDGE_THREADS", "1").strip() or "1"
        try:
            workers = int(raw)
        except ValueError:
            raise ValueError(f"STACKEDGE_THREADS must be an integer, got {raw!r}") from None
    if workers < 0:
        raise ValueError("worker count must be nonnegative")
    return workers or os.cpu_count() or 1


def sweep(spec: ScenarioSpec, scheme: str, axis: str, values: Iterable[float],
          config: SolverConfig | None = None, workers: int | None = 1) -> list[SweepResult]:
    """One :class:`SweepResult` per axis value, all sharing ``spec.seed``.

    Every point reuses the same replication seeds, so neighbouring points
    differ only through the swept parameter.  Output does not depend on
    ``workers``.
    """
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    if axis not in AXES:
        raise ValueError(f"unknown sweep axis {axis!r}; expected one of {', '.join(AXES)}")
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}")
    for v in values:
        spec.with_axis(axis, v)
    tasks = [(spec, scheme, axis, v, config) for v in values]
    n_workers = resolve_workers(workers)
    if n_workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(n_workers, len(tasks))) as pool:
            results = list(pool.map(_sweep_point, tasks))
    else:
        results = [_sweep_point(task) for task in tasks]
    return normalize(results)


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def write_csv(results: Sequence[SweepResult], path, normalized: bool = True) -> None:
    """Write sweep rows; demand and profit columns are normalized by default.

    Normalization divides by the maximum over all rows in the file, so rows
    from different schemes stay comparable.
    """
    rows = normalize(results) if normalized else list(results)
    demand_scale = profit_scale = 1.0
    if normalized:
        demand_scale = max(r.mean_total_demand for r in rows)
        profit_scale = max(abs(r.mean_profit) for r in rows)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in rows:
            writer.writerow([
                r.axis, r.scheme, _fmt(r.value),
                _fmt(r.mean_total_demand / demand_scale), _fmt(r.sd_total_demand / demand_scale),
                _fmt(r.mean_profit / profit_scale), _fmt(r.sd_profit / profit_scale),
                _fmt(r.mean_price), str(r.replications),
            ])


def sweep_both(spec: ScenarioSpec, axis: str, values: Sequence[float],
               config: SolverConfig | None = None, workers: int | None = 1,
               schemes: Sequence[str] = (UNIFORM, DISCRIMINATORY)) -> list[SweepResult]:
    rows = []
    for scheme in schemes:
        rows.extend(sweep(spec, scheme, axis, values, config, workers))
    return normalize(rows)
