"""Flat ``key = value`` run configuration.

Keys are dotted (``market.fixed_reward = 10000``), ``#`` starts a comment,
and list values are comma separated.  Every key is optional; the defaults
are the evaluation defaults used throughout the package.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .equilibrium import SolverConfig
from .experiments import AXES, ScenarioSpec
from .model import SCHEMES, MarketParams


class ConfigError(ValueError):
    """Invalid configuration; the message names the line and/or field."""


@dataclass(frozen=True)
class OptimizerOptions:
    step: float = 1.0
    max_steps: int = 50_000
    tolerance: float = 1e-8


@dataclass(frozen=True)
class VerifyOptions:
    trials: int = 1_000_000
    grid_points: int = 1000
    samples: int = 1000
    perturb: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    market: MarketParams = field(default_factory=MarketParams)
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    solver: SolverConfig = field(default_factory=SolverConfig)
    optimizer: OptimizerOptions = field(default_factory=OptimizerOptions)
    verify: VerifyOptions = field(default_factory=VerifyOptions)
    scheme: str | None = None
    block_sizes: tuple[float, ...] | None = None
    miners_file: str | None = None
    prices: tuple[float, ...] | None = None
    sweep_axis: str | None = None
    sweep_values: tuple[float, ...] | None = None
    series_axis: str | None = None
    series_values: tuple[float, ...] | None = None
    output: str | None = None

    def scenario_spec(self) -> ScenarioSpec:
        return dataclasses.replace(self.scenario, market=self.market)

    def to_text(self) -> str:
        lines = []
        for section, obj in (("market", self.market), ("solver", self.solver),
                             ("optimizer", self.optimizer), ("verify", self.verify)):
            for f in dataclasses.fields(obj):
                lines.append(f"{section}.{f.name} = {_format(getattr(obj, f.name))}")
        for name in _SCENARIO_KEYS:
            lines.append(f"scenario.{name} = {_format(getattr(self.scenario, name))}")
        for key, attr in _TOP_KEYS.items():
            value = getattr(self, attr)
            if value is not None:
                lines.append(f"{key} = {_format(value)}")
        return "\n".join(lines) + "\n"


_SCENARIO_KEYS = ("n_miners", "block_mean", "block_var", "seed", "replications")
_TOP_KEYS = {
    "scheme": "scheme",
    "miners.block_sizes": "block_sizes",
    "miners.file": "miners_file",
    "prices": "prices",
    "sweep.axis": "sweep_axis",
    "sweep.values": "sweep_values",
    "sweep.series_axis": "series_axis",
    "sweep.series_values": "series_values",
    "output": "output",
}
_LIST_KEYS = {"miners.block_sizes", "prices", "sweep.values", "sweep.series_values"}
_TEXT_KEYS = {"scheme", "miners.file", "sweep.axis", "sweep.series_axis", "output"}


def _format(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _number(text: str, kind):
    text = text.strip()
    if kind is int:
        value = float(text)
        if value != int(value):
            raise ValueError(f"expected an integer, got {text!r}")
        return int(value)
    return float(text)


def _section_types(obj_type):
    return {f.name: (int if f.type in ("int", int) else float) for f in dataclasses.fields(obj_type)}


_SECTIONS = {
    "market": MarketParams,
    "solver": SolverConfig,
    "optimizer": OptimizerOptions,
    "verify": VerifyOptions,
}
_SCENARIO_TYPES = {"n_miners": int, "block_mean": float, "block_var": float,
                   "seed": int, "replications": int}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    sections: dict[str, dict] = {name: {} for name in (*_SECTIONS, "scenario")}
    top: dict[str, object] = {}
    where: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        where[key] = lineno
        try:
            _assign(key, value, sections, top)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: {key}: {exc}") from None

    def build(name, cls, **extra):
        try:
            return cls(**sections[name], **extra)
        except ValueError as exc:
            keys = [k for k in sections[name] if k in str(exc)]
            field_name = f"{name}.{keys[0]}" if keys else name
            line = where.get(field_name)
            prefix = f"{source}:{line}: " if line else f"{source}: "
            raise ConfigError(f"{prefix}{field_name}: {exc}") from None

    market = build("market", MarketParams)
    scenario = build("scenario", ScenarioSpec, market=market)
    solver = build("solver", SolverConfig)
    optimizer = build("optimizer", OptimizerOptions)
    verify = build("verify", VerifyOptions)
    cfg = RunConfig(market=market, scenario=scenario, solver=solver,
                    optimizer=optimizer, verify=verify, **top)
    _validate(cfg, source, where)
    return cfg


def _assign(key: str, value: str, sections: dict, top: dict) -> None:
    if "." in key and key.split(".", 1)[0] in sections:
        section, name = key.split(".", 1)
        types = _SCENARIO_TYPES if section == "scenario" else _section_types(_SECTIONS[section])
        if name not in types:
            raise ConfigError(f"unknown key {key!r}")
        sections[section][name] = _number(value, types[name])
        return
    if key not in _TOP_KEYS:
        raise ConfigError(f"unknown key {key!r}")
    attr = _TOP_KEYS[key]
    if key in _LIST_KEYS:
        items = [item for item in value.split(",") if item.strip()]
        if not items:
            raise ConfigError(f"{key}: empty list")
        top[attr] = tuple(_number(item, float) for item in items)
    elif key in _TEXT_KEYS:
        if not value:
            raise ConfigError(f"{key}: empty value")
        top[attr] = value


def _validate(cfg: RunConfig, source: str, where: dict) -> None:
    def fail(key, message):
        line = where.get(key)
        prefix = f"{source}:{line}: " if line else f"{source}: "
        raise ConfigError(f"{prefix}{key}: {message}")

    if cfg.scheme is not None and cfg.scheme not in SCHEMES:
        fail("scheme", f"expected one of {', '.join(SCHEMES)}, got {cfg.scheme!r}")
    if cfg.prices is not None:
        for p in cfg.prices:
            if not p > 0:
                fail("prices", f"prices must be strictly positive, got {p}")
            if p > cfg.market.price_cap:
                fail("prices", f"price {p} exceeds market.price_cap = {cfg.market.price_cap}")
    if cfg.block_sizes is not None:
        for t in cfg.block_sizes:
            if not t >= 1:
                fail("miners.block_sizes", f"block sizes must be >= 1, got {t}")
    for key in ("sweep.axis", "sweep.series_axis"):
        axis = getattr(cfg, _TOP_KEYS[key])
        if axis is not None and axis not in AXES:
            fail(key, f"expected one of {', '.join(AXES)}, got {axis!r}")
    if cfg.verify.trials < 1:
        fail("verify.trials", "must be >= 1")
    if cfg.verify.grid_points < 1:
        fail("verify.grid_points", "must be >= 1")


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


def read_block_sizes(path) -> tuple[float, ...]:
    """One block size per line (blank lines and ``#`` comments ignored)."""
    sizes = []
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"miners.file: cannot read {path}: {exc.strerror}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            value = float(line)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: miners.file: not a number: {line!r}") from None
        if not value >= 1:
            raise ConfigError(f"{path}:{lineno}: miners.file: block sizes must be >= 1")
        sizes.append(value)
    if not sizes:
        raise ConfigError(f"{path}: miners.file: no block sizes")
    return tuple(sizes)
