"""Command-line entry point.

Exit codes: 0 success, 1 invalid input or usage, 2 a solver did not
converge, 3 a verification check failed.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config, read_block_sizes
from .discriminatory import optimize_discriminatory, regime_check
from .equilibrium import check_uniqueness_discriminatory, closed_form_discriminatory, solve_mdg
from .experiments import AXES, resolve_workers, sample_profiles, sweep_both, write_csv
from .model import DISCRIMINATORY, SCHEMES, UNIFORM, PriceSchedule
from .uniform import optimize_uniform
from .verify import FAIL, run_battery

EXIT_OK, EXIT_INVALID, EXIT_NOT_CONVERGED, EXIT_CHECK_FAILED = 0, 1, 2, 3

log = logging.getLogger("stackedge")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _float_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not values:
        raise argparse.ArgumentTypeError("empty value list")
    return values


def _series(text: str) -> tuple[str, tuple[float, ...]]:
    axis, sep, values = text.partition("=")
    if not sep or axis not in AXES:
        raise argparse.ArgumentTypeError(
            f"expected <axis>=<v1,v2,...> with axis in {', '.join(AXES)}, got {text!r}")
    return axis, _float_list(values)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="<path>", help="key = value configuration file")
    common.add_argument("--seed", type=int, metavar="<int>", help="override scenario.seed")
    common.add_argument("--out", metavar="<path>", help="output path")
    common.add_argument("--replications", type=int, metavar="<int>",
                        help="override scenario.replications")
    common.add_argument("--verbose", action="store_true", help="log solver progress")

    parser = _Parser(prog="stackedge",
                     description="Edge-computing service pricing for blockchain miners.",
                     epilog="exit codes: 0 ok, 1 invalid input, 2 not converged, 3 check failed",
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("solve-mdg", parents=[common],
                   help="Stage II equilibrium for explicit prices and miners")
    opt = sub.add_parser("optimize", parents=[common], help="optimal ESP prices")
    opt.add_argument("--scheme", required=True, choices=SCHEMES)
    sw = sub.add_parser("sweep", parents=[common], help="parameter sweep to CSV")
    sw.add_argument("--axis", choices=AXES)
    sw.add_argument("--values", type=_float_list, metavar="<csv>")
    sw.add_argument("--scheme", choices=SCHEMES, help="one scheme only (default: both)")
    sw.add_argument("--series", type=_series, metavar="<axis>=<csv>",
                    help="one output file per value of a second axis")
    sw.add_argument("--raw", action="store_true", help="do not normalize demand and profit")
    sub.add_parser("verify", parents=[common], help="run the invariant battery")
    return parser


def _load(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    scenario = cfg.scenario
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigError("--replications: must be >= 1")
        scenario = dataclasses.replace(scenario, replications=args.replications)
    changes = {"scenario": scenario}
    if args.out is not None:
        changes["output"] = args.out
    return dataclasses.replace(cfg, **changes)


def _profiles(cfg: RunConfig) -> np.ndarray:
    if cfg.block_sizes is not None:
        return np.array(cfg.block_sizes)
    if cfg.miners_file is not None:
        return np.array(read_block_sizes(cfg.miners_file))
    return np.array([m.block_size for m in sample_profiles(cfg.scenario_spec())])


def _prices(cfg: RunConfig, n: int, required: bool) -> PriceSchedule:
    if cfg.prices is None:
        if required:
            raise ConfigError("prices: missing; solve-mdg needs explicit prices")
        return PriceSchedule.uniform(cfg.market.price_cap, n)
    if len(cfg.prices) == 1:
        return PriceSchedule.uniform(cfg.prices[0], n)
    if len(cfg.prices) != n:
        raise ConfigError(f"prices: {len(cfg.prices)} prices for {n} miners")
    scheme = UNIFORM if len(set(cfg.prices)) == 1 else DISCRIMINATORY
    return PriceSchedule(np.array(cfg.prices), scheme)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, sort_keys=True, indent=2)
    if out:
        Path(out).write_text(text + "\n")
    print(text)


def cmd_solve_mdg(cfg: RunConfig) -> int:
    t = _profiles(cfg)
    prices = _prices(cfg, t.size, required=True)
    prices.check_cap(cfg.market)
    report = solve_mdg(t, prices, cfg.market, cfg.solver)
    payload = {"block_sizes": t.tolist(), "prices": prices.prices.tolist(),
               "equilibrium": report.to_dict()}
    if t.size >= 2:
        payload["uniqueness_check"] = check_uniqueness_discriminatory(t, prices, cfg.market).to_dict()
        payload["closed_form_interior"] = closed_form_discriminatory(t, prices, cfg.market).interior
    _emit(payload, cfg.output)
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def cmd_optimize(cfg: RunConfig, scheme: str, verbose: bool = False) -> int:
    t = _profiles(cfg)
    if t.size < 2:
        raise ConfigError("scenario.n_miners: pricing needs at least two miners")
    if scheme == UNIFORM:
        result = optimize_uniform(t, cfg.market, cfg.solver)
        payload = result.to_dict()
        payload["regime"] = regime_check(result.schedule, t, cfg.market).to_dict()
        converged = result.equilibrium.converged
    else:
        opts = cfg.optimizer
        result = optimize_discriminatory(t, cfg.market, step=opts.step, max_steps=opts.max_steps,
                                         tolerance=opts.tolerance, config=cfg.solver,
                                         verbose=verbose)
        payload = result.to_dict()
        converged = result.converged and result.equilibrium.converged
    payload["block_sizes"] = t.tolist()
    _emit(payload, cfg.output)
    return EXIT_OK if converged else EXIT_NOT_CONVERGED


def _series_path(base: Path, axis: str, value: float) -> Path:
    return base.with_name(f"{base.stem}_{axis}={value:g}{base.suffix}")


def cmd_sweep(cfg: RunConfig, axis: str | None = None, values=None, scheme: str | None = None,
              series=None, raw: bool = False) -> int:
    axis = axis or cfg.sweep_axis
    values = values or cfg.sweep_values
    if axis is None or values is None:
        raise ConfigError("sweep.axis and sweep.values (or --axis/--values) are required")
    if series is None and cfg.series_axis is not None:
        if cfg.series_values is None:
            raise ConfigError("sweep.series_values: required with sweep.series_axis")
        series = (cfg.series_axis, cfg.series_values)
    base = Path(cfg.output or f"sweep_{axis}.csv")
    schemes = (scheme,) if scheme else SCHEMES
    workers = resolve_workers(None)
    spec = cfg.scenario_spec()
    jobs = [(spec, base)]
    if series is not None:
        series_axis, series_values = series
        jobs = [(spec.with_axis(series_axis, v), _series_path(base, series_axis, v))
                for v in series_values]
    for job_spec, path in jobs:
        rows = sweep_both(job_spec, axis, values, cfg.solver, workers, schemes)
        try:
            write_csv(rows, path, normalized=not raw)
        except OSError as exc:
            print(f"stackedge: cannot write {path}: {exc.strerror}", file=sys.stderr)
            return EXIT_INVALID
        print(path)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    t = _profiles(cfg)
    prices = _prices(cfg, t.size, required=False)
    opts = cfg.optimizer
    results = run_battery(t, prices, cfg.market, cfg.solver, seed=cfg.scenario.seed,
                          trials=cfg.verify.trials, grid_points=cfg.verify.grid_points,
                          samples=cfg.verify.samples, perturb=cfg.verify.perturb,
                          optimizer_options={"step": opts.step, "max_steps": opts.max_steps,
                                             "tolerance": opts.tolerance})
    width = max(len(r.name) for r in results)
    for r in results:
        print(f"{r.name:<{width}}  {r.status.upper():<12}  {r.detail}")
    failed = [r.name for r in results if r.status == FAIL]
    if failed:
        print(f"failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        if args.command == "solve-mdg":
            return cmd_solve_mdg(cfg)
        if args.command == "optimize":
            return cmd_optimize(cfg, args.scheme, args.verbose)
        if args.command == "sweep":
            return cmd_sweep(cfg, args.axis, args.values, args.scheme, args.series, args.raw)
        return cmd_verify(cfg)
    except (ConfigError, ValueError) as exc:
        print(f"stackedge: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"stackedge: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
