import csv

import numpy as np
import pytest

from stackedge.experiments import (AXES, CSV_HEADER, ScenarioSpec, normalize,
                                   resolve_workers, run_scenario,
                                   sample_profiles, sweep, sweep_both,
                                   write_csv)
from stackedge.model import DISCRIMINATORY, UNIFORM


def sizes(spec, rep=0):
    return np.array([m.block_size for m in sample_profiles(spec, rep)])


def test_zero_variance_gives_mean():
    assert np.all(sizes(ScenarioSpec(n_miners=50, block_var=0.0)) == 200.0)


def test_sample_moments():
    spec = ScenarioSpec(n_miners=20000, block_var=5.0, seed=3)
    t = sizes(spec)
    # 4-sigma bounds on the sample mean and variance
    assert abs(t.mean() - 200.0) < 4 * np.sqrt(5.0 / t.size)
    assert abs(t.var(ddof=1) - 5.0) < 4 * 5.0 * np.sqrt(2.0 / (t.size - 1))


def test_redraw_keeps_sizes_at_least_one():
    t = sizes(ScenarioSpec(n_miners=500, block_mean=2.0, block_var=4.0))
    assert t.min() >= 1.0


def test_sampling_deterministic():
    spec = ScenarioSpec(n_miners=30, seed=11)
    assert np.array_equal(sizes(spec, 2), sizes(spec, 2))
    assert not np.array_equal(sizes(spec, 2), sizes(spec, 3))
    ids = [m.id for m in sample_profiles(spec)]
    assert ids == list(range(1, 31))


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(n_miners=0)
    with pytest.raises(ValueError):
        ScenarioSpec(block_var=-1.0)
    with pytest.raises(ValueError):
        ScenarioSpec().with_axis("n_miners", 2.5)
    with pytest.raises(ValueError):
        ScenarioSpec().with_axis("mining_time", 3.0)
    assert ScenarioSpec().with_axis("fixed_reward", 5e3).market.fixed_reward == 5e3


def test_run_scenario_statistics():
    spec = ScenarioSpec(n_miners=20, replications=4)
    uni = run_scenario(spec, UNIFORM)
    disc = run_scenario(spec, DISCRIMINATORY)
    assert uni.replications == disc.replications == 4
    assert uni.mean("price") == 100.0
    assert disc.mean("profit") >= uni.mean("profit")
    profits = [r.profit for r in uni.records]
    assert uni.sd("profit") == pytest.approx(np.std(profits, ddof=1))
    with pytest.raises(ValueError):
        run_scenario(spec, "auction")


def test_sweep_shares_seeds_and_rows():
    spec = ScenarioSpec(n_miners=10, replications=3)
    rows = sweep(spec, UNIFORM, "variable_reward_factor", [10.0, 30.0])
    assert [r.value for r in rows] == [10.0, 30.0]
    assert rows[1].mean_profit > rows[0].mean_profit
    assert max(r.normalized_profit for r in rows) == 1.0
    with pytest.raises(ValueError):
        sweep(spec, UNIFORM, "nope", [1.0])
    with pytest.raises(ValueError):
        sweep(spec, UNIFORM, "n_miners", [])


def test_normalize():
    spec = ScenarioSpec(n_miners=5, replications=2)
    rows = normalize(sweep(spec, UNIFORM, "n_miners", [3, 6]))
    assert rows[-1].normalized_demand == 1.0
    assert 0 < rows[0].normalized_demand < 1


def test_csv_format(tmp_path):
    spec = ScenarioSpec(n_miners=8, replications=2)
    rows = sweep_both(spec, "block_mean", [150.0, 250.0])
    path = tmp_path / "out.csv"
    write_csv(rows, path)
    with open(path) as fh:
        table = list(csv.reader(fh))
    assert tuple(table[0]) == CSV_HEADER
    assert len(table) == 5
    assert [r[1] for r in table[1:]] == [UNIFORM, UNIFORM, DISCRIMINATORY, DISCRIMINATORY]
    assert max(float(r[5]) for r in table[1:]) == 1.0
    raw = tmp_path / "raw.csv"
    write_csv(rows, raw, normalized=False)
    with open(raw) as fh:
        assert float(list(csv.reader(fh))[1][5]) == pytest.approx(rows[0].mean_profit, rel=1e-11)


def test_csv_byte_identical(tmp_path):
    spec = ScenarioSpec(n_miners=8, replications=2, seed=5)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_csv(sweep_both(spec, "n_miners", [4, 8]), a)
    write_csv(sweep_both(spec, "n_miners", [4, 8]), b)
    assert a.read_bytes() == b.read_bytes()


def test_workers_do_not_change_results():
    spec = ScenarioSpec(n_miners=8, replications=2)
    serial = sweep(spec, DISCRIMINATORY, "block_var", [0.0, 5.0, 20.0], workers=1)
    parallel = sweep(spec, DISCRIMINATORY, "block_var", [0.0, 5.0, 20.0], workers=3)
    assert serial == parallel


def test_resolve_workers(monkeypatch):
    monkeypatch.delenv("STACKEDGE_THREADS", raising=False)
    assert resolve_workers(None) == 1
    monkeypatch.setenv("STACKEDGE_THREADS", "3")
    assert resolve_workers(None) == 3
    assert resolve_workers(0) >= 1
    monkeypatch.setenv("STACKEDGE_THREADS", "many")
    with pytest.raises(ValueError):
        resolve_workers(None)


def test_axes_cover_spec_fields():
    spec = ScenarioSpec()
    for axis in AXES:
        assert spec.with_axis(axis, 7) != spec
