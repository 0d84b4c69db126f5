# test_harness.py

import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from config import ConfigException, ExperimentConfig
from harness import (CONFIG_FILE, CURVES_FILE, EVENTS_FILE, RUNS_FILE, SUMMARY_FILE, TABLE_FILE, aggregate,
                     all_cells_diverged, build_prediction_setup, build_problem, record_score, replica_seed, run_sweep,
                     summary_table, write_artifacts)
from run_logger import RunRecord


def small_config(**overrides) -> ExperimentConfig:
    settings = dict(adapters=['fixed', 'greedy', 'meta'], alphas=[0.01, 0.05], lambdas=[0.0, 1.0], kappas=[1e-3],
                    steps=600, runs=2, log_interval=200, base_seed=11, workers=1)
    settings.update(overrides)
    return ExperimentConfig(**settings)


def record(cell_id: str, values: list[float], diverged: bool = False, **metadata) -> RunRecord:
    r = RunRecord(cell_id, 0)
    for i, value in enumerate(values):
        r.add_point((i + 1) * 100, value, 1.0)
    if diverged:
        r.mark_diverged(len(values) * 100 + 1, 'value: overflow')
    r.metadata.update({'adapter': 'fixed', 'alpha': 0.1, 'param': 0.0, 'steps': len(values) * 100, **metadata})
    return r


def test_replica_seeds_are_deterministic_and_distinct():
    assert replica_seed(0, 3, 1) == replica_seed(0, 3, 1)
    seeds = {replica_seed(0, cell, replica) for cell in range(20) for replica in range(20)}
    assert len(seeds) == 400
    assert replica_seed(1, 0, 0) != replica_seed(0, 0, 0)


def test_record_score_metrics():
    r = record('c', [4.0, 3.0, 2.0, 1.0])
    assert record_score(r, 'final') == 1.0
    assert record_score(r, 'window', 0.5) == pytest.approx(2.0)
    assert math.isnan(record_score(RunRecord('c', 0)))


def test_control_score_skips_buffer_episodes():
    r = record('c', [-100.0, -50.0, -10.0], episode_steps=[100, 50, 10], buffer_steps=120)
    assert record_score(r) == pytest.approx(-10.0)


def test_aggregate_statistics():
    table = aggregate([record('a', [1e-3]), record('a', [3e-3])], 'final')
    row = table.iloc[0]
    assert row['mean'] == pytest.approx(2e-3)
    assert row['std'] == pytest.approx(1e-3)
    assert (row['n_runs'], row['n_diverged'], row['all_diverged']) == (2, 0, False)

    same = aggregate([record('a', [0.5]), record('a', [0.5])], 'final').iloc[0]
    assert same['std'] == 0.0


def test_fully_divergent_cells_are_marked():
    table = aggregate([record('a', [1.0], diverged=True), record('a', [], diverged=True),
                       record('b', [1.0]), record('b', [2.0], diverged=True)], 'final')
    a, b = table.set_index('cell_id').loc['a'], table.set_index('cell_id').loc['b']
    assert bool(a['all_diverged']) and math.isnan(a['mean'])
    assert not bool(b['all_diverged']) and b['mean'] == 1.0 and b['n_diverged'] == 1
    assert not all_cells_diverged(table)
    assert all_cells_diverged(table[table['cell_id'] == 'a'])


def test_summary_columns():
    records = [record('fixed|0', [1.0]), record('fixed|1', [2.0], param=1.0),
               record('greedy', [0.5], adapter='greedy', param=None),
               record('meta|k1', [0.4], adapter='meta', param=1e-3), record('meta|k2', [0.3], adapter='meta', param=1e-2)]
    summary = summary_table(aggregate(records, 'final'))
    assert list(summary.columns) == ['alpha',
                                     'lambda=0 mean', 'lambda=0 std', 'lambda=0 n_diverged',
                                     'lambda=1 mean', 'lambda=1 std', 'lambda=1 n_diverged',
                                     'greedy mean', 'greedy std', 'greedy n_diverged',
                                     'meta mean', 'meta std', 'meta n_diverged']
    assert summary.loc[0, 'meta mean'] == pytest.approx(0.3)
    assert list(summary_table(aggregate([], 'final')).columns) == ['alpha']


def test_zero_steps_give_nan_cells():
    records = run_sweep(small_config(steps=0, adapters=['fixed'], lambdas=[0.4], alphas=[0.01]))
    assert [r.series for r in records] == [[], []]
    table = aggregate(records)
    assert math.isnan(table.loc[0, 'mean']) and not table.loc[0, 'all_diverged']


def test_sweep_artifacts_are_reproducible(tmp_path):
    config = small_config()
    problem = build_problem(config)
    contents = []
    for name in ('first', 'second'):
        out = tmp_path / name
        table = write_artifacts(run_sweep(config, problem), config, str(out))
        assert len(table) == 2 * (2 + 1 + 1)
        contents.append({f: (out / f).read_bytes()
                         for f in (RUNS_FILE, TABLE_FILE, SUMMARY_FILE, CURVES_FILE, EVENTS_FILE, CONFIG_FILE)})
    assert contents[0] == contents[1]

    runs = pd.read_csv(tmp_path / 'first' / RUNS_FILE)
    assert sorted(runs['index'].unique()) == [200, 400, 600]
    saved = json.loads((tmp_path / 'first' / CONFIG_FILE).read_text())
    assert saved['buffer_steps'] == 60
    assert saved['learner'] == 'true_online_td' and saved['buffer_fraction'] == 0.1
    events = pd.read_csv(os.path.join(tmp_path, 'first', EVENTS_FILE))
    assert len(events) == 8 * 2


def test_parallel_sweep_matches_inline():
    inline = run_sweep(small_config(adapters=['fixed', 'meta'], alphas=[0.05]))
    parallel = run_sweep(small_config(adapters=['fixed', 'meta'], alphas=[0.05], workers=2))
    assert [(r.cell_id, r.seed, r.series) for r in inline] == [(r.cell_id, r.seed, r.series) for r in parallel]


def test_prediction_setup_ground_truth():
    setup = build_prediction_setup(small_config(env='frozenlake', policy_pair='off-policy', features='tiles'))
    assert setup.rows.shape == (16, 4 * 16)
    assert setup.frequency.d.sum() == pytest.approx(1.0)
    assert np.all(setup.v_true[setup.terminal] == 0.0)
    with pytest.raises(ConfigException):
        build_prediction_setup(small_config(policy_pair='0.9/0.1'))
    with pytest.raises(ConfigException):
        build_problem(small_config(task='control'))
