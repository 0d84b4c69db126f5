# harness.py

"""
Sweep runner: builds the ground truth once per configuration, runs every (cell, replica)
pair with a seed derived from the base seed, and folds the records into the per-cell
tables and CSV artifacts.
"""

import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np
import pandas as pd

from actor_critic import ControlSettings, meta_actor_critic
from config import Cell, ConfigException, ExperimentConfig
from dp_oracle import solve_state_frequencies, solve_values_direct
from environments import FrozenLakeEnv, NoisyMountainCarEnv, make_environment
from features import FeatureMap, OneHot, TabularFeatures
from mdp import AbsoluteContinuityException, check_absolute_continuity
from meta_lambda import ADAPTER_FIXED, ADAPTER_META, ADAPTER_META_NP, PredictionSetup, RunSettings, meta_policy_evaluation
from run_logger import RunRecord, events_frame

RUNS_FILE: str = 'runs.csv'
TABLE_FILE: str = 'table.csv'
SUMMARY_FILE: str = 'summary.csv'
CURVES_FILE: str = 'curves.csv'
CONFIG_FILE: str = 'config.json'
EVENTS_FILE: str = 'events.csv'

TABLE_COLUMNS: list[str] = ['cell_id', 'adapter', 'alpha', 'param', 'mean', 'std', 'n_runs', 'n_diverged', 'all_diverged']

# set in each worker process by _init_worker
_WORKER_PROBLEM = None


def replica_seed(base_seed: int, cell_index: int, replica: int) -> int:
    return int(np.random.SeedSequence([base_seed, cell_index, replica]).generate_state(1)[0])


def build_prediction_setup(config: ExperimentConfig) -> PredictionSetup:
    """ Environment, policies, features and the exact values / state frequencies of the target policy """
    env = make_environment(config.env, config.gamma, **config.env_params)
    mdp = env.as_finite_mdp()
    try:
        behavior, target = env.policies(config.policy_pair)
        check_absolute_continuity(mdp, behavior, target)
    except (ValueError, AbsoluteContinuityException) as e:
        raise ConfigException(str(e)) from e
    gamma = env.discount()

    if isinstance(env, FrozenLakeEnv) and config.features == 'tiles':
        features = env.features(config.tiles_per_dim, config.n_tilings, config.tile_offsets, config.feature_seed)
    elif isinstance(env, FrozenLakeEnv):
        features = TabularFeatures.from_map(OneHot(env.n_total), range(env.n_total), env.terminal)
    else:
        features = env.features()

    v_true = solve_values_direct(mdp, target, gamma)
    frequency = solve_state_frequencies(mdp, target)
    logging.info("\033[1;32m[SWEEP] ground truth for %s (%s): %d states, %d features\033[0m"
                 % (config.env, config.policy_pair, mdp.n_states, features.dimension))
    return PredictionSetup(env, behavior, target, gamma, features.rows, v_true, frequency, mdp.terminal)


def build_control_problem(config: ExperimentConfig) -> tuple[NoisyMountainCarEnv, FeatureMap]:
    env = make_environment(config.env, config.gamma, **config.env_params)
    if not isinstance(env, NoisyMountainCarEnv):
        raise ConfigException("control runs are defined on mountaincar, not %s" % config.env)
    feature_map = env.feature_map(config.tiles_per_dim, config.n_tilings, config.tile_offsets, config.feature_seed)
    return env, feature_map


def build_problem(config: ExperimentConfig):
    if config.task == 'prediction':
        return build_prediction_setup(config)
    return build_control_problem(config)


def run_replica(config: ExperimentConfig, problem, cell: Cell, cell_index: int, replica: int) -> RunRecord:
    """ One independent run; owns its environment copy, learners and generator """
    config = config.resolved()
    seed = replica_seed(config.base_seed, cell_index, replica)
    if config.task == 'prediction':
        # each replica gets its own environment so runs never share episode state
        setup = replace(problem, env=make_environment(config.env, config.gamma, **config.env_params))
        settings = RunSettings(config.learner, cell.adapter, cell.alpha, cell.param, config.beta, config.aux_multiplier,
                               config.variance_mode, config.steps, config.buffer_fraction, config.log_interval,
                               cell.cell_id, seed)
        record = meta_policy_evaluation(setup, settings)
    else:
        _, feature_map = problem
        env = make_environment(config.env, config.gamma, **config.env_params)
        settings = ControlSettings(cell.adapter, cell.alpha, cell.param, config.eta, config.learner, config.beta,
                                   config.aux_multiplier, config.variance_mode, config.steps, config.buffer_fraction,
                                   cell.cell_id, seed)
        record = meta_actor_critic(env, feature_map, settings)

    record.metadata.update({'adapter': cell.adapter, 'alpha': cell.alpha, 'param': cell.param,
                            'cell_index': cell_index, 'replica': replica, 'steps': config.steps})
    return record


def _init_worker(problem) -> None:
    global _WORKER_PROBLEM
    _WORKER_PROBLEM = problem


def _run_job(job: tuple[ExperimentConfig, Cell, int, int]) -> RunRecord:
    config, cell, cell_index, replica = job
    return run_replica(config, _WORKER_PROBLEM, cell, cell_index, replica)


def run_sweep(config: ExperimentConfig, problem=None) -> list[RunRecord]:
    """
    Every cell x replica of the configuration. Records come back ordered by
    (cell index, replica) whatever the worker scheduling was.
    """
    config.validate()
    config = config.resolved()
    if problem is None:
        problem = build_problem(config)
    cells = config.cells()
    jobs = [(config, cell, i, replica) for i, cell in enumerate(cells) for replica in range(config.runs)]
    workers = min(config.worker_count(), len(jobs))
    logging.info("\033[1;32m[SWEEP] %d cells x %d runs on %d worker(s)\033[0m" % (len(cells), config.runs, workers))

    records: list[RunRecord] = []
    if workers <= 1:
        for config_, cell, i, replica in jobs:
            records.append(run_replica(config_, problem, cell, i, replica))
    else:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(problem,)) as pool:
            records.extend(pool.map(_run_job, jobs, chunksize=max(1, len(jobs) // (4 * workers))))

    records.sort(key=lambda r: (r.metadata['cell_index'], r.metadata['replica']))
    n_diverged = sum(r.diverged for r in records)
    if n_diverged:
        logging.warning("\033[1;33m[SWEEP] %d of %d runs diverged\033[0m" % (n_diverged, len(records)))
    logging.info("\033[1;32m[SWEEP] done, %d records\033[0m" % len(records))
    return records


def record_score(record: RunRecord, metric: str = 'window', window_fraction: float = 0.05) -> float:
    """
    Scalar per run. Prediction records: the last logged error ('final') or the mean error
    over the last `window_fraction` of the steps ('window'). Control records: the mean
    return of the episodes that started after the buffer period.
    """
    if not record.series:
        return float('nan')
    if 'episode_steps' in record.metadata:
        starts = np.cumsum([0] + list(record.metadata['episode_steps'][:-1]))
        returns = [value for (_, value, _), start in zip(record.series, starts)
                   if start >= record.metadata.get('buffer_steps', 0)]
        return float(np.mean(returns)) if returns else float('nan')
    if metric == 'final':
        return record.series[-1][1]
    steps = record.metadata.get('steps') or record.series[-1][0]
    window_start = steps * (1.0 - window_fraction)
    window = [value for index, value, _ in record.series if index >= window_start]
    return float(np.mean(window)) if window else record.series[-1][1]


def aggregate(records: list[RunRecord], metric: str = 'window', window_fraction: float = 0.05) -> pd.DataFrame:
    """
    Mean / std per cell over its non-divergent runs. Divergent runs are counted, and a cell
    whose every run diverged is kept with NaN statistics and all_diverged set.
    """
    rows = []
    by_cell: dict[str, list[RunRecord]] = {}
    for record in records:
        by_cell.setdefault(record.cell_id, []).append(record)

    for cell_id, cell_records in by_cell.items():
        first = cell_records[0].metadata
        scores = [record_score(r, metric, window_fraction) for r in cell_records if not r.diverged]
        scores = [s for s in scores if np.isfinite(s)]
        n_diverged = sum(r.diverged for r in cell_records)
        rows.append({
            'cell_id': cell_id,
            'adapter': first.get('adapter'),
            'alpha': first.get('alpha'),
            'param': first.get('param'),
            'mean': float(np.mean(scores)) if scores else float('nan'),
            'std': float(np.std(scores)) if scores else float('nan'),
            'n_runs': len(cell_records),
            'n_diverged': n_diverged,
            'all_diverged': n_diverged == len(cell_records),
        })
        if n_diverged == len(cell_records):
            logging.error("\033[1;31m[SWEEP] every run of %s diverged\033[0m" % cell_id)
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def column_label(adapter: str, param: float | None) -> str:
    if adapter == ADAPTER_FIXED:
        return "lambda=%g" % param
    return adapter


def summary_table(table: pd.DataFrame, higher_is_better: bool = False) -> pd.DataFrame:
    """
    One row per alpha; per lambda column plus greedy and META (best kappa for that alpha)
    the mean, std and number of diverged runs.
    """
    if table.empty:
        return pd.DataFrame(columns=['alpha'])
    table = table.copy()
    table['column'] = [column_label(a, p) for a, p in zip(table['adapter'], table['param'])]

    chosen = []
    for (alpha, column), group in table.groupby(['alpha', 'column'], sort=True):
        if group['adapter'].iloc[0] in (ADAPTER_META, ADAPTER_META_NP) and len(group) > 1:
            finite = group[np.isfinite(group['mean'])]
            if not finite.empty:
                group = finite.loc[[finite['mean'].idxmax() if higher_is_better else finite['mean'].idxmin()]]
        chosen.append(group.iloc[[0]])
    best = pd.concat(chosen)

    columns = list(dict.fromkeys(table['column']))
    summary = best.pivot(index='alpha', columns='column', values=['mean', 'std', 'n_diverged'])
    ordered = pd.DataFrame(index=summary.index)
    for column in columns:
        for stat in ('mean', 'std', 'n_diverged'):
            ordered["%s %s" % (column, stat)] = summary[(stat, column)] if (stat, column) in summary else np.nan
    return ordered.reset_index()


def runs_frame(records: list[RunRecord]) -> pd.DataFrame:
    """ One row per (cell, replica, logged point) """
    rows = []
    for r in records:
        for index, value, mean_lambda in r.series:
            rows.append((r.cell_id, r.metadata.get('replica'), r.seed, index, value, mean_lambda, r.diverged))
    return pd.DataFrame(rows, columns=['cell_id', 'replica', 'seed', 'index', 'value', 'mean_lambda', 'diverged'])


def learning_curves(records: list[RunRecord]) -> pd.DataFrame:
    """ Mean / std across the non-divergent replicas of each cell at every logged index """
    runs = runs_frame([r for r in records if not r.diverged])
    if runs.empty:
        return pd.DataFrame(columns=['cell_id', 'index', 'mean', 'std', 'mean_lambda'])
    grouped = runs.groupby(['cell_id', 'index'], sort=True)
    curves = grouped['value'].agg(mean='mean', std=lambda v: float(np.std(v))).reset_index()
    curves['mean_lambda'] = grouped['mean_lambda'].mean().values
    return curves


def write_artifacts(records: list[RunRecord], config: ExperimentConfig, out_dir: str) -> pd.DataFrame:
    """ runs, table, summary, curves and event CSVs plus config.json under out_dir; returns the table """
    os.makedirs(out_dir, exist_ok=True)
    config = config.resolved()
    table = aggregate(records, config.metric, config.window_fraction)

    runs_frame(records).to_csv(os.path.join(out_dir, RUNS_FILE), index=False)
    table.to_csv(os.path.join(out_dir, TABLE_FILE), index=False)
    summary_table(table, higher_is_better=config.task == 'control').to_csv(os.path.join(out_dir, SUMMARY_FILE), index=False)
    learning_curves(records).to_csv(os.path.join(out_dir, CURVES_FILE), index=False)
    events_frame(records).to_csv(os.path.join(out_dir, EVENTS_FILE), index=False)
    with open(os.path.join(out_dir, CONFIG_FILE), 'w') as f:
        json.dump({**config.to_dict(), 'buffer_steps': int(config.buffer_fraction * config.steps)}, f, indent=2, sort_keys=True)

    logging.info("\033[1;32m[SWEEP] wrote %s, %s, %s, %s, %s to %s\033[0m" % (RUNS_FILE, TABLE_FILE, SUMMARY_FILE, CURVES_FILE, EVENTS_FILE, out_dir))
    return table


def all_cells_diverged(table: pd.DataFrame) -> bool:
    return bool(len(table)) and bool(table['all_diverged'].all())
