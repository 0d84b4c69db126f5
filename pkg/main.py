# main.py
#!/usr/bin/env python
# -*- coding: utf-8 -*-

import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np
import pandas as pd

from config import ConfigException, load_config
from dp_oracle import NonTerminatingException, SingularSystemException, solve_state_frequencies, solve_values_direct
from harness import (CONFIG_FILE, CURVES_FILE, EVENTS_FILE, SUMMARY_FILE, TABLE_FILE, aggregate, all_cells_diverged, run_sweep,
                     summary_table, write_artifacts)
from helpers import best_cells, emit_plots
from mdp import DiscountFunction, InvalidMdpException, load_mdp_json, load_policy_json
from run_logger import plot_event_counts

EXIT_OK: int = 0
EXIT_INVALID_INPUT: int = 2
EXIT_ALL_DIVERGED: int = 3


def load_discount(value: str, mdp) -> DiscountFunction:
    """ --gamma is either a scalar or a JSON file holding one discount per state """
    try:
        return DiscountFunction.constant(mdp, float(value))
    except ValueError:
        pass
    with open(value, 'r') as f:
        gamma = DiscountFunction(np.array(json.load(f), dtype=float))
    gamma.validate_for(mdp)
    return gamma


def dp_solve(args: argparse.Namespace) -> int:
    mdp = load_mdp_json(args.mdp)
    policy = load_policy_json(args.policy, mdp)
    gamma = load_discount(args.gamma, mdp)
    values = solve_values_direct(mdp, policy, gamma)
    frequency = solve_state_frequencies(mdp, policy)
    print(json.dumps({'values': values.tolist(), 'frequencies': frequency.d.tolist()}))
    return EXIT_OK


def run_experiment(args: argparse.Namespace, task: str | None = None) -> int:
    config = load_config(args.config)
    if task is not None and config.task != task:
        logging.info("\033[1;33m[MAIN] %s asks for task=%s, running %s\033[0m" % (args.config, config.task, task))
        config = replace(config, task=task)
        config.validate()
    if getattr(args, 'workers', None):
        config = replace(config, workers=args.workers)

    records = run_sweep(config)
    if getattr(args, 'out', None):
        table = write_artifacts(records, config, args.out)
    else:
        table = aggregate(records, config.metric, config.window_fraction)
    summary = summary_table(table, higher_is_better=config.task == 'control')
    logging.info("\033[1;32m[MAIN] summary\n%s\033[0m" % summary.to_string(index=False))

    if all_cells_diverged(table):
        logging.error("\033[1;31m[MAIN] every cell diverged\033[0m")
        return EXIT_ALL_DIVERGED
    return EXIT_OK


def plot(args: argparse.Namespace) -> int:
    try:
        table = pd.read_csv(os.path.join(args.input, TABLE_FILE))
        with open(os.path.join(args.input, CONFIG_FILE), 'r') as f:
            saved = json.load(f)
    except FileNotFoundError as e:
        raise ConfigException("%s is not a sweep output directory: %s" % (args.input, e)) from e
    higher_is_better = saved.get('task') == 'control'
    title = "%s %s" % (saved.get('env', ''), saved.get('policy_pair', ''))

    if args.kind == 'events':
        plot_event_counts(os.path.join(args.input, EVENTS_FILE), args.output or os.path.join(args.input, 'events.png'))
    elif args.kind == 'ucurve':
        summary = pd.read_csv(os.path.join(args.input, SUMMARY_FILE))
        emit_plots(summary, 'ucurve', args.output or os.path.join(args.input, 'ucurve.png'), title=title)
    else:
        curves = pd.read_csv(os.path.join(args.input, CURVES_FILE))
        emit_plots(curves, 'curve', args.output or os.path.join(args.input, 'curve.png'),
                   cells=best_cells(table, higher_is_better), buffer_step=saved.get('buffer_steps'), title=title)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Trace-based TD learning with meta-learned lambda')
    parser.add_argument('-v', '--verbose', action='store_true', help='Enable debug logging')
    commands = parser.add_subparsers(dest='command', required=True)

    dp = commands.add_parser('dp-solve', help='Exact values and state frequencies of a policy on a finite MDP')
    dp.add_argument('--mdp', required=True, help='MDP JSON file')
    dp.add_argument('--policy', required=True, help='Policy JSON file (n_states x n_actions probabilities)')
    dp.add_argument('--gamma', required=True, help='Scalar discount or JSON file with one discount per state')
    dp.set_defaults(handler=dp_solve)

    for name, task in (('predict', 'prediction'), ('control', 'control')):
        sub = commands.add_parser(name, help='Run the %s sweep of a configuration' % task)
        sub.add_argument('--config', required=True, help='JSON or TOML configuration')
        sub.add_argument('--out', help='Write CSV artifacts to this directory')
        sub.add_argument('--workers', type=int, help='Worker processes (capped by META_TRACE_THREADS)')
        sub.set_defaults(handler=lambda args, task=task: run_experiment(args, task))

    sweep = commands.add_parser('sweep', help='Run the configured sweep and write CSV artifacts')
    sweep.add_argument('--config', required=True, help='JSON or TOML configuration')
    sweep.add_argument('--out', required=True, help='Output directory')
    sweep.add_argument('--workers', type=int, help='Worker processes (capped by META_TRACE_THREADS)')
    sweep.set_defaults(handler=run_experiment)

    plotter = commands.add_parser('plot', help='U-curve, learning-curve or event-count plot from a sweep output directory')
    plotter.add_argument('--in', dest='input', required=True, help='Sweep output directory')
    plotter.add_argument('--kind', choices=['ucurve', 'curve', 'events'], default='ucurve')
    plotter.add_argument('--output', help='Image path (default: <in>/<kind>.png)')
    plotter.set_defaults(handler=plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.handler(args)
    except (ConfigException, InvalidMdpException, SingularSystemException, NonTerminatingException,
            FileNotFoundError, json.JSONDecodeError, ValueError) as e:
        logging.error("\033[1;31m[MAIN] %s\033[0m" % e)
        return EXIT_INVALID_INPUT


if __name__ == '__main__':
    sys.exit(main())
