# helpers.py

import logging
import os

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
matplotlib.use('Agg')  # <- Use a non-GUI backend, sweeps run in worker processes
# Disable matplotlib debug logging
matplotlib.set_loglevel('WARNING')  # Only show warning and higher level messages

PLOT_KINDS: tuple[str, ...] = ('ucurve', 'curve')
SHADE_ALPHA: float = 0.2


def best_cells(table: pd.DataFrame, higher_is_better: bool = False) -> dict[str, str]:
    """Best cell id per adapter (over alpha and its own parameter), skipping all-divergent cells."""
    best = {}
    finite = table[np.isfinite(table['mean'].astype(float))] if len(table) else table
    for adapter, group in finite.groupby('adapter', sort=True):
        row = group.loc[group['mean'].idxmax() if higher_is_better else group['mean'].idxmin()]
        best[adapter] = row['cell_id']
    return best


def _series_labels(summary: pd.DataFrame) -> list[str]:
    return [c[:-len(' mean')] for c in summary.columns if c.endswith(' mean')]


def plot_ucurve(summary: pd.DataFrame, ax) -> pd.DataFrame:
    """x = alpha on a log scale, one mean line with a std band per lambda column, greedy and META."""
    for label in _series_labels(summary):
        points = summary[['alpha', label + ' mean', label + ' std']].dropna()
        if points.empty:
            continue
        ax.plot(points['alpha'], points[label + ' mean'], marker='o', label=label)
        ax.fill_between(points['alpha'], points[label + ' mean'] - points[label + ' std'],
                        points[label + ' mean'] + points[label + ' std'], alpha=SHADE_ALPHA)
    ax.set_xscale('log')
    ax.set_xlabel('alpha')
    ax.set_ylabel('error')
    return summary


def plot_learning_curves(curves: pd.DataFrame, ax, cells: dict[str, str] | None = None,
                         buffer_step: int | None = None) -> pd.DataFrame:
    """x = step, one line per chosen cell; the end of the buffer period is ticked on the x axis."""
    if cells is None:
        cells = {cell_id: cell_id for cell_id in dict.fromkeys(curves['cell_id'])} if len(curves) else {}
    plotted = []
    for label, cell_id in cells.items():
        points = curves[curves['cell_id'] == cell_id].sort_values('index')
        if points.empty:
            continue
        ax.plot(points['index'], points['mean'], label="%s (%s)" % (label, cell_id) if label != cell_id else label)
        ax.fill_between(points['index'], points['mean'] - points['std'], points['mean'] + points['std'], alpha=SHADE_ALPHA)
        plotted.append(points)
    if buffer_step:
        ax.axvline(buffer_step, color='grey', linestyle='--', linewidth=0.8)
        ax.set_xticks(sorted(set(ax.get_xticks()) | {buffer_step}))
    ax.set_xlabel('step')
    ax.set_ylabel('error')
    return pd.concat(plotted) if plotted else curves.iloc[0:0]


def emit_plots(table: pd.DataFrame, kind: str, out_path: str, cells: dict[str, str] | None = None,
               buffer_step: int | None = None, title: str | None = None) -> str:
    """
    Writes `out_path` (an image) and the plotted data next to it as CSV. `table` is the
    summary table for 'ucurve' and the learning curves for 'curve'. Returns the CSV path.
    """
    if kind not in PLOT_KINDS:
        raise ValueError("plot kind must be one of %s" % (PLOT_KINDS,))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if kind == 'ucurve':
        plotted = plot_ucurve(table, ax)
    else:
        plotted = plot_learning_curves(table, ax, cells, buffer_step)
    if title:
        ax.set_title(title)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize='small')
    plt.tight_layout()
    plt.savefig(out_path, bbox_inches='tight')
    plt.close(fig)

    csv_path = os.path.splitext(out_path)[0] + '.csv'
    plotted.to_csv(csv_path, index=False)
    logging.info("\033[1;32m[PLOT] %s plot written to %s\033[0m" % (kind, out_path))
    return csv_path
