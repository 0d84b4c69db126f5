# run_logger.py

import logging
from dataclasses import dataclass, field

import matplotlib
import matplotlib.pyplot as plt
import pandas as pd
from pubsub import pub

matplotlib.use('Agg')
matplotlib.set_loglevel('WARNING')

EVENT_COUNTERS: tuple[str, ...] = ('n_cancelled', 'n_clamped', 'n_degenerate', 'n_diverged')


@dataclass
class RunRecord:
    cell_id: str
    seed: int
    series: list[tuple[int, float, float]] = field(default_factory=list)
    """ (step or episode, error or return, mean lambda) in increasing index order """
    diverged: bool = False
    diverged_at: int | None = None
    lambda_snapshot: list[float] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_point(self, index: int, value: float, mean_lambda: float) -> None:
        if self.series and index <= self.series[-1][0]:
            raise ValueError("series index %d is not after %d" % (index, self.series[-1][0]))
        self.series.append((index, value, mean_lambda))

    def mark_diverged(self, step: int, reason: str) -> None:
        self.diverged = True
        self.diverged_at = step
        self.metadata['divergence'] = reason

    @property
    def final_value(self) -> float | None:
        return self.series[-1][1] if self.series else None


class RunEventLogger(object):
    """
    Counts the adapter / auxiliary / divergence events of one run. Subscribed from
    construction until close().
    """

    def __init__(self, cell_id: str, seed: int):
        self.cell_id = cell_id
        self.seed = seed
        self.counters: dict[str, int] = {name: 0 for name in EVENT_COUNTERS}

        pub.subscribe(self.on_update_cancelled, 'Lambda.UpdateCancelled')
        pub.subscribe(self.on_degenerate_denominator, 'Lambda.DegenerateDenominator')
        pub.subscribe(self.on_variance_clamped, 'Auxiliary.VarianceClamped')
        pub.subscribe(self.on_diverged, 'Run.Diverged')

    def on_update_cancelled(self, x_index: int, proposed: float):
        self.counters['n_cancelled'] += 1
        logging.debug("[EVENTS] %s seed %d: cancelled lambda update to %.6g at feature %d"
                      % (self.cell_id, self.seed, proposed, x_index))

    def on_degenerate_denominator(self, kind: str):
        self.counters['n_degenerate'] += 1

    def on_variance_clamped(self, learner: str):
        self.counters['n_clamped'] += 1

    def on_diverged(self, cell_id: str, seed: int, step: int, reason: str):
        if (cell_id, seed) == (self.cell_id, self.seed):
            self.counters['n_diverged'] += 1

    def close(self) -> dict[str, int]:
        pub.unsubscribe(self.on_update_cancelled, 'Lambda.UpdateCancelled')
        pub.unsubscribe(self.on_degenerate_denominator, 'Lambda.DegenerateDenominator')
        pub.unsubscribe(self.on_variance_clamped, 'Auxiliary.VarianceClamped')
        pub.unsubscribe(self.on_diverged, 'Run.Diverged')
        if self.counters['n_cancelled'] or self.counters['n_clamped']:
            logging.info("\033[1;33m[EVENTS] %s seed %d: %d cancelled lambda updates, %d clamped variances\033[0m"
                         % (self.cell_id, self.seed, self.counters['n_cancelled'], self.counters['n_clamped']))
        return dict(self.counters)


def events_frame(records: list[RunRecord]) -> pd.DataFrame:
    """ Event counters of every run, one row per (cell, replica) """
    rows = [[r.cell_id, r.metadata.get('replica'), r.seed] + [int(r.metadata.get(name, 0)) for name in EVENT_COUNTERS]
            for r in records]
    return pd.DataFrame(rows, columns=['cell_id', 'replica', 'seed'] + list(EVENT_COUNTERS))


def plot_event_counts(events_file: str, save_path: str) -> None:
    """ Bar chart of the event counts per cell, summed over replicas """
    try:
        df = pd.read_csv(events_file)
    except (FileNotFoundError, pd.errors.EmptyDataError):
        logging.warning("\033[1;33m[EVENTS] no event counts at %s\033[0m" % events_file)
        return

    counts = df.groupby('cell_id', sort=False)[list(EVENT_COUNTERS)].sum()
    counts = counts.loc[:, (counts != 0).any(axis=0)]
    fig, ax = plt.subplots(figsize=(max(6, len(counts) * 0.6), 4))
    if not counts.empty:
        counts.plot.bar(ax=ax)
    ax.set_xlabel('Cell')
    ax.set_ylabel('Events')
    ax.set_title('Adapter and learner events per cell')
    plt.tight_layout()
    plt.savefig(save_path, bbox_inches='tight')
    plt.close(fig)
