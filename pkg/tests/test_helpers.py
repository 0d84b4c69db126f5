# test_helpers.py

import pandas as pd
import pytest

from harness import TABLE_COLUMNS
from helpers import best_cells, emit_plots


def curves_frame() -> pd.DataFrame:
    rows = [('fixed|a', i, 1.0 / i, 0.1, 0.9) for i in (100, 200, 300)]
    rows += [('meta|a', i, 0.5 / i, 0.05, 0.7) for i in (100, 200, 300)]
    return pd.DataFrame(rows, columns=['cell_id', 'index', 'mean', 'std', 'mean_lambda'])


def test_best_cells_skip_divergent_cells():
    table = pd.DataFrame([
        ('fixed|1', 'fixed', 0.1, 0.0, 0.3, 0.0, 2, 0, False),
        ('fixed|2', 'fixed', 0.2, 0.0, 0.1, 0.0, 2, 0, False),
        ('meta|1', 'meta', 0.1, 1e-3, float('nan'), float('nan'), 2, 2, True),
        ('meta|2', 'meta', 0.2, 1e-3, 0.2, 0.0, 2, 1, False),
    ], columns=TABLE_COLUMNS)
    assert best_cells(table) == {'fixed': 'fixed|2', 'meta': 'meta|2'}
    assert best_cells(table, higher_is_better=True) == {'fixed': 'fixed|1', 'meta': 'meta|2'}


def test_ucurve_of_an_empty_summary(tmp_path):
    csv_path = emit_plots(pd.DataFrame(columns=['alpha']), 'ucurve', str(tmp_path / 'u.png'))
    assert (tmp_path / 'u.png').exists()
    assert csv_path == str(tmp_path / 'u.csv')


def test_ucurve_single_cell(tmp_path):
    summary = pd.DataFrame({'alpha': [0.01], 'lambda=0 mean': [0.2], 'lambda=0 std': [0.01], 'lambda=0 n_diverged': [0]})
    csv_path = emit_plots(summary, 'ucurve', str(tmp_path / 'u.png'), title='ringworld')
    pd.testing.assert_frame_equal(pd.read_csv(csv_path), summary)


def test_learning_curves_of_chosen_cells(tmp_path):
    csv_path = emit_plots(curves_frame(), 'curve', str(tmp_path / 'c.png'), cells={'meta': 'meta|a'}, buffer_step=150)
    plotted = pd.read_csv(csv_path)
    assert set(plotted['cell_id']) == {'meta|a'}
    assert plotted['index'].tolist() == [100, 200, 300]


def test_learning_curves_default_to_every_cell(tmp_path):
    plotted = pd.read_csv(emit_plots(curves_frame(), 'curve', str(tmp_path / 'c.png')))
    assert len(plotted) == 6


def test_unknown_kind():
    with pytest.raises(ValueError):
        emit_plots(curves_frame(), 'heatmap', 'unused.png')
