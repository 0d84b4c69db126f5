# test_config.py

import json

import pytest

from config import ALPHA_GRID, THREADS_ENV_VAR, Cell, ConfigException, ExperimentConfig, config_from_dict, load_config


def test_defaults_are_valid():
    config = ExperimentConfig()
    config.validate()
    assert len(ALPHA_GRID) == 21
    assert len(config.cells()) == 21 * (8 + 1 + 7)


def test_cell_ids():
    assert Cell('fixed', 1e-5, 0.4).cell_id == 'fixed|alpha=1.0e-05|lambda=0.4'
    assert Cell('greedy', 0.002, None).cell_id == 'greedy|alpha=2.0e-03'
    assert Cell('meta', 0.1, 1e-3).cell_id == 'meta|alpha=1.0e-01|kappa=1.0e-03'


def test_cells_follow_adapter_order():
    config = ExperimentConfig(adapters=['greedy', 'fixed'], alphas=[0.1, 0.2], lambdas=[0.0, 1.0])
    assert [c.cell_id for c in config.cells()] == [
        'greedy|alpha=1.0e-01', 'greedy|alpha=2.0e-01',
        'fixed|alpha=1.0e-01|lambda=0', 'fixed|alpha=1.0e-01|lambda=1',
        'fixed|alpha=2.0e-01|lambda=0', 'fixed|alpha=2.0e-01|lambda=1',
    ]


def test_unknown_keys_are_rejected():
    with pytest.raises(ConfigException, match='stepz'):
        config_from_dict({'stepz': 10})


def test_integer_fields_accept_whole_floats():
    assert config_from_dict({'steps': 1e5}).steps == 100000
    with pytest.raises(ConfigException):
        config_from_dict({'runs': 1.5})


@pytest.mark.parametrize('task, env, learner, buffer_fraction', [
    ('prediction', 'ringworld', 'true_online_td', 0.1),
    ('control', 'mountaincar', 'true_online_gtd', 0.5),
])
def test_task_defaults_fill_unset_fields(task, env, learner, buffer_fraction):
    data = {'task': task, 'env': env}
    if env == 'mountaincar':
        data['features'] = 'tiles'
    config = config_from_dict(data)
    assert config.learner is None and config.buffer_fraction is None
    resolved = config.resolved()
    assert resolved.learner == learner
    assert resolved.buffer_fraction == buffer_fraction


def test_explicit_learner_and_buffer_survive_resolution():
    config = config_from_dict({'task': 'control', 'env': 'mountaincar', 'features': 'tiles', 'learner': 'td',
                               'buffer_fraction': 0.2}).resolved()
    assert config.learner == 'td' and config.buffer_fraction == 0.2


@pytest.mark.parametrize('data', [
    {'buffer_fraction': 1.0},
    {'alphas': []},
    {'lambdas': [1.2]},
    {'task': 'prediction', 'env': 'mountaincar'},
    {'env': 'ringworld', 'features': 'tiles'},
    {'adapters': ['annealed']},
    {'learner': 'sarsa'},
    {'variance_mode': 'moments'},
    {'gamma': 1.5},
])
def test_invalid_settings(data):
    with pytest.raises(ConfigException):
        config_from_dict(data)


def test_load_toml_and_json(tmp_path):
    toml_path = tmp_path / 'sweep.toml'
    toml_path.write_text('env = "frozenlake"\npolicy_pair = "on-policy"\nalphas = [0.01]\nsteps = 2000\nruns = 2\n')
    config = load_config(str(toml_path))
    assert (config.env, config.policy_pair, config.alphas, config.steps) == ('frozenlake', 'on-policy', [0.01], 2000)

    json_path = tmp_path / 'sweep.json'
    json_path.write_text(json.dumps({'task': 'control', 'env': 'mountaincar', 'features': 'tiles', 'eta': 0.5}))
    assert load_config(str(json_path)).eta == 0.5


def test_load_errors(tmp_path):
    with pytest.raises(ConfigException):
        load_config(str(tmp_path / 'missing.toml'))
    broken = tmp_path / 'broken.json'
    broken.write_text('{"steps": ')
    with pytest.raises(ConfigException):
        load_config(str(broken))
    listing = tmp_path / 'list.json'
    listing.write_text('[1, 2]')
    with pytest.raises(ConfigException):
        load_config(str(listing))


def test_worker_count_is_capped(monkeypatch):
    monkeypatch.setenv(THREADS_ENV_VAR, '2')
    assert ExperimentConfig(workers=8).worker_count() == 2
    assert ExperimentConfig(workers=1).worker_count() == 1
    monkeypatch.setenv(THREADS_ENV_VAR, 'many')
    assert ExperimentConfig(workers=3).worker_count() == 3
