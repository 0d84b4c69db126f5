# config.py

import json
import logging
import os
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, field, fields, replace

from typeguard import typechecked

from auxiliary import MODE_DVTD, MODE_VTD
from learners import LEARNER_STEPS
from meta_lambda import ADAPTER_FIXED, ADAPTER_KINDS, ADAPTER_META, ADAPTER_META_NP

ALPHA_GRID: list[float] = [m * 10.0 ** e for e in range(-5, -1) for m in (1, 2, 3, 4, 5)] + [1e-1]
LAMBDA_GRID: list[float] = [0.0, 0.4, 0.8, 0.9, 0.95, 0.975, 0.99, 1.0]
KAPPA_GRID: list[float] = [10.0 ** e for e in range(-7, 0)]

DEFAULT_LOG_INTERVAL: int = 1000
DEFAULT_WINDOW_FRACTION: float = 0.05
THREADS_ENV_VAR: str = 'META_TRACE_THREADS'

TASKS: tuple[str, ...] = ('prediction', 'control')
ENVIRONMENTS: tuple[str, ...] = ('ringworld', 'frozenlake', 'mountaincar')
METRICS: tuple[str, ...] = ('final', 'window')
FEATURE_KINDS: tuple[str, ...] = ('onehot', 'tiles')
INTEGER_FIELDS: tuple[str, ...] = ('steps', 'runs', 'base_seed', 'log_interval', 'tiles_per_dim', 'n_tilings',
                                   'feature_seed', 'workers')
TASK_DEFAULTS: dict[str, dict] = {
    'prediction': {'learner': 'true_online_td', 'buffer_fraction': 0.1},
    'control': {'learner': 'true_online_gtd', 'buffer_fraction': 0.5},
}


class ConfigException(Exception):
    pass


@dataclass(frozen=True)
class Cell:
    """ One point of the sweep grid: an adapter with its learning rate and its own parameter """

    adapter: str
    alpha: float
    param: float | None

    @property
    def cell_id(self) -> str:
        if self.adapter == ADAPTER_FIXED:
            return "fixed|alpha=%.1e|lambda=%g" % (self.alpha, self.param)
        if self.param is None:
            return "%s|alpha=%.1e" % (self.adapter, self.alpha)
        return "%s|alpha=%.1e|kappa=%.1e" % (self.adapter, self.alpha, self.param)


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = 'prediction'
    env: str = 'ringworld'
    env_params: dict = field(default_factory=dict)
    """ Extra environment arguments, e.g. n_states, noise_prob """
    policy_pair: str = '0.4/0.35'
    """ RingWorld 'behavior/target' p(left) pair, or FrozenLake 'off-policy' / 'on-policy' """
    gamma: float | None = None
    """ None picks the environment default (0.95 for the tabular ones, 1 for MountainCar) """
    learner: str | None = None
    """ None picks the task default: true_online_td for prediction, true_online_gtd for control """
    adapters: list[str] = field(default_factory=lambda: ['fixed', 'greedy', 'meta'])
    alphas: list[float] = field(default_factory=lambda: list(ALPHA_GRID))
    lambdas: list[float] = field(default_factory=lambda: list(LAMBDA_GRID))
    kappas: list[float] = field(default_factory=lambda: list(KAPPA_GRID))
    beta: float | None = None
    """ Secondary step size of GTD learners; None means beta = alpha """
    aux_multiplier: float = 2.0
    variance_mode: str = MODE_DVTD
    buffer_fraction: float | None = None
    """ None picks the task default: 0.1 for prediction, 0.5 for control """
    steps: int = 100000
    runs: int = 30
    base_seed: int = 0
    log_interval: int = DEFAULT_LOG_INTERVAL
    metric: str = 'window'
    window_fraction: float = DEFAULT_WINDOW_FRACTION
    features: str = 'onehot'
    tiles_per_dim: int = 4
    n_tilings: int = 4
    tile_offsets: str = 'even'
    feature_seed: int = 0
    eta: float = 1.0
    """ Actor step size as a multiple of alpha (control only) """
    workers: int | None = None

    def resolved(self) -> 'ExperimentConfig':
        """ The configuration with the task defaults filled in for unset fields """
        defaults = TASK_DEFAULTS.get(self.task, {})
        return replace(self, **{name: value for name, value in defaults.items() if getattr(self, name) is None})

    def validate(self) -> None:
        problems = []
        resolved = self.resolved()
        learner, buffer_fraction = resolved.learner, resolved.buffer_fraction
        if self.task not in TASKS:
            problems.append("task must be one of %s" % (TASKS,))
        if self.env not in ENVIRONMENTS:
            problems.append("env must be one of %s" % (ENVIRONMENTS,))
        if self.task == 'prediction' and self.env == 'mountaincar':
            problems.append("mountaincar has no exact ground truth; use task = 'control'")
        if learner not in LEARNER_STEPS:
            problems.append("learner must be one of %s" % sorted(LEARNER_STEPS))
        if not self.adapters or any(a not in ADAPTER_KINDS for a in self.adapters):
            problems.append("adapters must be a non-empty subset of %s" % (ADAPTER_KINDS,))
        if ADAPTER_META_NP in self.adapters and self.env == 'mountaincar':
            problems.append("meta-np needs enumerated states")
        if not self.alphas or any(a <= 0 for a in self.alphas):
            problems.append("alphas must be a non-empty list of positive rates")
        if ADAPTER_FIXED in self.adapters and (not self.lambdas or any(not 0 <= lam <= 1 for lam in self.lambdas)):
            problems.append("lambdas must be a non-empty list in [0, 1]")
        if any(a in (ADAPTER_META, ADAPTER_META_NP) for a in self.adapters) and (not self.kappas or any(k < 0 for k in self.kappas)):
            problems.append("kappas must be a non-empty list of non-negative rates")
        if self.beta is not None and self.beta < 0:
            problems.append("beta must be non-negative")
        if self.aux_multiplier <= 0:
            problems.append("aux_multiplier must be positive")
        if self.variance_mode not in (MODE_DVTD, MODE_VTD):
            problems.append("variance_mode must be 'dvtd' or 'vtd'")
        if buffer_fraction is None or not 0 <= buffer_fraction < 1:
            problems.append("buffer_fraction must be in [0, 1)")
        if self.steps < 0 or self.runs < 1 or self.log_interval < 1:
            problems.append("steps must be >= 0, runs >= 1 and log_interval >= 1")
        if self.metric not in METRICS:
            problems.append("metric must be one of %s" % (METRICS,))
        if not 0 < self.window_fraction <= 1:
            problems.append("window_fraction must be in (0, 1]")
        if self.features not in FEATURE_KINDS:
            problems.append("features must be one of %s" % (FEATURE_KINDS,))
        if self.env == 'ringworld' and self.features != 'onehot':
            problems.append("ringworld only supports onehot features")
        if self.gamma is not None and not 0 <= self.gamma <= 1:
            problems.append("gamma must be in [0, 1]")
        if self.eta < 0:
            problems.append("eta must be non-negative")
        if problems:
            raise ConfigException("invalid configuration: " + "; ".join(problems))

    def cells(self) -> list[Cell]:
        cells = []
        for adapter in self.adapters:
            for alpha in self.alphas:
                if adapter == ADAPTER_FIXED:
                    cells.extend(Cell(adapter, alpha, lam) for lam in self.lambdas)
                elif adapter in (ADAPTER_META, ADAPTER_META_NP):
                    cells.extend(Cell(adapter, alpha, kappa) for kappa in self.kappas)
                else:
                    cells.append(Cell(adapter, alpha, None))
        return cells

    def worker_count(self) -> int:
        cap = os.environ.get(THREADS_ENV_VAR)
        workers = self.workers or os.cpu_count() or 1
        if cap:
            try:
                workers = min(workers, max(1, int(cap)))
            except ValueError:
                logging.warning("\033[1;33m[CONFIG] ignoring %s=%r\033[0m" % (THREADS_ENV_VAR, cap))
        return workers

    def to_dict(self) -> dict:
        return asdict(self)


@typechecked
def config_from_dict(data: dict) -> ExperimentConfig:
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigException("unknown configuration keys: %s" % ", ".join(unknown))
    data = dict(data)
    for name in INTEGER_FIELDS:
        value = data.get(name)
        # 1e5 style counts arrive as floats
        if isinstance(value, float):
            if not value.is_integer():
                raise ConfigException("%s must be an integer, got %r" % (name, value))
            data[name] = int(value)
    try:
        config = ExperimentConfig(**data)
    except TypeError as e:
        raise ConfigException(str(e)) from e
    config.validate()
    return config


@typechecked
def load_config(path: str) -> ExperimentConfig:
    """ JSON for .json files, TOML (flat key = value) for everything else """
    try:
        if path.endswith('.json'):
            with open(path, 'r') as f:
                data = json.load(f)
        else:
            with open(path, 'rb') as f:
                data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigException("configuration file %s does not exist" % path) from e
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ConfigException("cannot parse %s: %s" % (path, e)) from e
    if not isinstance(data, dict):
        raise ConfigException("%s must hold a table of settings" % path)

    config = config_from_dict(data)
    logging.info("\033[1;32m[CONFIG] %s: %s on %s, %d cells x %d runs\033[0m"
                 % (path, config.task, config.env, len(config.cells()), config.runs))
    return config
