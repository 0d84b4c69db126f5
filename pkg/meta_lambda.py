# meta_lambda.py

"""
Trace-decay adapters: fixed lambda, lambda-greedy and META, the trust-region semi-gradient
descent of state-based lambda on the overall target error, plus the META-assisted policy
evaluation loop that ties value learner, auxiliary learners and adapter together.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from pubsub import pub

from auxiliary import AuxiliaryBundle, auxiliary_context
from dp_oracle import StateFrequency, overall_value_error
from learners import DivergenceException, LinearLearner, StepContext, make_learner
from run_logger import RunEventLogger, RunRecord

DENOMINATOR_FLOOR: float = 1e-12
ADAPTER_FIXED: str = 'fixed'
ADAPTER_GREEDY: str = 'greedy'
ADAPTER_META: str = 'meta'
ADAPTER_META_NP: str = 'meta-np'
ADAPTER_KINDS: tuple[str, ...] = (ADAPTER_FIXED, ADAPTER_GREEDY, ADAPTER_META, ADAPTER_META_NP)


class LambdaFunction(object):
    """ lambda(x) = clip(1 - w^T x, 0, 1); zero weights mean lambda = 1 everywhere """

    def __init__(self, dimension: int, w: np.ndarray | None = None):
        self.w = np.zeros(dimension) if w is None else np.array(w, dtype=float)

    def raw(self, x: np.ndarray) -> float:
        return 1.0 - float(self.w @ x)

    def __call__(self, x: np.ndarray) -> float:
        return min(1.0, max(0.0, self.raw(x)))


@dataclass(frozen=True)
class MetaStepInputs:
    gamma_next: float
    rho_acc: float
    """ Product of the importance ratios since the start of the episode """
    v_next: float
    e_g: float
    e_glambda: float
    var_glambda: float
    kappa: float

    def __post_init__(self):
        if self.rho_acc < 0:
            raise ValueError("cumulative importance ratio must be non-negative")
        if self.var_glambda < 0:
            raise ValueError("variance readout must be non-negative")


def target_error_estimate(lambda_next: float, inputs: MetaStepInputs) -> float:
    """ The part of the state target error that depends on lambda_{t+1}, quadratic in it """
    gap_g = inputs.v_next - inputs.e_g
    gap_glambda = inputs.v_next - inputs.e_glambda
    return 0.5 * inputs.gamma_next ** 2 * ((gap_g - lambda_next * gap_glambda) ** 2
                                           + lambda_next ** 2 * inputs.var_glambda)


def meta_partial(lambda_next: float, inputs: MetaStepInputs) -> float:
    """ Semi-partial derivative of the target error w.r.t. lambda_{t+1}, statistics held fixed """
    gap_g = inputs.v_next - inputs.e_g
    gap_glambda = inputs.v_next - inputs.e_glambda
    return inputs.gamma_next ** 2 * (lambda_next * (gap_glambda ** 2 + inputs.var_glambda) - gap_g * gap_glambda)


def meta_minimizer(inputs: MetaStepInputs) -> float:
    gap_g = inputs.v_next - inputs.e_g
    gap_glambda = inputs.v_next - inputs.e_glambda
    denominator = gap_glambda ** 2 + inputs.var_glambda
    if denominator < DENOMINATOR_FLOOR:
        pub.sendMessage('Lambda.DegenerateDenominator', kind='minimizer')
        return 0.0
    return min(1.0, max(0.0, gap_glambda * gap_g / denominator))


def lambda_greedy_target(v_next: float, e_g: float, var_g: float) -> float:
    gap = (v_next - e_g) ** 2
    denominator = gap + var_g
    if denominator < DENOMINATOR_FLOOR:
        pub.sendMessage('Lambda.DegenerateDenominator', kind='greedy')
        return 0.0
    return min(1.0, max(0.0, gap / denominator))


def meta_update(lambda_fn: LambdaFunction, x_next: np.ndarray, inputs: MetaStepInputs) -> LambdaFunction:
    """
    One trust-region step on lambda(x_next): lambda moves by -kappa rho_acc times the
    semi-partial, which already carries gamma^2, applied through the weights along x_next.
    A step that would take the unclipped readout at x_next outside [0, 1] is dropped.
    """
    if inputs.kappa == 0.0 or inputs.gamma_next == 0.0:
        return lambda_fn
    partial = meta_partial(lambda_fn(x_next), inputs)
    step = inputs.kappa * inputs.rho_acc * partial
    proposed_w = lambda_fn.w + step * x_next
    proposed = 1.0 - float(proposed_w @ x_next)
    if not 0.0 <= proposed <= 1.0 or not np.isfinite(proposed):
        pub.sendMessage('Lambda.UpdateCancelled', x_index=int(np.argmax(x_next)), proposed=proposed)
        return lambda_fn
    lambda_fn.w = proposed_w
    return lambda_fn


class LambdaAdapter(object):
    """ Supplies lambda for a state and adapts it after the auxiliary learners have moved """

    kind: str = ''
    uses_auxiliary: bool = False
    greedy: bool = False
    param: float | None = None

    def value(self, x: np.ndarray, s: int | None) -> float:
        raise NotImplementedError()

    def observe(self, x_next: np.ndarray, s_next: int | None, inputs: MetaStepInputs) -> None:
        pass


class FixedLambda(LambdaAdapter):
    kind = ADAPTER_FIXED

    def __init__(self, lam: float):
        if not 0.0 <= lam <= 1.0:
            raise ValueError("lambda must be in [0, 1], got %g" % lam)
        self.param = lam

    def value(self, x, s):
        return self.param


class GreedyLambda(LambdaAdapter):
    """ lambda(x) = (V - E[G])^2 / ((V - E[G])^2 + Var[G]) from the current estimates """

    kind = ADAPTER_GREEDY
    uses_auxiliary = True
    greedy = True

    def __init__(self, value_learner: LinearLearner, bundle: AuxiliaryBundle):
        self.value_learner = value_learner
        self.bundle = bundle

    def value(self, x, s):
        if not np.any(x):
            return 1.0
        return lambda_greedy_target(self.value_learner.value(x), self.bundle.learner_e_g.value(x), self.bundle.variance(x))


class MetaLambda(LambdaAdapter):
    """ META over the value features (parametric) """

    kind = ADAPTER_META
    uses_auxiliary = True

    def __init__(self, dimension: int, kappa: float):
        self.param = kappa
        self.fn = LambdaFunction(dimension)

    def features(self, x: np.ndarray, s: int | None) -> np.ndarray:
        return x

    def value(self, x, s):
        return self.fn(self.features(x, s))

    def observe(self, x_next, s_next, inputs):
        meta_update(self.fn, self.features(x_next, s_next), inputs)


class MetaNonParametricLambda(MetaLambda):
    """ META with one lambda per state, independent of the value features """

    kind = ADAPTER_META_NP

    def __init__(self, n_states: int, kappa: float, terminal: np.ndarray):
        super(MetaNonParametricLambda, self).__init__(n_states, kappa)
        self._rows = np.eye(n_states)
        self._rows[np.asarray(terminal, dtype=bool)] = 0.0

    def features(self, x, s):
        if s is None:
            raise ValueError("non-parametric lambda needs enumerated states")
        return self._rows[s]


def make_adapter(kind: str, param: float | None, dimension: int, value_learner: LinearLearner,
                 bundle: AuxiliaryBundle | None, n_states: int | None = None,
                 terminal: np.ndarray | None = None) -> LambdaAdapter:
    if kind == ADAPTER_FIXED:
        return FixedLambda(param)
    if kind == ADAPTER_GREEDY:
        return GreedyLambda(value_learner, bundle)
    if kind == ADAPTER_META:
        return MetaLambda(dimension, param)
    if kind == ADAPTER_META_NP:
        if n_states is None:
            raise ValueError("meta-np needs an enumerated state set")
        return MetaNonParametricLambda(n_states, param, terminal if terminal is not None else np.zeros(n_states, dtype=bool))
    raise ValueError("unknown adapter kind %r (expected one of %s)" % (kind, ADAPTER_KINDS))


def lambda_snapshot(adapter: LambdaAdapter, feature_rows: np.ndarray, states: list[int]) -> list[float]:
    """ lambda of every listed state under the adapter's current parameters """
    return [adapter.value(feature_rows[s], s) for s in states]


@dataclass(frozen=True)
class PredictionSetup:
    """ Everything a prediction run needs that is fixed per configuration """

    env: object
    """ Tabular environment with reset(rng) and step(action, rng) """
    behavior: object
    target: object
    gamma: object
    """ DiscountFunction of the environment """
    rows: np.ndarray
    """ Feature row per state, zero on terminal states """
    v_true: np.ndarray
    frequency: StateFrequency
    terminal: np.ndarray


@dataclass(frozen=True)
class RunSettings:
    learner: str
    adapter: str
    alpha: float
    param: float | None
    """ lambda of a fixed adapter, kappa of a META adapter """
    beta: float | None = None
    """ Secondary step size; None means beta = alpha """
    aux_multiplier: float = 2.0
    variance_mode: str = 'dvtd'
    steps: int = 0
    buffer_fraction: float = 0.1
    log_interval: int = 1000
    cell_id: str = ''
    seed: int = 0


def meta_policy_evaluation(setup: PredictionSetup, settings: RunSettings) -> RunRecord:
    """
    Online policy evaluation with an adapted lambda. Each step interacts with the
    environment, advances the auxiliary learners, adapts lambda (after the buffer period)
    and then advances the value learner. The overall value error against the exact values
    is logged every `log_interval` steps.
    """
    rng = np.random.default_rng(settings.seed)
    dimension = setup.rows.shape[1]
    n_states = setup.rows.shape[0]
    beta = settings.alpha if settings.beta is None else settings.beta

    value_learner, value_step = make_learner(settings.learner, dimension, 'value')
    bundle = None
    if settings.adapter != ADAPTER_FIXED:
        bundle = AuxiliaryBundle(dimension, settings.learner, settings.variance_mode,
                                 greedy=settings.adapter == ADAPTER_GREEDY)
    adapter = make_adapter(settings.adapter, settings.param, dimension, value_learner, bundle, n_states, setup.terminal)
    states = [s for s in range(n_states) if not setup.terminal[s]]
    buffer_steps = int(settings.buffer_fraction * settings.steps)

    events = RunEventLogger(settings.cell_id, settings.seed)
    record = RunRecord(settings.cell_id, settings.seed)
    s = setup.env.reset(rng)
    rho_acc = 1.0
    step = 0
    try:
        for step in range(settings.steps):
            a = setup.behavior.sample(s, rng)
            rho = setup.target.probs[s, a] / setup.behavior.probs[s, a]
            s_next, r, terminal, gamma_next = setup.env.step(a, rng)
            x, x_next = setup.rows[s], setup.rows[s_next]
            rho_acc *= rho

            ctx = StepContext(x, x_next, r, setup.gamma(s), gamma_next, adapter.value(x, s),
                              adapter.value(x_next, s_next), rho, settings.alpha, beta)
            if bundle is not None:
                v_next = value_learner.value(x_next)
                value_delta = r + gamma_next * v_next - value_learner.value(x)
                bundle.step(auxiliary_context(ctx, settings.aux_multiplier), value_delta, v_next)
                if step >= buffer_steps and not terminal:
                    stats = bundle.statistics(x_next)
                    adapter.observe(x_next, s_next, MetaStepInputs(gamma_next, rho_acc, v_next, stats.e_g,
                                                                   stats.e_glambda, stats.var, settings.param or 0.0))
                    ctx = replace(ctx, lambda_next=adapter.value(x_next, s_next))
            value_step(value_learner, ctx)

            if terminal:
                s = setup.env.reset(rng)
                rho_acc = 1.0
                value_learner.start_episode()
                if bundle is not None:
                    bundle.start_episode()
            else:
                s = s_next

            if (step + 1) % settings.log_interval == 0 or step + 1 == settings.steps:
                error = overall_value_error(setup.rows @ value_learner.w, setup.v_true, setup.frequency, setup.terminal)
                snapshot = lambda_snapshot(adapter, setup.rows, states)
                record.add_point(step + 1, error, float(np.mean(snapshot)) if snapshot else 1.0)
                pub.sendMessage('Run.ErrorLogged', cell_id=settings.cell_id, seed=settings.seed, step=step + 1, error=error)
    except DivergenceException as e:
        logging.error("\033[1;31m[RUN] %s seed %d diverged: %s\033[0m" % (settings.cell_id, settings.seed, e))
        record.mark_diverged(step + 1, "%s: %s" % (e.learner_name, e.reason))
        pub.sendMessage('Run.Diverged', cell_id=settings.cell_id, seed=settings.seed, step=step + 1, reason=e.reason)

    record.lambda_snapshot = lambda_snapshot(adapter, setup.rows, states)
    record.metadata.update(events.close())
    record.metadata['rho_acc_last'] = rho_acc
    return record
