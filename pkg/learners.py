# learners.py

"""
Linear trace-based value learners. Every step function advances a LinearLearner in place by
one transition and returns the TD error it computed.

The true online learners keep their trace with the step size folded in
(e = rho (gamma lambda e + alpha (1 - rho gamma lambda x^T e) x)), so the on-policy true online
TD(lambda) and true online GTD(lambda) with zero secondary weights share one code path.
"""

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

DIVERGENCE_THRESHOLD: float = 1e8


class DivergenceException(Exception):
    def __init__(self, step: int, reason: str, learner_name: str):
        super(DivergenceException, self).__init__("%s diverged at step %d: %s" % (learner_name, step, reason))
        self.step = step
        self.reason = reason
        self.learner_name = learner_name


@dataclass(frozen=True)
class StepContext:
    x_t: np.ndarray
    """ Features of S_t """
    x_next: np.ndarray
    """ Features of S_{t+1}, all zero when S_{t+1} is terminal """
    r: float
    gamma_t: float
    gamma_next: float
    lambda_t: float
    lambda_next: float
    rho: float = 1.0
    """ Per-decision importance ratio of A_t """
    alpha: float = 0.0
    beta: float = 0.0
    """ Step size of the secondary (GTD correction) weights """

    def __post_init__(self):
        object.__setattr__(self, 'lambda_t', min(1.0, max(0.0, float(self.lambda_t))))
        object.__setattr__(self, 'lambda_next', min(1.0, max(0.0, float(self.lambda_next))))
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("learning rates must be non-negative, got alpha=%g beta=%g" % (self.alpha, self.beta))
        if self.rho < 0:
            raise ValueError("importance ratio must be non-negative, got %g" % self.rho)

    def with_target(self, r: float, gamma_t: float, gamma_next: float, lambda_t: float,
                    lambda_next: float, rho: float, alpha: float) -> 'StepContext':
        """ Same features, different pseudo-MRP (used by the auxiliary learners) """
        return StepContext(self.x_t, self.x_next, r, gamma_t, gamma_next, lambda_t, lambda_next,
                           rho, alpha, self.beta)


class LinearLearner(object):
    """ Weights, eligibility traces and true-online bookkeeping for one estimated quantity """

    def __init__(self, dimension: int, name: str = 'value', w: np.ndarray | None = None,
                 secondary: bool = False):
        self.name = name
        self.dimension = dimension
        self.w = np.zeros(dimension) if w is None else np.array(w, dtype=float)
        if self.w.shape != (dimension,):
            raise ValueError("weights of shape %s do not match dimension %d" % (self.w.shape, dimension))
        self.z = np.zeros(dimension)
        self.v_old = 0.0
        # GTD correction weights and their two traces; zero-length when unused
        self.w_secondary = np.zeros(dimension if secondary else 0)
        self.z_grad = np.zeros(dimension if secondary else 0)
        self.z_secondary = np.zeros(dimension if secondary else 0)
        self.rho_prev = 1.0
        self.steps = 0

    @property
    def has_secondary(self) -> bool:
        return self.w_secondary.size > 0

    def value(self, x: np.ndarray) -> float:
        return float(self.w @ x)

    def start_episode(self) -> None:
        self.z[:] = 0.0
        self.z_grad[:] = 0.0
        self.z_secondary[:] = 0.0
        self.v_old = 0.0
        self.rho_prev = 1.0

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'w': self.w.tolist(),
            'z': self.z.tolist(),
            'v_old': self.v_old,
            'w_secondary': self.w_secondary.tolist(),
            'z_grad': self.z_grad.tolist(),
            'z_secondary': self.z_secondary.tolist(),
            'rho_prev': self.rho_prev,
            'steps': self.steps,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'LinearLearner':
        w = np.array(data['w'], dtype=float)
        learner = cls(len(w), data.get('name', 'value'), w, secondary=len(data.get('w_secondary', [])) > 0)
        learner.z = np.array(data['z'], dtype=float)
        learner.v_old = float(data['v_old'])
        if learner.has_secondary:
            learner.w_secondary = np.array(data['w_secondary'], dtype=float)
            learner.z_grad = np.array(data['z_grad'], dtype=float)
            learner.z_secondary = np.array(data['z_secondary'], dtype=float)
        learner.rho_prev = float(data.get('rho_prev', 1.0))
        learner.steps = int(data.get('steps', 0))
        return learner

    def __repr__(self):
        return "LinearLearner(%s, dim=%d, steps=%d)" % (self.name, self.dimension, self.steps)


def _td_error(learner: LinearLearner, ctx: StepContext) -> tuple[float, float, float]:
    v = learner.w @ ctx.x_t
    v_next = learner.w @ ctx.x_next
    delta = ctx.r + ctx.gamma_next * v_next - v
    if not np.isfinite(delta):
        logging.error("\033[1;31m[%s] non-finite TD error at step %d\033[0m" % (learner.name, learner.steps))
        raise DivergenceException(learner.steps, "non-finite TD error", learner.name)
    return float(delta), float(v), float(v_next)


def _check_weights(learner: LinearLearner) -> None:
    learner.steps += 1
    largest = np.max(np.abs(learner.w)) if learner.dimension else 0.0
    if not np.isfinite(largest) or largest > DIVERGENCE_THRESHOLD:
        logging.error("\033[1;31m[%s] weights left the safe range at step %d (|w|=%.3e)\033[0m" % (learner.name, learner.steps, largest))
        raise DivergenceException(learner.steps, "|w| = %.3e exceeds %.0e" % (largest, DIVERGENCE_THRESHOLD), learner.name)


def td_lambda_step(learner: LinearLearner, ctx: StepContext) -> float:
    """ Accumulating traces; the per-decision ratio scales the step of this transition """
    delta, _, _ = _td_error(learner, ctx)
    learner.z = ctx.gamma_t * ctx.lambda_t * learner.z + ctx.x_t
    learner.w = learner.w + ctx.alpha * ctx.rho * delta * learner.z
    _check_weights(learner)
    return delta


def semi_gradient_td0_step(learner: LinearLearner, ctx: StepContext) -> float:
    delta, _, _ = _td_error(learner, ctx)
    learner.w = learner.w + ctx.alpha * ctx.rho * delta * ctx.x_t
    _check_weights(learner)
    return delta


def true_online_td_step(learner: LinearLearner, ctx: StepContext) -> float:
    """
    True online TD(lambda) with dutch traces and per-decision ratios. Equivalent to the online
    forward-view lambda-return algorithm when rho is 1.
    """
    delta, v, v_next = _td_error(learner, ctx)
    decay = ctx.rho * ctx.gamma_t * ctx.lambda_t
    learner.z = ctx.rho * (ctx.gamma_t * ctx.lambda_t * learner.z
                           + ctx.alpha * (1.0 - decay * (learner.z @ ctx.x_t)) * ctx.x_t)
    learner.w = learner.w + delta * learner.z + (learner.z - ctx.alpha * ctx.rho * ctx.x_t) * (v - learner.v_old)
    learner.v_old = v_next
    _check_weights(learner)
    return delta


def true_online_gtd_step(learner: LinearLearner, ctx: StepContext) -> float:
    """
    True online GTD(lambda). The secondary weights estimate the expected TD error given the
    features and drive the gradient correction along x_next.
    """
    if not learner.has_secondary:
        raise ValueError("%s was built without secondary weights" % learner.name)
    delta, v, v_next = _td_error(learner, ctx)
    gl = ctx.gamma_t * ctx.lambda_t

    learner.z = ctx.rho * (gl * learner.z + ctx.alpha * (1.0 - ctx.rho * gl * (learner.z @ ctx.x_t)) * ctx.x_t)
    learner.z_grad = ctx.rho * (gl * learner.z_grad + ctx.x_t)
    decay_w = learner.rho_prev * gl
    learner.z_secondary = (decay_w * learner.z_secondary
                           + ctx.beta * (1.0 - decay_w * (learner.z_secondary @ ctx.x_t)) * ctx.x_t)

    correction = ctx.alpha * ctx.gamma_next * (1.0 - ctx.lambda_next) * (learner.w_secondary @ learner.z_grad)
    learner.w = (learner.w + delta * learner.z
                 + (learner.z - ctx.alpha * ctx.rho * ctx.x_t) * (v - learner.v_old)
                 - correction * ctx.x_next)
    learner.w_secondary = (learner.w_secondary + ctx.rho * delta * learner.z_secondary
                           - ctx.beta * (learner.w_secondary @ ctx.x_t) * ctx.x_t)

    learner.v_old = v_next
    learner.rho_prev = ctx.rho
    _check_weights(learner)
    return delta


StepFunction = Callable[[LinearLearner, StepContext], float]

LEARNER_STEPS: dict[str, StepFunction] = {
    'td0': semi_gradient_td0_step,
    'td': td_lambda_step,
    'true_online_td': true_online_td_step,
    'true_online_gtd': true_online_gtd_step,
}


def make_learner(kind: str, dimension: int, name: str = 'value') -> tuple[LinearLearner, StepFunction]:
    if kind not in LEARNER_STEPS:
        raise ValueError("unknown learner kind %r (expected one of %s)" % (kind, sorted(LEARNER_STEPS)))
    return LinearLearner(dimension, name, secondary=kind == 'true_online_gtd'), LEARNER_STEPS[kind]
