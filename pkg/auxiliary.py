# auxiliary.py

"""
Auxiliary learners for the statistics the lambda adapters need: E[G] (MC-target expectation),
E[G^lambda] and Var[G^lambda], learned online by TD on pseudo-rewards and pseudo-discounts.
"""

from dataclasses import dataclass

import numpy as np
from pubsub import pub

from learners import LinearLearner, StepContext, make_learner

MODE_DVTD: str = 'dvtd'
MODE_VTD: str = 'vtd'
AUX_RATE_MULTIPLIER: float = 2.0
VARIANCE_TRACE_LAMBDA: float = 1.0  # trace decay of the variance / second-moment learner on its own pseudo-MRP


def vtd_pseudo_transition(ctx: StepContext, bootstrap_value: float, lambda_return_estimate: float) -> tuple[float, float]:
    """
    Reward and discount of the pseudo-MRP whose value is the second moment of the lambda-return.
    `bootstrap_value` is V(x_{t+1}), `lambda_return_estimate` is E[G^lambda](x_{t+1}).
    """
    g_bar = ctx.r + ctx.gamma_next * (1.0 - ctx.lambda_next) * bootstrap_value
    rho2 = ctx.rho ** 2
    reward_bar = rho2 * g_bar ** 2 + 2.0 * rho2 * ctx.gamma_next * ctx.lambda_next * g_bar * lambda_return_estimate
    gamma_bar = rho2 * ctx.gamma_next ** 2 * ctx.lambda_next ** 2
    return reward_bar, gamma_bar


def dvtd_pseudo_transition(delta: float, gamma_next: float, lambda_next: float) -> tuple[float, float]:
    """
    Reward delta^2 and discount (gamma lambda)^2 of the pseudo-MRP whose value is Var[G^lambda].
    Off-policy correction is left to the variance learner, which steps with the transition's rho.
    """
    return delta ** 2, (gamma_next * lambda_next) ** 2


@dataclass(frozen=True)
class Statistics:
    e_g: float
    e_glambda: float
    var: float
    """ Variance of the lambda-return (of the MC return in greedy mode), never negative """


class AuxiliaryBundle(object):
    """
    E[G], E[G^lambda] and variance learners advanced in lockstep with one value learner.

    In greedy mode the variance learner tracks Var[G] instead: it runs on lambda = 1 and
    takes its TD error from the E[G] learner.
    """

    def __init__(self, dimension: int, kind: str = 'true_online_td', mode: str = MODE_DVTD,
                 greedy: bool = False):
        if mode not in (MODE_DVTD, MODE_VTD):
            raise ValueError("unknown variance mode %r" % mode)
        self.mode = mode
        self.greedy = greedy
        self.kind = kind
        self.learner_e_g, self._step = make_learner(kind, dimension, 'E[G]')
        self.learner_e_glambda, _ = make_learner(kind, dimension, 'E[G^lambda]')
        variance_name = 'M' if mode == MODE_VTD else 'Var'
        self.learner_var, _ = make_learner(kind, dimension, variance_name)
        self.gamma_bar_prev = 0.0

    @property
    def learners(self) -> list[LinearLearner]:
        return [self.learner_e_g, self.learner_e_glambda, self.learner_var]

    def start_episode(self) -> None:
        for learner in self.learners:
            learner.start_episode()
        self.gamma_bar_prev = 0.0

    def variance(self, x: np.ndarray) -> float:
        if self.mode == MODE_VTD:
            mean = self.learner_e_g.value(x) if self.greedy else self.learner_e_glambda.value(x)
            estimate = self.learner_var.value(x) - mean ** 2
        else:
            estimate = self.learner_var.value(x)
        if estimate < 0.0:
            pub.sendMessage('Auxiliary.VarianceClamped', learner=self.learner_var.name)
            return 0.0
        return estimate

    def statistics(self, x: np.ndarray) -> Statistics:
        return Statistics(self.learner_e_g.value(x), self.learner_e_glambda.value(x), self.variance(x))

    def step(self, ctx: StepContext, value_delta: float, bootstrap_value: float) -> None:
        """
        One trace-based TD step of every auxiliary learner on the transition in `ctx`, whose
        rates are already the auxiliary ones. `value_delta` and `bootstrap_value` come from the
        value learner; all readouts used here are taken before any learner moves.
        """
        lambda_t, lambda_next = (1.0, 1.0) if self.greedy else (ctx.lambda_t, ctx.lambda_next)

        if self.mode == MODE_VTD:
            mean_next = (self.learner_e_g if self.greedy else self.learner_e_glambda).value(ctx.x_next)
            variance_ctx = ctx.with_target(ctx.r, ctx.gamma_t, ctx.gamma_next, lambda_t, lambda_next, ctx.rho, ctx.alpha)
            reward_bar, gamma_bar = vtd_pseudo_transition(variance_ctx, bootstrap_value, mean_next)
            variance_rho = 1.0
        else:
            reward_bar, gamma_bar = None, None
            variance_rho = ctx.rho

        e_g_ctx = ctx.with_target(ctx.r, ctx.gamma_t, ctx.gamma_next, 1.0, 1.0, ctx.rho, ctx.alpha)
        delta_e_g = self._step(self.learner_e_g, e_g_ctx)
        if not self.greedy:
            self._step(self.learner_e_glambda, ctx)

        if reward_bar is None:
            delta = delta_e_g if self.greedy else value_delta
            reward_bar, gamma_bar = dvtd_pseudo_transition(delta, ctx.gamma_next, lambda_next)

        variance_ctx = ctx.with_target(reward_bar, self.gamma_bar_prev, gamma_bar,
                                       VARIANCE_TRACE_LAMBDA, VARIANCE_TRACE_LAMBDA, variance_rho, ctx.alpha)
        self._step(self.learner_var, variance_ctx)

        self.gamma_bar_prev = gamma_bar


def bundle_step(bundle: AuxiliaryBundle, ctx: StepContext, value_delta: float,
                bootstrap_value: float = 0.0) -> AuxiliaryBundle:
    bundle.step(ctx, value_delta, bootstrap_value)
    return bundle


def auxiliary_context(ctx: StepContext, multiplier: float = AUX_RATE_MULTIPLIER) -> StepContext:
    """ The value learner's context with both learning rates scaled for the auxiliary learners """
    return StepContext(ctx.x_t, ctx.x_next, ctx.r, ctx.gamma_t, ctx.gamma_next, ctx.lambda_t,
                       ctx.lambda_next, ctx.rho, ctx.alpha * multiplier, ctx.beta * multiplier)


