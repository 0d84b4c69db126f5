# actor_critic.py

"""
Episodic on-policy actor-critic with eligibility traces and a linear softmax policy, with
and without META adapting the critic's lambda.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from pubsub import pub

from auxiliary import AuxiliaryBundle, auxiliary_context
from environments import Environment
from features import FeatureMap
from learners import DivergenceException, LinearLearner, StepContext, StepFunction, make_learner, td_lambda_step
from meta_lambda import ADAPTER_FIXED, ADAPTER_GREEDY, MetaStepInputs, make_adapter
from run_logger import RunEventLogger, RunRecord


class SoftmaxPolicy(object):
    """ pi(a | x) proportional to exp(theta[a] . x) """

    def __init__(self, n_actions: int, dimension: int, theta: np.ndarray | None = None):
        self.theta = np.zeros((n_actions, dimension)) if theta is None else np.array(theta, dtype=float)
        if self.theta.shape != (n_actions, dimension):
            raise ValueError("theta of shape %s does not match %d actions x %d features" % (self.theta.shape, n_actions, dimension))

    @property
    def n_actions(self) -> int:
        return self.theta.shape[0]

    def probs(self, x: np.ndarray) -> np.ndarray:
        return policy_probs(self.theta, x)

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_actions, p=self.probs(x)))

    def log_prob_gradient(self, x: np.ndarray, a: int) -> np.ndarray:
        """ d ln pi(a|x) / d theta = (onehot(a) - pi(.|x)) outer x """
        indicator = np.zeros(self.n_actions)
        indicator[a] = 1.0
        return np.outer(indicator - self.probs(x), x)


def policy_probs(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    logits = theta @ x
    logits = logits - np.max(logits)
    weights = np.exp(logits)
    return weights / weights.sum()


@dataclass
class ActorState:
    z_theta: np.ndarray
    discount: float = 1.0
    """ I, the product of the discounts of the states visited so far this episode """

    @classmethod
    def zeros(cls, policy: SoftmaxPolicy) -> 'ActorState':
        return cls(np.zeros_like(policy.theta))

    def start_episode(self) -> None:
        self.z_theta[:] = 0.0
        self.discount = 1.0


def actor_critic_step(policy: SoftmaxPolicy, actor: ActorState, critic: LinearLearner, ctx: StepContext,
                      action: int, alpha_theta: float, lambda_theta: float,
                      critic_step: StepFunction = td_lambda_step) -> float:
    """
    Critic first (its TD error uses the pre-update weights), then the actor along its trace:
    z_theta <- gamma lambda_theta z_theta + I grad ln pi(A|S); theta += alpha_theta delta z_theta.
    With both lambdas at 0 this is the one-step actor-critic.
    """
    delta = critic_step(critic, ctx)
    actor.z_theta = ctx.gamma_t * lambda_theta * actor.z_theta + actor.discount * policy.log_prob_gradient(ctx.x_t, action)
    if alpha_theta:
        policy.theta = policy.theta + alpha_theta * delta * actor.z_theta
        if not np.all(np.isfinite(policy.theta)):
            raise DivergenceException(critic.steps, "non-finite policy parameters", 'actor')
    actor.discount *= ctx.gamma_next
    return delta


@dataclass(frozen=True)
class ControlSettings:
    adapter: str
    alpha: float
    param: float | None
    """ lambda of a fixed adapter, kappa of a META adapter """
    eta: float = 1.0
    """ Actor step size as a multiple of alpha """
    learner: str = 'true_online_gtd'
    beta: float | None = None
    aux_multiplier: float = 2.0
    variance_mode: str = 'dvtd'
    steps: int = 0
    buffer_fraction: float = 0.5
    cell_id: str = ''
    seed: int = 0


def meta_actor_critic(env: Environment, feature_map: FeatureMap, settings: ControlSettings) -> RunRecord:
    """
    On-policy actor-critic whose critic lambda comes from the configured adapter. During the
    buffer period neither lambda nor the policy changes. The record holds one point per
    completed episode: (episode, return, mean lambda over the episode).
    """
    rng = np.random.default_rng(settings.seed)
    dimension = feature_map.dimension
    beta = settings.alpha if settings.beta is None else settings.beta
    alpha_theta = settings.eta * settings.alpha

    policy = SoftmaxPolicy(env.n_actions, dimension)
    actor = ActorState.zeros(policy)
    critic, critic_step = make_learner(settings.learner, dimension, 'critic')
    bundle = None
    if settings.adapter != ADAPTER_FIXED:
        bundle = AuxiliaryBundle(dimension, settings.learner, settings.variance_mode,
                                 greedy=settings.adapter == ADAPTER_GREEDY)
    adapter = make_adapter(settings.adapter, settings.param, dimension, critic, bundle)
    buffer_steps = int(settings.buffer_fraction * settings.steps)
    terminal_x = np.zeros(dimension)

    events = RunEventLogger(settings.cell_id, settings.seed)
    record = RunRecord(settings.cell_id, settings.seed)
    x = feature_map.encode(env.reset(rng))
    gamma_t = env.gamma
    episode_return, episode_discount, episode_lambdas = 0.0, 1.0, []
    episode_steps: list[int] = []
    steps_in_episode = 0
    step = 0
    try:
        for step in range(settings.steps):
            frozen = step < buffer_steps
            a = policy.sample(x, rng)
            observation, r, terminal, gamma_next = env.step(a, rng)
            x_next = terminal_x if terminal else feature_map.encode(observation)
            episode_return += episode_discount * r
            episode_discount *= gamma_next
            steps_in_episode += 1

            lambda_t = adapter.value(x, None)
            ctx = StepContext(x, x_next, r, gamma_t, gamma_next, lambda_t, adapter.value(x_next, None),
                              1.0, settings.alpha, beta)
            if bundle is not None:
                v_next = critic.value(x_next)
                value_delta = r + gamma_next * v_next - critic.value(x)
                bundle.step(auxiliary_context(ctx, settings.aux_multiplier), value_delta, v_next)
                if not frozen and not terminal:
                    stats = bundle.statistics(x_next)
                    adapter.observe(x_next, None, MetaStepInputs(gamma_next, 1.0, v_next, stats.e_g, stats.e_glambda,
                                                                 stats.var, settings.param or 0.0))
                    ctx = replace(ctx, lambda_next=adapter.value(x_next, None))
            episode_lambdas.append(lambda_t)
            actor_critic_step(policy, actor, critic, ctx, a, 0.0 if frozen else alpha_theta, lambda_t, critic_step)

            if terminal:
                record.add_point(len(record.series) + 1, episode_return, float(np.mean(episode_lambdas)))
                pub.sendMessage('Run.ErrorLogged', cell_id=settings.cell_id, seed=settings.seed, step=step + 1, error=episode_return)
                episode_steps.append(steps_in_episode)
                x = feature_map.encode(env.reset(rng))
                critic.start_episode()
                actor.start_episode()
                if bundle is not None:
                    bundle.start_episode()
                episode_return, episode_discount, episode_lambdas, steps_in_episode = 0.0, 1.0, [], 0
            else:
                x = x_next
            gamma_t = env.gamma
    except DivergenceException as e:
        logging.error("\033[1;31m[RUN] %s seed %d diverged: %s\033[0m" % (settings.cell_id, settings.seed, e))
        record.mark_diverged(step + 1, "%s: %s" % (e.learner_name, e.reason))
        pub.sendMessage('Run.Diverged', cell_id=settings.cell_id, seed=settings.seed, step=step + 1, reason=e.reason)

    record.metadata.update(events.close())
    record.metadata['episode_steps'] = episode_steps
    record.metadata['buffer_steps'] = buffer_steps
    return record
