# returns.py

"""
Return computations and the episode-level (tabular or forward-view) learners: first-visit
Monte-Carlo, n-step returns, state-based lambda-returns, TD(0), n-step TD and the offline /
online lambda-return algorithms used as forward-view oracles for the trace learners.
"""

from typing import Callable, Sequence

import numpy as np

from mdp import DiscountFunction, Transition

LambdaLike = Callable[[int], float] | np.ndarray | float


def _lambda_of(lambda_fn: LambdaLike, s: int) -> float:
    if callable(lambda_fn):
        return float(lambda_fn(s))
    if np.ndim(lambda_fn) == 0:
        return float(lambda_fn)
    return float(np.asarray(lambda_fn)[s])


def _gamma_of(step: Transition, gamma: DiscountFunction | None) -> float:
    return step.gamma_next if gamma is None else gamma(step.s_next)


def mc_first_visit(episodes: Sequence[Sequence[Transition]], n_states: int,
                   gamma: DiscountFunction | None = None) -> tuple[np.ndarray, np.ndarray]:
    """
    First-visit Monte-Carlo prediction. Returns (values, visited); states never visited
    keep value 0 and are flagged False in `visited`.
    """
    totals = np.zeros(n_states)
    counts = np.zeros(n_states, dtype=int)

    for episode in episodes:
        g = 0.0
        returns = np.zeros(len(episode))
        for t in range(len(episode) - 1, -1, -1):
            step = episode[t]
            g = _gamma_of(step, gamma) * g + step.r
            returns[t] = g

        seen: set[int] = set()
        for t, step in enumerate(episode):
            if step.s in seen:
                continue
            seen.add(step.s)
            totals[step.s] += returns[t]
            counts[step.s] += 1

    visited = counts > 0
    values = np.zeros(n_states)
    values[visited] = totals[visited] / counts[visited]
    return values, visited


def n_step_return(trajectory: Sequence[Transition], t: int, n: int, values: np.ndarray,
                  gamma: DiscountFunction | None = None) -> float:
    """ G_t^(n): n discounted rewards plus the bootstrapped tail, the MC return when t + n >= T """
    if not 0 <= t < len(trajectory):
        raise IndexError("t=%d is outside the trajectory of length %d" % (t, len(trajectory)))
    g = 0.0
    discount = 1.0
    end = min(t + n, len(trajectory))
    for k in range(t, end):
        step = trajectory[k]
        g += discount * step.r
        discount *= _gamma_of(step, gamma)
    if t + n < len(trajectory):
        g += discount * values[trajectory[t + n - 1].s_next]
    return g


def lambda_returns(rewards: np.ndarray, gammas_next: np.ndarray, lambdas_next: np.ndarray,
                   next_values: np.ndarray) -> np.ndarray:
    """
    G_t = R_{t+1} + gamma_{t+1} [(1 - lambda_{t+1}) V(S_{t+1}) + lambda_{t+1} G_{t+1}], back to front,
    with G = 0 past the end of the episode. All inputs are aligned with transition index t.
    """
    returns = np.zeros(len(rewards))
    g = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        g = rewards[t] + gammas_next[t] * ((1.0 - lambdas_next[t]) * next_values[t] + lambdas_next[t] * g)
        returns[t] = g
    return returns


def lambda_return_offline(trajectory: Sequence[Transition], t: int, values: np.ndarray,
                          gamma: DiscountFunction | None, lambda_fn: LambdaLike) -> float:
    """ The state-based lambda-return of step t of a complete episode, bootstrapping on `values` """
    rewards = np.array([step.r for step in trajectory])
    gammas = np.array([_gamma_of(step, gamma) for step in trajectory])
    lambdas = np.array([_lambda_of(lambda_fn, step.s_next) for step in trajectory])
    next_values = np.array([0.0 if step.terminal else values[step.s_next] for step in trajectory])
    return float(lambda_returns(rewards, gammas, lambdas, next_values)[t])


def td0_tabular(episodes: Sequence[Sequence[Transition]], n_states: int, alpha: float,
                values: np.ndarray | None = None) -> np.ndarray:
    """ Tabular TD(0); off-policy transitions scale the step by their per-decision ratio """
    v = np.zeros(n_states) if values is None else np.array(values, dtype=float)
    for episode in episodes:
        for step in episode:
            bootstrap = 0.0 if step.terminal else v[step.s_next]
            v[step.s] += alpha * step.rho * (step.r + step.gamma_next * bootstrap - v[step.s])
    return v


def n_step_td(episodes: Sequence[Sequence[Transition]], n_states: int, n: int, alpha: float,
              values: np.ndarray | None = None) -> np.ndarray:
    """
    Tabular n-step TD. Each update of S_tau happens once R_{tau+n} is known (or at the end of
    the episode) and is weighted by the product of the ratios of the n decisions it spans.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    v = np.zeros(n_states) if values is None else np.array(values, dtype=float)
    for episode in episodes:
        length = len(episode)
        for tau in range(length):
            end = min(tau + n, length)
            g = 0.0
            discount = 1.0
            rho = 1.0
            for k in range(tau, end):
                g += discount * episode[k].r
                discount *= episode[k].gamma_next
                rho *= episode[k].rho
            if end < length:
                g += discount * v[episode[end - 1].s_next]
            v[episode[tau].s] += alpha * rho * (g - v[episode[tau].s])
    return v


def offline_lambda_return_weights(xs: np.ndarray, rewards: np.ndarray, gammas_next: np.ndarray,
                                  lambdas_next: np.ndarray, w: np.ndarray, alpha: float) -> np.ndarray:
    """
    Offline lambda-return algorithm for one episode: targets bootstrap on the start-of-episode
    weights, updates are applied in sequence at the end. `xs` holds x_0 .. x_T (x_T of the
    terminal state is zero).
    """
    w = np.array(w, dtype=float)
    next_values = xs[1:] @ w
    targets = lambda_returns(rewards, gammas_next, lambdas_next, next_values)
    for t, target in enumerate(targets):
        w = w + alpha * (target - w @ xs[t]) * xs[t]
    return w


def online_lambda_return_weights(xs: np.ndarray, rewards: np.ndarray, gammas_next: np.ndarray,
                                 lambdas_next: np.ndarray, w: np.ndarray, alpha: float) -> list[np.ndarray]:
    """
    Forward-view online lambda-return algorithm. At every horizon h the episode prefix is
    replayed from the initial weights towards interim lambda-returns truncated at h, where
    V(S_i) bootstraps on the weights reached at horizon i - 1. Returns the weights after
    each horizon, w_0 .. w_T.
    """
    horizon_weights = [np.array(w, dtype=float)]
    for h in range(1, len(rewards) + 1):
        next_values = np.array([horizon_weights[i] @ xs[i + 1] for i in range(h)])
        lambdas = np.array(lambdas_next[:h], dtype=float)
        lambdas[h - 1] = 0.0
        targets = lambda_returns(rewards[:h], gammas_next[:h], lambdas, next_values)
        w_h = horizon_weights[0].copy()
        for k in range(h):
            w_h = w_h + alpha * (targets[k] - w_h @ xs[k]) * xs[k]
        horizon_weights.append(w_h)
    return horizon_weights
