# dp_oracle.py

"""
Exact ground truth for the prediction experiments: true values of a policy, its on-policy
state frequencies and the overall value error every learner is scored with.
"""

import logging
from dataclasses import dataclass

import numpy as np

from mdp import DiscountFunction, FiniteMdp, TabularPolicy

VALUE_THETA: float = 1e-12
FREQUENCY_THETA: float = 1e-12
MAX_SWEEPS: int = 10 ** 6
RESIDUAL_TOLERANCE: float = 1e-10


class SingularSystemException(Exception):
    pass


class NonConvergenceException(Exception):
    pass


class NonTerminatingException(Exception):
    pass


@dataclass(frozen=True)
class StateFrequency:
    d: np.ndarray
    """ On-policy distribution over states, zero on terminal states, sums to 1 """
    visits: np.ndarray
    """ Normalized expected visit counts including the single visit to a terminal state """


def _discounted_transition(mdp: FiniteMdp, policy: TabularPolicy, gamma: DiscountFunction) -> tuple[np.ndarray, np.ndarray]:
    policy.validate_for(mdp)
    gamma.validate_for(mdp)
    return mdp.transition_matrix(policy) * gamma.gamma[np.newaxis, :], mdp.expected_rewards(policy)


def _states_without_termination(mdp: FiniteMdp, p_gamma: np.ndarray) -> list[int]:
    """ States from which no discounting or terminal state can ever be reached """
    leaks = 1.0 - p_gamma.sum(axis=1) > 1e-15
    leaks |= mdp.terminal
    reach = leaks.copy()
    support = p_gamma > 0
    changed = True
    while changed:
        new_reach = reach | (support & reach[np.newaxis, :]).any(axis=1)
        changed = bool(np.any(new_reach != reach))
        reach = new_reach
    return [int(s) for s in np.flatnonzero(~reach)]


def solve_values_direct(mdp: FiniteMdp, policy: TabularPolicy, gamma: DiscountFunction) -> np.ndarray:
    p_gamma, r_pi = _discounted_transition(mdp, policy, gamma)
    a = np.eye(mdp.n_states) - p_gamma

    trapped = _states_without_termination(mdp, p_gamma)
    if trapped:
        raise SingularSystemException(
            "I - P_pi Gamma is singular: states %s never terminate and are undiscounted" % trapped)
    try:
        v = np.linalg.solve(a, r_pi)
    except np.linalg.LinAlgError as e:
        raise SingularSystemException("I - P_pi Gamma is singular: %s" % e) from e

    v[mdp.terminal] = 0.0
    residual = np.max(np.abs(v - (r_pi + p_gamma @ v))) if mdp.n_states else 0.0
    if residual >= RESIDUAL_TOLERANCE * max(1.0, np.max(np.abs(v))):
        logging.warning("\033[1;33m[DP] direct solve residual %.3e is above tolerance\033[0m" % residual)
    return v


def spectral_radius(mdp: FiniteMdp, policy: TabularPolicy, gamma: DiscountFunction) -> float:
    p_gamma, _ = _discounted_transition(mdp, policy, gamma)
    return float(np.max(np.abs(np.linalg.eigvals(p_gamma)))) if mdp.n_states else 0.0


def solve_values_iterative(mdp: FiniteMdp, policy: TabularPolicy, gamma: DiscountFunction,
                           theta: float = VALUE_THETA, max_sweeps: int = MAX_SWEEPS) -> np.ndarray:
    """
    Iterative policy evaluation with the splitting M = I, N = P_pi Gamma.
    Stops once the sup-norm change of a sweep drops below theta.
    """
    if theta <= 0:
        raise ValueError("theta must be positive")
    p_gamma, r_pi = _discounted_transition(mdp, policy, gamma)

    radius = spectral_radius(mdp, policy, gamma)
    if radius >= 1.0:
        logging.warning("\033[1;33m[DP] spectral radius of P_pi Gamma is %.6f, iteration may not converge\033[0m" % radius)

    v = np.zeros(mdp.n_states)
    for sweep in range(1, max_sweeps + 1):
        v_new = r_pi + p_gamma @ v
        delta = np.max(np.abs(v_new - v)) if mdp.n_states else 0.0
        v = v_new
        if delta < theta:
            logging.debug("[DP] iterative evaluation converged after %d sweeps" % sweep)
            v[mdp.terminal] = 0.0
            return v

    raise NonConvergenceException("iterative evaluation did not reach theta=%g in %d sweeps" % (theta, max_sweeps))


def augmented_transition(mdp: FiniteMdp, policy: TabularPolicy) -> np.ndarray:
    """ P_pi with the rows of terminal states replaced by d0 (agent redeployed after termination) """
    p_tilde = mdp.transition_matrix(policy)
    p_tilde[mdp.terminal] = mdp.initial_dist
    return p_tilde


def solve_state_frequencies(mdp: FiniteMdp, policy: TabularPolicy, theta: float = FREQUENCY_THETA,
                            max_sweeps: int = MAX_SWEEPS) -> StateFrequency:
    """
    Expected visit counts over one lifetime, accumulated from d0 through P_pi until the
    in-flight mass drops below theta. Terminal states are counted once on entry.
    """
    policy.validate_for(mdp)
    p_pi = mdp.transition_matrix(policy)

    visits = mdp.initial_dist.copy()
    in_flight = mdp.initial_dist.copy()
    in_flight[mdp.terminal] = 0.0
    previous_mass = np.inf

    for sweep in range(1, max_sweeps + 1):
        mass = in_flight.sum()
        if mass < theta:
            break
        # mass must eventually decay when episodes end with probability 1
        if sweep % 10000 == 0:
            if mass >= previous_mass * (1.0 - 1e-9):
                raise NonTerminatingException("state mass %.6g is not decaying; episodes do not terminate" % mass)
            previous_mass = mass
        in_flight = p_pi.T @ in_flight
        visits += in_flight
        in_flight[mdp.terminal] = 0.0
    else:
        raise NonTerminatingException("state mass did not decay below theta=%g in %d sweeps" % (theta, max_sweeps))

    visits = visits / visits.sum()
    d = visits.copy()
    d[mdp.terminal] = 0.0
    d /= d.sum()
    return StateFrequency(d=d, visits=visits)


def frequency_residual(mdp: FiniteMdp, policy: TabularPolicy, frequency: StateFrequency) -> float:
    """ max |d^T P~_pi - d^T| for the visit-count form of the frequencies """
    p_tilde = augmented_transition(mdp, policy)
    return float(np.max(np.abs(frequency.visits @ p_tilde - frequency.visits)))


def overall_value_error(estimate: np.ndarray, v_true: np.ndarray, d: np.ndarray | StateFrequency,
                        terminal: np.ndarray | None = None) -> float:
    """ 1/2 || D^(1/2) (V - v) ||^2 with terminal states contributing nothing """
    weights = d.d if isinstance(d, StateFrequency) else np.asarray(d, dtype=float)
    estimate = np.asarray(estimate, dtype=float)
    v_true = np.asarray(v_true, dtype=float)
    if not (estimate.shape == v_true.shape == weights.shape):
        raise ValueError("shape mismatch: %s, %s, %s" % (estimate.shape, v_true.shape, weights.shape))

    diff = estimate - v_true
    if terminal is not None:
        diff = np.where(terminal, 0.0, diff)
    return float(0.5 * np.sum(weights * diff ** 2))
