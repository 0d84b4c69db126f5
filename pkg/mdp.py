# mdp.py

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from typeguard import typechecked

PROBABILITY_TOLERANCE: float = 1e-12


class InvalidMdpException(Exception):
    pass


class AbsoluteContinuityException(Exception):
    def __init__(self, s: int, a: int):
        super(AbsoluteContinuityException, self).__init__(
            "target policy takes action %d in state %d but the behavior policy never does" % (a, s))
        self.s = s
        self.a = a


class ImportanceRatioException(Exception):
    def __init__(self, s: int, a: int):
        super(ImportanceRatioException, self).__init__("behavior probability of action %d in state %d is 0" % (a, s))
        self.s = s
        self.a = a


@dataclass(frozen=True)
class Transition:
    s: int
    """ Index of the state the action was taken in """
    a: int
    """ Index of the action taken """
    r: float
    """ Reward received on the transition """
    s_next: int
    """ Index of the state entered """
    gamma_next: float
    """ Discount of the entered state, 0 when it is terminal """
    rho: float
    """ Per-decision importance ratio target(a|s) / behavior(a|s) """
    terminal: bool = False
    """ True when s_next is a terminal state """


class FiniteMdp(object):
    """
    Enumerated MDP with the 4-argument dynamics p(s', r | s, a).

    `transition[(s, a)]` is a list of `(s_next, reward, probability)` triples. Terminal
    states may have no outgoing transitions; episodes end on entry.
    """

    def __init__(self, n_states: int, n_actions: int,
                 transition: dict[tuple[int, int], list[tuple[int, float, float]]],
                 initial_dist: np.ndarray, terminal: np.ndarray):
        self.n_states = n_states
        self.n_actions = n_actions
        self.transition = {key: tuple((int(s2), float(r), float(p)) for s2, r, p in value)
                           for key, value in transition.items()}
        self.initial_dist = np.asarray(initial_dist, dtype=float)
        self.terminal = np.asarray(terminal, dtype=bool)
        self._validate()

        # dense forms, computed once since the MDP never changes
        self.p_next = np.zeros((n_states, n_actions, n_states))
        self.r_expected = np.zeros((n_states, n_actions))
        self._samplers: dict[tuple[int, int], tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for (s, a), outcomes in self.transition.items():
            for s2, r, p in outcomes:
                self.p_next[s, a, s2] += p
                self.r_expected[s, a] += p * r
            next_states = np.array([o[0] for o in outcomes], dtype=int)
            rewards = np.array([o[1] for o in outcomes], dtype=float)
            cumulative = np.cumsum([o[2] for o in outcomes])
            self._samplers[(s, a)] = (next_states, rewards, cumulative)
        self.p_next.setflags(write=False)
        self.r_expected.setflags(write=False)

    def _validate(self) -> None:
        if self.initial_dist.shape != (self.n_states,) or self.terminal.shape != (self.n_states,):
            raise InvalidMdpException("initial distribution and terminal flags must have one entry per state")
        if abs(self.initial_dist.sum() - 1.0) > PROBABILITY_TOLERANCE or np.any(self.initial_dist < 0):
            raise InvalidMdpException("initial distribution must be a probability vector")
        if np.any(self.initial_dist[self.terminal] > 0):
            raise InvalidMdpException("initial distribution assigns mass to a terminal state")

        for s in range(self.n_states):
            if self.terminal[s]:
                continue
            for a in range(self.n_actions):
                outcomes = self.transition.get((s, a))
                if not outcomes:
                    raise InvalidMdpException("no transitions for non-terminal state %d, action %d" % (s, a))
                total = 0.0
                for s2, _, p in outcomes:
                    if not 0 <= s2 < self.n_states:
                        raise InvalidMdpException("transition (%d, %d) leads to unknown state %d" % (s, a, s2))
                    if not 0.0 <= p <= 1.0:
                        raise InvalidMdpException("probability %r out of [0, 1] at (%d, %d)" % (p, s, a))
                    total += p
                if abs(total - 1.0) > PROBABILITY_TOLERANCE:
                    raise InvalidMdpException("probabilities at (%d, %d) sum to %r" % (s, a, total))

    def three_arg(self, s: int, a: int) -> np.ndarray:
        """ p(s' | s, a) for every s' """
        return self.p_next[s, a]

    def reward_sa(self, s: int, a: int) -> float:
        """ r(s, a), the expected reward of taking a in s """
        return float(self.r_expected[s, a])

    def transition_matrix(self, policy: 'TabularPolicy') -> np.ndarray:
        """ P_pi with rows of terminal states zeroed """
        p_pi = np.einsum('sa,sat->st', policy.probs, self.p_next)
        p_pi[self.terminal] = 0.0
        return p_pi

    def expected_rewards(self, policy: 'TabularPolicy') -> np.ndarray:
        r_pi = np.einsum('sa,sa->s', policy.probs, self.r_expected)
        r_pi[self.terminal] = 0.0
        return r_pi

    def sample_next(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, float]:
        next_states, rewards, cumulative = self._samplers[(s, a)]
        index = min(int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side='right')), len(next_states) - 1)
        return int(next_states[index]), float(rewards[index])

    def sample_initial(self, rng: np.random.Generator) -> int:
        return int(rng.choice(self.n_states, p=self.initial_dist))

    def to_dict(self) -> dict:
        return {
            'states': self.n_states,
            'actions': self.n_actions,
            'transitions': [{'s': s, 'a': a, "s'": s2, 'r': r, 'p': p}
                            for (s, a), outcomes in sorted(self.transition.items())
                            for s2, r, p in outcomes],
            'd0': self.initial_dist.tolist(),
            'terminal': self.terminal.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'FiniteMdp':
        try:
            transition: dict[tuple[int, int], list[tuple[int, float, float]]] = {}
            for row in data['transitions']:
                transition.setdefault((int(row['s']), int(row['a'])), []).append(
                    (int(row["s'"]), float(row['r']), float(row['p'])))
            return cls(int(data['states']), int(data['actions']), transition,
                       np.asarray(data['d0'], dtype=float), np.asarray(data['terminal'], dtype=bool))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidMdpException("malformed MDP description: %s" % e) from e

    def __repr__(self):
        return f"FiniteMdp(states={self.n_states}, actions={self.n_actions}, terminal={int(self.terminal.sum())})"


@dataclass(frozen=True)
class TabularPolicy:
    probs: np.ndarray
    """ [n_states x n_actions] action probabilities; rows of terminal states are ignored """

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 2 or np.any(probs < 0):
            raise InvalidMdpException("policy must be a non-negative [states x actions] matrix")
        probs.setflags(write=False)
        object.__setattr__(self, 'probs', probs)

    def validate_for(self, mdp: FiniteMdp) -> None:
        if self.probs.shape != (mdp.n_states, mdp.n_actions):
            raise InvalidMdpException("policy shape %s does not match %r" % (self.probs.shape, mdp))
        sums = self.probs[~mdp.terminal].sum(axis=1)
        if np.any(np.abs(sums - 1.0) > PROBABILITY_TOLERANCE):
            raise InvalidMdpException("policy rows of non-terminal states must sum to 1")

    def sample(self, s: int, rng: np.random.Generator) -> int:
        return int(rng.choice(self.probs.shape[1], p=self.probs[s]))

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> 'TabularPolicy':
        return cls(np.full((n_states, n_actions), 1.0 / n_actions))

    @classmethod
    def from_action_probs(cls, n_states: int, action_probs: list[float]) -> 'TabularPolicy':
        """ The same action distribution in every state """
        return cls(np.tile(np.asarray(action_probs, dtype=float), (n_states, 1)))


@dataclass(frozen=True)
class DiscountFunction:
    gamma: np.ndarray
    """ Per-state discount in [0, 1], 0 on terminal states """

    def __post_init__(self):
        gamma = np.array(self.gamma, dtype=float)
        if np.any(gamma < 0) or np.any(gamma > 1):
            raise InvalidMdpException("discounts must lie in [0, 1]")
        gamma.setflags(write=False)
        object.__setattr__(self, 'gamma', gamma)

    def __call__(self, s: int) -> float:
        return float(self.gamma[s])

    @classmethod
    def constant(cls, mdp: FiniteMdp, gamma: float) -> 'DiscountFunction':
        """ Constant discount with the terminal states zeroed """
        values = np.full(mdp.n_states, float(gamma))
        values[mdp.terminal] = 0.0
        return cls(values)

    def validate_for(self, mdp: FiniteMdp) -> None:
        if self.gamma.shape != (mdp.n_states,):
            raise InvalidMdpException("discount vector must have one entry per state")
        if np.any(self.gamma[mdp.terminal] != 0):
            raise InvalidMdpException("terminal states must have zero discount")


def importance_ratio(target: TabularPolicy, behavior: TabularPolicy, s: int, a: int) -> float:
    b = behavior.probs[s, a]
    if b <= 0:
        raise ImportanceRatioException(s, a)
    return float(target.probs[s, a] / b)


def sample_episode(mdp: FiniteMdp, behavior: TabularPolicy, target: TabularPolicy, gamma: DiscountFunction,
                   rng_seed: int | np.random.Generator, max_steps: int | None = None) -> list[Transition]:
    """
    Samples one episode under `behavior`, starting from d0, until a terminal state is entered
    or `max_steps` transitions were taken (None means unbounded).
    """
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    episode: list[Transition] = []
    s = mdp.sample_initial(rng)

    while max_steps is None or len(episode) < max_steps:
        uncovered = np.flatnonzero((target.probs[s] > 0) & (behavior.probs[s] <= 0))
        if uncovered.size:
            raise AbsoluteContinuityException(s, int(uncovered[0]))
        a = behavior.sample(s, rng)
        rho = importance_ratio(target, behavior, s, a)
        s_next, r = mdp.sample_next(s, a, rng)
        terminal = bool(mdp.terminal[s_next])
        episode.append(Transition(s, a, r, s_next, gamma(s_next), rho, terminal))
        if terminal:
            break
        s = s_next

    return episode


def check_absolute_continuity(mdp: FiniteMdp, behavior: TabularPolicy, target: TabularPolicy) -> None:
    for s in np.flatnonzero(~mdp.terminal):
        bad = np.flatnonzero((target.probs[s] > 0) & (behavior.probs[s] <= 0))
        if bad.size:
            raise AbsoluteContinuityException(int(s), int(bad[0]))


@typechecked
def load_mdp_json(path: str) -> FiniteMdp:
    with open(path, 'r') as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise InvalidMdpException("%s is not valid JSON: %s" % (path, e)) from e
    mdp = FiniteMdp.from_dict(data)
    logging.debug("Loaded %r from %s" % (mdp, path))
    return mdp


@typechecked
def save_mdp_json(mdp: FiniteMdp, path: str) -> None:
    with open(path, 'w') as f:
        json.dump(mdp.to_dict(), f, indent=2)


@typechecked
def load_policy_json(path: str, mdp: FiniteMdp) -> TabularPolicy:
    """ Policy file: {"probs": [[...], ...]} or a bare matrix """
    with open(path, 'r') as f:
        data = json.load(f)
    probs = data['probs'] if isinstance(data, dict) else data
    policy = TabularPolicy(np.asarray(probs, dtype=float))
    policy.validate_for(mdp)
    return policy


def random_mdp(n_states: int, n_actions: int, rng: np.random.Generator,
               termination_prob: float = 0.1, branching: int = 3) -> tuple[FiniteMdp, TabularPolicy]:
    """
    Random episodic MDP with one absorbing terminal state (the last index) reachable
    from everywhere, plus a random policy over it. Used as an oracle fixture.
    """
    terminal_state = n_states - 1
    transition: dict[tuple[int, int], list[tuple[int, float, float]]] = {}
    for s in range(n_states - 1):
        for a in range(n_actions):
            targets = rng.choice(n_states - 1, size=min(branching, n_states - 1), replace=False)
            weights = rng.random(len(targets))
            weights = (1.0 - termination_prob) * weights / weights.sum()
            outcomes = [(int(s2), float(rng.normal()), float(p)) for s2, p in zip(targets, weights)]
            outcomes.append((terminal_state, float(rng.normal()), termination_prob))
            # renormalise away floating point drift
            total = sum(p for _, _, p in outcomes)
            transition[(s, a)] = [(s2, r, p / total) for s2, r, p in outcomes]

    d0 = np.zeros(n_states)
    d0[:-1] = rng.random(n_states - 1)
    d0 /= d0.sum()
    terminal = np.zeros(n_states, dtype=bool)
    terminal[terminal_state] = True

    probs = rng.random((n_states, n_actions)) + 0.05
    probs /= probs.sum(axis=1, keepdims=True)
    return FiniteMdp(n_states, n_actions, transition, d0, terminal), TabularPolicy(probs)
