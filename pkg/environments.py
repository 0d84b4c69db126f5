# environments.py

"""
Benchmark environments: the RingWorld random walk, slippery 4x4 FrozenLake and noisy
MountainCar. The two tabular ones can be enumerated into a FiniteMdp for exact ground truth.
"""

import logging
import math
from typing import Sequence

import numpy as np

from features import OFFSETS_EVEN, OneHot, TabularFeatures, TileCoding
from mdp import DiscountFunction, FiniteMdp, TabularPolicy

RINGWORLD_STATES: int = 11
RINGWORLD_LEFT: int = 0
RINGWORLD_RIGHT: int = 1

FROZENLAKE_MAP: tuple[str, ...] = ("SFFF", "FHFH", "FFFH", "HFFG")
# action order of the usual FrozenLake implementation
FROZENLAKE_LEFT: int = 0
FROZENLAKE_DOWN: int = 1
FROZENLAKE_RIGHT: int = 2
FROZENLAKE_UP: int = 3
FROZENLAKE_MOVES: dict[int, tuple[int, int]] = {
    FROZENLAKE_LEFT: (0, -1),
    FROZENLAKE_DOWN: (1, 0),
    FROZENLAKE_RIGHT: (0, 1),
    FROZENLAKE_UP: (-1, 0),
}

MOUNTAINCAR_MIN_POSITION: float = -1.2
MOUNTAINCAR_MAX_POSITION: float = 0.5
MOUNTAINCAR_MAX_SPEED: float = 0.07
MOUNTAINCAR_GOAL: float = 0.5
MOUNTAINCAR_NOISE: float = 0.2

# (behavior p(left), target p(left))
RINGWORLD_POLICY_PAIRS: dict[str, tuple[float, float]] = {
    '0.4/0.35': (0.4, 0.35),
    '0.3/0.25': (0.3, 0.25),
    '0.2/0.15': (0.2, 0.15),
    '0.4/0.4': (0.4, 0.4),
    '0.3/0.3': (0.3, 0.3),
    '0.2/0.2': (0.2, 0.2),
}
FROZENLAKE_HEURISTIC: tuple[float, ...] = (0.2, 0.3, 0.3, 0.2)  # W, S, E, N
FROZENLAKE_POLICY_PAIRS: tuple[str, ...] = ('off-policy', 'on-policy')


class TerminatedEnvironmentException(Exception):
    pass


class Environment(object):
    n_actions: int
    terminated: bool = True

    def reset(self, rng: np.random.Generator):
        raise NotImplementedError()

    def _transition(self, action: int, rng: np.random.Generator):
        raise NotImplementedError()

    def step(self, action: int, rng: np.random.Generator):
        """ (observation, reward, terminal, gamma_next) """
        if self.terminated:
            raise TerminatedEnvironmentException("%s must be reset before stepping" % self.__class__.__name__)
        if not 0 <= action < self.n_actions:
            raise ValueError("action %d is outside [0, %d)" % (action, self.n_actions))
        observation, reward, terminal = self._transition(action, rng)
        self.terminated = terminal
        return observation, reward, terminal, 0.0 if terminal else self.gamma


class RingWorldEnv(Environment):
    """
    Random walk over `n_states` non-terminal states (indices 1..n) between two terminal
    states, 0 on the left and n + 1 on the right. Leaving left pays -1, leaving right +1.
    """

    n_actions = 2

    def __init__(self, n_states: int = RINGWORLD_STATES, gamma: float = 0.95):
        if n_states < 1 or n_states % 2 == 0:
            raise ValueError("RingWorld needs an odd number of states, got %d" % n_states)
        self.n_states = n_states
        self.gamma = gamma
        self.start = (n_states + 1) // 2
        self.position = self.start

    @property
    def n_total(self) -> int:
        return self.n_states + 2

    @property
    def terminal(self) -> np.ndarray:
        flags = np.zeros(self.n_total, dtype=bool)
        flags[[0, self.n_total - 1]] = True
        return flags

    def reset(self, rng):
        self.position = self.start
        self.terminated = False
        return self.position

    def _outcome(self, s: int, action: int) -> tuple[int, float]:
        s_next = s - 1 if action == RINGWORLD_LEFT else s + 1
        if s_next == 0:
            return s_next, -1.0
        if s_next == self.n_total - 1:
            return s_next, 1.0
        return s_next, 0.0

    def _transition(self, action, rng):
        self.position, reward = self._outcome(self.position, action)
        return self.position, reward, bool(self.terminal[self.position])

    def as_finite_mdp(self) -> FiniteMdp:
        transition = {(s, a): [(*self._outcome(s, a), 1.0)]
                      for s in range(1, self.n_total - 1) for a in range(self.n_actions)}
        d0 = np.zeros(self.n_total)
        d0[self.start] = 1.0
        return FiniteMdp(self.n_total, self.n_actions, transition, d0, self.terminal)

    def discount(self) -> DiscountFunction:
        values = np.full(self.n_total, self.gamma)
        values[self.terminal] = 0.0
        return DiscountFunction(values)

    def policies(self, pair: str) -> tuple[TabularPolicy, TabularPolicy]:
        if pair not in RINGWORLD_POLICY_PAIRS:
            raise ValueError("unknown RingWorld policy pair %r (expected one of %s)" % (pair, sorted(RINGWORLD_POLICY_PAIRS)))
        behavior, target = RINGWORLD_POLICY_PAIRS[pair]
        return (TabularPolicy.from_action_probs(self.n_total, [behavior, 1.0 - behavior]),
                TabularPolicy.from_action_probs(self.n_total, [target, 1.0 - target]))

    def features(self) -> TabularFeatures:
        return TabularFeatures.from_map(OneHot(self.n_total), range(self.n_total), self.terminal)


class FrozenLakeEnv(Environment):
    """
    Slippery FrozenLake: the agent moves in the chosen direction or either perpendicular
    one with probability 1/3 each; moves into a wall keep it in place. Holes and the goal
    end the episode, the goal paying 1. There is no step limit.
    """

    n_actions = 4

    def __init__(self, layout: Sequence[str] = FROZENLAKE_MAP, gamma: float = 0.95, slippery: bool = True):
        self.layout = tuple(layout)
        self.n_rows = len(self.layout)
        self.n_cols = len(self.layout[0])
        if any(len(row) != self.n_cols for row in self.layout):
            raise ValueError("FrozenLake layout rows must have equal length")
        self.gamma = gamma
        self.slippery = slippery
        cells = ''.join(self.layout)
        self.start = cells.index('S')
        self.goal = cells.index('G')
        self.terminal = np.array([c in 'HG' for c in cells], dtype=bool)
        self.position = self.start

    @property
    def n_total(self) -> int:
        return self.n_rows * self.n_cols

    def _move(self, s: int, direction: int) -> int:
        row, col = divmod(s, self.n_cols)
        d_row, d_col = FROZENLAKE_MOVES[direction]
        row = min(max(row + d_row, 0), self.n_rows - 1)
        col = min(max(col + d_col, 0), self.n_cols - 1)
        return row * self.n_cols + col

    def _directions(self, action: int) -> list[int]:
        if not self.slippery:
            return [action]
        return [(action - 1) % 4, action, (action + 1) % 4]

    def reset(self, rng):
        self.position = self.start
        self.terminated = False
        return self.position

    def _transition(self, action, rng):
        directions = self._directions(action)
        direction = directions[int(rng.integers(len(directions)))]
        self.position = self._move(self.position, direction)
        reward = 1.0 if self.position == self.goal else 0.0
        return self.position, reward, bool(self.terminal[self.position])

    def as_finite_mdp(self) -> FiniteMdp:
        transition = {}
        for s in range(self.n_total):
            if self.terminal[s]:
                continue
            for a in range(self.n_actions):
                directions = self._directions(a)
                outcomes: dict[int, float] = {}
                for direction in directions:
                    s_next = self._move(s, direction)
                    outcomes[s_next] = outcomes.get(s_next, 0.0) + 1.0 / len(directions)
                transition[(s, a)] = [(s_next, 1.0 if s_next == self.goal else 0.0, p) for s_next, p in outcomes.items()]
        d0 = np.zeros(self.n_total)
        d0[self.start] = 1.0
        return FiniteMdp(self.n_total, self.n_actions, transition, d0, self.terminal)

    def discount(self) -> DiscountFunction:
        values = np.full(self.n_total, self.gamma)
        values[self.terminal] = 0.0
        return DiscountFunction(values)

    def policies(self, pair: str) -> tuple[TabularPolicy, TabularPolicy]:
        target = TabularPolicy.from_action_probs(self.n_total, list(FROZENLAKE_HEURISTIC))
        if pair == 'off-policy':
            return TabularPolicy.uniform(self.n_total, self.n_actions), target
        if pair == 'on-policy':
            return target, target
        raise ValueError("unknown FrozenLake policy pair %r (expected one of %s)" % (pair, FROZENLAKE_POLICY_PAIRS))

    def cell_centers(self) -> list[tuple[float, float]]:
        return [(row + 0.5, col + 0.5) for row in range(self.n_rows) for col in range(self.n_cols)]

    def features(self, tiles_per_dim: int = 4, n_tilings: int = 4, offsets: str = OFFSETS_EVEN,
                 rng_seed: int | None = None) -> TabularFeatures:
        """ Discrete tile coding: every cell encoded by its center on the [0, rows] x [0, cols] box """
        coder = TileCoding([(0.0, float(self.n_rows)), (0.0, float(self.n_cols))], tiles_per_dim, n_tilings, offsets, rng_seed)
        return TabularFeatures.from_map(coder, self.cell_centers(), self.terminal)


class NoisyMountainCarEnv(Environment):
    """
    MountainCar where the chosen throttle is replaced by a uniformly random one with
    probability `noise_prob`. Episodes start anywhere on the slopes at rest and end at the
    goal; every step pays -1.
    """

    n_actions = 3

    def __init__(self, noise_prob: float = MOUNTAINCAR_NOISE, gamma: float = 1.0):
        if not 0.0 <= noise_prob <= 1.0:
            raise ValueError("noise probability must be in [0, 1]")
        self.noise_prob = noise_prob
        self.gamma = gamma
        self.position = -0.5
        self.velocity = 0.0

    @property
    def observation(self) -> tuple[float, float]:
        return self.position, self.velocity

    def reset(self, rng):
        self.position = float(rng.uniform(MOUNTAINCAR_MIN_POSITION, MOUNTAINCAR_MAX_POSITION))
        self.velocity = 0.0
        self.terminated = False
        return self.observation

    def _transition(self, action, rng):
        if self.noise_prob > 0.0 and rng.random() < self.noise_prob:
            action = int(rng.integers(self.n_actions))
        self.velocity += 0.001 * (action - 1) - 0.0025 * math.cos(3.0 * self.position)
        self.velocity = min(max(self.velocity, -MOUNTAINCAR_MAX_SPEED), MOUNTAINCAR_MAX_SPEED)
        self.position += self.velocity
        self.position = min(max(self.position, MOUNTAINCAR_MIN_POSITION), MOUNTAINCAR_MAX_POSITION)
        if self.position == MOUNTAINCAR_MIN_POSITION and self.velocity < 0:
            self.velocity = 0.0
        return self.observation, -1.0, self.position >= MOUNTAINCAR_GOAL

    def feature_map(self, tiles_per_dim: int = 8, n_tilings: int = 8, offsets: str = OFFSETS_EVEN,
                    rng_seed: int | None = None) -> TileCoding:
        return TileCoding([(MOUNTAINCAR_MIN_POSITION, MOUNTAINCAR_MAX_POSITION),
                           (-MOUNTAINCAR_MAX_SPEED, MOUNTAINCAR_MAX_SPEED)],
                          tiles_per_dim, n_tilings, offsets, rng_seed)


def make_environment(kind: str, gamma: float | None = None, **params) -> Environment:
    if kind == 'ringworld':
        return RingWorldEnv(params.get('n_states', RINGWORLD_STATES), 0.95 if gamma is None else gamma)
    if kind == 'frozenlake':
        return FrozenLakeEnv(params.get('layout', FROZENLAKE_MAP), 0.95 if gamma is None else gamma,
                             params.get('slippery', True))
    if kind == 'mountaincar':
        return NoisyMountainCarEnv(params.get('noise_prob', MOUNTAINCAR_NOISE), 1.0 if gamma is None else gamma)
    logging.error("\033[1;31m[ENV] unknown environment %r\033[0m" % kind)
    raise ValueError("unknown environment kind %r" % kind)
