# features.py

import logging
from typing import Any, Sequence

import numpy as np

OFFSETS_EVEN: str = 'even'
OFFSETS_RANDOM: str = 'random'


class StateOutOfRangeException(Exception):
    pass


class FeatureMap(object):
    """ Deterministic encoder of a state / observation into a real vector of fixed dimension """

    dimension: int

    def encode(self, observation: Any) -> np.ndarray:
        raise NotImplementedError()

    def __call__(self, observation: Any) -> np.ndarray:
        return self.encode(observation)

    def to_dict(self) -> dict:
        raise NotImplementedError()


class OneHot(FeatureMap):
    def __init__(self, n_states: int):
        if n_states < 1:
            raise ValueError("one-hot encoding needs at least one state")
        self.dimension = n_states
        self._rows = np.eye(n_states)
        self._rows.setflags(write=False)

    def encode(self, observation: int) -> np.ndarray:
        s = int(observation)
        if not 0 <= s < self.dimension:
            raise StateOutOfRangeException("state %d is outside [0, %d)" % (s, self.dimension))
        return self._rows[s]

    def to_dict(self) -> dict:
        return {'kind': 'onehot', 'n_states': self.dimension}


class TileCoding(FeatureMap):
    """
    Grid tile coding with `n_tilings` displaced copies of a `tiles_per_dim`^d grid over `bounds`.

    Tiling k is shifted by `offsets[k]` (in units of the state space). Points that fall
    outside a shifted grid are clamped to the boundary tiles, so every point activates
    exactly one tile per tiling.
    """

    def __init__(self, bounds: Sequence[tuple[float, float]], tiles_per_dim: int, n_tilings: int,
                 offsets: str | np.ndarray = OFFSETS_EVEN, rng_seed: int | None = None):
        if not bounds:
            raise ValueError("tile coding needs at least one dimension")
        if tiles_per_dim < 1 or n_tilings < 1:
            raise ValueError("tiles_per_dim and n_tilings must be positive")

        self.low = np.array([b[0] for b in bounds], dtype=float)
        self.high = np.array([b[1] for b in bounds], dtype=float)
        self.tiles_per_dim = tiles_per_dim
        self.n_tilings = n_tilings
        self.width = (self.high - self.low) / tiles_per_dim
        self.rng_seed = rng_seed
        self.offset_kind = offsets if isinstance(offsets, str) else 'explicit'

        n_dims = len(bounds)
        if isinstance(offsets, str) and offsets == OFFSETS_EVEN:
            fractions = np.arange(n_tilings, dtype=float) / n_tilings
            self.offsets = fractions[:, np.newaxis] * self.width[np.newaxis, :]
        elif isinstance(offsets, str) and offsets == OFFSETS_RANDOM:
            rng = np.random.default_rng(rng_seed)
            self.offsets = rng.random((n_tilings, n_dims)) * self.width[np.newaxis, :]
        elif isinstance(offsets, str):
            raise ValueError("unknown offset kind %r" % offsets)
        else:
            self.offsets = np.asarray(offsets, dtype=float).reshape(n_tilings, n_dims)

        self.grid_shape = (tiles_per_dim,) * n_dims
        self.tiles_per_tiling = tiles_per_dim ** n_dims
        self.dimension = n_tilings * self.tiles_per_tiling
        logging.debug("TileCoding: %d tilings x %d tiles, offsets=%s" % (n_tilings, self.tiles_per_tiling, self.offset_kind))

    def active_indices(self, point: Sequence[float]) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        coords = np.floor((point[np.newaxis, :] - self.low + self.offsets) / self.width).astype(int)
        coords = np.clip(coords, 0, self.tiles_per_dim - 1)
        flat = np.ravel_multi_index(tuple(coords.T), self.grid_shape)
        return flat + np.arange(self.n_tilings) * self.tiles_per_tiling

    def encode(self, point: Sequence[float]) -> np.ndarray:
        x = np.zeros(self.dimension)
        x[self.active_indices(point)] = 1.0
        return x

    def to_dict(self) -> dict:
        return {
            'kind': 'tiles',
            'bounds': list(zip(self.low.tolist(), self.high.tolist())),
            'tiles_per_dim': self.tiles_per_dim,
            'n_tilings': self.n_tilings,
            'offsets': self.offset_kind,
            'seed': self.rng_seed,
        }


class TabularFeatures(FeatureMap):
    """
    Precomputed feature rows for an enumerated state set; rows of terminal states are zero
    so nothing ever bootstraps from them.
    """

    def __init__(self, rows: np.ndarray, description: dict | None = None):
        self.rows = np.array(rows, dtype=float)
        self.rows.setflags(write=False)
        self.dimension = self.rows.shape[1]
        self.description = description or {'kind': 'table'}

    @classmethod
    def from_map(cls, feature_map: FeatureMap, observations: Sequence[Any], terminal: Sequence[bool]) -> 'TabularFeatures':
        rows = np.zeros((len(observations), feature_map.dimension))
        for s, (observation, is_terminal) in enumerate(zip(observations, terminal)):
            if not is_terminal:
                rows[s] = feature_map.encode(observation)
        return cls(rows, feature_map.to_dict())

    def encode(self, observation: int) -> np.ndarray:
        s = int(observation)
        if not 0 <= s < len(self.rows):
            raise StateOutOfRangeException("state %d is outside [0, %d)" % (s, len(self.rows)))
        return self.rows[s]

    def to_dict(self) -> dict:
        return dict(self.description)


def onehot(n_states: int) -> OneHot:
    return OneHot(n_states)


def tile_coding(bounds: Sequence[tuple[float, float]], tiles_per_dim: int, n_tilings: int,
                offsets: str | np.ndarray = OFFSETS_EVEN, rng_seed: int | None = None) -> TileCoding:
    return TileCoding(bounds, tiles_per_dim, n_tilings, offsets, rng_seed)
