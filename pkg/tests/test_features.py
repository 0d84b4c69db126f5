# test_features.py

import numpy as np
import pytest

from features import OFFSETS_RANDOM, OneHot, StateOutOfRangeException, TabularFeatures, TileCoding, onehot, tile_coding


def test_onehot():
    encoder = onehot(4)
    np.testing.assert_array_equal(encoder(2), [0.0, 0.0, 1.0, 0.0])
    assert encoder.dimension == 4
    with pytest.raises(StateOutOfRangeException):
        encoder.encode(4)
    with pytest.raises(ValueError):
        OneHot(0)


@pytest.mark.parametrize('tiles_per_dim, n_tilings', [(4, 1), (4, 4), (8, 8)])
def test_one_active_tile_per_tiling(tiles_per_dim, n_tilings):
    coder = tile_coding([(-1.2, 0.5), (-0.07, 0.07)], tiles_per_dim, n_tilings)
    assert coder.dimension == n_tilings * tiles_per_dim ** 2
    rng = np.random.default_rng(0)
    for point in zip(rng.uniform(-1.2, 0.5, 50), rng.uniform(-0.07, 0.07, 50)):
        x = coder.encode(point)
        assert x.sum() == n_tilings
        assert set(np.unique(x)) <= {0.0, 1.0}


def test_points_outside_the_box_are_clamped():
    coder = TileCoding([(0.0, 1.0)], 4, 2)
    np.testing.assert_array_equal(coder.encode([-5.0]), coder.encode([0.0]))
    assert coder.encode([7.0]).sum() == 2


def test_nearby_points_share_tiles():
    coder = TileCoding([(0.0, 4.0), (0.0, 4.0)], 4, 4)
    near = coder.encode([1.5, 1.5]) @ coder.encode([1.6, 1.5])
    far = coder.encode([1.5, 1.5]) @ coder.encode([3.5, 0.5])
    assert near > far


def test_random_offsets_follow_the_seed():
    a = TileCoding([(0.0, 1.0)], 4, 3, OFFSETS_RANDOM, rng_seed=9)
    b = TileCoding([(0.0, 1.0)], 4, 3, OFFSETS_RANDOM, rng_seed=9)
    np.testing.assert_array_equal(a.offsets, b.offsets)
    assert a.to_dict()['offsets'] == 'random'
    with pytest.raises(ValueError):
        TileCoding([(0.0, 1.0)], 4, 3, 'diagonal')


def test_tabular_rows_are_zero_on_terminal_states():
    features = TabularFeatures.from_map(OneHot(3), range(3), [False, False, True])
    np.testing.assert_array_equal(features.encode(1), [0.0, 1.0, 0.0])
    np.testing.assert_array_equal(features.encode(2), [0.0, 0.0, 0.0])
    assert features.to_dict() == {'kind': 'onehot', 'n_states': 3}
    with pytest.raises(StateOutOfRangeException):
        features.encode(3)
