import numpy as np

from npdcat import rng


def test_substreams_reproducible_and_distinct():
    a = rng.substream(7, rng.SIMULATE, 0, 1).random(5)
    np.testing.assert_array_equal(a, rng.substream(7, rng.SIMULATE, 0, 1).random(5))
    for other in [(8, rng.SIMULATE, 0, 1), (7, rng.MARGINAL, 0, 1), (7, rng.SIMULATE, 1, 1),
                  (7, rng.SIMULATE, 0, 2)]:
        assert not np.array_equal(a, rng.substream(*other).random(5))


def test_derive_seed_stable():
    assert rng.derive_seed(0, "data", "abc") == rng.derive_seed(0, "data", "abc")
    assert rng.derive_seed(0, "data", "abc") != rng.derive_seed(1, "data", "abc")
    assert 0 <= rng.derive_seed(0, "x") < 2 ** 63


def test_streams_uncorrelated():
    x = rng.substream(0, rng.SIMULATE, 0, 0).standard_normal(20000)
    y = rng.substream(0, rng.SIMULATE, 0, 1).standard_normal(20000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / np.sqrt(20000)
