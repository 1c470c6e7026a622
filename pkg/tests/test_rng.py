"""The generator must be platform-independent and match the published
SplitMix64 output stream, and substreams must be draw-order independent."""

import collections

import pytest
from hypothesis import given, strategies as st

from disfluency_kit.rng import SplitMix64, substream, substream_seed

# reference output stream for the SplitMix64 algorithm, seeds 0 and 1
SEED0_STREAM = [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4, 0x06C45D188009454F]
SEED1_FIRST = 0x910A2DEC89025CC1


def test_matches_reference_stream():
    g = SplitMix64(0)
    assert [g.next_u64() for _ in range(3)] == SEED0_STREAM
    assert SplitMix64(1).next_u64() == SEED1_FIRST


def test_seed_is_masked_to_64_bits():
    assert SplitMix64(1 << 64).next_u64() == SEED0_STREAM[0]
    assert SplitMix64(-1).seed == (1 << 64) - 1


def test_randint_inclusive_bounds():
    g = SplitMix64(42)
    draws = [g.randint(3, 5) for _ in range(200)]
    assert set(draws) == {3, 4, 5}
    assert g.randint(7, 7) == 7
    with pytest.raises(ValueError):
        g.randint(2, 1)


def test_randint_uniformity_chi_squared():
    scipy_stats = pytest.importorskip("scipy.stats")
    g = SplitMix64(12345)
    counts = collections.Counter(g.randint(0, 9) for _ in range(10000))
    observed = [counts[i] for i in range(10)]
    result = scipy_stats.chisquare(observed)
    assert result.pvalue > 1e-6


def test_random_unit_interval():
    g = SplitMix64(9)
    xs = [g.random() for _ in range(1000)]
    assert all(0.0 <= x < 1.0 for x in xs)
    assert len(set(xs)) > 990  # effectively no collisions


def test_choice():
    g = SplitMix64(3)
    assert g.choice(["only"]) == "only"
    assert g.choice("abc") in "abc"
    with pytest.raises(ValueError):
        g.choice([])


def test_sample_indices_distinct_and_bounded():
    g = SplitMix64(5)
    for _ in range(50):
        idx = g.sample_indices(10, 4)
        assert len(idx) == 4 and len(set(idx)) == 4
        assert all(0 <= i < 10 for i in idx)
    assert sorted(g.sample_indices(3, 3)) == [0, 1, 2]
    with pytest.raises(ValueError):
        g.sample_indices(2, 3)


def test_shuffle_is_a_permutation():
    g = SplitMix64(11)
    xs = list(range(20))
    g.shuffle(xs)
    assert sorted(xs) == list(range(20))
    assert xs != list(range(20))  # 1/20! chance of a false failure


def test_weighted_choice_validation_and_support():
    g = SplitMix64(8)
    picks = {g.weighted_choice(["a", "b"], [0.0, 1.0]) for _ in range(50)}
    assert picks == {"b"}
    with pytest.raises(ValueError):
        g.weighted_choice([], [])
    with pytest.raises(ValueError):
        g.weighted_choice(["a"], [1.0, 2.0])
    with pytest.raises(ValueError):
        g.weighted_choice(["a", "b"], [-1.0, 2.0])
    with pytest.raises(ValueError):
        g.weighted_choice(["a", "b"], [0.0, 0.0])


def test_weighted_choice_roughly_proportional():
    g = SplitMix64(21)
    counts = collections.Counter(
        g.weighted_choice(["x", "y", "z"], [1.0, 2.0, 1.0]) for _ in range(8000)
    )
    assert 0.4 < counts["y"] / 8000 < 0.6


def test_substream_seed_frozen_values():
    # frozen so any change to the derivation scheme is caught loudly
    assert substream_seed(0, "augment", 0) == 10747082679005186687
    assert substream_seed(7, "split") == 214883444136643978


def test_substream_part_boundaries_matter():
    assert substream_seed(0, "ab") != substream_seed(0, "a", "b")
    assert substream_seed(0, "x") != substream_seed(1, "x")
    assert substream_seed(0, "x") != substream_seed(0, "y")


def test_substreams_independent_of_draw_order():
    a = substream(4, "augment", 0)
    _ = [a.next_u64() for _ in range(100)]
    b = substream(4, "augment", 1)
    fresh_b = substream(4, "augment", 1)
    assert b.next_u64() == fresh_b.next_u64()


@given(st.integers(min_value=0, max_value=2**64 - 1), st.integers(0, 100), st.integers(0, 100))
def test_randint_stays_inside_range(seed, lo, width):
    g = SplitMix64(seed)
    v = g.randint(lo, lo + width)
    assert lo <= v <= lo + width


@given(st.integers(min_value=0, max_value=2**64 - 1))
def test_same_seed_same_stream(seed):
    a, b = SplitMix64(seed), SplitMix64(seed)
    assert [a.next_u64() for _ in range(5)] == [b.next_u64() for _ in range(5)]
