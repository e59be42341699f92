import numpy as np
import pytest
from hypothesis import given, strategies as st

from cachekv.scoring import (
    MAX_SCORE,
    ALL_POLICIES,
    EpochState,
    PolicyId,
    hit_scores,
    insert_scores,
    score_on_hit,
    score_on_insert,
)


class TestInsertScores:
    def test_lru_two_inserts_strictly_increase(self):
        e = EpochState(0)
        s1 = score_on_insert(PolicyId.kLru, e, logical_clock=1)
        s2 = score_on_insert(PolicyId.kLru, e, logical_clock=2)
        assert s2 > s1

    def test_lfu_fresh_insert_is_one(self):
        assert score_on_insert(PolicyId.kLfu, EpochState(0), 99) == 1

    def test_epoch_lru_bit_layout(self):
        s = score_on_insert(PolicyId.kEpochLru, EpochState(3), logical_clock=5)
        assert s == 0x0000_0003_0000_0005

    def test_epoch_lfu_layout(self):
        assert score_on_insert(PolicyId.kEpochLfu, EpochState(7), 123) == (7 << 32) | 1

    def test_customized_requires_score(self):
        with pytest.raises(ValueError):
            score_on_insert(PolicyId.kCustomized, EpochState(0), 1)
        assert score_on_insert(PolicyId.kCustomized, EpochState(0), 1, custom_score=42) == 42


class TestHitScores:
    def test_lfu_increments(self):
        assert score_on_hit(PolicyId.kLfu, 7, EpochState(0), 1) == 8

    def test_lfu_saturates(self):
        assert score_on_hit(PolicyId.kLfu, MAX_SCORE, EpochState(0), 1) == MAX_SCORE

    def test_lru_later_hit_outranks_earlier(self):
        e = EpochState(0)
        early = score_on_hit(PolicyId.kLru, 5, e, logical_clock=10)
        late = score_on_hit(PolicyId.kLru, 5, e, logical_clock=11)
        assert late > early

    def test_epoch_lfu_same_epoch_increment(self):
        e = EpochState(2)
        old = (2 << 32) | 9
        assert score_on_hit(PolicyId.kEpochLfu, old, e, 1) == (2 << 32) | 10

    def test_epoch_lfu_epoch_change_resets(self):
        e = EpochState(3)
        old = (2 << 32) | 999
        assert score_on_hit(PolicyId.kEpochLfu, old, e, 1) == (3 << 32) | 1

    def test_epoch_lfu_low_word_saturates(self):
        e = EpochState(2)
        old = (2 << 32) | 0xFFFFFFFF
        assert score_on_hit(PolicyId.kEpochLfu, old, e, 1) == old

    def test_customized_unchanged_without_score(self):
        assert score_on_hit(PolicyId.kCustomized, 55, EpochState(0), 9) == 55
        assert score_on_hit(PolicyId.kCustomized, 55, EpochState(0), 9, custom_score=77) == 77


@given(
    epoch=st.integers(min_value=0, max_value=2**31),
    low_a=st.integers(min_value=0, max_value=2**32 - 1),
    low_b=st.integers(min_value=0, max_value=2**32 - 1),
)
def test_epoch_precedence(epoch, low_a, low_b):
    # anything scored in epoch e+1 outranks everything scored in epoch e
    newer = ((epoch + 1) << 32) | low_a
    older = (epoch << 32) | low_b
    assert newer > older


def test_epoch_state_monotone():
    e = EpochState(4)
    e.advance_to(4)
    e.advance_to(9)
    with pytest.raises(ValueError):
        e.advance_to(8)
    with pytest.raises(ValueError):
        EpochState(-1)


@pytest.mark.parametrize("policy", [p for p in ALL_POLICIES if p is not PolicyId.kCustomized])
def test_vectorized_insert_matches_scalar(policy):
    e = EpochState(5)
    ticks = np.arange(1, 257, dtype=np.uint64)
    vec = insert_scores(policy, ticks, e.current_epoch, None)
    for i in (0, 17, 255):
        assert int(vec[i]) == score_on_insert(policy, e, int(ticks[i]))


@pytest.mark.parametrize("policy", [p for p in ALL_POLICIES if p is not PolicyId.kCustomized])
def test_vectorized_hit_matches_scalar(policy):
    e = EpochState(5)
    rng = np.random.default_rng(3)
    old = rng.integers(0, 2**40, size=256, dtype=np.uint64)
    old[:64] |= np.uint64(5 << 32)  # some same-epoch entries for the epoch policies
    ticks = np.arange(1, 257, dtype=np.uint64)
    vec = hit_scores(policy, old, ticks, e.current_epoch, None)
    for i in (0, 5, 100, 255):
        assert int(vec[i]) == score_on_hit(policy, int(old[i]), e, int(ticks[i]))


def test_vectorized_custom_passthrough():
    custom = np.array([9, 8, 7], dtype=np.uint64)
    ticks = np.ones(3, dtype=np.uint64)
    assert np.array_equal(insert_scores(PolicyId.kCustomized, ticks, 0, custom), custom)
    old = np.array([1, 2, 3], dtype=np.uint64)
    assert np.array_equal(hit_scores(PolicyId.kCustomized, old, ticks, 0, custom), custom)
    assert np.array_equal(hit_scores(PolicyId.kCustomized, old, ticks, 0, None), old)
    with pytest.raises(ValueError):
        insert_scores(PolicyId.kCustomized, ticks, 0, None)
