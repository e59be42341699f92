import numpy as np
import pytest

from cachekv.store import BUCKET_SLOTS, SLICE_ELEMENTS, Tier, TieredValueStore, ValueHandle


def test_fast_tier_origin():
    s = TieredValueStore(bucket_count=4, value_dim=3, fast_tier_budget=2)
    h = s.value_address(0, 0)
    assert h == ValueHandle(Tier.Fast, 0)


def test_overflow_boundary():
    s = TieredValueStore(bucket_count=4, value_dim=3, fast_tier_budget=2)
    h = s.value_address(2, 0)
    assert h.tier is Tier.Overflow and h.offset == 0


def test_slot_stride_equals_dim():
    s = TieredValueStore(bucket_count=4, value_dim=4, fast_tier_budget=4)
    a = s.value_address(1, 5)
    b = s.value_address(1, 6)
    assert a.tier is b.tier and b.offset - a.offset == 4


def test_out_of_range_indices():
    s = TieredValueStore(bucket_count=4, value_dim=1, fast_tier_budget=4)
    with pytest.raises(ValueError):
        s.value_address(4, 0)
    with pytest.raises(ValueError):
        s.value_address(0, BUCKET_SLOTS)
    with pytest.raises(ValueError):
        s.value_address(-1, 0)


def test_write_read_round_trip():
    s = TieredValueStore(bucket_count=2, value_dim=5, fast_tier_budget=1)
    for b, slot in ((0, 0), (0, 127), (1, 3)):
        h = s.value_address(b, slot)
        data = np.arange(5, dtype=np.float32) + b * 1000 + slot
        s.write_value(h, data)
        out = np.zeros(5, dtype=np.float32)
        s.read_value(h, out)
        assert np.array_equal(out, data)


def test_buffer_length_enforced():
    s = TieredValueStore(bucket_count=1, value_dim=3, fast_tier_budget=1)
    h = s.value_address(0, 0)
    with pytest.raises(ValueError):
        s.write_value(h, np.zeros(4, dtype=np.float32))
    with pytest.raises(ValueError):
        s.read_value(h, np.zeros(2, dtype=np.float32))


def test_address_map_is_bijective_small():
    # every (bucket, slot) maps to a distinct (tier, offset), covering both arenas
    bc, dim, budget = 4, 2, 1
    s = TieredValueStore(bucket_count=bc, value_dim=dim, fast_tier_budget=budget)
    seen = set()
    for b in range(bc):
        for slot in range(BUCKET_SLOTS):
            h = s.value_address(b, slot)
            assert (h.tier, h.offset) not in seen
            seen.add((h.tier, h.offset))
    fast = sorted(off for t, off in seen if t is Tier.Fast)
    over = sorted(off for t, off in seen if t is Tier.Overflow)
    assert fast == list(range(0, budget * BUCKET_SLOTS * dim, dim))
    assert over == list(range(0, (bc - budget) * BUCKET_SLOTS * dim, dim))


def test_writes_to_distinct_handles_never_alias():
    s = TieredValueStore(bucket_count=2, value_dim=2, fast_tier_budget=1)
    h1 = s.value_address(0, 10)
    h2 = s.value_address(0, 11)
    s.write_value(h1, np.array([1, 1], dtype=np.float32))
    s.write_value(h2, np.array([2, 2], dtype=np.float32))
    out = np.zeros(2, dtype=np.float32)
    s.read_value(h1, out)
    assert out[0] == 1


def test_allocation_totals_exact():
    bc, dim = 8, 6
    s = TieredValueStore(bucket_count=bc, value_dim=dim, fast_tier_budget=5)
    assert s.allocated_elements == bc * BUCKET_SLOTS * dim


def test_allocator_hook_slice_granularity():
    calls = []

    def alloc(n, tier):
        calls.append((n, tier))
        return np.zeros(n, dtype=np.float32)

    bc = 4096  # big enough to need multiple slices per tier
    dim = 2
    s = TieredValueStore(bucket_count=bc, value_dim=dim, fast_tier_budget=bc // 2)
    s2 = TieredValueStore(
        bucket_count=bc, value_dim=dim, fast_tier_budget=bc // 2, allocator=alloc
    )
    assert s2.allocated_elements == s.allocated_elements == bc * BUCKET_SLOTS * dim
    assert all(n <= SLICE_ELEMENTS for n, _ in calls)
    assert sum(n for n, t in calls if t == "fast") == (bc // 2) * BUCKET_SLOTS * dim
    assert sum(n for n, t in calls if t == "overflow") == (bc // 2) * BUCKET_SLOTS * dim


def test_bulk_row_access_matches_handles():
    s = TieredValueStore(bucket_count=4, value_dim=3, fast_tier_budget=2)
    rows = np.array([0, 255, 256, 511], dtype=np.int64)  # straddles the tier split
    vals = np.arange(12, dtype=np.float32).reshape(4, 3)
    s.scatter_rows(rows, vals)
    got = s.gather_rows(rows)
    assert np.array_equal(got, vals)
    assert s.copy_counts(rows) == (2, 2)
    # scalar handles see the same bytes
    h = s.value_address(1, 127)  # row 255
    out = np.zeros(3, dtype=np.float32)
    s.read_value(h, out)
    assert np.array_equal(out, vals[1])
