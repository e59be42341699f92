import numpy as np
import pytest

from cachekv.hashing import (
    EMPTY_KEY,
    LOCKED_KEY,
    bucket_of_hash,
    digest_of_hash,
    digests_of_hashes,
    fmix64,
    fmix64_array,
    hash_key,
    hash_keys,
    mix_to_keys,
    second_hash,
    second_hash_array,
)


def test_hash_deterministic():
    for k in (0, 1, 42, 2**63, 2**64 - 3):
        assert hash_key(k) == hash_key(k)


def test_vectorized_matches_scalar():
    rng = np.random.default_rng(0)
    keys = rng.integers(0, 2**63, size=5000, dtype=np.uint64)
    vec = hash_keys(keys)
    for i in range(0, 5000, 137):
        assert int(vec[i]) == fmix64(int(keys[i]))
    vec2 = second_hash_array(vec)
    for i in range(0, 5000, 137):
        assert int(vec2[i]) == second_hash(int(vec[i]))


def test_fmix64_bijective_on_sample():
    rng = np.random.default_rng(1)
    keys = rng.integers(0, 2**64, size=200_000, dtype=np.uint64)
    keys = np.unique(keys)
    assert len(np.unique(fmix64_array(keys))) == len(keys)


def test_bucket_index_in_range():
    rng = np.random.default_rng(2)
    keys = rng.integers(0, 2**64 - 2, size=10_000, dtype=np.uint64)
    for bucket_count in (1, 8, 1024, 2**20):
        mask = bucket_count - 1
        b = hash_keys(keys) & np.uint64(mask)
        assert (b < bucket_count).all()
        assert bucket_of_hash(hash_key(7), mask) == int(hash_keys(np.array([7], np.uint64))[0] & np.uint64(mask))


def test_digest_and_bucket_bits_disjoint():
    # digest uses bits 32..39; bucket masks stay below 2**32
    h = 0xAABBCCDD_11223344
    assert digest_of_hash(h) == 0xDD
    assert bucket_of_hash(h, 2**32 - 1) == 0x11223344


def test_digest_uniformity_chi_square():
    # 1e6 hashed keys: every digest byte frequency within 5 sigma of n/256
    n = 10**6
    keys = mix_to_keys(np.arange(1, n + 1, dtype=np.uint64))
    digs = digests_of_hashes(hash_keys(keys))
    hist = np.bincount(digs, minlength=256)
    expect = n / 256
    sigma = np.sqrt(n * (1 / 256) * (255 / 256))
    assert (np.abs(hist - expect) <= 5 * sigma).all(), hist[np.abs(hist - expect) > 5 * sigma]


def test_second_hash_differs_and_decorrelates():
    keys = mix_to_keys(np.arange(1, 100_001, dtype=np.uint64))
    h1 = hash_keys(keys)
    h2 = second_hash_array(h1)
    assert (h1 != h2).mean() > 0.999999
    # low bits (bucket selection) agree only at chance level
    mask = np.uint64(8191)
    agree = ((h1 & mask) == (h2 & mask)).mean()
    assert agree < 5 / 8192


def test_mix_to_keys_avoids_sentinels_and_collisions():
    x = np.arange(0, 300_000, dtype=np.uint64)
    keys = mix_to_keys(x)
    assert (keys < LOCKED_KEY).all()
    assert len(np.unique(keys)) == len(keys)
    assert EMPTY_KEY not in keys and LOCKED_KEY not in keys
