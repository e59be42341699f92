"""64-bit key hashing: Murmur3 finalizer, bucket/digest extraction, mixers."""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

# Reserved key values; user keys must avoid both.
EMPTY_KEY = 0xFFFFFFFFFFFFFFFF
LOCKED_KEY = 0xFFFFFFFFFFFFFFFE

_C1 = 0xFF51AFD7ED558CCD
_C2 = 0xC4CEB9FE1A85EC53

# Odd constant XORed in before re-finalizing to derive the second,
# independent hash for dual-bucket placement.
SECOND_HASH_SALT = 0x9E3779B97F4A7C15


def fmix64(x: int) -> int:
    """Murmur3 64-bit finalizer (full avalanche, bijective on uint64)."""
    x &= MASK64
    x ^= x >> 33
    x = (x * _C1) & MASK64
    x ^= x >> 33
    x = (x * _C2) & MASK64
    x ^= x >> 33
    return x


def fmix64_array(x: np.ndarray) -> np.ndarray:
    """Vectorized fmix64 over a uint64 array."""
    k = x.astype(np.uint64, copy=True)
    k ^= k >> np.uint64(33)
    k *= np.uint64(_C1)
    k ^= k >> np.uint64(33)
    k *= np.uint64(_C2)
    k ^= k >> np.uint64(33)
    return k


def hash_key(key: int) -> int:
    """Hash one user key to 64 bits."""
    return fmix64(key)


def hash_keys(keys: np.ndarray) -> np.ndarray:
    return fmix64_array(keys)


def second_hash(h1: int) -> int:
    return fmix64(h1 ^ SECOND_HASH_SALT)


def second_hash_array(h1: np.ndarray) -> np.ndarray:
    return fmix64_array(h1 ^ np.uint64(SECOND_HASH_SALT))


def digest_of_hash(h: int) -> int:
    """8-bit digest: hash bits 32..39, disjoint from the bucket-index bits."""
    return (h >> 32) & 0xFF


def digests_of_hashes(h: np.ndarray) -> np.ndarray:
    return ((h >> np.uint64(32)) & np.uint64(0xFF)).astype(np.uint8)


def bucket_of_hash(h: int, bucket_mask: int) -> int:
    """Bucket index from the hash low bits (bucket count is a power of two)."""
    return h & bucket_mask


def buckets_of_hashes(h: np.ndarray, bucket_mask: int) -> np.ndarray:
    return (h & np.uint64(bucket_mask)).astype(np.int64)


def is_user_key(key: int) -> bool:
    return key != EMPTY_KEY and key != LOCKED_KEY


def mix_to_keys(x: np.ndarray) -> np.ndarray:
    """Bijectively map distinct uint64 inputs to distinct user keys.

    fmix64 is a bijection, so distinct inputs stay distinct; the rare
    outputs that land on a sentinel are re-mixed (still collision-free
    because both sentinel preimages map to non-sentinel values).
    """
    keys = fmix64_array(x.astype(np.uint64))
    bad = keys >= np.uint64(LOCKED_KEY)
    while bad.any():
        keys[bad] = fmix64_array(keys[bad])
        bad = keys >= np.uint64(LOCKED_KEY)
    return keys
