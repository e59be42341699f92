import numpy as np
import pytest

from cachekv.hashing import buckets_of_hashes, hash_keys, second_hash_array


def keys_hashing_to_bucket(bucket: int, bucket_mask: int, count: int, start: int = 1):
    """Scan user keys and keep those whose primary bucket is `bucket`."""
    out = []
    lo = start
    while sum(len(a) for a in out) < count:
        cand = np.arange(lo, lo + 200_000, dtype=np.uint64)
        b = buckets_of_hashes(hash_keys(cand), bucket_mask)
        out.append(cand[b == bucket])
        lo += 200_000
    return np.concatenate(out)[:count]


def key_with_distinct_buckets(bucket_mask: int, start: int = 1):
    """A user key whose two candidate buckets differ, plus those buckets."""
    lo = start
    while True:
        cand = np.arange(lo, lo + 4096, dtype=np.uint64)
        h1 = hash_keys(cand)
        b1 = buckets_of_hashes(h1, bucket_mask)
        b2 = buckets_of_hashes(second_hash_array(h1), bucket_mask)
        ok = np.flatnonzero(b1 != b2)
        if len(ok):
            i = int(ok[0])
            return int(cand[i]), int(b1[i]), int(b2[i])
        lo += 4096


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
