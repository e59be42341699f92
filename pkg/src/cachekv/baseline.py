"""Minimal dictionary-semantic baseline: linear-probe open addressing.

Exists only to reproduce the degradation shape that motivates cache
semantics: probe chains lengthen as the load factor rises, and a full
table makes further insertion fail outright. Same 64-bit hash as the
main table; probe counts are the measured quantity.
"""

from __future__ import annotations

import numpy as np

from .hashing import EMPTY_KEY, hash_keys

_EMPTY = np.uint64(EMPTY_KEY)


class BaselineTable:
    def __init__(self, capacity: int, value_dim: int = 1):
        if capacity <= 0 or capacity & (capacity - 1) != 0:
            raise ValueError("capacity must be a power of two")
        self.capacity = capacity
        self.value_dim = value_dim
        self._mask = capacity - 1
        self._keys = np.full(capacity, _EMPTY, dtype=np.uint64)
        self._values = np.zeros((capacity, value_dim), dtype=np.float32)
        self.size = 0
        self.probe_count = 0
        self.insert_failures = 0

    def insert(self, keys, values=None) -> np.ndarray:
        """Serial linear-probe insert; True per key on success. A key that
        probes every slot without finding room is a failure (table full)."""
        k = np.ascontiguousarray(keys, dtype=np.uint64)
        if values is None:
            values = np.zeros((len(k), self.value_dim), dtype=np.float32)
        v = np.ascontiguousarray(values, dtype=np.float32)
        ok = np.zeros(len(k), dtype=bool)
        h = hash_keys(k)
        for i in range(len(k)):
            key = k[i]
            idx = int(h[i]) & self._mask
            for _ in range(self.capacity):
                self.probe_count += 1
                cur = self._keys[idx]
                if cur == key:
                    self._values[idx] = v[i]
                    ok[i] = True
                    break
                if cur == _EMPTY:
                    self._keys[idx] = key
                    self._values[idx] = v[i]
                    self.size += 1
                    ok[i] = True
                    break
                idx = (idx + 1) & self._mask
            else:
                self.insert_failures += 1
        return ok

    def find(self, keys) -> tuple[np.ndarray, int]:
        """Vectorized lookup; returns (found, probes_performed)."""
        k = np.ascontiguousarray(keys, dtype=np.uint64)
        n = len(k)
        idx = (hash_keys(k) & np.uint64(self._mask)).astype(np.int64)
        found = np.zeros(n, dtype=bool)
        alive = np.ones(n, dtype=bool)
        probes = 0
        for _ in range(self.capacity):
            ai = np.flatnonzero(alive)
            if len(ai) == 0:
                break
            cur = self._keys[idx[ai]]
            probes += len(ai)
            hit = cur == k[ai]
            empty = cur == _EMPTY
            found[ai[hit]] = True
            done = hit | empty
            alive[ai[done]] = False
            cont = ai[~done]
            idx[cont] = (idx[cont] + 1) & self._mask
        self.probe_count += probes
        return found, probes
