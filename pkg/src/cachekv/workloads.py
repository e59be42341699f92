"""Deterministic workload generation for the bench harness.

Two stream families:

  uniform_distinct  a pseudorandom permutation stream: distinct keys
                    produced by a bijective mix of a seeded counter.
  zipf(alpha)       ranks drawn by rejection inversion over [1, universe]
                    and mapped to keys through the same bijective mixer,
                    so rank locality never leaks into bucket placement.

The same (spec, seed) always regenerates the identical key stream.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .hashing import fmix64, mix_to_keys

_SEED_SALT = 0x51_7CC1B727220A95


@dataclass(frozen=True)
class WorkloadSpec:
    distribution: str  # "uniform_distinct" or "zipf"
    universe: int
    total_ops: int
    batch_size: int
    alpha: float = 0.0

    def __post_init__(self):
        if self.distribution not in ("uniform_distinct", "zipf"):
            raise ValueError(f"unknown distribution {self.distribution!r}")
        if self.distribution == "zipf" and self.alpha <= 0:
            raise ValueError("zipf alpha must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.universe < 1:
            raise ValueError("universe must be >= 1")


class ZipfSampler:
    """Rejection-inversion sampler for P(r) ~ r^-alpha over 1..n."""

    def __init__(self, n: int, alpha: float, rng: np.random.Generator):
        self.n = n
        self.alpha = alpha
        self.rng = rng
        self._h_x1 = self._h_integral(1.5) - 1.0
        self._h_n = self._h_integral(n + 0.5)
        self._s = 2.0 - self._h_integral_inv(self._h_integral(2.5) - self._h(2.0))

    def _h(self, x):
        return np.power(x, -self.alpha)

    def _h_integral(self, x):
        if self.alpha == 1.0:
            return np.log(x)
        return (np.power(x, 1.0 - self.alpha) - 1.0) / (1.0 - self.alpha)

    def _h_integral_inv(self, u):
        if self.alpha == 1.0:
            return np.exp(u)
        return np.power(1.0 + u * (1.0 - self.alpha), 1.0 / (1.0 - self.alpha))

    def sample(self, count: int) -> np.ndarray:
        out = np.empty(count, dtype=np.int64)
        filled = 0
        while filled < count:
            want = count - filled
            u = self._h_n + self.rng.random(want) * (self._h_x1 - self._h_n)
            x = self._h_integral_inv(u)
            k = np.clip(np.rint(x), 1, self.n)
            accept = (k - x <= self._s) | (
                u >= self._h_integral(k + 0.5) - self._h(k)
            )
            good = k[accept].astype(np.int64)
            take = min(len(good), want)
            out[filled : filled + take] = good[:take]
            filled += take
        return out


def _seed_mix(seed: int) -> int:
    return fmix64((seed & 0xFFFFFFFFFFFFFFFF) ^ _SEED_SALT)


def uniform_distinct_keys(count: int, seed: int, stream_offset: int = 0) -> np.ndarray:
    """Distinct pseudorandom keys; streams with different seeds use
    disjoint counter ranges only within the same seed+offset lane."""
    base = _seed_mix(seed) + stream_offset
    return mix_to_keys(np.arange(base, base + count, dtype=np.uint64))


def zipf_ranks(count: int, universe: int, alpha: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.PCG64(seed))
    return ZipfSampler(universe, alpha, rng).sample(count)


def rank_to_key(ranks: np.ndarray, seed: int) -> np.ndarray:
    """Fixed bijective rank -> key mapping (per seed lane)."""
    base = np.uint64(_seed_mix(seed ^ 0xD6E8FEB8_6659FD93))
    return mix_to_keys(ranks.astype(np.uint64) + base)


def zipf_keys(count: int, universe: int, alpha: float, seed: int) -> np.ndarray:
    return rank_to_key(zipf_ranks(count, universe, alpha, seed), seed)


def gen_keys(spec: WorkloadSpec, seed: int) -> Iterator[np.ndarray]:
    """Yield the spec's key stream in batches of spec.batch_size."""
    produced = 0
    if spec.distribution == "uniform_distinct":
        while produced < spec.total_ops:
            n = min(spec.batch_size, spec.total_ops - produced)
            yield uniform_distinct_keys(n, seed, stream_offset=produced)
            produced += n
    else:
        rng = np.random.default_rng(np.random.PCG64(seed))
        sampler = ZipfSampler(spec.universe, spec.alpha, rng)
        while produced < spec.total_ops:
            n = min(spec.batch_size, spec.total_ops - produced)
            yield rank_to_key(sampler.sample(n), seed)
            produced += n
