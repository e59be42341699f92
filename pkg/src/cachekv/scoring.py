"""Score policies driving eviction order.

Scores are unsigned 64-bit values; higher scores are retained longer and
the eviction path always targets a bucket's minimum. Five policies share
one interface:

  kLru        recency: score = logical clock at the scoring event
  kLfu        frequency: 1 on insert, +1 (saturating) on hit
  kEpochLru   (epoch << 32) | low 32 bits of the clock
  kEpochLfu   (epoch << 32) | saturating 32-bit hit count
  kCustomized caller supplies scores verbatim

The logical clock is a per-table monotone counter advanced once per
scored event, not wall time, so runs replay deterministically.
"""

from __future__ import annotations

import enum

import numpy as np

MAX_SCORE = 0xFFFFFFFFFFFFFFFF
_LOW32 = 0xFFFFFFFF


class PolicyId(enum.Enum):
    kLru = "kLru"
    kLfu = "kLfu"
    kEpochLru = "kEpochLru"
    kEpochLfu = "kEpochLfu"
    kCustomized = "kCustomized"


ALL_POLICIES = tuple(PolicyId)


class EpochState:
    """Caller-advanced epoch; may only move forward."""

    __slots__ = ("current_epoch",)

    def __init__(self, current_epoch: int = 0):
        if current_epoch < 0 or current_epoch > _LOW32:
            raise ValueError("epoch must fit in 32 bits")
        self.current_epoch = current_epoch

    def advance_to(self, epoch: int) -> None:
        if epoch < self.current_epoch:
            raise ValueError("epoch may not decrease")
        if epoch > _LOW32:
            raise ValueError("epoch must fit in 32 bits")
        self.current_epoch = epoch


def score_on_insert(
    policy: PolicyId,
    epoch_state: EpochState,
    logical_clock: int,
    custom_score: int | None = None,
) -> int:
    """Score for a key entering the table."""
    if policy is PolicyId.kCustomized:
        if custom_score is None:
            raise ValueError("kCustomized requires an explicit score")
        return custom_score & MAX_SCORE
    if policy is PolicyId.kLru:
        return logical_clock & MAX_SCORE
    if policy is PolicyId.kLfu:
        return 1
    if policy is PolicyId.kEpochLru:
        return (epoch_state.current_epoch << 32) | (logical_clock & _LOW32)
    if policy is PolicyId.kEpochLfu:
        return (epoch_state.current_epoch << 32) | 1
    raise ValueError(f"unknown policy {policy!r}")


def score_on_hit(
    policy: PolicyId,
    old_score: int,
    epoch_state: EpochState,
    logical_clock: int,
    custom_score: int | None = None,
) -> int:
    """Refreshed score for a key found already present."""
    if policy is PolicyId.kCustomized:
        return old_score if custom_score is None else (custom_score & MAX_SCORE)
    if policy is PolicyId.kLru:
        return logical_clock & MAX_SCORE
    if policy is PolicyId.kLfu:
        return old_score if old_score == MAX_SCORE else old_score + 1
    if policy is PolicyId.kEpochLru:
        return (epoch_state.current_epoch << 32) | (logical_clock & _LOW32)
    if policy is PolicyId.kEpochLfu:
        epoch = epoch_state.current_epoch
        if (old_score >> 32) == epoch:
            low = old_score & _LOW32
            if low < _LOW32:
                low += 1
            return (epoch << 32) | low
        return (epoch << 32) | 1
    raise ValueError(f"unknown policy {policy!r}")


def insert_scores(
    policy: PolicyId,
    ticks: np.ndarray,
    epoch: int,
    custom: np.ndarray | None,
) -> np.ndarray:
    """Vectorized score_on_insert for a batch; ticks are per-key clock values."""
    n = len(ticks)
    if policy is PolicyId.kCustomized:
        if custom is None:
            raise ValueError("kCustomized requires explicit scores")
        return custom.astype(np.uint64)
    if policy is PolicyId.kLru:
        return ticks.astype(np.uint64)
    if policy is PolicyId.kLfu:
        return np.ones(n, dtype=np.uint64)
    if policy is PolicyId.kEpochLru:
        return (np.uint64(epoch) << np.uint64(32)) | (
            ticks.astype(np.uint64) & np.uint64(_LOW32)
        )
    if policy is PolicyId.kEpochLfu:
        return np.full(n, (epoch << 32) | 1, dtype=np.uint64)
    raise ValueError(f"unknown policy {policy!r}")


def hit_scores(
    policy: PolicyId,
    old: np.ndarray,
    ticks: np.ndarray,
    epoch: int,
    custom: np.ndarray | None,
) -> np.ndarray:
    """Vectorized score_on_hit."""
    if policy is PolicyId.kCustomized:
        return old.astype(np.uint64) if custom is None else custom.astype(np.uint64)
    if policy is PolicyId.kLru:
        return ticks.astype(np.uint64)
    if policy is PolicyId.kLfu:
        out = old.astype(np.uint64, copy=True)
        unsat = out != np.uint64(MAX_SCORE)
        out[unsat] += np.uint64(1)
        return out
    if policy is PolicyId.kEpochLru:
        return (np.uint64(epoch) << np.uint64(32)) | (
            ticks.astype(np.uint64) & np.uint64(_LOW32)
        )
    if policy is PolicyId.kEpochLfu:
        e = np.uint64(epoch)
        old_u = old.astype(np.uint64)
        same_epoch = (old_u >> np.uint64(32)) == e
        low = old_u & np.uint64(_LOW32)
        bump = np.where(low < np.uint64(_LOW32), low + np.uint64(1), low)
        new_low = np.where(same_epoch, bump, np.uint64(1))
        return (e << np.uint64(32)) | new_low.astype(np.uint64)
    raise ValueError(f"unknown policy {policy!r}")
