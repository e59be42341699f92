"""Position-addressed tiered value storage.

Values live in two arenas: a fast arena covering the bucket prefix
[0, fast_tier_budget) and an overflow arena covering the rest. A value's
location is pure arithmetic over (bucket, slot) — no per-entry pointer is
ever stored, so the key side of the table is oblivious to tier placement.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

BUCKET_SLOTS = 128

# Arena allocation granularity in elements; slices never span tiers.
SLICE_ELEMENTS = 256 * 1024

Allocator = Callable[[int, str], np.ndarray]


class Tier(enum.IntEnum):
    Fast = 0
    Overflow = 1


@dataclass(frozen=True)
class ValueHandle:
    tier: Tier
    offset: int  # element index into the tier arena


def _default_allocator(n_elements: int, tier: str) -> np.ndarray:
    return np.zeros(n_elements, dtype=np.float32)


class TieredValueStore:
    def __init__(
        self,
        bucket_count: int,
        value_dim: int,
        fast_tier_budget: int,
        allocator: Optional[Allocator] = None,
    ):
        if not (0 <= fast_tier_budget <= bucket_count):
            raise ValueError("fast_tier_budget out of range")
        self.bucket_count = bucket_count
        self.value_dim = value_dim
        self.fast_tier_budget = fast_tier_budget
        self._alloc = allocator or _default_allocator
        self.allocated_elements = 0

        fast_elems = fast_tier_budget * BUCKET_SLOTS * value_dim
        over_elems = (bucket_count - fast_tier_budget) * BUCKET_SLOTS * value_dim
        self._fast = self._allocate_arena(fast_elems, "fast")
        self._overflow = self._allocate_arena(over_elems, "overflow")
        # 2-D row views: one row per slot, stride = value_dim.
        self._fast_rows = self._fast[: fast_elems].reshape(-1, value_dim)
        self._over_rows = self._overflow[: over_elems].reshape(-1, value_dim)
        self._overflow_base_row = fast_tier_budget * BUCKET_SLOTS

    def _allocate_arena(self, n_elements: int, tier: str) -> np.ndarray:
        if n_elements == 0:
            self._record(0)
            return np.zeros(0, dtype=np.float32)
        slices = []
        remaining = n_elements
        while remaining > 0:
            n = min(SLICE_ELEMENTS, remaining)
            buf = self._alloc(n, tier)
            if buf.dtype != np.float32 or buf.size != n:
                raise ValueError("allocator must return float32 of the requested size")
            slices.append(buf)
            remaining -= n
        self._record(n_elements)
        return slices[0] if len(slices) == 1 else np.concatenate(slices)

    def _record(self, n: int) -> None:
        self.allocated_elements += n

    def value_address(self, bucket_index: int, slot_index: int) -> ValueHandle:
        """(bucket, slot) -> (tier, element offset); no table state consulted."""
        if not (0 <= bucket_index < self.bucket_count):
            raise ValueError("bucket index out of range")
        if not (0 <= slot_index < BUCKET_SLOTS):
            raise ValueError("slot index out of range")
        global_off = (bucket_index * BUCKET_SLOTS + slot_index) * self.value_dim
        fast_span = self.fast_tier_budget * BUCKET_SLOTS * self.value_dim
        if bucket_index < self.fast_tier_budget:
            return ValueHandle(Tier.Fast, global_off)
        return ValueHandle(Tier.Overflow, global_off - fast_span)

    def read_value(self, handle: ValueHandle, out_buffer: np.ndarray) -> None:
        if out_buffer.shape != (self.value_dim,):
            raise ValueError("buffer length must equal value_dim")
        rows = self._fast_rows if handle.tier is Tier.Fast else self._over_rows
        np.copyto(out_buffer, rows[handle.offset // self.value_dim])

    def write_value(self, handle: ValueHandle, in_buffer: np.ndarray) -> None:
        if in_buffer.shape != (self.value_dim,):
            raise ValueError("buffer length must equal value_dim")
        rows = self._fast_rows if handle.tier is Tier.Fast else self._over_rows
        rows[handle.offset // self.value_dim] = in_buffer

    # Bulk accessors used by the batched table engine. Rows are global slot
    # indices (bucket * 128 + slot); the tier split is resolved here so the
    # caller never tracks placement.

    def tier_of_rows(self, rows: np.ndarray) -> np.ndarray:
        return (rows >= self._overflow_base_row).astype(np.uint8)

    def gather_rows(self, rows: np.ndarray) -> np.ndarray:
        out = np.empty((len(rows), self.value_dim), dtype=np.float32)
        over = rows >= self._overflow_base_row
        fast = ~over
        if fast.any():
            out[fast] = self._fast_rows[rows[fast]]
        if over.any():
            out[over] = self._over_rows[rows[over] - self._overflow_base_row]
        return out

    def scatter_rows(self, rows: np.ndarray, values: np.ndarray) -> None:
        over = rows >= self._overflow_base_row
        fast = ~over
        if fast.any():
            self._fast_rows[rows[fast]] = values[fast]
        if over.any():
            self._over_rows[rows[over] - self._overflow_base_row] = values[over]

    def copy_counts(self, rows: np.ndarray) -> tuple[int, int]:
        """(#fast, #overflow) copies a bulk access over these rows performs."""
        over = int((rows >= self._overflow_base_row).sum())
        return len(rows) - over, over
