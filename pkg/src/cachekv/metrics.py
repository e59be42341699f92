"""Transaction accounting and cache-quality measurement.

The counters model one "memory transaction" as a read of a bucket's
contiguous 128-byte digest array. Per-batch counts are accumulated in a
worker-local TxnCounters and merged into the table total when the batch
finishes, so measurement never perturbs the measured path.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class TxnCounters:
    digest_line_loads: int = 0
    full_key_compares: int = 0
    score_scans: int = 0
    slot_lock_retries: int = 0
    value_copies_fast: int = 0
    value_copies_overflow: int = 0

    def merge(self, other: "TxnCounters") -> None:
        for f in fields(self):
            setattr(self, f.name, getattr(self, f.name) + getattr(other, f.name))

    def snapshot(self) -> "TxnCounters":
        return TxnCounters(**{f.name: getattr(self, f.name) for f in fields(self)})

    def reset(self) -> None:
        for f in fields(self):
            setattr(self, f.name, 0)

    def as_dict(self) -> dict[str, int]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @property
    def value_copies(self) -> int:
        return self.value_copies_fast + self.value_copies_overflow


@dataclass
class EvictionEvent:
    bucket_index: int
    evicted_key: int
    evicted_score: int
    incoming_score: int
    phase: str  # "single", "D1" never evicts, "D2" for dual steady state


@dataclass
class RejectionEvent:
    bucket_index: int
    key: int
    incoming_score: int
    bucket_min_score: int


@dataclass
class QualityStats:
    lookups: int = 0
    hits: int = 0
    first_eviction_lambda: float | None = None
    topn_retention: float | None = None

    @property
    def hit_rate(self) -> float:
        return self.hits / self.lookups if self.lookups else 0.0


@dataclass
class EventLog:
    """Opt-in per-table log of eviction/rejection decisions (test hook)."""

    evictions: list[EvictionEvent] = field(default_factory=list)
    rejections: list[RejectionEvent] = field(default_factory=list)

    def clear(self) -> None:
        self.evictions.clear()
        self.rejections.clear()


def topn_retention_from_arrays(table_keys, ideal_keys, ideal_scores, n: int) -> float:
    """Array form of topn_retention: ideal_keys/ideal_scores are parallel
    arrays with one row per distinct key."""
    import numpy as np

    ideal_keys = np.asarray(ideal_keys, dtype=np.uint64)
    ideal_scores = np.asarray(ideal_scores, dtype=np.uint64)
    if n > len(ideal_keys):
        raise ValueError("n exceeds the number of distinct keys offered")
    order = np.lexsort((ideal_keys, ~ideal_scores))  # score desc, key asc
    top = ideal_keys[order[:n]]
    present = np.asarray(table_keys, dtype=np.uint64)
    kept = np.isin(top, present, assume_unique=False).sum()
    return float(kept) / n


def topn_retention(table_keys, ideal_scores: dict[int, int], n: int) -> float:
    """Fraction of the ideal top-n scored keys present in the table.

    ideal_scores maps every key ever offered to the final score it would
    hold under infinite capacity. Ties order by (score desc, key asc) so
    the selection is deterministic.
    """
    if n > len(ideal_scores):
        raise ValueError("n exceeds the number of distinct keys offered")
    ranked = sorted(ideal_scores.items(), key=lambda kv: (-kv[1], kv[0]))
    top = ranked[:n]
    present = table_keys if isinstance(table_keys, set) else set(table_keys)
    kept = sum(1 for k, _ in top if k in present)
    return kept / n
