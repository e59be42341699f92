"""Cache-semantic bucketed hash table.

Each key hashes to one 128-slot bucket (two in dual mode); the bucket is
the key's entire candidate space. A full bucket resolves an incoming
upsert in place: the minimum-score occupant is displaced via a
compare-exchange on the key field, or the newcomer is refused by
admission control. There is no rehash, no resize, and no capacity
failure at any load factor.

Per-bucket digests (one byte per slot, stored contiguously) let a probe
rule out a whole bucket from a single digest-line read; only
digest-matching slots are compared by key. Probes and mutations feed
TxnCounters so the structural cost model stays assertable.

Batched operations run through a vectorized engine that serializes
same-bucket operations in ascending batch order (round-based leader
selection). With config.workers > 1, inserter and updater batches fan
out across threads inside one role acquisition, partitioned by key, and
take a scalar path with striped slot locking: an operation that loses a
compare-exchange race retries once under its bucket's stripe lock, so
per-operation retries stay below the number of contending workers.
"""

from __future__ import annotations

import enum
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .gate import Role, RoleGate
from .hashing import (
    EMPTY_KEY,
    LOCKED_KEY,
    buckets_of_hashes,
    digest_of_hash,
    digests_of_hashes,
    hash_key,
    hash_keys,
    second_hash,
    second_hash_array,
)
from .metrics import EventLog, EvictionEvent, RejectionEvent, TxnCounters
from .scoring import (
    EpochState,
    PolicyId,
    hit_scores,
    insert_scores,
    score_on_hit,
    score_on_insert,
)
from .store import BUCKET_SLOTS, Allocator, TieredValueStore, ValueHandle

_EMPTY = np.uint64(EMPTY_KEY)
_LOCKED = np.uint64(LOCKED_KEY)
_STRIPES = 256
_PARTITION_SALT = np.uint64(0xA0761D6478BD642F)


class Mode(enum.Enum):
    single = "single"
    dual = "dual"


class Outcome(enum.IntEnum):
    Inserted = 0
    Updated = 1
    Rejected = 2
    Evicted = 3
    Found = 4
    NotFound = 5
    Erased = 6


@dataclass(frozen=True)
class LookupResult:
    found: bool
    bucket_index: int = -1
    slot_index: int = -1
    value_handle: Optional[ValueHandle] = None


@dataclass(frozen=True)
class UpsertResult:
    kind: Outcome
    evicted_key: Optional[int] = None
    evicted_score: Optional[int] = None
    evicted_value: Optional[np.ndarray] = None


@dataclass
class TableConfig:
    capacity: int
    value_dim: int
    mode: Mode = Mode.single
    score_policy: PolicyId = PolicyId.kLru
    fast_tier_budget: Optional[int] = None  # buckets backed by the fast arena; None = all
    bucket_slots: int = BUCKET_SLOTS
    digest_filter: bool = True
    admit_ties_unified: bool = False  # dual mode: admit score == bucket min
    record_events: bool = False
    workers: int = 1
    allocator: Optional[Allocator] = None

    def __post_init__(self):
        if isinstance(self.mode, str):
            self.mode = Mode(self.mode)
        if isinstance(self.score_policy, str):
            self.score_policy = PolicyId(self.score_policy)
        if self.bucket_slots != BUCKET_SLOTS:
            raise ValueError(f"bucket_slots is fixed at {BUCKET_SLOTS}")
        if self.capacity <= 0 or self.capacity % BUCKET_SLOTS != 0:
            raise ValueError("capacity must be a positive multiple of 128")
        bc = self.capacity // BUCKET_SLOTS
        if bc & (bc - 1) != 0:
            raise ValueError("bucket count must be a power of two")
        if self.value_dim < 1:
            raise ValueError("value_dim must be >= 1")
        if self.fast_tier_budget is None:
            self.fast_tier_budget = bc
        if not (0 <= self.fast_tier_budget <= bc):
            raise ValueError("fast_tier_budget out of range")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def bucket_count(self) -> int:
        return self.capacity // BUCKET_SLOTS


class ConsistencyError(RuntimeError):
    pass


class CacheTable:
    def __init__(self, config: TableConfig, gate_event_hook=None):
        self.config = config
        bc = config.bucket_count
        self._bucket_mask = bc - 1
        self._keys = np.full((bc, BUCKET_SLOTS), _EMPTY, dtype=np.uint64)
        self._digests = np.zeros((bc, BUCKET_SLOTS), dtype=np.uint8)
        self._scores = np.zeros((bc, BUCKET_SLOTS), dtype=np.uint64)
        self._occupancy = np.zeros(bc, dtype=np.int64)
        self._size = 0
        self._clock = 0
        self.epoch = EpochState(0)
        self.gate = RoleGate(event_hook=gate_event_hook)
        self.store = TieredValueStore(
            bc, config.value_dim, config.fast_tier_budget, config.allocator
        )
        self.counters = TxnCounters()
        self.events = EventLog() if config.record_events else None
        self.first_eviction_lambda: Optional[float] = None
        self._merge_lock = threading.Lock()
        self._meta_lock = threading.Lock()
        self._stripe_locks = [threading.Lock() for _ in range(_STRIPES)]
        self._order_buf = np.empty(bc, dtype=np.int64)

    # ----- input coercion ---------------------------------------------------

    def _coerce_keys(self, keys) -> np.ndarray:
        k = np.ascontiguousarray(keys, dtype=np.uint64)
        if k.ndim != 1:
            raise ValueError("keys must be one-dimensional")
        if len(k) and (k >= _LOCKED).any():
            raise ValueError("keys must not equal a reserved sentinel value")
        return k

    def _coerce_values(self, values, n: int) -> np.ndarray:
        v = np.ascontiguousarray(values, dtype=np.float32)
        if v.shape != (n, self.config.value_dim):
            raise ValueError("values must have shape (len(keys), value_dim)")
        return v

    def _coerce_scores(self, scores, n: int) -> Optional[np.ndarray]:
        if scores is None:
            if self.config.score_policy is PolicyId.kCustomized:
                raise ValueError("kCustomized requires explicit scores")
            return None
        if self.config.score_policy is not PolicyId.kCustomized:
            raise ValueError("explicit scores require the kCustomized policy")
        s = np.ascontiguousarray(scores, dtype=np.uint64)
        if s.shape != (n,):
            raise ValueError("scores must have shape (len(keys),)")
        return s

    # ----- clock / bookkeeping ------------------------------------------------

    def _take_ticks(self, n: int) -> np.ndarray:
        with self._meta_lock:
            base = self._clock
            self._clock += n
        return np.arange(base + 1, base + n + 1, dtype=np.uint64)

    def size(self) -> int:
        with self.gate.acquire(Role.Reader):
            return self._size

    def load_factor(self) -> float:
        with self.gate.acquire(Role.Reader):
            return self._size / self.config.capacity

    def set_epoch(self, epoch: int) -> None:
        self.epoch.advance_to(epoch)

    def _merge_counters(self, ctr: TxnCounters) -> None:
        with self._merge_lock:
            self.counters.merge(ctr)

    def _record_first_eviction(self, size_at_decision: int) -> None:
        if self.first_eviction_lambda is None:
            self.first_eviction_lambda = size_at_decision / self.config.capacity

    def _count_value_rows(self, rows: np.ndarray, ctr: TxnCounters) -> None:
        fast, over = self.store.copy_counts(rows)
        ctr.value_copies_fast += fast
        ctr.value_copies_overflow += over

    # ----- vectorized probe -----------------------------------------------------

    def _probe_rows(
        self,
        bids: np.ndarray,
        qkeys: np.ndarray,
        qdigs: np.ndarray,
        ctr: TxnCounters,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Probe one bucket per query; returns (found, slot) arrays.

        Counts one digest-line load per query and one key comparison per
        digest-matching occupied slot, stopping at the matching slot.
        """
        m = len(bids)
        ctr.digest_line_loads += m
        found = np.zeros(m, dtype=bool)
        slots = np.full(m, -1, dtype=np.int64)
        if m == 0:
            return found, slots
        if self.config.digest_filter:
            cand = self._digests[bids] == qdigs[:, None]
            cr, cs = np.nonzero(cand)
        else:
            cr = np.repeat(np.arange(m, dtype=np.int64), BUCKET_SLOTS)
            cs = np.tile(np.arange(BUCKET_SLOTS, dtype=np.int64), m)
        if len(cr) == 0:
            return found, slots
        kc = self._keys[bids[cr], cs]
        occ = (kc != _EMPTY).astype(np.int64)
        eq = kc == qkeys[cr]
        totals = np.bincount(cr, weights=occ, minlength=m).astype(np.int64)
        hit_idx = np.flatnonzero(eq)
        if len(hit_idx):
            rows_hit = cr[hit_idx]
            uniq_rows, first_pos = np.unique(rows_hit, return_index=True)
            g = hit_idx[first_pos]
            found[uniq_rows] = True
            slots[uniq_rows] = cs[g]
            # comparisons stop at the matching slot
            cum = np.cumsum(occ)
            row_first = np.zeros(m, dtype=np.int64)
            rows_present, first_cand = np.unique(cr, return_index=True)
            row_first[rows_present] = first_cand
            prefix = cum - occ
            counted_hit = cum[g] - prefix[row_first[uniq_rows]]
            compares = int(totals.sum() - totals[uniq_rows].sum() + counted_hit.sum())
        else:
            compares = int(totals.sum())
        ctr.full_key_compares += compares
        return found, slots

    def _hash_batch(self, keys: np.ndarray):
        h1 = hash_keys(keys)
        b1 = buckets_of_hashes(h1, self._bucket_mask)
        d = digests_of_hashes(h1)
        if self.config.mode is Mode.dual:
            b2 = buckets_of_hashes(second_hash_array(h1), self._bucket_mask)
        else:
            b2 = None
        return b1, b2, d

    def _vec_lookup(
        self, keys: np.ndarray, ctr: TxnCounters
    ) -> tuple[np.ndarray, np.ndarray]:
        """Find each key; returns (found, global_row) with row = bucket*128 + slot."""
        b1, b2, d = self._hash_batch(keys)
        found, slots = self._probe_rows(b1, keys, d, ctr)
        rows = b1 * BUCKET_SLOTS + slots
        if b2 is not None:
            miss = ~found
            if miss.any():
                f2, s2 = self._probe_rows(b2[miss], keys[miss], d[miss], ctr)
                midx = np.flatnonzero(miss)
                hit2 = midx[f2]
                found[hit2] = True
                rows[hit2] = b2[hit2] * BUCKET_SLOTS + s2[f2]
        rows[~found] = -1
        return found, rows

    # ----- reader operations ------------------------------------------------------

    def find(self, keys, out: Optional[np.ndarray] = None):
        """Batched lookup copying values; returns (found, values).

        Never mutates table state; misses leave the output row untouched.
        """
        k = self._coerce_keys(keys)
        n = len(k)
        if out is None:
            out = np.zeros((n, self.config.value_dim), dtype=np.float32)
        elif out.shape != (n, self.config.value_dim) or out.dtype != np.float32:
            raise ValueError("out must be float32 with shape (len(keys), value_dim)")
        ctr = TxnCounters()
        with self.gate.acquire(Role.Reader):
            found, rows = self._reader_lookup(k, ctr)
            hit_rows = rows[found]
            if len(hit_rows):
                out[found] = self.store.gather_rows(hit_rows)
                self._count_value_rows(hit_rows, ctr)
        self._merge_counters(ctr)
        return found, out

    def find_ptr(self, keys):
        """Batched lookup returning (found, tier, offset); no value copies."""
        k = self._coerce_keys(keys)
        ctr = TxnCounters()
        with self.gate.acquire(Role.Reader):
            found, rows = self._reader_lookup(k, ctr)
        self._merge_counters(ctr)
        tier = np.zeros(len(k), dtype=np.uint8)
        offset = np.full(len(k), -1, dtype=np.int64)
        if found.any():
            hit_rows = rows[found]
            tier[found] = self.store.tier_of_rows(hit_rows)
            base = self.config.fast_tier_budget * BUCKET_SLOTS
            elem = hit_rows * self.config.value_dim
            offset[found] = np.where(
                hit_rows < base, elem, elem - base * self.config.value_dim
            )
        return found, tier, offset

    def contains(self, keys) -> np.ndarray:
        """Presence test along the find probe path; values never touched."""
        k = self._coerce_keys(keys)
        ctr = TxnCounters()
        with self.gate.acquire(Role.Reader):
            found, _ = self._reader_lookup(k, ctr)
        self._merge_counters(ctr)
        return found

    def _reader_lookup(self, k: np.ndarray, ctr: TxnCounters):
        workers = self.config.workers
        n = len(k)
        if workers == 1 or n < 4 * workers:
            return self._vec_lookup(k, ctr)
        bounds = np.linspace(0, n, workers + 1, dtype=np.int64)
        ctrs = [TxnCounters() for _ in range(workers)]
        results: list = [None] * workers

        def run(w: int):
            lo, hi = int(bounds[w]), int(bounds[w + 1])
            results[w] = self._vec_lookup(k[lo:hi], ctrs[w])

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(workers)))
        for c in ctrs:
            ctr.merge(c)
        found = np.concatenate([r[0] for r in results])
        rows = np.concatenate([r[1] for r in results])
        return found, rows

    def export_batch_if(
        self,
        predicate: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]],
        cursor: Optional[int],
        max_count: int,
    ):
        """Stream entries matching predicate(keys, scores) in slot order.

        Returns (keys, values, scores, next_cursor); next_cursor is None
        once the scan is exhausted. Stable across calls as long as no
        inserter runs in between.
        """
        if cursor is None:
            cursor = 0
        if not (0 <= cursor < self.config.capacity):
            raise ValueError("cursor out of range")
        if max_count < 1:
            raise ValueError("max_count must be >= 1")
        ctr = TxnCounters()
        out_k: list[np.ndarray] = []
        out_v: list[np.ndarray] = []
        out_s: list[np.ndarray] = []
        taken = 0
        next_cursor = None
        with self.gate.acquire(Role.Reader):
            flat_k = self._keys.reshape(-1)
            flat_s = self._scores.reshape(-1)
            pos = cursor
            chunk = 64 * BUCKET_SLOTS
            while pos < self.config.capacity:
                hi = min(pos + chunk, self.config.capacity)
                kc = flat_k[pos:hi]
                sc = flat_s[pos:hi]
                mask = kc < _LOCKED
                if predicate is not None:
                    mask = mask & predicate(kc, sc)
                idx = np.flatnonzero(mask)
                if len(idx):
                    room = max_count - taken
                    if len(idx) > room:
                        idx = idx[:room]
                    rows = pos + idx
                    out_k.append(kc[idx].copy())
                    out_s.append(sc[idx].copy())
                    out_v.append(self.store.gather_rows(rows))
                    self._count_value_rows(rows, ctr)
                    taken += len(idx)
                    if taken >= max_count:
                        nxt = int(rows[-1]) + 1
                        next_cursor = nxt if nxt < self.config.capacity else None
                        break
                pos = hi
        self._merge_counters(ctr)
        keys = np.concatenate(out_k) if out_k else np.zeros(0, dtype=np.uint64)
        scores = np.concatenate(out_s) if out_s else np.zeros(0, dtype=np.uint64)
        values = (
            np.concatenate(out_v)
            if out_v
            else np.zeros((0, self.config.value_dim), dtype=np.float32)
        )
        return keys, values, scores, next_cursor

    # ----- updater operations -------------------------------------------------------

    def assign(self, keys, values) -> np.ndarray:
        """Update values of existing keys in place; never inserts."""
        k = self._coerce_keys(keys)
        v = self._coerce_values(values, len(k))
        return self._assign_impl(k, values=v, scores=None, refresh_scores=False)

    def assign_scores(self, keys, scores=None) -> np.ndarray:
        """Update scores of existing keys: explicit values, or a policy
        refresh when scores is None."""
        k = self._coerce_keys(keys)
        s = self._coerce_scores(scores, len(k))
        return self._assign_impl(k, values=None, scores=s, refresh_scores=scores is None)

    def _assign_impl(self, k, values, scores, refresh_scores) -> np.ndarray:
        ctr = TxnCounters()
        n = len(k)
        outcomes = np.full(n, Outcome.NotFound, dtype=np.uint8)
        with self.gate.acquire(Role.Updater):
            if self.config.workers > 1:
                self._threaded_assign(k, values, scores, refresh_scores, outcomes, ctr)
            else:
                self._vec_assign(k, values, scores, refresh_scores, outcomes, ctr)
        self._merge_counters(ctr)
        return outcomes

    def _vec_assign(self, k, values, scores, refresh_scores, outcomes, ctr):
        n = len(k)
        found, rows = self._vec_lookup(k, ctr)
        if not found.any():
            return
        outcomes[found] = Outcome.Updated
        fidx = np.flatnonzero(found)
        frows = rows[fidx]
        # serial semantics: the last batch entry for a key wins
        last_rev = np.unique(frows[::-1], return_index=True)[1]
        keep = fidx[len(fidx) - 1 - last_rev]
        urows = rows[keep]
        if values is not None:
            self.store.scatter_rows(urows, values[keep])
            self._count_value_rows(frows, ctr)
        if scores is not None:
            self._write_scores_rows(urows, scores[keep])
        elif refresh_scores:
            ticks = self._take_ticks(len(fidx))
            tick_of = np.zeros(n, dtype=np.uint64)
            tick_of[fidx] = ticks
            b = urows // BUCKET_SLOTS
            s_ix = urows % BUCKET_SLOTS
            old = self._scores[b, s_ix]
            policy = self.config.score_policy
            if policy in (PolicyId.kLfu, PolicyId.kEpochLfu):
                # every duplicate occurrence is its own scored hit
                row_sorted = np.sort(frows)
                dup = np.searchsorted(row_sorted, urows, side="right") - np.searchsorted(
                    row_sorted, urows, side="left"
                )
                new = old
                for _ in range(int(dup.max())):
                    alive = dup > 0
                    new = np.where(
                        alive,
                        hit_scores(policy, new, tick_of[keep], self.epoch.current_epoch, None),
                        new,
                    ).astype(np.uint64)
                    dup = dup - 1
            else:
                new = hit_scores(policy, old, tick_of[keep], self.epoch.current_epoch, None)
            self._scores[b, s_ix] = new
        return

    def _write_scores_rows(self, rows, svals):
        b = rows // BUCKET_SLOTS
        s_ix = rows % BUCKET_SLOTS
        self._scores[b, s_ix] = svals

    # ----- inserter operations ----------------------------------------------------------

    def insert_or_assign(self, keys, values, scores=None) -> np.ndarray:
        """Upsert a batch; full buckets resolve in place by eviction or
        admission rejection, never by a capacity error."""
        k = self._coerce_keys(keys)
        v = self._coerce_values(values, len(k))
        s = self._coerce_scores(scores, len(k))
        with self.gate.acquire(Role.Inserter):
            outcomes, _ = self._mutate(k, v, s, op="upsert", collect_evicted=False)
        return outcomes

    def insert_and_evict(self, keys, values, scores=None):
        """Upsert a batch and return displaced entries:
        (outcomes, evicted_keys, evicted_values, evicted_scores)."""
        k = self._coerce_keys(keys)
        v = self._coerce_values(values, len(k))
        s = self._coerce_scores(scores, len(k))
        with self.gate.acquire(Role.Inserter):
            outcomes, ev = self._mutate(k, v, s, op="upsert", collect_evicted=True)
        return outcomes, ev[0], ev[1], ev[2]

    def find_or_insert(self, keys, values_inout, scores=None) -> np.ndarray:
        """Per key: copy the stored value out and refresh its score when
        present; otherwise upsert the caller's value."""
        k = self._coerce_keys(keys)
        v = np.asarray(values_inout)
        if (
            v.dtype != np.float32
            or v.shape != (len(k), self.config.value_dim)
            or not v.flags.c_contiguous
        ):
            raise ValueError(
                "values_inout must be a C-contiguous float32 array of shape (n, value_dim)"
            )
        s = self._coerce_scores(scores, len(k))
        with self.gate.acquire(Role.Inserter):
            outcomes, _ = self._mutate(k, v, s, op="find_or_insert", collect_evicted=False)
        return outcomes

    def erase(self, keys) -> np.ndarray:
        """Remove keys; freed slots keep their stale digest byte."""
        k = self._coerce_keys(keys)
        with self.gate.acquire(Role.Inserter):
            outcomes, _ = self._mutate(k, None, None, op="erase", collect_evicted=False)
        return outcomes

    # ----- scalar single-key API --------------------------------------------------------

    def lookup(self, key: int) -> LookupResult:
        """Single-key find returning slot coordinates and a value handle."""
        ctr = TxnCounters()
        with self.gate.acquire(Role.Reader):
            res = self._scalar_lookup(int(key), ctr)
        self._merge_counters(ctr)
        return res

    def find_in_bucket(self, bucket_index: int, key: int) -> LookupResult:
        """Digest-accelerated probe of one bucket; a miss is definitive
        for this bucket."""
        ctr = TxnCounters()
        with self.gate.acquire(Role.Reader):
            h = hash_key(int(key))
            slot = self._scalar_probe(bucket_index, int(key), digest_of_hash(h), ctr)
        self._merge_counters(ctr)
        if slot < 0:
            return LookupResult(False)
        return LookupResult(
            True, bucket_index, slot, self.store.value_address(bucket_index, slot)
        )

    def upsert_single(self, key: int, value, score: Optional[int] = None) -> UpsertResult:
        """One-key single-bucket upsert (update / insert / reject / evict)."""
        key = int(key)
        if key >= LOCKED_KEY:
            raise ValueError("keys must not equal a reserved sentinel value")
        v = np.ascontiguousarray(value, dtype=np.float32).reshape(-1)
        if v.shape != (self.config.value_dim,):
            raise ValueError("value must have value_dim elements")
        ctr = TxnCounters()
        with self.gate.acquire(Role.Inserter):
            b = hash_key(key) & self._bucket_mask
            res = self._scalar_upsert_bucket(
                b, key, v, score, ctr, locked=False, phase="single", read_out=None
            )
        self._merge_counters(ctr)
        return res

    def upsert_dual(self, key: int, value, score: Optional[int] = None) -> UpsertResult:
        """One-key dual-bucket upsert: fill the less-occupied candidate
        while space remains, then evict in the bucket with the lower
        minimum score (ties rejected unless unified)."""
        if self.config.mode is not Mode.dual:
            raise ValueError("upsert_dual requires dual mode")
        key = int(key)
        if key >= LOCKED_KEY:
            raise ValueError("keys must not equal a reserved sentinel value")
        v = np.ascontiguousarray(value, dtype=np.float32).reshape(-1)
        if v.shape != (self.config.value_dim,):
            raise ValueError("value must have value_dim elements")
        ctr = TxnCounters()
        with self.gate.acquire(Role.Inserter):
            res = self._scalar_upsert_dual(key, v, score, ctr, locked=False, read_out=None)
        self._merge_counters(ctr)
        return res

    # ----- scalar core -------------------------------------------------------------------

    def _scalar_lookup(self, key: int, ctr: TxnCounters) -> LookupResult:
        h = hash_key(key)
        d = digest_of_hash(h)
        b = h & self._bucket_mask
        slot = self._scalar_probe(b, key, d, ctr)
        if slot < 0 and self.config.mode is Mode.dual:
            b = second_hash(h) & self._bucket_mask
            slot = self._scalar_probe(b, key, d, ctr)
        if slot < 0:
            return LookupResult(False)
        return LookupResult(True, b, slot, self.store.value_address(b, slot))

    def _scalar_probe(self, b: int, key: int, digest: int, ctr: TxnCounters) -> int:
        ctr.digest_line_loads += 1
        dline = self._digests[b]
        krow = self._keys[b]
        use_digest = self.config.digest_filter
        for s in range(BUCKET_SLOTS):
            if use_digest and dline[s] != digest:
                continue
            kv = int(krow[s])
            if kv == EMPTY_KEY:
                continue
            ctr.full_key_compares += 1
            if kv == key:
                return s
        return -1

    def _cas_key(self, b: int, s: int, expected: int, new: int) -> bool:
        with self._stripe_locks[b & (_STRIPES - 1)]:
            if int(self._keys[b, s]) == expected:
                self._keys[b, s] = np.uint64(new)
                return True
            return False

    def _bump_occupancy(self, b: int, delta: int) -> None:
        with self._meta_lock:
            self._occupancy[b] += delta
            self._size += delta

    def _score_for_insert(self, score: Optional[int], tick: Optional[int]) -> int:
        policy = self.config.score_policy
        if policy is PolicyId.kCustomized:
            if score is None:
                raise ValueError("kCustomized requires an explicit score")
            return int(score)
        if score is not None:
            raise ValueError("explicit scores require the kCustomized policy")
        if tick is None:
            tick = int(self._take_ticks(1)[0])
        return score_on_insert(policy, self.epoch, tick)

    def _write_row_value(self, b: int, s: int, value, ctr: TxnCounters) -> None:
        row = b * BUCKET_SLOTS + s
        self.store.scatter_rows(np.array([row]), value.reshape(1, -1))
        self._count_value_rows(np.array([row]), ctr)

    def _scalar_claim_free(self, b: int, ctr: TxnCounters, locked: bool) -> int:
        """Claim the lowest-index empty slot as LOCKED; -1 when none."""
        krow = self._keys[b]
        while True:
            free = np.flatnonzero(krow == _EMPTY)
            if len(free) == 0:
                return -1
            s = int(free[0])
            if not locked:
                self._keys[b, s] = _LOCKED
                self._bump_occupancy(b, 1)
                return s
            if self._cas_key(b, s, EMPTY_KEY, LOCKED_KEY):
                self._bump_occupancy(b, 1)
                return s
            ctr.slot_lock_retries += 1

    def _scalar_min_slot(self, b: int, skip_locked: bool) -> tuple[int, int]:
        scores = self._scores[b]
        if skip_locked:
            idx = np.flatnonzero(self._keys[b] != _LOCKED)
            if len(idx) == 0:
                return -1, 0
            m = int(idx[int(np.argmin(scores[idx]))])
        else:
            m = int(np.argmin(scores))
        return m, int(scores[m])

    def _scalar_upsert_bucket(
        self,
        b: int,
        key: int,
        value,
        score: Optional[int],
        ctr: TxnCounters,
        locked: bool,
        phase: str,
        read_out,
        tick: Optional[int] = None,
        find_mode: bool = False,
        capture_value: bool = False,
    ) -> UpsertResult:
        h = hash_key(key)
        d = digest_of_hash(h)
        s_in: Optional[int] = None
        while True:
            slot = self._scalar_probe(b, key, d, ctr)
            if slot >= 0:
                res = self._scalar_hit(
                    b, slot, key, value, score, ctr, locked, read_out, tick, find_mode
                )
                if res is not None:
                    return res
                continue  # lost the slot race; the key may have moved
            if s_in is None:
                s_in = self._score_for_insert(score, tick)
            free = self._scalar_claim_free(b, ctr, locked)
            if free >= 0:
                self._publish_entry(b, free, key, d, s_in, value, ctr)
                return UpsertResult(Outcome.Inserted)
            return self._scalar_evict(
                b, key, d, s_in, value, ctr, locked, phase, capture_value=capture_value
            )

    def _publish_entry(self, b, s, key, digest, score, value, ctr) -> None:
        self._digests[b, s] = np.uint8(digest)
        self._scores[b, s] = np.uint64(score)
        if value is not None:
            self._write_row_value(b, s, value, ctr)
        self._keys[b, s] = np.uint64(key)

    def _scalar_hit(
        self, b, slot, key, value, score, ctr, locked, read_out, tick, find_mode
    ) -> Optional[UpsertResult]:
        if locked and not self._cas_key(b, slot, key, LOCKED_KEY):
            ctr.slot_lock_retries += 1
            return None
        policy = self.config.score_policy
        if policy is PolicyId.kCustomized:
            new_s = int(score) if score is not None else int(self._scores[b, slot])
        else:
            t = tick if tick is not None else int(self._take_ticks(1)[0])
            new_s = score_on_hit(policy, int(self._scores[b, slot]), self.epoch, t)
        self._scores[b, slot] = np.uint64(new_s)
        row = b * BUCKET_SLOTS + slot
        if find_mode:
            read_out[:] = self.store.gather_rows(np.array([row]))[0]
            self._count_value_rows(np.array([row]), ctr)
            result = UpsertResult(Outcome.Found)
        else:
            if value is not None:
                self._write_row_value(b, slot, value, ctr)
            result = UpsertResult(Outcome.Updated)
        if locked:
            self._keys[b, slot] = np.uint64(key)
        return result

    def _scalar_evict(
        self,
        b,
        key,
        digest,
        s_in,
        value,
        ctr,
        locked,
        phase,
        pre_slot: Optional[int] = None,
        pre_min: Optional[int] = None,
        capture_value: bool = False,
    ) -> UpsertResult:
        """Full-bucket resolution: admission check, then replace the
        minimum-score slot. A lost compare-exchange rescans and retries;
        from the second attempt on the whole step runs under the bucket's
        stripe lock, so retries per operation stay bounded."""
        failures = 0
        while True:
            under_lock = locked and failures > 0
            stripe = self._stripe_locks[b & (_STRIPES - 1)] if under_lock else None
            if stripe is not None:
                stripe.acquire()
            try:
                if pre_slot is not None:
                    m, min_score = pre_slot, pre_min
                    pre_slot = None
                else:
                    m, min_score = self._scalar_min_slot(b, skip_locked=locked)
                    ctr.score_scans += 1
                if m < 0:  # every slot transiently locked; retry
                    ctr.slot_lock_retries += 1
                    failures += 1
                    continue
                if s_in < min_score:
                    if self.events is not None:
                        self.events.rejections.append(
                            RejectionEvent(b, key, s_in, min_score)
                        )
                    return UpsertResult(Outcome.Rejected)
                old = int(self._keys[b, m])
                if old == EMPTY_KEY:
                    free = self._scalar_claim_free(b, ctr, locked and not under_lock)
                    if free >= 0:
                        self._publish_entry(b, free, key, digest, s_in, value, ctr)
                        return UpsertResult(Outcome.Inserted)
                    continue
                if old == LOCKED_KEY:
                    ctr.slot_lock_retries += 1
                    failures += 1
                    continue
                if under_lock:
                    if int(self._keys[b, m]) != old:
                        ctr.slot_lock_retries += 1
                        failures += 1
                        continue
                    self._keys[b, m] = _LOCKED
                elif locked:
                    if not self._cas_key(b, m, old, LOCKED_KEY):
                        ctr.slot_lock_retries += 1
                        failures += 1
                        continue
                else:
                    self._keys[b, m] = _LOCKED
            finally:
                if stripe is not None:
                    stripe.release()
            self._record_first_eviction(self._size)
            if self.events is not None:
                self.events.evictions.append(
                    EvictionEvent(b, old, min_score, s_in, phase)
                )
            ev_val = None
            if capture_value:
                row = np.array([b * BUCKET_SLOTS + m])
                ev_val = self.store.gather_rows(row)[0].copy()
                self._count_value_rows(row, ctr)
            self._publish_entry(b, m, key, digest, s_in, value, ctr)
            return UpsertResult(
                Outcome.Evicted, evicted_key=old, evicted_score=min_score,
                evicted_value=ev_val,
            )

    def _scalar_upsert_dual(
        self, key, value, score, ctr, locked, read_out,
        tick=None, find_mode=False, capture_value=False,
    ) -> UpsertResult:
        h = hash_key(key)
        d = digest_of_hash(h)
        b1 = h & self._bucket_mask
        b2 = second_hash(h) & self._bucket_mask
        s_in: Optional[int] = None
        while True:
            slot = self._scalar_probe(b1, key, d, ctr)
            b_hit = b1
            if slot < 0:
                slot = self._scalar_probe(b2, key, d, ctr)
                b_hit = b2
            if slot >= 0:
                res = self._scalar_hit(
                    b_hit, slot, key, value, score, ctr, locked, read_out, tick, find_mode
                )
                if res is not None:
                    return res
                continue
            if s_in is None:
                s_in = self._score_for_insert(score, tick)
            occ1 = int(self._occupancy[b1])
            occ2 = int(self._occupancy[b2])
            if occ1 < BUCKET_SLOTS or occ2 < BUCKET_SLOTS:
                target = b1 if occ1 <= occ2 else b2
                free = self._scalar_claim_free(target, ctr, locked)
                if free >= 0:
                    self._publish_entry(target, free, key, d, s_in, value, ctr)
                    return UpsertResult(Outcome.Inserted)
                continue  # raced to full; reevaluate
            m1, min1 = self._scalar_min_slot(b1, skip_locked=locked)
            m2, min2 = self._scalar_min_slot(b2, skip_locked=locked)
            ctr.score_scans += 2
            if m1 < 0 or m2 < 0:
                ctr.slot_lock_retries += 1
                continue
            min_both = min(min1, min2)
            admit = s_in >= min_both if self.config.admit_ties_unified else s_in > min_both
            if not admit:
                if self.events is not None:
                    tb = b2 if min2 < min1 else b1
                    self.events.rejections.append(
                        RejectionEvent(tb, key, s_in, min_both)
                    )
                return UpsertResult(Outcome.Rejected)
            if min2 < min1:
                return self._scalar_evict(
                    b2, key, d, s_in, value, ctr, locked, "D2",
                    pre_slot=m2, pre_min=min2, capture_value=capture_value,
                )
            return self._scalar_evict(
                b1, key, d, s_in, value, ctr, locked, "D2",
                pre_slot=m1, pre_min=min1, capture_value=capture_value,
            )

    def _scalar_erase(self, key: int, ctr: TxnCounters, locked: bool) -> Outcome:
        while True:
            res = self._scalar_lookup(key, ctr)
            if not res.found:
                return Outcome.NotFound
            b, s = res.bucket_index, res.slot_index
            if not locked:
                self._keys[b, s] = _EMPTY
                self._bump_occupancy(b, -1)
                return Outcome.Erased
            if self._cas_key(b, s, key, EMPTY_KEY):
                self._bump_occupancy(b, -1)
                return Outcome.Erased
            ctr.slot_lock_retries += 1

    # ----- batched mutation engine ----------------------------------------------------------

    def _mutate(self, k, v, s_custom, op: str, collect_evicted: bool):
        ctr = TxnCounters()
        n = len(k)
        ticks = None if op == "erase" else self._take_ticks(n)
        if self.config.workers > 1:
            result = self._threaded_mutate(k, v, s_custom, op, collect_evicted, ticks, ctr)
        else:
            result = self._vec_mutate(k, v, s_custom, op, collect_evicted, ticks, ctr)
        self._merge_counters(ctr)
        return result

    def _select_leaders(self, idx: np.ndarray, b1, b2) -> np.ndarray:
        """Pending ops whose batch index is minimal on every bucket they
        touch; at most one winner per bucket, so winners apply in parallel
        while same-bucket order stays ascending."""
        if b2 is None:
            _, first_pos = np.unique(b1[idx], return_index=True)
            lead = np.zeros(len(idx), dtype=bool)
            lead[first_pos] = True
            return lead
        bb = np.concatenate([b1[idx], b2[idx]])
        vv = np.concatenate([idx, idx])
        o = np.lexsort((vv, bb))
        bs = bb[o]
        run_first = np.r_[0, np.flatnonzero(bs[1:] != bs[:-1]) + 1]
        order = self._order_buf
        order.fill(np.iinfo(np.int64).max)
        order[bs[run_first]] = vv[o][run_first]
        return (order[b1[idx]] == idx) & (order[b2[idx]] == idx)

    def _vec_mutate(self, k, v, s_custom, op, collect_evicted, ticks, ctr):
        n = len(k)
        outcomes = np.zeros(n, dtype=np.uint8)
        b1, b2, d = self._hash_batch(k)
        size_before = self._size
        ev_keys: list[np.ndarray] = []
        ev_scores: list[np.ndarray] = []
        ev_values: list[np.ndarray] = []
        ev_order: list[np.ndarray] = []
        pending = np.ones(n, dtype=bool)
        while pending.any():
            idx = np.flatnonzero(pending)
            lead = self._select_leaders(idx, b1, b2)
            L = idx[lead]
            pending[L] = False
            if op == "erase":
                self._round_erase(L, k, b1, b2, d, outcomes, ctr)
            else:
                self._round_upsert(
                    L, k, v, s_custom, ticks, b1, b2, d, outcomes, ctr,
                    op, collect_evicted, ev_keys, ev_scores, ev_values, ev_order,
                )
        if self.first_eviction_lambda is None and op != "erase":
            ev_mask = outcomes == Outcome.Evicted
            if ev_mask.any():
                first = int(np.argmax(ev_mask))
                n_before = int((outcomes[:first] == Outcome.Inserted).sum())
                self._record_first_eviction(size_before + n_before)
        if not collect_evicted:
            return outcomes, None
        if ev_keys:
            order = np.concatenate(ev_order)
            rank = np.argsort(order, kind="stable")
            ek = np.concatenate(ev_keys)[rank]
            es = np.concatenate(ev_scores)[rank]
            ev = np.concatenate(ev_values)[rank]
        else:
            ek = np.zeros(0, dtype=np.uint64)
            es = np.zeros(0, dtype=np.uint64)
            ev = np.zeros((0, self.config.value_dim), dtype=np.float32)
        return outcomes, (ek, ev, es)

    def _round_erase(self, L, k, b1, b2, d, outcomes, ctr):
        found, slots = self._probe_rows(b1[L], k[L], d[L], ctr)
        b_hit = b1[L].copy()
        if b2 is not None:
            miss = ~found
            if miss.any():
                f2, s2 = self._probe_rows(b2[L][miss], k[L][miss], d[L][miss], ctr)
                mi = np.flatnonzero(miss)
                found[mi] = f2
                slots[mi[f2]] = s2[f2]
                b_hit[mi] = b2[L][mi]
        outcomes[L] = np.where(found, Outcome.Erased, Outcome.NotFound)
        if found.any():
            hb = b_hit[found]
            hs = slots[found]
            self._keys[hb, hs] = _EMPTY
            np.subtract.at(self._occupancy, hb, 1)
            self._size -= int(found.sum())

    def _round_upsert(
        self, L, k, v, s_custom, ticks, b1, b2, d, outcomes, ctr,
        op, collect_evicted, ev_keys, ev_scores, ev_values, ev_order,
    ):
        policy = self.config.score_policy
        epoch = self.epoch.current_epoch
        kL = k[L]
        dL = d[L]
        found, slots = self._probe_rows(b1[L], kL, dL, ctr)
        b_hit = b1[L].copy()
        if b2 is not None:
            miss = ~found
            if miss.any():
                f2, s2 = self._probe_rows(b2[L][miss], kL[miss], dL[miss], ctr)
                mi = np.flatnonzero(miss)
                found[mi] = f2
                slots[mi[f2]] = s2[f2]
                b_hit[mi] = b2[L][mi]
        custom_L = s_custom[L] if s_custom is not None else None

        if found.any():
            hi = np.flatnonzero(found)
            hb = b_hit[hi]
            hs = slots[hi]
            old = self._scores[hb, hs]
            new_s = hit_scores(
                policy, old, ticks[L[hi]], epoch,
                custom_L[hi] if custom_L is not None else None,
            )
            self._scores[hb, hs] = new_s
            rows = hb * BUCKET_SLOTS + hs
            if op == "find_or_insert":
                v[L[hi]] = self.store.gather_rows(rows)
                outcomes[L[hi]] = Outcome.Found
            else:
                self.store.scatter_rows(rows, v[L[hi]])
                outcomes[L[hi]] = Outcome.Updated
            self._count_value_rows(rows, ctr)
        if found.all():
            return

        ai = np.flatnonzero(~found)
        A = L[ai]
        s_in = insert_scores(
            policy, ticks[A], epoch, custom_L[ai] if custom_L is not None else None
        )
        if b2 is None:
            tb = b1[A]
            has_free = self._occupancy[tb] < BUCKET_SLOTS
            if has_free.any():
                sel = np.flatnonzero(has_free)
                self._bulk_insert_free(A, tb[sel], sel, k, s_in, d, v, outcomes, ctr)
            fi = np.flatnonzero(~has_free)
            if len(fi):
                sc = self._scores[tb[fi]]
                m = np.argmin(sc, axis=1)
                minv = sc[np.arange(len(fi)), m]
                ctr.score_scans += len(fi)
                admit = s_in[fi] >= minv  # ties admitted on the single-bucket path
                self._finish_admission(
                    A, fi, tb[fi], m, minv, admit, s_in, k, d, v, outcomes, ctr,
                    "single", collect_evicted, ev_keys, ev_scores, ev_values, ev_order,
                )
        else:
            o1 = self._occupancy[b1[A]]
            o2 = self._occupancy[b2[A]]
            d1 = (o1 < BUCKET_SLOTS) | (o2 < BUCKET_SLOTS)
            if d1.any():
                sel = np.flatnonzero(d1)
                tb = np.where(o1[sel] <= o2[sel], b1[A[sel]], b2[A[sel]])
                self._bulk_insert_free(A, tb, sel, k, s_in, d, v, outcomes, ctr)
            fi = np.flatnonzero(~d1)
            if len(fi):
                A2b1 = b1[A[fi]]
                A2b2 = b2[A[fi]]
                sc1 = self._scores[A2b1]
                sc2 = self._scores[A2b2]
                m1 = np.argmin(sc1, axis=1)
                m2 = np.argmin(sc2, axis=1)
                ar = np.arange(len(fi))
                min1 = sc1[ar, m1]
                min2 = sc2[ar, m2]
                ctr.score_scans += 2 * len(fi)
                use2 = min2 < min1
                tb = np.where(use2, A2b2, A2b1)
                m = np.where(use2, m2, m1)
                minv = np.minimum(min1, min2)
                if self.config.admit_ties_unified:
                    admit = s_in[fi] >= minv
                else:
                    admit = s_in[fi] > minv
                self._finish_admission(
                    A, fi, tb, m, minv, admit, s_in, k, d, v, outcomes, ctr,
                    "D2", collect_evicted, ev_keys, ev_scores, ev_values, ev_order,
                )

    def _finish_admission(
        self, A, fi, tb, m, minv, admit, s_in, k, d, v, outcomes, ctr,
        phase, collect, ev_keys, ev_scores, ev_values, ev_order,
    ):
        rj = np.flatnonzero(~admit)
        if len(rj):
            outcomes[A[fi[rj]]] = Outcome.Rejected
            if self.events is not None:
                for j in rj:
                    self.events.rejections.append(
                        RejectionEvent(
                            int(tb[j]), int(k[A[fi[j]]]), int(s_in[fi[j]]), int(minv[j])
                        )
                    )
        ad = np.flatnonzero(admit)
        if len(ad) == 0:
            return
        tgt = A[fi[ad]]
        tbb = tb[ad]
        tss = m[ad]
        rows = tbb * BUCKET_SLOTS + tss
        old_keys = self._keys[tbb, tss].copy()
        if self.events is not None:
            for j in range(len(ad)):
                self.events.evictions.append(
                    EvictionEvent(
                        int(tbb[j]), int(old_keys[j]), int(minv[ad[j]]),
                        int(s_in[fi[ad[j]]]), phase,
                    )
                )
        if collect:
            ev_keys.append(old_keys)
            ev_scores.append(minv[ad].astype(np.uint64).copy())
            ev_values.append(self.store.gather_rows(rows))
            ev_order.append(tgt.copy())
            self._count_value_rows(rows, ctr)
        self._keys[tbb, tss] = k[tgt]
        self._digests[tbb, tss] = d[tgt]
        self._scores[tbb, tss] = s_in[fi[ad]]
        if v is not None:
            self.store.scatter_rows(rows, v[tgt])
            self._count_value_rows(rows, ctr)
        outcomes[tgt] = Outcome.Evicted

    def _bulk_insert_free(self, A, tb, sel, k, s_in, d, v, outcomes, ctr):
        """Insert sel-indexed absent keys at the lowest free slot of tb."""
        if len(sel) == 0:
            return
        tgt = A[sel]
        krows = self._keys[tb]
        free_slot = np.argmax(krows == _EMPTY, axis=1)
        self._keys[tb, free_slot] = k[tgt]
        self._digests[tb, free_slot] = d[tgt]
        self._scores[tb, free_slot] = s_in[sel]
        if v is not None:
            rows = tb * BUCKET_SLOTS + free_slot
            self.store.scatter_rows(rows, v[tgt])
            self._count_value_rows(rows, ctr)
        np.add.at(self._occupancy, tb, 1)
        self._size += len(sel)
        outcomes[tgt] = Outcome.Inserted

    # ----- threaded scalar engine ------------------------------------------------------------

    def _partition_by_key(self, k: np.ndarray, workers: int) -> list[np.ndarray]:
        part = (hash_keys(k ^ _PARTITION_SALT) % np.uint64(workers)).astype(np.int64)
        return [np.flatnonzero(part == w) for w in range(workers)]

    def _threaded_mutate(self, k, v, s_custom, op, collect_evicted, ticks, ctr):
        n = len(k)
        workers = self.config.workers
        outcomes = np.zeros(n, dtype=np.uint8)
        parts = self._partition_by_key(k, workers)
        ctrs = [TxnCounters() for _ in range(workers)]
        collected: list[list] = [[] for _ in range(workers)]

        def run(w: int):
            local = ctrs[w]
            for i in parts[w]:
                i = int(i)
                key = int(k[i])
                tick = int(ticks[i]) if ticks is not None else None
                score = int(s_custom[i]) if s_custom is not None else None
                if op == "erase":
                    outcomes[i] = self._scalar_erase(key, local, locked=True)
                    continue
                find_mode = op == "find_or_insert"
                read_out = v[i] if find_mode else None
                if self.config.mode is Mode.dual:
                    res = self._scalar_upsert_dual(
                        key, v[i], score, local, locked=True, read_out=read_out,
                        tick=tick, find_mode=find_mode, capture_value=collect_evicted,
                    )
                else:
                    b = hash_key(key) & self._bucket_mask
                    res = self._scalar_upsert_bucket(
                        b, key, v[i], score, local, locked=True, phase="single",
                        read_out=read_out, tick=tick, find_mode=find_mode,
                        capture_value=collect_evicted,
                    )
                outcomes[i] = res.kind
                if collect_evicted and res.kind == Outcome.Evicted:
                    collected[w].append(
                        (i, res.evicted_key, res.evicted_score, res.evicted_value)
                    )

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(workers)))
        for c in ctrs:
            ctr.merge(c)
        if not collect_evicted:
            return outcomes, None
        fused = sorted((x for part in collected for x in part), key=lambda t: t[0])
        ek = np.array([x[1] for x in fused], dtype=np.uint64)
        es = np.array([x[2] for x in fused], dtype=np.uint64)
        ev = (
            np.stack([x[3] for x in fused])
            if fused
            else np.zeros((0, self.config.value_dim), dtype=np.float32)
        )
        return outcomes, (ek, ev, es)

    def _threaded_assign(self, k, values, scores, refresh_scores, outcomes, ctr):
        workers = self.config.workers
        parts = self._partition_by_key(k, workers)
        ctrs = [TxnCounters() for _ in range(workers)]
        ticks = self._take_ticks(len(k)) if refresh_scores else None

        def run(w: int):
            local = ctrs[w]
            for i in parts[w]:
                i = int(i)
                key = int(k[i])
                while True:
                    res = self._scalar_lookup(key, local)
                    if not res.found:
                        outcomes[i] = Outcome.NotFound
                        break
                    b, s = res.bucket_index, res.slot_index
                    if not self._cas_key(b, s, key, LOCKED_KEY):
                        local.slot_lock_retries += 1
                        continue
                    if values is not None:
                        self._write_row_value(b, s, values[i], local)
                    if scores is not None:
                        self._scores[b, s] = np.uint64(int(scores[i]))
                    elif refresh_scores:
                        new_s = score_on_hit(
                            self.config.score_policy, int(self._scores[b, s]),
                            self.epoch, int(ticks[i]),
                        )
                        self._scores[b, s] = np.uint64(new_s)
                    self._keys[b, s] = np.uint64(key)
                    outcomes[i] = Outcome.Updated
                    break

        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, range(workers)))
        for c in ctrs:
            ctr.merge(c)

    # ----- debug --------------------------------------------------------------------------------

    def check_consistency(self) -> bool:
        """Full-scan validation of digests, occupancy, and the size counter."""
        with self.gate.acquire(Role.Reader):
            keys = self._keys
            user = keys < _LOCKED
            occ = user.sum(axis=1)
            if not np.array_equal(occ, self._occupancy):
                raise ConsistencyError("occupancy counters disagree with bucket contents")
            if int(occ.sum()) != self._size:
                raise ConsistencyError("size counter disagrees with occupancy")
            if user.any():
                ub, us = np.nonzero(user)
                expect = digests_of_hashes(hash_keys(keys[ub, us]))
                if not np.array_equal(expect, self._digests[ub, us]):
                    raise ConsistencyError("stored digest mismatch")
        return True

    def occupied_keys(self) -> np.ndarray:
        """All user keys currently stored (reader snapshot, slot order)."""
        with self.gate.acquire(Role.Reader):
            flat = self._keys.reshape(-1)
            return flat[flat < _LOCKED].copy()
