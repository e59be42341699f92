"""Experiment harness: structural and cache-quality reproductions.

Every runner returns an ExperimentReport whose rows regenerate
bit-identically from (experiment id, config, seed). Runners measure
structural quantities (digest-line loads, key comparisons, probe counts,
admission outcomes, retention) rather than wall-clock throughput; timing
is reported informationally where useful but never asserted.

With check=True each runner also asserts its qualitative claims and
raises BenchCheckError on violation; the CLI maps that to a nonzero
exit code.
"""

from __future__ import annotations

import csv
import threading
import time
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .baseline import BaselineTable
from .gate import Role
from .hashing import hash_keys
from .metrics import topn_retention_from_arrays
from .scoring import PolicyId
from .table import BUCKET_SLOTS, CacheTable, Mode, Outcome, TableConfig
from .workloads import ZipfSampler, rank_to_key, uniform_distinct_keys

DESK_CAPACITY = 2**20
DESK_DIM = 8
DESK_BATCH = 2**16

CSV_HEADER = ("experiment", "config", "param", "metric", "value", "seed")


class BenchCheckError(AssertionError):
    pass


@dataclass
class ExperimentReport:
    experiment: str
    rows: list[tuple] = field(default_factory=list)

    def add(self, config: str, param, metric: str, value, seed: int) -> None:
        self.rows.append((self.experiment, config, param, metric, float(value), seed))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(self.rows)

    def metric(self, metric: str, param=None) -> list[float]:
        return [
            r[4]
            for r in self.rows
            if r[3] == metric and (param is None or r[2] == param)
        ]


def _cfg_str(cfg: TableConfig) -> str:
    return (
        f"capacity={cfg.capacity};dim={cfg.value_dim};mode={cfg.mode.value};"
        f"policy={cfg.score_policy.value}"
    )


# ----- ingestion helpers -----------------------------------------------------------

def fill_distinct(
    table: CacheTable,
    seed: int,
    target_size: int,
    batch: int = DESK_BATCH,
    offset: int = 0,
    max_ops: Optional[int] = None,
) -> int:
    """Insert distinct uniform keys until the table holds target_size
    entries; returns the number of keys offered."""
    dim = table.config.value_dim
    offered = 0
    limit = max_ops if max_ops is not None else 40 * table.config.capacity
    vals = np.ones((batch, dim), dtype=np.float32)
    while table._size < target_size and offered < limit:
        n = min(batch, limit - offered, target_size - table._size)
        keys = uniform_distinct_keys(n, seed, stream_offset=offset + offered)
        table.insert_or_assign(keys, vals[:n])
        offered += n
    return offered


def fill_to_lambda(table: CacheTable, lam: float, seed: int, batch: int = DESK_BATCH) -> int:
    return fill_distinct(table, seed, round(lam * table.config.capacity), batch)


# ----- Monte Carlo oracles -----------------------------------------------------------

def mc_first_overflow_single(
    bucket_count: int, slots: int, seed: int, bucket_stream: Optional[np.ndarray] = None
) -> int:
    """Balls into bins: number of balls placed before one lands in a full
    bin. With a supplied bucket stream the walk is exact, not sampled."""
    counts = np.zeros(bucket_count, dtype=np.int64)
    rng = np.random.default_rng(seed)
    placed = 0
    chunk = 65536
    total = bucket_count * slots * 2
    while placed < total:
        if bucket_stream is not None:
            bb = bucket_stream[placed : placed + chunk]
            if len(bb) == 0:
                break
        else:
            bb = rng.integers(0, bucket_count, size=chunk, dtype=np.int64)
        # per-ball count of earlier same-bin balls within the chunk
        order = np.lexsort((np.arange(len(bb)), bb))
        sb = bb[order]
        run_first = np.r_[0, np.flatnonzero(sb[1:] != sb[:-1]) + 1]
        rank_sorted = np.arange(len(bb)) - np.repeat(
            run_first, np.diff(np.r_[run_first, len(bb)])
        )
        rank = np.empty(len(bb), dtype=np.int64)
        rank[order] = rank_sorted
        prior = counts[bb] + rank
        over = np.flatnonzero(prior >= slots)
        if len(over):
            return placed + int(over[0])
        np.add.at(counts, bb, 1)
        placed += len(bb)
    return placed


def mc_first_overflow_dual(
    bucket_count: int,
    slots: int,
    seed: int,
    streams: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> int:
    """Two-choice balls into bins (less-loaded placement, ties to the
    first): balls placed before both candidate bins are full."""
    counts = np.zeros(bucket_count, dtype=np.int64)
    rng = np.random.default_rng(seed)
    total = bucket_count * slots * 2
    placed = 0
    chunk = 65536
    while placed < total:
        if streams is not None:
            c1 = streams[0][placed : placed + chunk]
            c2 = streams[1][placed : placed + chunk]
            if len(c1) == 0:
                break
        else:
            c1 = rng.integers(0, bucket_count, size=chunk, dtype=np.int64)
            c2 = rng.integers(0, bucket_count, size=chunk, dtype=np.int64)
        cl = counts.tolist()
        for i, (b1, b2) in enumerate(zip(c1.tolist(), c2.tolist())):
            n1, n2 = cl[b1], cl[b2]
            if n1 >= slots and n2 >= slots:
                return placed + i
            cl[b1 if n1 <= n2 else b2] += 1
        counts = np.asarray(cl, dtype=np.int64)
        placed += len(c1)
    return placed


# ----- Exp: load factor sweep ---------------------------------------------------------

def run_lf_sweep(
    capacity: int = DESK_CAPACITY,
    dim: int = DESK_DIM,
    mode: str = "single",
    workers: int = 1,
    lf_grid: Iterable[float] = (0.25, 0.5, 0.75, 1.0),
    seed: int = 0,
    batch: int = DESK_BATCH,
    baseline_capacity: int = 2**14,
    check: bool = False,
) -> ExperimentReport:
    """Fill both systems to each target load factor, then measure the
    probing cost of present-key and absent-key lookups."""
    rep = ExperimentReport("lf-sweep")
    lf_grid = list(lf_grid)
    miss_loads: list[float] = []
    base_miss_probes: list[float] = []
    for lam in lf_grid:
        cfg = TableConfig(capacity=capacity, value_dim=dim, mode=mode, workers=workers)
        table = CacheTable(cfg)
        fill_to_lambda(table, lam, seed, batch)
        cstr = _cfg_str(cfg)
        rep.add(cstr, lam, "lambda_actual", table.load_factor(), seed)

        present = table.occupied_keys()[:batch]
        absent = uniform_distinct_keys(batch, seed, stream_offset=2**40)
        table.counters.reset()
        found, _ = table.find(present)
        hit_loads = table.counters.digest_line_loads / max(1, len(present))
        rep.add(cstr, lam, "find_hit_loads_per_op", hit_loads, seed)
        rep.add(cstr, lam, "find_hit_rate", found.mean(), seed)
        table.counters.reset()
        found_a, _ = table.find(absent)
        m_loads = table.counters.digest_line_loads / len(absent)
        rep.add(cstr, lam, "find_miss_loads_per_op", m_loads, seed)
        miss_loads.append(m_loads)
        if check and found_a.any():
            raise BenchCheckError("absent keys reported present")

        insert_keys = uniform_distinct_keys(4096, seed, stream_offset=2**41)
        outcomes = table.insert_or_assign(
            insert_keys, np.ones((4096, dim), dtype=np.float32)
        )
        for name, code in (
            ("inserted", Outcome.Inserted),
            ("updated", Outcome.Updated),
            ("evicted", Outcome.Evicted),
            ("rejected", Outcome.Rejected),
        ):
            rep.add(cstr, lam, f"insert_outcome_{name}", (outcomes == code).sum(), seed)
        if check:
            known = (
                (outcomes == Outcome.Inserted)
                | (outcomes == Outcome.Updated)
                | (outcomes == Outcome.Evicted)
                | (outcomes == Outcome.Rejected)
            )
            if not known.all():
                raise BenchCheckError("upsert produced an outcome outside the contract")

        # dictionary-semantic baseline
        base = BaselineTable(baseline_capacity, value_dim=1)
        target = round(lam * baseline_capacity)
        got = 0
        while got < target:
            n = min(4096, target - got)
            bk = uniform_distinct_keys(n, seed + 1, stream_offset=got)
            base.insert(bk)
            got += n
        bpresent = uniform_distinct_keys(max(1, min(batch, target)), seed + 1, stream_offset=0)
        babsent = uniform_distinct_keys(batch, seed + 1, stream_offset=2**40)
        _, p_hit = base.find(bpresent)
        _, p_miss = base.find(babsent)
        rep.add(cstr, lam, "baseline_hit_probes_per_op", p_hit / len(bpresent), seed)
        bm = p_miss / len(babsent)
        rep.add(cstr, lam, "baseline_miss_probes_per_op", bm, seed)
        base_miss_probes.append(bm)
        if lam >= 1.0:
            new_key = uniform_distinct_keys(1, seed + 1, stream_offset=2**41)
            ok = base.insert(new_key)
            rep.add(cstr, lam, "baseline_insert_failed", 0.0 if ok[0] else 1.0, seed)
            if check and ok[0]:
                raise BenchCheckError("baseline insert succeeded on a full table")

    if check:
        expected = 1.0 if mode == "single" else 2.0
        if any(ml != expected for ml in miss_loads):
            raise BenchCheckError(f"miss loads varied across the grid: {miss_loads}")
        if any(b - a <= 0 for a, b in zip(base_miss_probes, base_miss_probes[1:])):
            raise BenchCheckError(
                f"baseline miss probes not strictly increasing: {base_miss_probes}"
            )
    return rep


# ----- Exp: cache quality under Zipf skew ------------------------------------------------

def run_quality(
    capacity: int = 2**18,
    dim: int = DESK_DIM,
    workers: int = 1,
    alpha_grid: Iterable[float] = (0.5, 0.75, 0.99, 1.25),
    policies: Iterable[PolicyId] = tuple(PolicyId),
    seed: int = 0,
    batch: int = DESK_BATCH,
    universe_factor: int = 4,
    check: bool = False,
) -> ExperimentReport:
    """Sustained find_or_insert ingestion of 5x capacity Zipf-distributed
    operations per (alpha, policy); reports hit rates."""
    rep = ExperimentReport("quality")
    alpha_grid = list(alpha_grid)
    policies = [PolicyId(p) for p in policies]
    total_ops = 5 * capacity
    universe = universe_factor * capacity
    hit_rates: dict[tuple[str, float], float] = {}
    for policy in policies:
        for alpha in alpha_grid:
            hr, hr_steady = _quality_run(
                capacity, dim, policy, alpha, universe, total_ops, seed, batch, workers
            )
            cfg = TableConfig(capacity=capacity, value_dim=dim, score_policy=policy)
            cstr = _cfg_str(cfg)
            rep.add(cstr, alpha, "hit_rate", hr, seed)
            rep.add(cstr, alpha, "hit_rate_steady", hr_steady, seed)
            hit_rates[(policy.value, alpha)] = hr
    if check:
        for policy in policies:
            series = [hit_rates[(policy.value, a)] for a in alpha_grid]
            if any(b <= a for a, b in zip(series, series[1:])):
                raise BenchCheckError(
                    f"hit rate not increasing in alpha for {policy.value}: {series}"
                )
        for alpha in alpha_grid:
            if alpha in (0.75, 0.99) and PolicyId.kLfu in policies and PolicyId.kLru in policies:
                if hit_rates[("kLfu", alpha)] < hit_rates[("kLru", alpha)]:
                    raise BenchCheckError(f"kLfu hit rate below kLru at alpha={alpha}")
        # hot set far below capacity: nearly every lookup after warm-up hits
        _, hr_hot = _quality_run(
            capacity, dim, PolicyId.kLru, 2.0, universe, total_ops, seed, batch, workers
        )
        rep.add(
            _cfg_str(TableConfig(capacity=capacity, value_dim=dim)),
            2.0, "hit_rate_steady", hr_hot, seed,
        )
        if hr_hot < 0.99:
            raise BenchCheckError(f"steady-state hit rate {hr_hot:.4f} < 0.99 at alpha=2.0")
    return rep


def _quality_run(capacity, dim, policy, alpha, universe, total_ops, seed, batch, workers=1):
    cfg = TableConfig(capacity=capacity, value_dim=dim, score_policy=policy, workers=workers)
    table = CacheTable(cfg)
    rng = np.random.default_rng(np.random.PCG64(seed))
    sampler = ZipfSampler(universe, alpha, rng)
    buf = np.ones((batch, dim), dtype=np.float32)
    hits = 0
    steady_hits = 0
    steady_ops = 0
    done = 0
    op_base = 0
    while done < total_ops:
        n = min(batch, total_ops - done)
        keys = rank_to_key(sampler.sample(n), seed)
        if policy is PolicyId.kCustomized:
            scores = np.arange(op_base + 1, op_base + n + 1, dtype=np.uint64)
            outcomes = table.find_or_insert(keys, buf[:n], scores)
        else:
            outcomes = table.find_or_insert(keys, buf[:n])
        op_base += n
        h = int((outcomes == Outcome.Found).sum())
        hits += h
        if done >= capacity:
            steady_hits += h
            steady_ops += n
        done += n
    hr = hits / total_ops
    hr_steady = steady_hits / steady_ops if steady_ops else hr
    return hr, hr_steady


# ----- Exp: admission-control burst ---------------------------------------------------------

def run_admission_burst(
    capacity: int = DESK_CAPACITY,
    dim: int = DESK_DIM,
    workers: int = 1,
    seed: int = 0,
    batch: int = DESK_BATCH,
    prefill_lambda: float = 0.96,
    check: bool = False,
) -> ExperimentReport:
    """Pre-fill to ~0.96 load with explicitly scored entries, then inject
    capacity/4 unseen keys aimed at full buckets, once scored below the
    global minimum and once above the global maximum.

    Burst keys are filtered onto full buckets so the run isolates the
    admission gate itself: keys landing in a bucket with a free slot
    insert unconditionally and never consult admission control.
    """
    rep = ExperimentReport("admission")
    cfg = TableConfig(
        capacity=capacity, value_dim=dim, score_policy=PolicyId.kCustomized,
        workers=workers,
    )
    table = CacheTable(cfg)
    base_score = 1000
    offered = 0
    target = round(prefill_lambda * capacity)
    vals = np.ones((batch, dim), dtype=np.float32)
    while table._size < target and offered < 20 * capacity:
        n = min(batch, 20 * capacity - offered)
        keys = uniform_distinct_keys(n, seed, stream_offset=offered)
        scores = np.arange(
            base_score + offered, base_score + offered + n, dtype=np.uint64
        )
        table.insert_or_assign(keys, vals[:n], scores)
        offered += n
    working = table.occupied_keys()
    lam0 = table.load_factor()
    cstr = _cfg_str(cfg)
    rep.add(cstr, prefill_lambda, "prefill_lambda", lam0, seed)

    burst_size = capacity // 4
    burst = _unseen_full_bucket_keys(table, burst_size, seed, offered)
    score_min = 1  # below every assigned score
    score_max = 10**9  # above every assigned score

    for label, burst_score, expect_sign in (
        ("low", score_min, 0),
        ("high", score_max, 1),
    ):
        hit0 = table.contains(working).mean()
        size0 = table.size()
        scores = np.full(len(burst), burst_score, dtype=np.uint64)
        admitted = 0
        for lo in range(0, len(burst), batch):
            sl = slice(lo, min(lo + batch, len(burst)))
            out = table.insert_or_assign(
                burst[sl], np.ones((sl.stop - sl.start, dim), np.float32), scores[sl]
            )
            admitted += int(
                ((out == Outcome.Inserted) | (out == Outcome.Evicted)).sum()
            )
        frac = admitted / len(burst)
        hit1 = table.contains(working).mean()
        delta_pp = (hit1 - hit0) * 100.0
        rep.add(cstr, label, "admitted_fraction", frac, seed)
        rep.add(cstr, label, "hit_rate_delta_pp", delta_pp, seed)
        rep.add(cstr, label, "occupancy_delta", table.size() - size0, seed)
        if check:
            if expect_sign == 0 and (frac != 0.0 or delta_pp != 0.0):
                raise BenchCheckError(
                    f"low-score burst leaked through admission: frac={frac} d={delta_pp}"
                )
            if expect_sign == 1 and (frac != 1.0 or delta_pp > -5.0):
                raise BenchCheckError(
                    f"high-score burst: admitted={frac} delta_pp={delta_pp}"
                )
    return rep


def _unseen_full_bucket_keys(
    table: CacheTable, count: int, seed: int, stream_offset: int
) -> np.ndarray:
    """Unseen keys whose (single-mode) bucket is currently full."""
    full = table._occupancy >= BUCKET_SLOTS
    out: list[np.ndarray] = []
    have = 0
    offset = stream_offset + 2**42
    while have < count:
        cand = uniform_distinct_keys(4 * count, seed, stream_offset=offset)
        offset += 4 * count
        b = (hash_keys(cand) & np.uint64(table._bucket_mask)).astype(np.int64)
        keep = cand[full[b]]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:count]


# ----- Exp: single vs dual retention ----------------------------------------------------------

def run_retention(
    capacity: int = DESK_CAPACITY,
    dim: int = DESK_DIM,
    workers: int = 1,
    alpha: float = 0.99,
    seeds: Iterable[int] = (0, 1, 2),
    batch: int = DESK_BATCH,
    universe_factor: int = 4,
    check: bool = False,
) -> ExperimentReport:
    """Paired single/dual runs: uniform ingestion to full records the
    first-eviction load factor, then 5x capacity Zipf ops measure top-N
    retention (N = capacity) and hit ratio."""
    rep = ExperimentReport("retention")
    seeds = list(seeds)
    retention: dict[tuple[str, int], float] = {}
    first_ev: dict[tuple[str, int], float] = {}
    for seed in seeds:
        for mode in ("single", "dual"):
            cfg = TableConfig(capacity=capacity, value_dim=dim, mode=mode, workers=workers)
            table = CacheTable(cfg)
            cstr = _cfg_str(cfg)
            phase1_keys: list[np.ndarray] = []
            vals = np.ones((batch, dim), dtype=np.float32)
            offered = 0
            while table._size < capacity and offered < 6 * capacity:
                keys = uniform_distinct_keys(batch, seed, stream_offset=offered)
                table.insert_or_assign(keys, vals)
                phase1_keys.append(keys)
                offered += batch
            rep.add(cstr, alpha, "first_eviction_lambda", table.first_eviction_lambda, seed)
            rep.add(cstr, alpha, "fill_lambda", table.load_factor(), seed)
            first_ev[(mode, seed)] = table.first_eviction_lambda

            total_ops = 5 * capacity
            universe = universe_factor * capacity
            rng = np.random.default_rng(np.random.PCG64(seed + 1000))
            sampler = ZipfSampler(universe, alpha, rng)
            phase2_keys: list[np.ndarray] = []
            buf = np.ones((batch, dim), dtype=np.float32)
            hits = 0
            done = 0
            while done < total_ops:
                n = min(batch, total_ops - done)
                keys = rank_to_key(sampler.sample(n), seed + 1000)
                outcomes = table.find_or_insert(keys, buf[:n])
                hits += int((outcomes == Outcome.Found).sum())
                phase2_keys.append(keys)
                done += n
            hit_ratio = hits / total_ops
            rep.add(cstr, alpha, "hit_ratio", hit_ratio, seed)

            stream = np.concatenate(phase1_keys + phase2_keys)
            ret = _lru_topn_retention(table, stream, capacity)
            retention[(mode, seed)] = ret
            rep.add(cstr, alpha, "topn_retention", ret, seed)
    if check:
        gaps = [
            retention[("dual", s)] - retention[("single", s)] for s in seeds
        ]
        if float(np.mean(gaps)) * 100.0 < 2.0:
            raise BenchCheckError(f"dual retention advantage below 2pp: {gaps}")
        for s in seeds:
            if not (0.55 <= first_ev[("single", s)] <= 0.72):
                raise BenchCheckError(
                    f"single first-eviction lambda {first_ev[('single', s)]}"
                )
            if first_ev[("dual", s)] < 0.95:
                raise BenchCheckError(
                    f"dual first-eviction lambda {first_ev[('dual', s)]}"
                )
    return rep


def _lru_topn_retention(table: CacheTable, stream: np.ndarray, n: int) -> float:
    """Retention against the infinite-capacity recency ideal: a key's
    ideal score is its last touch position in the op stream."""
    rev_keys, rev_first = np.unique(stream[::-1], return_index=True)
    last_touch = (len(stream) - 1 - rev_first).astype(np.uint64)
    return topn_retention_from_arrays(table.occupied_keys(), rev_keys, last_touch, n)


# ----- Exp: digest ablation --------------------------------------------------------------------

def run_digest_ablation(
    capacity: int = 2**17,
    dim: int = DESK_DIM,
    seed: int = 0,
    misses: int = 2**17,
    lf_grid: Iterable[float] = (0.5, 1.0),
    check: bool = False,
) -> ExperimentReport:
    """Full-key comparisons per missing lookup, with and without the
    digest pre-filter."""
    rep = ExperimentReport("digest-ablation")
    results: dict[tuple[bool, float], float] = {}
    for lam in lf_grid:
        for use_digest in (True, False):
            cfg = TableConfig(capacity=capacity, value_dim=dim, digest_filter=use_digest)
            table = CacheTable(cfg)
            fill_to_lambda(table, lam, seed)
            absent = uniform_distinct_keys(misses, seed, stream_offset=2**40)
            table.counters.reset()
            table.contains(absent)
            per_miss = table.counters.full_key_compares / misses
            results[(use_digest, lam)] = per_miss
            cstr = _cfg_str(cfg) + f";digest={'on' if use_digest else 'off'}"
            rep.add(cstr, lam, "key_compares_per_miss", per_miss, seed)
    for lam in lf_grid:
        ratio = results[(False, lam)] / max(results[(True, lam)], 1e-12)
        rep.add(f"capacity={capacity}", lam, "compare_ratio_off_over_on", ratio, seed)
    if check:
        if results[(False, 1.0)] != float(BUCKET_SLOTS):
            raise BenchCheckError(
                f"no-digest full-table misses must compare all {BUCKET_SLOTS} keys, "
                f"got {results[(False, 1.0)]}"
            )
        if not (0.45 <= results[(True, 1.0)] <= 0.55):
            raise BenchCheckError(
                f"digest selectivity out of range: {results[(True, 1.0)]}"
            )
        if results[(False, 1.0)] / results[(True, 1.0)] < 100.0:
            raise BenchCheckError("digest compare-count ratio below 100x")
    return rep


# ----- Exp: order-statistics model of dual-bucket eviction -------------------------------------

def run_prop3_montecarlo(
    n_slots: int = BUCKET_SLOTS,
    trials: int = 10**5,
    seed: int = 0,
    check: bool = False,
) -> ExperimentReport:
    """Expected minimum score of one bucket vs the better of two buckets
    under i.i.d. uniform scores, against the 1/(n+1) and 1/(2n+1) forms."""
    rep = ExperimentReport("prop3")
    rng = np.random.default_rng(seed)
    single_sum = 0.0
    dual_sum = 0.0
    done = 0
    chunk = 10_000
    while done < trials:
        m = min(chunk, trials - done)
        a = rng.random((m, n_slots)).min(axis=1)
        b = rng.random((m, n_slots)).min(axis=1)
        single_sum += a.sum()
        dual_sum += np.minimum(a, b).sum()
        done += m
    mean_single = single_sum / trials
    mean_dual = dual_sum / trials
    exp_single = 1.0 / (n_slots + 1)
    exp_dual = 1.0 / (2 * n_slots + 1)
    cstr = f"n_slots={n_slots};trials={trials}"
    rep.add(cstr, "single", "mean_min_score", mean_single, seed)
    rep.add(cstr, "single", "expected_mean_min_score", exp_single, seed)
    rep.add(cstr, "dual", "mean_min_score", mean_dual, seed)
    rep.add(cstr, "dual", "expected_mean_min_score", exp_dual, seed)
    rep.add(cstr, "ratio", "dual_over_single", mean_dual / mean_single, seed)
    if check:
        if abs(mean_single - exp_single) > 0.10 * exp_single:
            raise BenchCheckError(f"single-bucket mean min {mean_single} vs {exp_single}")
        if abs(mean_dual - exp_dual) > 0.10 * exp_dual:
            raise BenchCheckError(f"dual-bucket mean min {mean_dual} vs {exp_dual}")
    return rep


# ----- gate stress ------------------------------------------------------------------------------

def stress_gate(
    threads: int = 8,
    total_ops: int = 10**5,
    capacity: int = 2**13,
    dim: int = 4,
    seed: int = 0,
    check: bool = False,
) -> ExperimentReport:
    """Mixed-role hammering of one table from many threads with a gate
    event log; audits the compatibility matrix, value integrity under
    concurrent reads, and updater structural invariance."""
    rep = ExperimentReport("stress-gate")
    events: list = []
    ev_lock = threading.Lock()

    def hook(ev):
        with ev_lock:
            events.append(ev)

    cfg = TableConfig(capacity=capacity, value_dim=dim)
    table = CacheTable(cfg, gate_event_hook=hook)
    base_keys = uniform_distinct_keys(capacity // 2, seed)
    pattern = np.repeat(
        np.arange(1, len(base_keys) + 1, dtype=np.float32)[:, None], dim, axis=1
    )
    table.insert_or_assign(base_keys, pattern)

    per_thread = total_ops // threads
    torn = [0] * threads
    errors: list[str] = []

    def worker(wid: int):
        rng = np.random.default_rng(seed + wid)
        mine = base_keys[rng.integers(0, len(base_keys), size=64)]
        try:
            for op_i in range(per_thread):
                r = rng.random()
                if r < 0.5:  # reader: committed values are uniform rows
                    found, vals = table.find(mine)
                    rows = vals[found]
                    if len(rows) and not (rows == rows[:, :1]).all():
                        torn[wid] += 1
                elif r < 0.8:  # updater: rewrite whole rows in place
                    token = np.float32(wid * per_thread + op_i + 10_000)
                    table.assign(mine, np.full((len(mine), dim), token, np.float32))
                elif r < 0.9:  # inserter: fresh keys
                    nk = uniform_distinct_keys(
                        16, seed + 100 + wid, stream_offset=op_i * 16
                    )
                    token = np.float32(wid * per_thread + op_i + 20_000)
                    table.insert_or_assign(nk, np.full((16, dim), token, np.float32))
                else:  # reader again, presence only
                    table.contains(mine)
        except Exception as exc:  # noqa: BLE001 - surfaced in the report
            errors.append(f"{type(exc).__name__}: {exc}")

    ts = [threading.Thread(target=worker, args=(w,)) for w in range(threads)]
    t0 = time.time()
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    elapsed = time.time() - t0

    # updater structural invariance: concurrent assign batches leave the
    # key and digest arrays bit-identical (no inserter in this phase)
    fp_before = table._keys.tobytes() + table._digests.tobytes()
    resident = table.occupied_keys()[: 4 * 64]

    def upd(wid: int):
        part = resident[wid::threads]
        if len(part):
            table.assign(part, np.full((len(part), dim), np.float32(wid + 1)))

    uts = [threading.Thread(target=upd, args=(w,)) for w in range(threads)]
    for t in uts:
        t.start()
    for t in uts:
        t.join()
    structure_changed = int(
        fp_before != table._keys.tobytes() + table._digests.tobytes()
    )

    violations = audit_gate_events(events)
    cstr = f"threads={threads};ops={total_ops};capacity={capacity}"
    rep.add(cstr, threads, "gate_events", len(events), seed)
    rep.add(cstr, threads, "matrix_violations", violations["matrix"], seed)
    rep.add(cstr, threads, "negative_counts", violations["negative"], seed)
    rep.add(cstr, threads, "dual_inserters", violations["dual_inserter"], seed)
    rep.add(cstr, threads, "torn_reads", sum(torn), seed)
    rep.add(cstr, threads, "updater_structure_changes", structure_changed, seed)
    rep.add(cstr, threads, "worker_errors", len(errors), seed)
    rep.add(cstr, threads, "elapsed_seconds", elapsed, seed)
    table.check_consistency()
    if check and (
        violations["matrix"]
        or violations["negative"]
        or violations["dual_inserter"]
        or sum(torn)
        or structure_changed
        or errors
    ):
        raise BenchCheckError(f"gate stress violations: {violations} errors={errors[:3]}")
    return rep


def audit_gate_events(events) -> dict[str, int]:
    """Replay an acquire/release log; count compatibility violations."""
    active: dict = {}
    matrix = negative = dual_inserter = 0
    for _seq, ev, role, _cnt in events:
        if ev == "acquire":
            active[role] = active.get(role, 0) + 1
        else:
            active[role] = active.get(role, 0) - 1
            if active[role] < 0:
                negative += 1
        live = [r for r, c in active.items() if c > 0]
        if len(live) > 1:
            matrix += 1
        if active.get(Role.Inserter, 0) > 1:
            dual_inserter += 1
    return {"matrix": matrix, "negative": negative, "dual_inserter": dual_inserter}
