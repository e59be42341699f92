"""HTTP service wrapping CacheTable for multi-client use.

Tables are created and addressed by name; request bodies carry key and
value batches as JSON arrays. All operations dispatch straight into the
table, whose internal role gate serializes incompatible request groups,
so concurrent clients get the same reader/updater/inserter semantics as
in-process callers.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .metrics import TxnCounters
from .table import CacheTable, Outcome, TableConfig


class TableCreateRequest(BaseModel):
    name: str
    capacity: int
    value_dim: int
    mode: str = "single"
    score_policy: str = "kLru"
    fast_tier_budget: Optional[int] = None
    admit_ties_unified: bool = False
    digest_filter: bool = True
    workers: int = 1


class TableInfo(BaseModel):
    name: str
    capacity: int
    value_dim: int
    mode: str
    score_policy: str
    fast_tier_budget: int
    size: int
    load_factor: float
    first_eviction_lambda: Optional[float] = None


class KeysRequest(BaseModel):
    keys: list[int]


class UpsertRequest(BaseModel):
    keys: list[int]
    values: list[list[float]]
    scores: Optional[list[int]] = None
    return_evicted: bool = False


class AssignRequest(BaseModel):
    keys: list[int]
    values: Optional[list[list[float]]] = None
    scores: Optional[list[int]] = None


class ExportRequest(BaseModel):
    cursor: Optional[int] = None
    max_count: int = Field(default=1024, ge=1)
    min_score: Optional[int] = None


class OutcomesResponse(BaseModel):
    outcomes: list[str]
    evicted_keys: Optional[list[int]] = None
    evicted_values: Optional[list[list[float]]] = None
    evicted_scores: Optional[list[int]] = None


class FindResponse(BaseModel):
    found: list[bool]
    values: list[Optional[list[float]]]


class FindPtrResponse(BaseModel):
    found: list[bool]
    tier: list[int]
    offset: list[int]


class ContainsResponse(BaseModel):
    present: list[bool]


class ExportResponse(BaseModel):
    keys: list[int]
    values: list[list[float]]
    scores: list[int]
    next_cursor: Optional[int]


class CountersResponse(BaseModel):
    digest_line_loads: int
    full_key_compares: int
    score_scans: int
    slot_lock_retries: int
    value_copies_fast: int
    value_copies_overflow: int


_OUTCOME_NAMES = {o.value: o.name for o in Outcome}


def create_app() -> FastAPI:
    app = FastAPI(title="cachekv", version="0.1.0")
    tables: dict[str, CacheTable] = {}

    def get_table(name: str) -> CacheTable:
        table = tables.get(name)
        if table is None:
            raise HTTPException(status_code=404, detail=f"no table named {name!r}")
        return table

    def as_keys(keys: list[int]) -> np.ndarray:
        try:
            arr = np.asarray(keys, dtype=np.uint64)
        except (OverflowError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return arr

    def as_values(values, n: int, dim: int) -> np.ndarray:
        arr = np.asarray(values, dtype=np.float32)
        if arr.shape != (n, dim):
            raise HTTPException(
                status_code=422,
                detail=f"values must have shape ({n}, {dim})",
            )
        return np.ascontiguousarray(arr)

    def guard(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

    def info(name: str, table: CacheTable) -> TableInfo:
        cfg = table.config
        return TableInfo(
            name=name,
            capacity=cfg.capacity,
            value_dim=cfg.value_dim,
            mode=cfg.mode.value,
            score_policy=cfg.score_policy.value,
            fast_tier_budget=cfg.fast_tier_budget,
            size=table.size(),
            load_factor=table.load_factor(),
            first_eviction_lambda=table.first_eviction_lambda,
        )

    @app.post("/tables", response_model=TableInfo, status_code=201)
    def create_table(req: TableCreateRequest):
        if req.name in tables:
            raise HTTPException(status_code=409, detail=f"table {req.name!r} exists")
        cfg = guard(
            TableConfig,
            capacity=req.capacity,
            value_dim=req.value_dim,
            mode=req.mode,
            score_policy=req.score_policy,
            fast_tier_budget=req.fast_tier_budget,
            admit_ties_unified=req.admit_ties_unified,
            digest_filter=req.digest_filter,
            workers=req.workers,
        )
        tables[req.name] = CacheTable(cfg)
        return info(req.name, tables[req.name])

    @app.get("/tables", response_model=list[TableInfo])
    def list_tables():
        return [info(name, t) for name, t in sorted(tables.items())]

    @app.get("/tables/{name}", response_model=TableInfo)
    def table_info(name: str):
        return info(name, get_table(name))

    @app.delete("/tables/{name}", status_code=204)
    def drop_table(name: str):
        get_table(name)
        del tables[name]

    @app.post("/tables/{name}/insert", response_model=OutcomesResponse)
    def insert(name: str, req: UpsertRequest):
        table = get_table(name)
        k = as_keys(req.keys)
        v = as_values(req.values, len(k), table.config.value_dim)
        s = np.asarray(req.scores, dtype=np.uint64) if req.scores is not None else None
        if req.return_evicted:
            out, ek, ev, es = guard(table.insert_and_evict, k, v, s)
            return OutcomesResponse(
                outcomes=[_OUTCOME_NAMES[o] for o in out.tolist()],
                evicted_keys=ek.tolist(),
                evicted_values=ev.tolist(),
                evicted_scores=es.tolist(),
            )
        out = guard(table.insert_or_assign, k, v, s)
        return OutcomesResponse(outcomes=[_OUTCOME_NAMES[o] for o in out.tolist()])

    @app.post("/tables/{name}/find-or-insert", response_model=OutcomesResponse)
    def find_or_insert(name: str, req: UpsertRequest):
        table = get_table(name)
        k = as_keys(req.keys)
        v = as_values(req.values, len(k), table.config.value_dim)
        s = np.asarray(req.scores, dtype=np.uint64) if req.scores is not None else None
        out = guard(table.find_or_insert, k, v, s)
        return OutcomesResponse(outcomes=[_OUTCOME_NAMES[o] for o in out.tolist()])

    @app.post("/tables/{name}/find", response_model=FindResponse)
    def find(name: str, req: KeysRequest):
        table = get_table(name)
        k = as_keys(req.keys)
        found, values = guard(table.find, k)
        rows = [
            values[i].tolist() if found[i] else None for i in range(len(k))
        ]
        return FindResponse(found=found.tolist(), values=rows)

    @app.post("/tables/{name}/find-ptr", response_model=FindPtrResponse)
    def find_ptr(name: str, req: KeysRequest):
        table = get_table(name)
        found, tier, offset = guard(table.find_ptr, as_keys(req.keys))
        return FindPtrResponse(
            found=found.tolist(), tier=tier.tolist(), offset=offset.tolist()
        )

    @app.post("/tables/{name}/contains", response_model=ContainsResponse)
    def contains(name: str, req: KeysRequest):
        table = get_table(name)
        return ContainsResponse(present=guard(table.contains, as_keys(req.keys)).tolist())

    @app.post("/tables/{name}/assign", response_model=OutcomesResponse)
    def assign(name: str, req: AssignRequest):
        table = get_table(name)
        k = as_keys(req.keys)
        if req.values is not None:
            v = as_values(req.values, len(k), table.config.value_dim)
            out = guard(table.assign, k, v)
            if req.scores is not None:
                out2 = guard(
                    table.assign_scores, k, np.asarray(req.scores, dtype=np.uint64)
                )
                out = np.maximum(out, out2)
        elif req.scores is not None:
            out = guard(table.assign_scores, k, np.asarray(req.scores, dtype=np.uint64))
        else:
            out = guard(table.assign_scores, k)  # policy-driven score refresh
        return OutcomesResponse(outcomes=[_OUTCOME_NAMES[o] for o in out.tolist()])

    @app.post("/tables/{name}/erase", response_model=OutcomesResponse)
    def erase(name: str, req: KeysRequest):
        table = get_table(name)
        out = guard(table.erase, as_keys(req.keys))
        return OutcomesResponse(outcomes=[_OUTCOME_NAMES[o] for o in out.tolist()])

    @app.post("/tables/{name}/export", response_model=ExportResponse)
    def export(name: str, req: ExportRequest):
        table = get_table(name)
        predicate = None
        if req.min_score is not None:
            threshold = np.uint64(req.min_score)

            def predicate(keys, scores, _t=threshold):
                return scores >= _t

        keys, values, scores, nxt = guard(
            table.export_batch_if, predicate, req.cursor, req.max_count
        )
        return ExportResponse(
            keys=keys.tolist(),
            values=values.tolist(),
            scores=scores.tolist(),
            next_cursor=nxt,
        )

    @app.get("/tables/{name}/counters", response_model=CountersResponse)
    def counters(name: str):
        snap = get_table(name).counters.snapshot()
        return CountersResponse(**snap.as_dict())

    @app.post("/tables/{name}/counters/reset", response_model=CountersResponse)
    def reset_counters(name: str):
        table = get_table(name)
        snap = table.counters.snapshot()
        table.counters.reset()
        return CountersResponse(**snap.as_dict())

    return app


app = create_app()
