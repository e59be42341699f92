"""Command-line entry points.

Two families of commands:

  cachekv bench ...   in-process experiment runners (CSV out, --check
                      turns qualitative claims into exit-code assertions)
  cachekv stress ...  concurrency stress with gate auditing
  cachekv serve       run the HTTP service
  cachekv table ...   thin HTTP client against a running service
"""

from __future__ import annotations

import json
import sys

import click
import numpy as np

from . import bench


def _emit(report: bench.ExperimentReport, csv_path):
    if csv_path:
        report.write_csv(csv_path)
        click.echo(f"wrote {len(report.rows)} rows to {csv_path}")
    else:
        for row in report.rows:
            click.echo(",".join(str(x) for x in row))


def _run_checked(fn, csv_path, **kwargs):
    try:
        report = fn(**kwargs)
    except bench.BenchCheckError as exc:
        click.echo(f"CHECK FAILED: {exc}", err=True)
        sys.exit(1)
    _emit(report, csv_path)


@click.group()
def main():
    """Cache-semantic bucketed hash table: bench harness and service."""


# ----- bench ------------------------------------------------------------------

@main.group("bench")
def bench_group():
    """Desk-scale experiment runners."""


_common = [
    click.option("--capacity", default=bench.DESK_CAPACITY, show_default=True),
    click.option("--dim", default=bench.DESK_DIM, show_default=True),
    click.option("--seed", default=0, show_default=True),
    click.option("--threads", default=1, show_default=True,
                 help="worker threads inside each batch (exercises the role gate)"),
    click.option("--csv", "csv_path", type=click.Path(), default=None),
    click.option("--check", is_flag=True, help="assert expected structure; exit 1 on failure"),
]


def common_options(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@bench_group.command("lf-sweep")
@common_options
@click.option("--mode", type=click.Choice(["single", "dual"]), default="single", show_default=True)
@click.option("--grid", default="0.25,0.5,0.75,1.0", show_default=True)
@click.option("--baseline-capacity", default=2**14, show_default=True)
def lf_sweep_cmd(capacity, dim, seed, threads, csv_path, check, mode, grid, baseline_capacity):
    """Probe-cost flatness vs the linear-probing baseline across load factors."""
    lf_grid = [float(x) for x in grid.split(",")]
    _run_checked(
        bench.run_lf_sweep, csv_path,
        capacity=capacity, dim=dim, mode=mode, workers=threads,
        lf_grid=lf_grid, seed=seed, baseline_capacity=baseline_capacity, check=check,
    )


@bench_group.command("quality")
@common_options
@click.option("--alpha", default="0.5,0.75,0.99,1.25", show_default=True,
              help="comma-separated Zipf skew grid")
@click.option("--policy", default="all", show_default=True,
              help="policy name or 'all'")
def quality_cmd(capacity, dim, seed, threads, csv_path, check, alpha, policy):
    """Hit rate by scoring policy under sustained Zipf ingestion."""
    from .scoring import PolicyId

    alphas = [float(x) for x in alpha.split(",")]
    policies = tuple(PolicyId) if policy == "all" else (PolicyId(policy),)
    _run_checked(
        bench.run_quality, csv_path,
        capacity=capacity, dim=dim, workers=threads,
        alpha_grid=alphas, policies=policies, seed=seed, check=check,
    )


@bench_group.command("admission")
@common_options
def admission_cmd(capacity, dim, seed, threads, csv_path, check):
    """Score-gated burst injection against a nearly full table."""
    _run_checked(
        bench.run_admission_burst, csv_path,
        capacity=capacity, dim=dim, workers=threads, seed=seed, check=check,
    )


@bench_group.command("retention")
@common_options
@click.option("--alpha", default=0.99, show_default=True)
@click.option("--seeds", default="0,1,2", show_default=True)
def retention_cmd(capacity, dim, seed, threads, csv_path, check, alpha, seeds):
    """Single vs dual mode: first-eviction load factor and top-N retention."""
    seed_list = [int(s) for s in seeds.split(",")]
    _run_checked(
        bench.run_retention, csv_path,
        capacity=capacity, dim=dim, workers=threads,
        alpha=alpha, seeds=seed_list, check=check,
    )


@bench_group.command("digest-ablation")
@common_options
def digest_cmd(capacity, dim, seed, threads, csv_path, check):
    """Key comparisons per miss with and without digest pre-filtering."""
    _run_checked(
        bench.run_digest_ablation, csv_path,
        capacity=min(capacity, 2**17), dim=dim, seed=seed, check=check,
    )


@bench_group.command("prop3")
@click.option("--trials", default=10**5, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--check", is_flag=True)
def prop3_cmd(trials, seed, csv_path, check):
    """Order-statistics model: expected evicted score, one vs two buckets."""
    _run_checked(bench.run_prop3_montecarlo, csv_path, trials=trials, seed=seed, check=check)


# ----- stress ------------------------------------------------------------------

@main.group("stress")
def stress_group():
    """Concurrency stress runs."""


@stress_group.command("gate")
@click.option("--threads", default=8, show_default=True)
@click.option("--ops", default=10**5, show_default=True)
@click.option("--capacity", default=2**13, show_default=True)
@click.option("--seed", default=0, show_default=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--check", is_flag=True)
def stress_gate_cmd(threads, ops, capacity, seed, csv_path, check):
    """Mixed-role hammering with a full audit of the role gate."""
    _run_checked(
        bench.stress_gate, csv_path,
        threads=threads, total_ops=ops, capacity=capacity, seed=seed, check=check,
    )


# ----- service -----------------------------------------------------------------

@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn

    from .service import app

    uvicorn.run(app, host=host, port=port)


# ----- thin HTTP client ----------------------------------------------------------

@main.group("table")
@click.option("--url", default="http://127.0.0.1:8000", show_default=True,
              help="base URL of a running cachekv service")
@click.pass_context
def table_group(ctx, url):
    """Operate on tables of a running service."""
    ctx.obj = url


def _client(ctx):
    import httpx

    return httpx.Client(base_url=ctx.obj, timeout=30.0)


def _fail(resp):
    click.echo(f"error {resp.status_code}: {resp.text}", err=True)
    sys.exit(1)


def _post(ctx, path, payload):
    with _client(ctx) as c:
        r = c.post(path, json=payload)
        if r.status_code >= 400:
            _fail(r)
        return r.json()


def _parse_keys(keys: str) -> list[int]:
    return [int(x) for x in keys.split(",") if x]


@table_group.command("create")
@click.argument("name")
@click.option("--capacity", required=True, type=int)
@click.option("--dim", required=True, type=int)
@click.option("--mode", type=click.Choice(["single", "dual"]), default="single")
@click.option("--policy", default="kLru")
@click.pass_context
def table_create(ctx, name, capacity, dim, mode, policy):
    out = _post(ctx, "/tables", {
        "name": name, "capacity": capacity, "value_dim": dim,
        "mode": mode, "score_policy": policy,
    })
    click.echo(json.dumps(out, indent=2))


@table_group.command("info")
@click.argument("name")
@click.pass_context
def table_info(ctx, name):
    with _client(ctx) as c:
        r = c.get(f"/tables/{name}")
        if r.status_code >= 400:
            _fail(r)
        click.echo(json.dumps(r.json(), indent=2))


@table_group.command("insert")
@click.argument("name")
@click.option("--keys", required=True, help="comma-separated uint64 keys")
@click.option("--fill", type=float, default=1.0, show_default=True,
              help="constant used for every value element")
@click.option("--scores", default=None, help="comma-separated scores (kCustomized)")
@click.pass_context
def table_insert(ctx, name, keys, fill, scores):
    with _client(ctx) as c:
        r = c.get(f"/tables/{name}")
        if r.status_code >= 400:
            _fail(r)
        dim = r.json()["value_dim"]
    ks = _parse_keys(keys)
    payload = {"keys": ks, "values": [[fill] * dim for _ in ks]}
    if scores:
        payload["scores"] = _parse_keys(scores)
    out = _post(ctx, f"/tables/{name}/insert", payload)
    click.echo(json.dumps(out))


@table_group.command("find")
@click.argument("name")
@click.option("--keys", required=True)
@click.pass_context
def table_find(ctx, name, keys):
    out = _post(ctx, f"/tables/{name}/find", {"keys": _parse_keys(keys)})
    click.echo(json.dumps(out))


@table_group.command("contains")
@click.argument("name")
@click.option("--keys", required=True)
@click.pass_context
def table_contains(ctx, name, keys):
    out = _post(ctx, f"/tables/{name}/contains", {"keys": _parse_keys(keys)})
    click.echo(json.dumps(out))


@table_group.command("erase")
@click.argument("name")
@click.option("--keys", required=True)
@click.pass_context
def table_erase(ctx, name, keys):
    out = _post(ctx, f"/tables/{name}/erase", {"keys": _parse_keys(keys)})
    click.echo(json.dumps(out))


@table_group.command("export")
@click.argument("name")
@click.option("--min-score", type=int, default=None)
@click.option("--max-count", type=int, default=1024)
@click.option("--cursor", type=int, default=None)
@click.pass_context
def table_export(ctx, name, min_score, max_count, cursor):
    out = _post(ctx, f"/tables/{name}/export", {
        "min_score": min_score, "max_count": max_count, "cursor": cursor,
    })
    click.echo(json.dumps(out))


@table_group.command("drop")
@click.argument("name")
@click.pass_context
def table_drop(ctx, name):
    with _client(ctx) as c:
        r = c.delete(f"/tables/{name}")
        if r.status_code >= 400:
            _fail(r)
    click.echo(f"dropped {name}")


if __name__ == "__main__":
    main()
