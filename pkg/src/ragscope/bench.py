"""Latency and snippeting benchmarks.

Latency reports decompose each query into the server-reported stage
timings and summarize them with exact nearest-rank percentiles; the
snippeting comparison measures both snippet methods' similarity and
cost over the same retrievals. Timings always come from response
metadata, never from client-side wall clocks.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import httpx
import numpy as np

from .context import snippet_naive_first, snippet_sliding_window
from .errors import RagscopeError, TransportError
from .pipeline import STAGES, QueryStack, run_query

DISJOINT_STAGES = (
    "embed",
    "fanout_total",
    "fetch_documents",
    "snippeting",
    "generation",
    "attention_forward",
)


def percentile(samples, p: float) -> float:
    """Nearest-rank percentile: value at rank ceil(p * n) of the sorted samples."""
    if not 0 < p <= 1:
        raise ValueError(f"p must be in (0, 1], got {p}")
    ordered = sorted(samples)
    if not ordered:
        raise ValueError("no samples")
    rank = math.ceil(p * len(ordered))
    return float(ordered[rank - 1])


def summarize(samples) -> dict[str, float]:
    return {"median": percentile(samples, 0.5), "p95": percentile(samples, 0.95)}


def load_queries(path: str | Path) -> list[str]:
    """One query per line; JSONL rows with a "query" field also accepted."""
    queries = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("{"):
            queries.append(json.loads(line)["query"])
        else:
            queries.append(line)
    return queries


class InProcessClient:
    """Runs queries directly against a wired stack (no sockets)."""

    def __init__(self, stack: QueryStack):
        self.stack = stack

    def query(self, query: str) -> dict:
        return run_query(self.stack, query)


class LiveClient:
    """Runs queries against a deployed API over HTTP."""

    def __init__(self, api_url: str, api_key: str, timeout_s: float = 120.0, client=None):
        self._client = client or httpx.Client(
            base_url=api_url, headers={"X-API-Key": api_key}, timeout=timeout_s
        )

    def query(self, query: str) -> dict:
        resp = self._client.post("/api/query", json={"query": query})
        if resp.status_code != 200:
            raise TransportError(f"API returned {resp.status_code}: {resp.text}")
        return resp.json()


def run_latency(queries: list[str], client) -> dict:
    """Per-stage latency percentiles over a query suite.

    Failed queries are excluded and counted; more than 20% failures
    aborts the run. The "other" row is the per-query residual between
    total and the disjoint stage sum (serialization, assembly, merge).
    """
    if len(queries) < 10:
        raise RagscopeError(f"need at least 10 queries, got {len(queries)}")
    samples: dict[str, list[float]] = {s: [] for s in STAGES}
    other: list[float] = []
    failures: list[str] = []
    for q in queries:
        try:
            payload = client.query(q)
        except Exception as exc:
            failures.append(f"{q!r}: {exc}")
            if len(failures) > 0.2 * len(queries):
                raise RagscopeError(
                    f"aborting: {len(failures)}/{len(queries)} queries failed "
                    f"(last: {failures[-1]})"
                ) from None
            continue
        t = payload["timings"]
        for s in STAGES:
            samples[s].append(float(t[s]))
        other.append(
            max(0.0, float(t["total"]) - sum(float(t[s]) for s in DISJOINT_STAGES))
        )
    return {
        "kind": "latency",
        "queries_run": len(queries) - len(failures),
        "failures": failures,
        "stages": {s: summarize(v) for s, v in samples.items()},
        "other": summarize(other),
    }


def compare_snippeting(
    queries: list[str], stack: QueryStack, window: int, stride: int, k: int | None = None
) -> dict:
    """Mean snippet similarity and median extraction latency per method.

    For each query the top-k documents are retrieved once; both methods
    then snippet the same documents. Naive-first latency covers only the
    span slice (its similarity is embedded afterwards, outside the timed
    region); sliding-window latency includes embedding every window,
    which is the cost the method actually pays online.
    """
    from .context import fanout_search

    sims = {"naive_first": [], "sliding_window": []}
    lats = {"naive_first": [], "sliding_window": []}
    failures: list[str] = []
    k = k or stack.config.retrieval.k_default
    for q in queries:
        try:
            qvec = np.asarray(stack.embedder.embed(q), dtype=np.float64)
            hits = fanout_search(
                stack.workers, qvec, k, beam=stack.config.retrieval.beam
            ).hits
            docs = [stack.store.get_document(h.doc_id) for h in hits]
        except Exception as exc:
            failures.append(f"{q!r}: {exc}")
            if len(failures) > 0.2 * len(queries):
                raise RagscopeError(
                    f"aborting: {len(failures)}/{len(queries)} queries failed"
                ) from None
            continue
        for doc in docs:
            t0 = time.perf_counter()
            naive = snippet_naive_first(doc, window)
            lats["naive_first"].append(time.perf_counter() - t0)
            nvec = np.asarray(stack.embedder.embed(naive.text), dtype=np.float64)
            sims["naive_first"].append(float(np.dot(nvec, qvec)))

            t0 = time.perf_counter()
            slid = snippet_sliding_window(doc, qvec, stack.embedder, window, stride)
            lats["sliding_window"].append(time.perf_counter() - t0)
            sims["sliding_window"].append(float(slid.similarity))
    return {
        "kind": "snippet",
        "queries_run": len(queries) - len(failures),
        "failures": failures,
        "window": window,
        "stride": stride,
        "methods": {
            m: {
                "mean_similarity": float(np.mean(sims[m])) if sims[m] else 0.0,
                "median_latency": percentile(lats[m], 0.5) if lats[m] else 0.0,
                "pairs": len(sims[m]),
            }
            for m in ("naive_first", "sliding_window")
        },
    }


def format_report(report: dict) -> str:
    """Aligned text table for terminal output."""
    lines = []
    if report["kind"] == "latency":
        lines.append(f"latency over {report['queries_run']} queries")
        lines.append(f"{'stage':<20} {'median_s':>12} {'p95_s':>12}")
        for stage in STAGES:
            row = report["stages"][stage]
            lines.append(f"{stage:<20} {row['median']:>12.6f} {row['p95']:>12.6f}")
        row = report["other"]
        lines.append(f"{'other':<20} {row['median']:>12.6f} {row['p95']:>12.6f}")
    else:
        lines.append(
            f"snippeting over {report['queries_run']} queries "
            f"(window={report['window']}, stride={report['stride']})"
        )
        lines.append(f"{'method':<16} {'mean_similarity':>16} {'median_latency_s':>18}")
        for m, row in report["methods"].items():
            lines.append(
                f"{m:<16} {row['mean_similarity']:>16.5f} {row['median_latency']:>18.6f}"
            )
    if report["failures"]:
        lines.append(f"failures: {len(report['failures'])}")
    return "\n".join(lines)


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
