"""Query pipeline: embed, fan out, fetch, snippet, generate, attribute.

Every stage is timed server-side; the response carries the full timing
breakdown so latency benchmarks can decompose where a query spent its
time without client-side guessing.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import AppConfig
from .context import (
    PromptTemplate,
    Snippet,
    WorkerBackend,
    assemble_prompt,
    fanout_search,
    snippet_naive_first,
    snippet_sliding_window,
)
from .corpus import CorpusStore
from .errors import InvalidInputError
from .inference import (
    InferenceGateway,
    aggregate_attribution,
    score_documents,
)

logger = logging.getLogger(__name__)

# Disjoint wall-time stages; single_ann_call is a per-worker sub-measurement
# inside fanout_total and total covers everything.
STAGES = (
    "embed",
    "single_ann_call",
    "fanout_total",
    "fetch_documents",
    "snippeting",
    "generation",
    "attention_forward",
    "total",
)


@dataclass
class QueryStack:
    """Everything a query needs, wired once at startup."""

    embedder: object
    workers: list[WorkerBackend]
    store: CorpusStore
    template: PromptTemplate
    gateway: InferenceGateway
    config: AppConfig = field(default_factory=AppConfig)


def run_query(
    stack: QueryStack,
    query: str,
    k: int | None = None,
    snippet_method: str | None = None,
    excluded_doc_ids=(),
) -> dict:
    """Execute the full pipeline; returns the response payload as a dict."""
    t_start = time.perf_counter()
    cfg = stack.config
    k = k if k is not None else cfg.retrieval.k_default
    method = snippet_method or cfg.snippet.method
    excluded = frozenset(int(d) for d in excluded_doc_ids)
    if not query.strip():
        raise InvalidInputError("query is empty")

    timings: dict[str, float] = {}
    warnings: list[str] = []

    t0 = time.perf_counter()
    qvec = np.asarray(stack.embedder.embed(query), dtype=np.float64)
    timings["embed"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    fanout = fanout_search(
        stack.workers,
        qvec,
        k,
        excluded=excluded,
        beam=cfg.retrieval.beam,
        timeout_s=cfg.fanout.timeout_ms / 1000.0,
    )
    timings["fanout_total"] = time.perf_counter() - t0
    timings["single_ann_call"] = (
        float(np.mean(fanout.worker_seconds)) if fanout.worker_seconds else 0.0
    )
    if fanout.partial:
        warnings.append(
            "partial coverage: workers failed: " + ", ".join(fanout.failed_workers)
        )

    t0 = time.perf_counter()
    docs = [stack.store.get_document(h.doc_id) for h in fanout.hits]
    timings["fetch_documents"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    snippets: list[Snippet] = []
    window, stride = cfg.snippet.window, cfg.snippet.stride

    def make_snippet(doc):
        if method == "naive_first":
            return snippet_naive_first(doc, window)
        return snippet_sliding_window(doc, qvec, stack.embedder, window, stride)

    if method == "sliding_window" and len(docs) > 1:
        with ThreadPoolExecutor(max_workers=min(8, len(docs))) as pool:
            results = list(pool.map(_safe, [make_snippet] * len(docs), docs))
    else:
        results = [_safe(make_snippet, d) for d in docs]
    for doc, snip in zip(docs, results):
        if isinstance(snip, Exception):
            logger.warning("skipping document %d: %s", doc.doc_id, snip)
            warnings.append(f"document {doc.doc_id} skipped: {snip}")
        else:
            snippets.append(snip)
    timings["snippeting"] = time.perf_counter() - t0

    assembled = assemble_prompt(snippets, query, stack.template)

    t0 = time.perf_counter()
    answer = stack.gateway.generate(
        assembled.prompt_tokens,
        max_tokens=cfg.inference.max_tokens,
        seed=cfg.inference.seed,
    )
    timings["generation"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    tensor = stack.gateway.attention_forward(assembled.prompt_tokens, answer)
    attribution = aggregate_attribution(tensor)
    doc_scores = score_documents(attribution, assembled.layout)
    timings["attention_forward"] = time.perf_counter() - t0

    timings["total"] = time.perf_counter() - t_start

    seg_tokens = assembled.prompt_tokens
    return {
        "answer_tokens": list(answer),
        "segments": [
            {
                "kind": s.kind,
                "doc_id": s.doc_id,
                "token_start": s.token_start,
                "token_end": s.token_end,
                "tokens": list(seg_tokens[s.token_start : s.token_end]),
            }
            for s in assembled.layout.segments
        ],
        "attribution": {
            "out_len": attribution.out_len,
            "in_len": attribution.in_len,
            "values": [float(v) for v in attribution.matrix.reshape(-1)],
        },
        "doc_scores": [
            {"doc_id": d.doc_id, "raw": d.raw, "share": d.share} for d in doc_scores
        ],
        "hits": [{"doc_id": h.doc_id, "score": h.score} for h in fanout.hits],
        "timings": timings,
        "warnings": warnings,
        "exclusions_applied": sorted(excluded),
        "backend_info": {
            **stack.gateway.info(),
            "max_tokens": cfg.inference.max_tokens,
            "seed": cfg.inference.seed,
        },
    }


def _safe(fn, arg):
    try:
        return fn(arg)
    except Exception as exc:  # per-document failures degrade, not abort
        return exc
