"""Context building: worker fan-out, snippet extraction, prompt assembly.

The fan-out layer broadcasts a query embedding to every partition
worker, merges the partial top-k lists into a global ranking, and
filters exclusions. Retrieved documents are then reduced to snippets
(either the leading window or the best-scoring sliding window) and laid
out into a prompt whose every token range is tracked by kind, so
attention mass can later be attributed to individual documents.
"""

from __future__ import annotations

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import httpx
import numpy as np

from .ann import AnnGraph, PartitionManifest, SearchHit
from .corpus import DocumentRecord, Token, tokenize
from .errors import InvalidInputError, RetrievalUnavailableError, TransportError

logger = logging.getLogger(__name__)

DEFAULT_TEMPLATE = """Answer the question using only the provided documents.
{documents}
Question: {query}
Answer:"""


@dataclass(frozen=True)
class Snippet:
    """A contiguous token span chosen to stand in for a document."""

    doc_id: int
    token_start: int
    token_end: int
    tokens: tuple[Token, ...]
    text: str
    similarity: float | None = None


@dataclass(frozen=True)
class Segment:
    """One contiguous slice of the prompt token sequence."""

    kind: str  # "template" | "document" | "query"
    doc_id: int | None
    token_start: int
    token_end: int


@dataclass(frozen=True)
class ContextLayout:
    segments: tuple[Segment, ...]

    @property
    def prompt_len(self) -> int:
        return self.segments[-1].token_end if self.segments else 0

    def document_segments(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == "document"]


@dataclass(frozen=True)
class RetrievalPlan:
    k: int
    method: str = "sliding_window"  # or "naive_first"
    window: int = 128
    stride: int = 64
    excluded_doc_ids: frozenset[int] = frozenset()

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if self.method not in ("naive_first", "sliding_window"):
            raise InvalidInputError(f"unknown snippet method {self.method!r}")
        if not (1 <= self.stride <= self.window):
            raise InvalidInputError(
                f"stride must satisfy 1 <= stride <= window, got stride={self.stride} window={self.window}"
            )


class WorkerBackend(Protocol):
    """One partition's search endpoint, local or remote."""

    name: str

    def search(self, embedding: np.ndarray, k: int, beam: int | None = None) -> tuple[int, list[SearchHit]]:
        """Returns (partition_id, hits with global doc_ids)."""
        ...


class LocalWorker:
    """In-process worker over a loaded graph; counts requests for tests."""

    def __init__(self, graph: AnnGraph, manifest: PartitionManifest, default_beam: int = 64):
        self.graph = graph
        self.manifest = manifest
        self.default_beam = default_beam
        self.name = f"local:{manifest.partition_id}"
        self.request_count = 0

    def search(self, embedding, k, beam=None):
        self.request_count += 1
        if self.graph.count == 0:
            return self.manifest.partition_id, []
        eff = max(beam or self.default_beam, k)
        return self.manifest.partition_id, self.graph.search(embedding, k, eff)


class HttpWorkerClient:
    """Client for the worker HTTP surface (POST /search)."""

    def __init__(
        self,
        base_url: str,
        timeout_ms: int = 5000,
        token: str | None = None,
        client: httpx.Client | None = None,
    ):
        self.name = base_url
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._client = client or httpx.Client(
            base_url=base_url, timeout=timeout_ms / 1000.0, headers=headers
        )
        if client is not None and token:
            client.headers.update(headers)

    def search(self, embedding, k, beam=None):
        body = {"embedding": np.asarray(embedding, dtype=np.float64).tolist(), "k": k}
        if beam is not None:
            body["beam"] = beam
        try:
            resp = self._client.post("/search", json=body)
        except httpx.TimeoutException as exc:
            raise TransportError(f"worker {self.name} timed out: {exc}", kind="timeout") from exc
        except httpx.TransportError as exc:
            raise TransportError(f"worker {self.name} unreachable: {exc}", kind="refused") from exc
        if resp.status_code != 200:
            raise TransportError(f"worker {self.name} returned HTTP {resp.status_code}: {resp.text}")
        payload = resp.json()
        hits = [SearchHit(doc_id=h["doc_id"], score=h["score"]) for h in payload["hits"]]
        return payload["partition_id"], hits


@dataclass
class FanoutResult:
    hits: list[SearchHit]
    partial: bool = False
    failed_workers: list[str] = field(default_factory=list)
    worker_seconds: list[float] = field(default_factory=list)


def fanout_search(
    workers: list[WorkerBackend],
    query_vec: np.ndarray,
    k: int,
    excluded: frozenset[int] | set[int] = frozenset(),
    beam: int | None = None,
    timeout_s: float | None = None,
) -> FanoutResult:
    """Broadcast the query to every worker and merge into the global top-k.

    Each worker is asked for k + |excluded| hits so that k survivors
    remain after exclusion filtering. Merged order is score descending,
    ties by ascending doc_id. Failing workers degrade the result to
    partial coverage; only a total failure raises.
    """
    if not workers:
        raise RetrievalUnavailableError("no retrieval workers configured")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    per_worker_k = k + len(excluded)

    def call(worker: WorkerBackend):
        start = time.perf_counter()
        _, hits = worker.search(query_vec, per_worker_k, beam)
        return hits, time.perf_counter() - start

    results: list[list[SearchHit]] = []
    timings: list[float] = []
    failed: list[str] = []
    with ThreadPoolExecutor(max_workers=max(1, len(workers))) as pool:
        futures = [pool.submit(call, w) for w in workers]
        for worker, fut in zip(workers, futures):
            try:
                hits, elapsed = fut.result(timeout=timeout_s)
                results.append(hits)
                timings.append(elapsed)
            except Exception as exc:
                logger.warning("worker %s failed during fan-out: %s", worker.name, exc)
                failed.append(worker.name)
    if not results:
        raise RetrievalUnavailableError(
            f"all {len(workers)} workers failed: {', '.join(failed)}"
        )
    merged = [h for hits in results for h in hits if h.doc_id not in excluded]
    merged.sort(key=lambda h: (-h.score, h.doc_id))
    return FanoutResult(
        hits=merged[:k],
        partial=bool(failed),
        failed_workers=failed,
        worker_seconds=timings,
    )


def snippet_naive_first(doc: DocumentRecord, window: int) -> Snippet:
    """Represent the document by its first ``window`` tokens.

    Similarity is left unset; callers that need it (the snippeting
    comparison) embed the span lazily.
    """
    if not doc.tokens:
        raise InvalidInputError(f"document {doc.doc_id} has no tokens")
    end = min(window, len(doc.tokens))
    return Snippet(
        doc_id=doc.doc_id,
        token_start=0,
        token_end=end,
        tokens=doc.tokens[:end],
        text=_span_text(doc, 0, end),
    )


def snippet_sliding_window(
    doc: DocumentRecord,
    query_vec: np.ndarray,
    embedder,
    window: int,
    stride: int,
) -> Snippet:
    """Pick the stride-spaced window most similar to the query.

    Candidate starts are 0, stride, 2*stride, ... while start < token
    count; each window spans [start, min(start+window, len)). The winner
    maximizes inner product with the query embedding, ties going to the
    smallest start. Since start 0 is always a candidate, the winner's
    similarity is never below the leading window's.
    """
    if not doc.tokens:
        raise InvalidInputError(f"document {doc.doc_id} has no tokens")
    if not (1 <= stride <= window):
        raise InvalidInputError(f"invalid window/stride: {window}/{stride}")
    n = len(doc.tokens)
    starts = list(range(0, n, stride))
    spans = [(s, min(s + window, n)) for s in starts]
    texts = [_span_text(doc, s, e) for s, e in spans]
    vecs = embedder.embed_batch(texts)
    q = np.asarray(query_vec, dtype=np.float64)
    sims = [float(np.dot(np.asarray(v, dtype=np.float64), q)) for v in vecs]
    best = max(range(len(spans)), key=lambda i: (sims[i], -spans[i][0]))
    s, e = spans[best]
    return Snippet(
        doc_id=doc.doc_id,
        token_start=s,
        token_end=e,
        tokens=doc.tokens[s:e],
        text=texts[best],
        similarity=sims[best],
    )


def _span_text(doc: DocumentRecord, start: int, end: int) -> str:
    """Source text slice covering tokens [start, end)."""
    return doc.text[doc.tokens[start].char_start : doc.tokens[end - 1].char_end]


@dataclass(frozen=True)
class PromptTemplate:
    """Template text split around its {documents} and {query} placeholders."""

    preamble: str
    between: str
    suffix: str

    @classmethod
    def parse(cls, text: str) -> "PromptTemplate":
        if text.count("{documents}") != 1 or text.count("{query}") != 1:
            raise InvalidInputError(
                "template must contain {documents} and {query} exactly once"
            )
        head, rest = text.split("{documents}", 1)
        between, suffix = rest.split("{query}", 1)
        if not between.strip():
            raise InvalidInputError("{query} must come after {documents}")
        return cls(preamble=head.strip(), between=between.strip(), suffix=suffix.strip())

    @classmethod
    def load(cls, path: str | Path | None) -> "PromptTemplate":
        if path is None:
            return cls.parse(DEFAULT_TEMPLATE)
        return cls.parse(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class AssembledPrompt:
    prompt_tokens: tuple[str, ...]
    prompt_text: str
    layout: ContextLayout


def assemble_prompt(
    snippets: list[Snippet], query: str, template: PromptTemplate
) -> AssembledPrompt:
    """Lay out template, document snippets, and query into one token stream.

    Every emitted token belongs to exactly one segment; document headers
    ("[1]", "[2]", ...) are template segments so per-document attention
    scores cover content tokens only. Zero snippets is legal and yields
    a template+query prompt.
    """
    query_tokens = tokenize(query)
    if not query_tokens:
        raise InvalidInputError("query has no tokens")

    parts: list[tuple[str, int | None, tuple[str, ...], str]] = []

    def add(kind: str, doc_id: int | None, text: str, tokens=None):
        toks = tuple(t.surface for t in tokenize(text)) if tokens is None else tokens
        if toks:
            parts.append((kind, doc_id, toks, text))

    add("template", None, template.preamble)
    for rank, snip in enumerate(snippets, start=1):
        add("template", None, f"[{rank}]")
        add("document", snip.doc_id, snip.text, tuple(t.surface for t in snip.tokens))
    add("template", None, template.between)
    add("query", None, query, tuple(t.surface for t in query_tokens))
    add("template", None, template.suffix)

    segments: list[Segment] = []
    prompt_tokens: list[str] = []
    for kind, doc_id, toks, _text in parts:
        start = len(prompt_tokens)
        prompt_tokens.extend(toks)
        segments.append(
            Segment(kind=kind, doc_id=doc_id, token_start=start, token_end=len(prompt_tokens))
        )
    prompt_text = "\n".join(text for _, _, _, text in parts)
    return AssembledPrompt(
        prompt_tokens=tuple(prompt_tokens),
        prompt_text=prompt_text,
        layout=ContextLayout(segments=tuple(segments)),
    )
