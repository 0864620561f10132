"""Pydantic wire schemas for every HTTP surface."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

# ---------------------------------------------------------------- public API


class QueryRequest(BaseModel):
    query: str = Field(min_length=1)
    k: int | None = Field(default=None, ge=1)
    snippet_method: Literal["naive_first", "sliding_window"] | None = None
    excluded_doc_ids: list[int] = Field(default_factory=list)


class SegmentOut(BaseModel):
    kind: Literal["template", "document", "query"]
    doc_id: int | None = None
    token_start: int
    token_end: int
    tokens: list[str]


class AttributionOut(BaseModel):
    """Flat row-major (out_len x in_len) matrix; mean over layers/heads."""

    out_len: int
    in_len: int
    values: list[float]


class DocScoreOut(BaseModel):
    doc_id: int
    raw: float
    share: float


class HitOut(BaseModel):
    doc_id: int
    score: float


class QueryResponse(BaseModel):
    request_id: str
    answer_tokens: list[str]
    segments: list[SegmentOut]
    attribution: AttributionOut
    doc_scores: list[DocScoreOut]
    hits: list[HitOut]
    timings: dict[str, float]
    warnings: list[str]
    exclusions_applied: list[int]
    backend_info: dict


class ErrorResponse(BaseModel):
    error: str
    request_id: str


class ApiHealthResponse(BaseModel):
    status: str
    workers: int
    backend: str


# ------------------------------------------------------------------- worker


class WorkerSearchRequest(BaseModel):
    embedding: list[float] = Field(min_length=1)
    k: int = Field(ge=1)
    beam: int | None = Field(default=None, ge=1)


class WorkerSearchResponse(BaseModel):
    hits: list[HitOut]
    partition_id: int


class WorkerHealthResponse(BaseModel):
    status: str
    partition_id: int
    count: int
    requests_served: int


# ------------------------------------------------------------- model server


class GenerateRequest(BaseModel):
    prompt_tokens: list[str] = Field(min_length=1)
    max_tokens: int = Field(default=100, ge=1)
    seed: int = 0


class GenerateResponse(BaseModel):
    output_tokens: list[str]


class AttentionRequest(BaseModel):
    prompt_tokens: list[str] = Field(min_length=1)
    output_tokens: list[str] = Field(min_length=1)


class AttentionResponse(BaseModel):
    layers: int
    heads: int
    weights: list  # nested [layers][heads][out_len][in_len + out_len]


class ModelInfoResponse(BaseModel):
    model_name: str
    layers: int
    heads: int


class EmbedRequest(BaseModel):
    texts: list[str] = Field(min_length=1)


class EmbedResponse(BaseModel):
    vectors: list[list[float]]
