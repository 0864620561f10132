"""Typed application config with YAML loading."""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, Field, ValidationError

from .errors import ConfigError


class EmbedderConfig(BaseModel):
    kind: Literal["reference", "remote"] = "reference"
    dim: int = 64
    seed: int = 13
    remote_url: str | None = None
    timeout_ms: int = 5000


class RetrievalConfig(BaseModel):
    k_default: int = Field(default=5, ge=1)
    beam: int = Field(default=64, ge=1)


class SnippetConfig(BaseModel):
    method: Literal["naive_first", "sliding_window"] = "sliding_window"
    window: int = Field(default=128, ge=1)
    stride: int = Field(default=64, ge=1)


class PromptConfig(BaseModel):
    template_path: str | None = None


class FanoutConfig(BaseModel):
    timeout_ms: int = 5000


class InferenceConfig(BaseModel):
    backend: Literal["reference", "remote"] = "reference"
    layers: int = Field(default=2, ge=1)
    heads: int = Field(default=4, ge=1)
    seed: int = 0
    max_tokens: int = Field(default=100, ge=1)
    remote_url: str | None = None
    timeout_ms: int = 30_000
    max_in_flight: int = Field(default=1, ge=1)


class ApiConfig(BaseModel):
    keys: list[str] = Field(default_factory=list)
    listen: str = "127.0.0.1:8080"


class CorsConfig(BaseModel):
    origins: list[str] = Field(default_factory=list)


class AppConfig(BaseModel):
    corpus_dir: str | None = None
    workers: list[str] = Field(default_factory=list)
    worker_token: str | None = None
    embedder: EmbedderConfig = Field(default_factory=EmbedderConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    snippet: SnippetConfig = Field(default_factory=SnippetConfig)
    prompt: PromptConfig = Field(default_factory=PromptConfig)
    fanout: FanoutConfig = Field(default_factory=FanoutConfig)
    inference: InferenceConfig = Field(default_factory=InferenceConfig)
    api: ApiConfig = Field(default_factory=ApiConfig)
    cors: CorsConfig = Field(default_factory=CorsConfig)


def load_config(path: str | Path | None) -> AppConfig:
    if path is None:
        return AppConfig()
    try:
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping, got {type(raw).__name__}")
    try:
        return AppConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"config {path} invalid: {exc}") from exc
