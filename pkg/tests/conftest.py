"""Shared fixtures.

The expensive artifacts (the 10k-vector index, the partition tiling, the
500-document text stack) are built once per session and shared between
the module tests and the acceptance suite.
"""

from __future__ import annotations

import numpy as np
import pytest

from ragscope import ann, synth
from ragscope.config import AppConfig
from ragscope.context import LocalWorker

TEN_K = 10_000
DIM = 64
VECTOR_SEED = 7
BUILD_SEED = 0
QUERY_SEED = 99


def unit_rows(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    m = rng.standard_normal((n, d))
    return (m / np.linalg.norm(m, axis=1, keepdims=True)).astype(np.float32)


@pytest.fixture(scope="session")
def ten_k_vectors() -> np.ndarray:
    return unit_rows(np.random.default_rng(VECTOR_SEED), TEN_K, DIM)


@pytest.fixture(scope="session")
def ten_k_queries() -> np.ndarray:
    return unit_rows(np.random.default_rng(QUERY_SEED), 50, DIM).astype(np.float64)


@pytest.fixture(scope="session")
def ten_k_graph(ten_k_vectors) -> ann.AnnGraph:
    import time

    manifest = ann.PartitionManifest(partition_id=0, global_offset=0, count=TEN_K)
    t0 = time.perf_counter()
    graph = ann.build(ten_k_vectors, manifest, seed=BUILD_SEED)
    graph.build_seconds = time.perf_counter() - t0
    return graph


@pytest.fixture(scope="session")
def tiled_workers(ten_k_vectors) -> list[LocalWorker]:
    """Four exhaustive-beam workers splitting the 10k vectors evenly.

    Graph quality is irrelevant when the beam covers the whole
    partition, so a cheap build keeps this fixture fast.
    """
    workers = []
    tile = TEN_K // 4
    for pid in range(4):
        lo = pid * tile
        manifest = ann.PartitionManifest(partition_id=pid, global_offset=lo, count=tile)
        graph = ann.build(
            ten_k_vectors[lo : lo + tile],
            manifest,
            ann.BuildParams(R=8, L_build=16),
            seed=BUILD_SEED,
        )
        workers.append(LocalWorker(graph, manifest, default_beam=tile))
    return workers


@pytest.fixture(scope="session")
def text_stack(tmp_path_factory):
    """500 topic-clustered documents of 200-600 tokens behind a full stack."""
    cfg = AppConfig.model_validate(
        {
            "api": {"keys": ["test-key-0123456789abcdef"]},
            "retrieval": {"k_default": 5},
            "inference": {"max_tokens": 32},
        }
    )
    texts = synth.make_corpus(num_docs=500, seed=42, min_tokens=200, max_tokens=600)
    root = tmp_path_factory.mktemp("text-stack")
    return synth.build_stack(root, texts, partitions=2, config=cfg)


@pytest.fixture(scope="session")
def small_stack(tmp_path_factory):
    """Two dozen documents; fast enough for per-test HTTP round trips."""
    cfg = AppConfig.model_validate(
        {
            "api": {"keys": ["small-stack-key-00000000"]},
            "retrieval": {"k_default": 3},
            "inference": {"max_tokens": 16},
        }
    )
    texts = synth.make_corpus(num_docs=24, seed=5, min_tokens=60, max_tokens=160)
    root = tmp_path_factory.mktemp("small-stack")
    return synth.build_stack(root, texts, partitions=2, config=cfg)
