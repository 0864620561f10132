"""Seeded synthetic corpora and an in-process stack for tests and benches.

Documents are topic-clustered bags of real words so the character-ngram
embedder produces meaningful lexical similarity: queries built from a
topic's vocabulary retrieve that topic's documents.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import ann, corpus
from .config import AppConfig
from .context import LocalWorker, PromptTemplate
from .inference import InferenceGateway, ReferenceModel
from .pipeline import QueryStack

TOPICS: dict[str, list[str]] = {
    "mountains": "mountain peak summit ridge glacier altitude climber avalanche trail slope granite snowfield basecamp ascent alpine valley crevasse ropes oxygen elevation".split(),
    "markets": "market stock trading shares investor portfolio dividend earnings volatility index hedge asset bond yield inflation broker futures equity margin liquidity".split(),
    "oceans": "ocean current reef coral tide plankton salinity trench whale kelp buoy sonar seabed wave harbor vessel depth marine saltwater navigation".split(),
    "forests": "forest canopy timber lichen undergrowth seedling foliage habitat conifer deciduous roots bark fungus wildfire clearing moss sapling grove understory ranger".split(),
    "deserts": "desert dune sandstone oasis cactus drought mirage arid nomad scorpion mesa erosion basin salt windstorm caravan sparse heat canyon sediment".split(),
    "rivers": "river delta tributary rapids floodplain sediment estuary levee watershed meander confluence silt gorge dam spillway bank channel freshwater salmon barge".split(),
    "cities": "city avenue subway skyline borough traffic zoning pavement tram transit plaza district municipal streetlight corridor commuter viaduct crosswalk precinct quarter".split(),
    "storms": "storm thunder lightning hail cyclone barometer downpour gust squall forecast radar cumulonimbus humidity monsoon blizzard windchill front turbulence cell precipitation".split(),
}

_FILLERS = "the a of and in on with for near under across between during beyond along".split()


def _sentence(rng: np.random.Generator, bank: list[str], length: int) -> str:
    words = []
    for j in range(length):
        pool = bank if (j % 3 != 2) else _FILLERS
        words.append(pool[int(rng.integers(len(pool)))])
    return " ".join(words) + "."


def make_corpus(
    num_docs: int = 500,
    seed: int = 42,
    min_tokens: int = 200,
    max_tokens: int = 600,
) -> list[str]:
    rng = np.random.default_rng(seed)
    names = list(TOPICS)
    docs = []
    for i in range(num_docs):
        bank = TOPICS[names[i % len(names)]]
        target = int(rng.integers(min_tokens, max_tokens + 1))
        sentences, count = [], 0
        while count < target:
            n = int(rng.integers(8, 16))
            sentences.append(_sentence(rng, bank, n))
            count += n + 1  # the period detaches into its own token
        docs.append(" ".join(sentences))
    return docs


def make_queries(num: int = 50, seed: int = 43) -> list[str]:
    rng = np.random.default_rng(seed)
    names = list(TOPICS)
    queries = []
    for i in range(num):
        bank = TOPICS[names[i % len(names)]]
        picks = rng.choice(len(bank), size=3, replace=False)
        queries.append("what happens to the " + " ".join(bank[int(p)] for p in picks))
    return queries


def write_jsonl(texts: list[str], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for t in texts:
            fh.write(json.dumps({"text": t}) + "\n")
    return path


def build_stack(
    root: str | Path,
    texts: list[str],
    partitions: int = 1,
    config: AppConfig | None = None,
    build_seed: int = 0,
) -> QueryStack:
    """Ingest texts, index embeddings across N partitions, wire a full stack."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    cfg = config or AppConfig()
    jsonl = write_jsonl(texts, root / "corpus.jsonl")
    store_dir = root / "store"
    corpus.ingest(jsonl, store_dir)
    store = corpus.CorpusStore(store_dir)

    from .embedder import HashedNgramEmbedder, RemoteEmbedder

    if cfg.embedder.kind == "remote":
        embedder = RemoteEmbedder(
            cfg.embedder.remote_url, cfg.embedder.dim, cfg.embedder.timeout_ms
        )
    else:
        embedder = HashedNgramEmbedder(dim=cfg.embedder.dim, seed=cfg.embedder.seed)

    vectors = np.asarray(embedder.embed_batch(texts), dtype=np.float32)
    count = len(texts)
    bounds = [round(p * count / partitions) for p in range(partitions + 1)]
    workers = []
    for pid in range(partitions):
        lo, hi = bounds[pid], bounds[pid + 1]
        manifest = ann.PartitionManifest(
            partition_id=pid, global_offset=lo, count=hi - lo
        )
        graph = ann.build(vectors[lo:hi], manifest, seed=build_seed)
        workers.append(LocalWorker(graph, manifest, default_beam=cfg.retrieval.beam))

    model = ReferenceModel(
        layers=cfg.inference.layers,
        heads=cfg.inference.heads,
        seed=cfg.inference.seed,
        dim=cfg.embedder.dim,
    )
    gateway = InferenceGateway(model, max_in_flight=cfg.inference.max_in_flight)
    template = PromptTemplate.load(cfg.prompt.template_path)
    return QueryStack(
        embedder=embedder,
        workers=workers,
        store=store,
        template=template,
        gateway=gateway,
        config=cfg,
    )
