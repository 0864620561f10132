"""Command-line entry points.

Service commands (worker, model-server, api) wrap uvicorn around the app
factories; data commands (ingest, build-index, synth) produce on-disk
artifacts; query and bench are thin API clients.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import ann, bench, corpus, synth
from .config import load_config
from .errors import RagscopeError


def _parse_listen(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    if not host or not port.isdigit():
        raise RagscopeError(f"--listen must be host:port, got {value!r}")
    return host, int(port)


def _serve(app, listen: str) -> None:
    import uvicorn

    host, port = _parse_listen(listen)
    uvicorn.run(app, host=host, port=port, log_level="info")


def cmd_ingest(args) -> int:
    stats = corpus.ingest(args.input, args.out, field=args.field)
    print(f"ingested {stats.num_documents} documents, {stats.num_tokens} tokens")
    return 0


def cmd_build_index(args) -> int:
    store = corpus.CorpusStore(args.store)
    from .embedder import HashedNgramEmbedder

    embedder = HashedNgramEmbedder(dim=args.dim, seed=args.embed_seed)
    texts = [doc.text for doc in store.iter_documents()]
    vectors = np.asarray(embedder.embed_batch(texts), dtype=np.float32)
    count = len(texts)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    params = ann.BuildParams(R=args.R, L_build=args.L_build, alpha=args.alpha)
    bounds = [round(p * count / args.partitions) for p in range(args.partitions + 1)]
    for pid in range(args.partitions):
        lo, hi = bounds[pid], bounds[pid + 1]
        manifest = ann.PartitionManifest(partition_id=pid, global_offset=lo, count=hi - lo)
        graph = ann.build(vectors[lo:hi], manifest, params, seed=args.build_seed)
        index_path = out_dir / f"partition-{pid}.rvix"
        graph.save(index_path)
        from .worker import save_manifest

        save_manifest(index_path, manifest)
        print(f"partition {pid}: {hi - lo} vectors -> {index_path}")
    return 0


def cmd_worker(args) -> int:
    from .worker import create_worker_app

    app = create_worker_app(
        index_path=args.index, default_beam=args.beam, token=args.token
    )
    _serve(app, args.listen)
    return 0


def cmd_model_server(args) -> int:
    from .embedder import HashedNgramEmbedder
    from .inference import ReferenceModel
    from .model_server import create_model_app

    model = ReferenceModel(
        layers=args.layers, heads=args.heads, seed=args.seed, dim=args.dim
    )
    app = create_model_app(model, HashedNgramEmbedder(dim=args.dim, seed=args.embed_seed))
    _serve(app, args.listen)
    return 0


def _stack_from_config(cfg):
    from .context import HttpWorkerClient, PromptTemplate
    from .corpus import CorpusStore
    from .embedder import HashedNgramEmbedder, RemoteEmbedder
    from .inference import InferenceGateway, ReferenceModel, RemoteModelClient
    from .pipeline import QueryStack

    if not cfg.workers:
        raise RagscopeError("config has no workers")
    if not cfg.corpus_dir:
        raise RagscopeError("config has no corpus_dir")
    workers = [
        HttpWorkerClient(url, timeout_ms=cfg.fanout.timeout_ms, token=cfg.worker_token)
        for url in cfg.workers
    ]
    if cfg.embedder.kind == "remote":
        embedder = RemoteEmbedder(
            cfg.embedder.remote_url, cfg.embedder.dim, cfg.embedder.timeout_ms
        )
    else:
        embedder = HashedNgramEmbedder(dim=cfg.embedder.dim, seed=cfg.embedder.seed)
    if cfg.inference.backend == "remote":
        backend = RemoteModelClient(cfg.inference.remote_url, cfg.inference.timeout_ms)
    else:
        backend = ReferenceModel(
            layers=cfg.inference.layers,
            heads=cfg.inference.heads,
            seed=cfg.inference.seed,
            dim=cfg.embedder.dim,
        )
    return QueryStack(
        embedder=embedder,
        workers=workers,
        store=CorpusStore(cfg.corpus_dir),
        template=PromptTemplate.load(cfg.prompt.template_path),
        gateway=InferenceGateway(backend, max_in_flight=cfg.inference.max_in_flight),
        config=cfg,
    )


def cmd_api(args) -> int:
    from .service import create_api_app

    cfg = load_config(args.config)
    app = create_api_app(_stack_from_config(cfg))
    _serve(app, args.listen or cfg.api.listen)
    return 0


def cmd_query(args) -> int:
    import httpx

    body = {"query": args.query}
    if args.k is not None:
        body["k"] = args.k
    if args.method:
        body["snippet_method"] = args.method
    path = "/api/query"
    if args.exclude:
        body["excluded_doc_ids"] = args.exclude
        path = "/api/rewrite"
    resp = httpx.Client(base_url=args.api, headers={"X-API-Key": args.key}, timeout=120).post(
        path, json=body
    )
    if resp.status_code != 200:
        print(f"error {resp.status_code}: {resp.text}", file=sys.stderr)
        return 1
    payload = resp.json()
    print("answer:", " ".join(payload["answer_tokens"]))
    for d in payload["doc_scores"]:
        print(f"  doc {d['doc_id']}: share {d['share']:.4f}")
    for w in payload["warnings"]:
        print(f"  warning: {w}", file=sys.stderr)
    return 0


def _in_process_stack(args):
    import tempfile

    texts = synth.make_corpus(num_docs=args.docs, seed=args.seed)
    root = Path(tempfile.mkdtemp(prefix="ragscope-bench-"))
    return synth.build_stack(root, texts, partitions=args.partitions)


def cmd_bench_latency(args) -> int:
    queries = bench.load_queries(args.queries)
    if args.in_process:
        client = bench.InProcessClient(_in_process_stack(args))
    else:
        if not args.api or not args.key:
            print("bench latency needs --api and --key (or --in-process)", file=sys.stderr)
            return 2
        client = bench.LiveClient(args.api, args.key)
    report = bench.run_latency(queries, client)
    print(bench.format_report(report))
    if args.out:
        bench.write_report(report, args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_bench_snippet(args) -> int:
    queries = bench.load_queries(args.queries)
    stack = _in_process_stack(args)
    report = bench.compare_snippeting(queries, stack, args.window, args.stride, k=args.k)
    print(bench.format_report(report))
    if args.out:
        bench.write_report(report, args.out)
        print(f"report written to {args.out}")
    return 0


def cmd_synth(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    synth.write_jsonl(synth.make_corpus(num_docs=args.docs, seed=args.seed), out / "corpus.jsonl")
    (out / "queries.txt").write_text(
        "\n".join(synth.make_queries(num=args.queries, seed=args.seed + 1)) + "\n",
        encoding="utf-8",
    )
    print(f"wrote {args.docs} docs and {args.queries} queries to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ragscope")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("ingest", help="load a JSONL corpus into a document store")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--field", default="text")
    sp.set_defaults(fn=cmd_ingest)

    sp = sub.add_parser("build-index", help="embed a store and build partition indexes")
    sp.add_argument("--store", required=True)
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--partitions", type=int, default=1)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--embed-seed", type=int, default=13)
    sp.add_argument("--R", type=int, default=ann.BuildParams().R)
    sp.add_argument("--L-build", type=int, default=ann.BuildParams().L_build)
    sp.add_argument("--alpha", type=float, default=ann.BuildParams().alpha)
    sp.add_argument("--build-seed", type=int, default=0)
    sp.set_defaults(fn=cmd_build_index)

    sp = sub.add_parser("worker", help="serve one partition index")
    sp.add_argument("--listen", required=True)
    sp.add_argument("--index", required=True)
    sp.add_argument("--beam", type=int, default=64)
    sp.add_argument("--token", default=None)
    sp.set_defaults(fn=cmd_worker)

    sp = sub.add_parser("model-server", help="serve the reference model and embedder")
    sp.add_argument("--listen", required=True)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--heads", type=int, default=4)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dim", type=int, default=64)
    sp.add_argument("--embed-seed", type=int, default=13)
    sp.set_defaults(fn=cmd_model_server)

    sp = sub.add_parser("api", help="serve the public API from a config file")
    sp.add_argument("--config", required=True)
    sp.add_argument("--listen", default=None)
    sp.set_defaults(fn=cmd_api)

    sp = sub.add_parser("query", help="send one query to a running API")
    sp.add_argument("query")
    sp.add_argument("--api", required=True)
    sp.add_argument("--key", required=True)
    sp.add_argument("--k", type=int, default=None)
    sp.add_argument("--method", choices=["naive_first", "sliding_window"], default=None)
    sp.add_argument("--exclude", type=int, action="append", default=None)
    sp.set_defaults(fn=cmd_query)

    sp = sub.add_parser("bench", help="latency and snippeting benchmarks")
    bench_sub = sp.add_subparsers(dest="bench_command", required=True)

    bl = bench_sub.add_parser("latency")
    bl.add_argument("--queries", required=True)
    bl.add_argument("--api", default=None)
    bl.add_argument("--key", default=None)
    bl.add_argument("--in-process", action="store_true")
    bl.add_argument("--docs", type=int, default=500)
    bl.add_argument("--partitions", type=int, default=2)
    bl.add_argument("--seed", type=int, default=42)
    bl.add_argument("--out", default=None)
    bl.set_defaults(fn=cmd_bench_latency)

    bs = bench_sub.add_parser("snippet")
    bs.add_argument("--queries", required=True)
    bs.add_argument("--window", type=int, default=128)
    bs.add_argument("--stride", type=int, default=64)
    bs.add_argument("--k", type=int, default=None)
    bs.add_argument("--docs", type=int, default=500)
    bs.add_argument("--partitions", type=int, default=1)
    bs.add_argument("--seed", type=int, default=42)
    bs.add_argument("--out", default=None)
    bs.set_defaults(fn=cmd_bench_snippet)

    sp = sub.add_parser("synth", help="generate a synthetic corpus and query file")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--docs", type=int, default=500)
    sp.add_argument("--queries", type=int, default=50)
    sp.add_argument("--seed", type=int, default=42)
    sp.set_defaults(fn=cmd_synth)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (RagscopeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
