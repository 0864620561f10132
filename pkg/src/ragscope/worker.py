"""HTTP service hosting one partition's index."""

from __future__ import annotations

import hmac
import json
import logging
import threading
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from . import ann
from .errors import InvalidInputError
from .schemas import (
    HitOut,
    WorkerHealthResponse,
    WorkerSearchRequest,
    WorkerSearchResponse,
)

logger = logging.getLogger(__name__)


def load_manifest(index_path: str | Path) -> ann.PartitionManifest | None:
    """Partition metadata rides in a JSON sidecar next to the index file."""
    sidecar = Path(index_path).with_suffix(".manifest.json")
    if not sidecar.exists():
        return None
    data = json.loads(sidecar.read_text(encoding="utf-8"))
    return ann.PartitionManifest(
        partition_id=int(data["partition_id"]),
        global_offset=int(data["global_offset"]),
        count=int(data["count"]),
    )


def save_manifest(index_path: str | Path, manifest: ann.PartitionManifest) -> None:
    sidecar = Path(index_path).with_suffix(".manifest.json")
    sidecar.write_text(
        json.dumps(
            {
                "partition_id": manifest.partition_id,
                "global_offset": manifest.global_offset,
                "count": manifest.count,
            }
        ),
        encoding="utf-8",
    )


def create_worker_app(
    index_path: str | Path | None = None,
    graph: ann.AnnGraph | None = None,
    manifest: ann.PartitionManifest | None = None,
    default_beam: int = 64,
    token: str | None = None,
    load_now: bool = True,
) -> FastAPI:
    """Build the worker app.

    Pass either a pre-loaded graph (tests, in-process use) or an
    index_path. With ``load_now=False`` the index loads on the first
    call to ``app.state.load_index()`` and /health answers 503 until
    then.
    """
    if graph is None and index_path is None:
        raise InvalidInputError("worker needs an index_path or a graph")

    app = FastAPI(title="ragscope-worker")
    app.state.graph = graph
    app.state.manifest = manifest
    app.state.default_beam = default_beam
    app.state.requests_served = 0
    lock = threading.Lock()

    def load_index() -> None:
        if app.state.graph is None:
            app.state.graph = ann.load(index_path)
            logger.info("loaded index %s (%d vectors)", index_path, app.state.graph.count)
        if app.state.manifest is None:
            side = load_manifest(index_path) if index_path is not None else None
            g = app.state.graph
            app.state.manifest = side or ann.PartitionManifest(
                partition_id=0, global_offset=g.global_offset, count=g.count
            )

    app.state.load_index = load_index
    if load_now:
        load_index()

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    def authorized(request: Request) -> bool:
        if token is None:
            return True
        header = request.headers.get("Authorization", "")
        presented = header.removeprefix("Bearer ").strip() if header else ""
        return hmac.compare_digest(presented.encode(), token.encode())

    @app.post("/search", response_model=WorkerSearchResponse)
    def search(body: WorkerSearchRequest, request: Request):
        if not authorized(request):
            return JSONResponse(status_code=401, content={"error": "unauthorized"})
        if app.state.graph is None:
            return JSONResponse(status_code=503, content={"error": "index loading"})
        with lock:
            app.state.requests_served += 1
        beam = max(body.beam or app.state.default_beam, body.k)
        try:
            hits = app.state.graph.search(body.embedding, body.k, beam)
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return WorkerSearchResponse(
            hits=[HitOut(doc_id=h.doc_id, score=h.score) for h in hits],
            partition_id=app.state.manifest.partition_id,
        )

    @app.get("/health", response_model=WorkerHealthResponse)
    def health():
        if app.state.graph is None or app.state.manifest is None:
            return JSONResponse(status_code=503, content={"status": "loading"})
        return WorkerHealthResponse(
            status="ok",
            partition_id=app.state.manifest.partition_id,
            count=app.state.manifest.count,
            requests_served=app.state.requests_served,
        )

    return app
