"""Public API: authentication, orchestration, and error mapping."""

from __future__ import annotations

import hashlib
import hmac
import logging

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.middleware.gzip import GZipMiddleware
from fastapi.responses import JSONResponse

from .errors import (
    GenerationError,
    InvalidInputError,
    ProtocolError,
    RagscopeError,
    RetrievalUnavailableError,
    TransportError,
)
from .pipeline import QueryStack, run_query
from .schemas import ApiHealthResponse, QueryRequest, QueryResponse

logger = logging.getLogger(__name__)

UNAUTHENTICATED_PATHS = {"/api/health"}


def request_fingerprint(path: str, body: bytes) -> str:
    """Deterministic request id: same request bytes, same id."""
    h = hashlib.blake2b(digest_size=8)
    h.update(path.encode())
    h.update(b"\x00")
    h.update(body)
    return "r" + h.hexdigest()


def create_api_app(stack: QueryStack) -> FastAPI:
    cfg = stack.config
    keys = [k.encode() for k in cfg.api.keys]
    app = FastAPI(title="ragscope-api")
    app.add_middleware(GZipMiddleware, minimum_size=1024)
    if cfg.cors.origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=cfg.cors.origins,
            allow_methods=["GET", "POST"],
            allow_headers=["X-API-Key", "Content-Type"],
        )

    @app.middleware("http")
    async def require_api_key(request: Request, call_next):
        if request.url.path in UNAUTHENTICATED_PATHS or not keys:
            return await call_next(request)
        presented = request.headers.get("X-API-Key", "").encode()
        ok = False
        for key in keys:  # constant-time per candidate; no early exit
            ok |= hmac.compare_digest(presented, key)
        if not ok:
            body = await request.body()
            return JSONResponse(
                status_code=401,
                content={
                    "error": "unauthorized",
                    "request_id": request_fingerprint(request.url.path, body),
                },
            )
        return await call_next(request)

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        body = await request.body()
        return JSONResponse(
            status_code=400,
            content={
                "error": str(exc.errors()[:3]),
                "request_id": request_fingerprint(request.url.path, body),
            },
        )

    async def handle(request: Request, body: QueryRequest, allow_exclusions: bool):
        raw = await request.body()
        rid = request_fingerprint(request.url.path, raw)
        if body.excluded_doc_ids and not allow_exclusions:
            return JSONResponse(
                status_code=400,
                content={
                    "error": "excluded_doc_ids requires /api/rewrite",
                    "request_id": rid,
                },
            )
        try:
            payload = run_query(
                stack,
                body.query,
                k=body.k,
                snippet_method=body.snippet_method,
                excluded_doc_ids=body.excluded_doc_ids,
            )
        except InvalidInputError as exc:
            return JSONResponse(
                status_code=400, content={"error": str(exc), "request_id": rid}
            )
        except RetrievalUnavailableError as exc:
            return JSONResponse(
                status_code=503, content={"error": str(exc), "request_id": rid}
            )
        except (TransportError, GenerationError, ProtocolError) as exc:
            return JSONResponse(
                status_code=502, content={"error": str(exc), "request_id": rid}
            )
        except RagscopeError as exc:
            logger.exception("pipeline failure for %s", rid)
            return JSONResponse(
                status_code=500, content={"error": str(exc), "request_id": rid}
            )
        payload["request_id"] = rid
        return QueryResponse(**payload)

    @app.post("/api/query", response_model=QueryResponse)
    async def api_query(body: QueryRequest, request: Request):
        return await handle(request, body, allow_exclusions=False)

    @app.post("/api/rewrite", response_model=QueryResponse)
    async def api_rewrite(body: QueryRequest, request: Request):
        return await handle(request, body, allow_exclusions=True)

    @app.get("/api/health", response_model=ApiHealthResponse)
    def api_health():
        return ApiHealthResponse(
            status="ok",
            workers=len(stack.workers),
            backend=stack.gateway.info().get("model_name", "unknown"),
        )

    return app
