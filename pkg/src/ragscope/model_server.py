"""HTTP wrapper exposing a model backend and an embedding endpoint.

Speaks the model wire protocol (POST /generate, POST /attention,
GET /info) plus the embedding protocol (POST /embed), so one process
can stand in for both the GPU node and the embedding service.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .embedder import HashedNgramEmbedder
from .errors import InvalidInputError
from .inference import ReferenceModel
from .schemas import (
    AttentionRequest,
    AttentionResponse,
    EmbedRequest,
    EmbedResponse,
    GenerateRequest,
    GenerateResponse,
    ModelInfoResponse,
)


def create_model_app(
    model: ReferenceModel | None = None,
    embedder: HashedNgramEmbedder | None = None,
) -> FastAPI:
    model = model or ReferenceModel()
    embedder = embedder or HashedNgramEmbedder()
    app = FastAPI(title="ragscope-model-server")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc.errors()[:3])})

    @app.get("/info", response_model=ModelInfoResponse)
    def info():
        return ModelInfoResponse(**model.info())

    @app.post("/generate", response_model=GenerateResponse)
    def generate(body: GenerateRequest):
        try:
            out = model.generate(body.prompt_tokens, body.max_tokens, body.seed)
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return GenerateResponse(output_tokens=out)

    @app.post("/attention", response_model=AttentionResponse)
    def attention(body: AttentionRequest):
        try:
            weights = model.attention(body.prompt_tokens, body.output_tokens)
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return AttentionResponse(
            layers=model.layers, heads=model.heads, weights=weights.tolist()
        )

    @app.post("/embed", response_model=EmbedResponse)
    def embed(body: EmbedRequest):
        try:
            vectors = embedder.embed_batch(body.texts)
        except InvalidInputError as exc:
            return JSONResponse(status_code=400, content={"error": str(exc)})
        return EmbedResponse(vectors=[v.tolist() for v in vectors])

    return app
