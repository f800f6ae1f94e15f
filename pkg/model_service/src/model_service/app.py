"""HTTP layer: request schemas, routes, and error mapping.

Malformed bodies return 400 with per-field diagnostics; model failures return
500 naming the offending model. Batch responses preserve request order and
length, and every inference route reports which inputs were clipped to the
context budget via a parallel "truncated" array.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, field_validator

from model_service.config import ServiceConfig
from model_service.models import LoadedModels, ModelError, load_models


class EmbedRequest(BaseModel):
    texts: list[str]

    @field_validator("texts")
    @classmethod
    def _non_blank(cls, value: list[str]) -> list[str]:
        for i, text in enumerate(value):
            if not text.strip():
                raise ValueError(f"texts[{i}] must contain non-whitespace text")
        return value


class PairItem(BaseModel):
    q_a: str
    c_a: str
    q_b: str
    c_b: str


class SpecificityRequest(BaseModel):
    pairs: list[PairItem]


class GenerateRequest(BaseModel):
    contexts: list[str]

    @field_validator("contexts")
    @classmethod
    def _non_blank(cls, value: list[str]) -> list[str]:
        for i, text in enumerate(value):
            if not text.strip():
                raise ValueError(f"contexts[{i}] must contain non-whitespace text")
        return value


def _field_path(loc: tuple) -> str:
    parts = [str(part) for part in loc if part != "body"]
    return ".".join(parts) or "body"


def create_app(config: ServiceConfig, models: LoadedModels | None = None) -> FastAPI:
    """Build the application; loads all models up front unless given some."""
    if models is None:
        models = load_models(config)

    app = FastAPI(title="model-service", docs_url=None, redoc_url=None)

    @app.exception_handler(RequestValidationError)
    async def _on_validation(request: Request, exc: RequestValidationError):
        details = [
            {"field": _field_path(tuple(err.get("loc", ()))), "message": err.get("msg", "")}
            for err in exc.errors()
        ]
        return JSONResponse(
            status_code=400, content={"error": "validation", "details": details}
        )

    @app.exception_handler(ValueError)
    async def _on_value_error(request: Request, exc: ValueError):
        return JSONResponse(
            status_code=400,
            content={
                "error": "validation",
                "details": [{"field": "body", "message": str(exc)}],
            },
        )

    @app.exception_handler(ModelError)
    async def _on_model_error(request: Request, exc: ModelError):
        return JSONResponse(
            status_code=500,
            content={
                "error": "model failure",
                "model_id": exc.model_id,
                "role": exc.role,
                "detail": str(exc),
            },
        )

    @app.post("/v1/embed")
    def embed(request: EmbedRequest) -> dict:
        vectors, truncated = models.embedder.embed(request.texts)
        return {"vectors": vectors, "truncated": truncated}

    @app.post("/v1/specificity")
    def specificity(request: SpecificityRequest) -> dict:
        pairs = [(p.q_a, p.c_a, p.q_b, p.c_b) for p in request.pairs]
        distributions, truncated = models.classifier.classify(pairs)
        return {"distributions": distributions, "truncated": truncated}

    @app.post("/v1/generate")
    def generate(request: GenerateRequest) -> dict:
        questions, truncated = models.generator.generate(request.contexts)
        return {"questions": questions, "truncated": truncated}

    @app.get("/health")
    def health() -> dict:
        return {"status": "ok", "model_ids": config.model_ids}

    return app


def serve(config: ServiceConfig, host: str = "0.0.0.0") -> None:
    """Load models, then block serving HTTP until interrupted."""
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=host, port=config.port)
