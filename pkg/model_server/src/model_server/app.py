"""HTTP surface: POST /v1/classify and GET /v1/health.

Errors are JSON {"error": str, "code": int} with a matching HTTP status:
404 unknown task, 413 oversize batch, 503 model not loaded (with a
Retry-After hint), 400 malformed request.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .registry import Registry


class ClassifyRequest(BaseModel):
    task: str
    texts: list[str]


class ServiceError(Exception):
    def __init__(self, code: int, message: str, retry_after: int | None = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.retry_after = retry_after


def create_app(registry: Registry) -> FastAPI:
    app = FastAPI(title="reaction-model-server")

    @app.exception_handler(ServiceError)
    async def service_error(_: Request, exc: ServiceError) -> JSONResponse:
        headers = {"Retry-After": str(exc.retry_after)} if exc.retry_after else None
        return JSONResponse({"error": exc.message, "code": exc.code},
                            status_code=exc.code, headers=headers)

    @app.exception_handler(RequestValidationError)
    async def validation_error(_: Request, exc: RequestValidationError) -> JSONResponse:
        return JSONResponse({"error": str(exc.errors()[:1]), "code": 400}, status_code=400)

    @app.post("/v1/classify")
    async def classify(request: ClassifyRequest) -> dict:
        entry = registry.entries.get(request.task)
        if entry is None:
            raise ServiceError(404, f"unknown task {request.task!r}")
        if not request.texts:
            raise ServiceError(400, "texts must be non-empty")
        if len(request.texts) > entry.max_batch:
            raise ServiceError(
                413, f"batch of {len(request.texts)} exceeds max_batch={entry.max_batch}"
            )
        if not entry.loaded:
            raise ServiceError(503, f"model for {request.task!r} failed to load: "
                                    f"{entry.load_error}", retry_after=30)
        texts = request.texts
        if entry.prompt_template:
            texts = [entry.prompt_template.replace("{example}", t) for t in texts]
        labels, scores = entry.backend.classify(texts)
        return {"labels": labels, "scores": scores}

    @app.get("/v1/health")
    async def health() -> dict:
        return {
            "status": "ok" if registry.all_loaded else "degraded",
            "tasks": sorted(registry.entries),
            "timeout": registry.timeout,
            "max_batch": {task: e.max_batch for task, e in sorted(registry.entries.items())},
        }

    return app
