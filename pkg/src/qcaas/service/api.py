"""HTTP/JSON API over ``QCaaSService``.

Routes::

    POST /v1/jobs                      {tenant, backend_id, shots, circuit, seed?} -> 201 {job_id}
    GET  /v1/jobs/{job_id}             job snapshot
    GET  /v1/backends                  backend descriptors, ordered by id
    GET  /v1/billing/{tenant}          {tenant, total, entries}
    POST /v1/factorize                 {tenant, n, max_attempts?, shots_per_attempt?, backend_id?, seed?}
                                       -> 202 {workflow_id}
    GET  /v1/factorize/{workflow_id}   status, result, trace and billed cost

Errors come back as ``{"error": {"code", "message", "diagnostics"?}}``.
"""
from __future__ import annotations

import json
from typing import Any

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .core import BadRequest, QCaaSService, ServiceError

_JOB_FIELDS = {"tenant", "backend_id", "shots", "circuit", "seed"}
_FACTORIZE_FIELDS = {"tenant", "n", "max_attempts", "shots_per_attempt", "backend_id", "seed"}


async def _json_object(request: Request, allowed: set[str], required: set[str]) -> dict:
    try:
        body = json.loads(await request.body())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise BadRequest(f"body is not valid JSON: {exc}") from None
    if not isinstance(body, dict):
        raise BadRequest("body must be a JSON object")
    problems = [f"{k}: missing required field" for k in sorted(required - body.keys())]
    problems += [f"{k}: unexpected field" for k in sorted(body.keys() - allowed)]
    if problems:
        raise BadRequest("request body failed validation", problems)
    return body


def create_app(service: QCaaSService) -> FastAPI:
    app = FastAPI(title="qcaas", version="0.1.0")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def _service_error(request: Request, exc: ServiceError) -> JSONResponse:
        return JSONResponse(status_code=exc.status, content={"error": exc.to_dict()})

    @app.post("/v1/jobs", status_code=201)
    async def submit_job(request: Request) -> dict[str, Any]:
        body = await _json_object(request, _JOB_FIELDS, {"tenant", "backend_id", "shots", "circuit"})
        job_id = service.submit_job(
            body["tenant"], body["circuit"], body["shots"], body["backend_id"], seed=body.get("seed")
        )
        return {"job_id": job_id}

    @app.get("/v1/jobs/{job_id}")
    def get_job(job_id: str) -> dict[str, Any]:
        return service.poll_job(job_id)

    @app.get("/v1/backends")
    def list_backends() -> list[dict[str, Any]]:
        return [b.to_dict() for b in service.list_backends()]

    @app.get("/v1/billing/{tenant}")
    def billing(tenant: str) -> dict[str, Any]:
        return service.billing(tenant)

    @app.post("/v1/factorize", status_code=202)
    async def factorize(request: Request) -> dict[str, Any]:
        body = await _json_object(request, _FACTORIZE_FIELDS, {"tenant", "n"})
        options = {k: body[k] for k in ("max_attempts", "shots_per_attempt", "backend_id", "seed") if k in body}
        workflow_id = service.factorize(body["tenant"], body["n"], **options)
        return {"workflow_id": workflow_id}

    @app.get("/v1/factorize/{workflow_id}")
    def get_workflow(workflow_id: str) -> dict[str, Any]:
        return service.poll_workflow(workflow_id)

    return app


def serve(config_path: str | None = None) -> None:
    import uvicorn

    from .config import load_config

    config = load_config(config_path)
    service = QCaaSService(config)
    try:
        uvicorn.run(create_app(service), host=config.host, port=config.port, log_level="info")
    finally:
        service.stop()
