"""FastAPI application; run with ``cutbroker serve`` or any ASGI server."""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import CutBrokerError, is_input_error
from ..harness.sweeps import SweepReport
from . import operations
from .schemas import (ConfidentialityRequest, CutCheckRequest, CutCheckResponse,
                      IntegrityRequest, SimulateRequest, SimulateResponse)

app = FastAPI(title="cutbroker", version=__version__)


def error_kind(exc: Exception) -> str:
    return "config" if is_input_error(exc) else "runtime"


@app.exception_handler(CutBrokerError)
async def _package_error(request: Request, exc: CutBrokerError):
    kind = error_kind(exc)
    status = 400 if kind == "config" else 500
    return JSONResponse(status_code=status, content={"error": str(exc), "kind": kind})


@app.exception_handler(RequestValidationError)
async def _validation_error(request: Request, exc: RequestValidationError):
    where = "; ".join(
        f"{'.'.join(str(p) for p in e['loc'])}: {e['msg']}" for e in exc.errors()
    )
    return JSONResponse(status_code=400, content={"error": where, "kind": "config"})


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/simulate", response_model=SimulateResponse)
def simulate(req: SimulateRequest):
    return operations.simulate(req)


@app.post("/cut-check", response_model=CutCheckResponse)
def cut_check(req: CutCheckRequest):
    return operations.cut_check(req)


@app.post("/sweeps/integrity", response_model=SweepReport)
def integrity(req: IntegrityRequest):
    return operations.integrity(req)


@app.post("/sweeps/confidentiality", response_model=SweepReport)
def confidentiality(req: ConfidentialityRequest):
    return operations.confidentiality(req)
