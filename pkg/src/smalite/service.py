"""HTTP service exposing the toolchain.

A thin FastAPI layer over `pipeline`: every endpoint takes program source
(and optionally an event trace) and returns the same text the CLI prints,
so the two frontends agree by construction. Stateful interpreter sessions
support interactive stepping.

Run with: `uvicorn smalite.service:app`.
"""

from __future__ import annotations

import itertools
import threading
from typing import Literal, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import pipeline
from .analysis import has_errors
from .compiler import dump_ir
from .core import Process
from .elaborate import ElabError
from .formats import TraceFormatError, parse_trace
from .parser import ParseError

app = FastAPI(title="smalite", version="0.1.0")


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


class ProgramRequest(BaseModel):
    source: str = Field(description="program source text")


class CheckRequest(ProgramRequest):
    prune: bool = True


class TraceRequest(ProgramRequest):
    trace: str = Field(description="event trace, one event per line")


class DiagnosticModel(BaseModel):
    severity: Literal["error", "warning"]
    code: str
    paths: list[str]
    message: str


class CheckResponse(BaseModel):
    ok: bool
    diagnostics: list[DiagnosticModel]


class DumpResponse(BaseModel):
    dump: str


class CompileRequest(ProgramRequest):
    target: Literal["ir", "c"] = "ir"
    prune: bool = True


class CompileResponse(BaseModel):
    target: Literal["ir", "c"]
    text: str


class GraphResponse(BaseModel):
    dot: str


class SessionCreateResponse(BaseModel):
    session_id: str
    dump: str


class StepRequest(BaseModel):
    event: str = Field(description="one `trigger <path>` or `assign <v> <path>` line")


class StepResponse(BaseModel):
    dump: str


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _load(source: str) -> Process:
    try:
        return pipeline.load(source)
    except (ParseError, ElabError) as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _events(trace: str):
    try:
        return parse_trace(trace)
    except TraceFormatError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _diag_models(diags) -> list[DiagnosticModel]:
    return [
        DiagnosticModel(
            severity=d.severity,
            code=d.code,
            paths=[str(q) for q in d.paths],
            message=d.message,
        )
        for d in diags
    ]


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------


@app.post("/check", response_model=CheckResponse)
def check(req: CheckRequest) -> CheckResponse:
    p = _load(req.source)
    _, diags = pipeline.analyze(p, prune=req.prune)
    return CheckResponse(ok=not has_errors(diags), diagnostics=_diag_models(diags))


@app.post("/interp", response_model=DumpResponse)
def interp(req: TraceRequest) -> DumpResponse:
    p = _load(req.source)
    return DumpResponse(dump=pipeline.interp_dumps(p, _events(req.trace)))


@app.post("/run", response_model=DumpResponse)
def run(req: TraceRequest) -> DumpResponse:
    p = _load(req.source)
    events = _events(req.trace)
    try:
        ir = pipeline.compile_ir(p)
    except pipeline.CheckFailure as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return DumpResponse(dump=pipeline.vm_dumps(ir, events))


@app.post("/compile", response_model=CompileResponse)
def compile_endpoint(req: CompileRequest) -> CompileResponse:
    p = _load(req.source)
    try:
        ir = pipeline.compile_ir(p, prune=req.prune)
    except pipeline.CheckFailure as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    if req.target == "c":
        from .cgen import emit_c

        return CompileResponse(target="c", text=emit_c(ir))
    return CompileResponse(target="ir", text=dump_ir(ir))


@app.post("/graph", response_model=GraphResponse)
def graph(req: CheckRequest) -> GraphResponse:
    p = _load(req.source)
    return GraphResponse(dot=pipeline.graph_dot(p, prune=req.prune))


# ---------------------------------------------------------------------------
# Sessions (interactive stepping over the reference interpreter)
# ---------------------------------------------------------------------------

_sessions: dict[str, pipeline.Session] = {}
_session_lock = threading.Lock()
_session_ids = itertools.count(1)


@app.post("/sessions", response_model=SessionCreateResponse)
def create_session(req: ProgramRequest) -> SessionCreateResponse:
    p = _load(req.source)
    session = pipeline.Session(p)
    with _session_lock:
        sid = f"s{next(_session_ids)}"
        _sessions[sid] = session
    return SessionCreateResponse(session_id=sid, dump=session.initial_dump())


def _session(sid: str) -> pipeline.Session:
    with _session_lock:
        session = _sessions.get(sid)
    if session is None:
        raise HTTPException(status_code=404, detail=f"no session {sid!r}")
    return session


@app.post("/sessions/{sid}/step", response_model=StepResponse)
def step_session(sid: str, req: StepRequest) -> StepResponse:
    session = _session(sid)
    events = _events(req.event)
    if len(events) != 1:
        raise HTTPException(status_code=422, detail="expected exactly one event")
    return StepResponse(dump=session.step(events[0]))


@app.delete("/sessions/{sid}")
def delete_session(sid: str) -> dict:
    with _session_lock:
        if _sessions.pop(sid, None) is None:
            raise HTTPException(status_code=404, detail=f"no session {sid!r}")
    return {"deleted": sid}
