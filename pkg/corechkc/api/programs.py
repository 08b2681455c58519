"""REST endpoints over the checker, interpreters, compiler, emitter and fuzz harness."""

from __future__ import annotations

import asyncio
import logging

from fastapi import APIRouter, Depends, HTTPException
from pydantic import BaseModel, Field

from corechkc.checker import check_program
from corechkc.compiler import compile_program
from corechkc.config import settings
from corechkc.emit.checkedc import emit_checkedc
from corechkc.errors import ModelError
from corechkc.genprop.harness import run_properties
from corechkc.models.report import GenConfig, PropertyReport
from corechkc.models.syntax import Lit, Program
from corechkc.parser import parse_program
from corechkc.printer import print_corec_program, print_type
from corechkc.semantics import Status, run_program
from corechkc.store import RunStore

logger = logging.getLogger(__name__)
router = APIRouter(prefix="/api", tags=["programs"])

_store: RunStore | None = None


def get_store() -> RunStore:
    global _store
    if _store is None:
        _store = RunStore()
    return _store


class ProgramRequest(BaseModel):
    program: str


class EvalRequest(ProgramRequest):
    fuel: int = Field(default=settings.fuel, ge=1)
    trace: bool = False


class TypecheckResponse(BaseModel):
    type: str


class EvalResponse(BaseModel):
    outcome: str
    value: int | None = None
    trace: list[str] = Field(default_factory=list)


class CompileResponse(BaseModel):
    corec: str


class EmitResponse(BaseModel):
    checkedc: str


class FuzzResponse(BaseModel):
    run_id: str
    report: PropertyReport
    text: str


def _parse(text: str) -> Program:
    try:
        return parse_program(text)
    except ModelError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc


def _checked(text: str) -> Program:
    program = _parse(text)
    try:
        check_program(program)
    except ModelError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return program


@router.post("/typecheck", response_model=TypecheckResponse)
async def typecheck(req: ProgramRequest):
    program = _parse(req.program)
    try:
        ty = check_program(program)
    except ModelError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return TypecheckResponse(type=print_type(ty))


@router.post("/eval", response_model=EvalResponse)
async def evaluate(req: EvalRequest):
    program = _parse(req.program)
    outcome = run_program(program, req.fuel)
    finished = outcome.status is Status.FINISHED and isinstance(outcome.result, Lit)
    return EvalResponse(
        outcome=outcome.describe(),
        value=outcome.result.value if finished else None,
        trace=outcome.trace_lines() if req.trace else [],
    )


@router.post("/compile", response_model=CompileResponse)
async def compile_source(req: ProgramRequest):
    program = _checked(req.program)
    return CompileResponse(corec=print_corec_program(compile_program(program)))


@router.post("/emit", response_model=EmitResponse)
async def emit(req: ProgramRequest):
    program = _checked(req.program)
    try:
        text = emit_checkedc(program)
    except ModelError as exc:
        raise HTTPException(status_code=422, detail=str(exc)) from exc
    return EmitResponse(checkedc=text)


@router.post("/fuzz", response_model=FuzzResponse)
async def fuzz(cfg: GenConfig, store: RunStore = Depends(get_store)):
    report = await asyncio.to_thread(run_properties, cfg)
    run_id = store.save(report, cfg)
    return FuzzResponse(run_id=run_id, report=report, text=report.to_text())


@router.get("/runs", response_model=list[str])
async def list_runs(store: RunStore = Depends(get_store)):
    return store.list_runs()


@router.get("/runs/{run_id}", response_model=PropertyReport)
async def get_run(run_id: str, store: RunStore = Depends(get_store)):
    try:
        return store.load(run_id)
    except ValueError as exc:
        raise HTTPException(status_code=404, detail=str(exc)) from exc
