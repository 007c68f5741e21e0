"""HTTP surface: run, sweep, optimize, and validate beamline configs.

Output files travel base64-encoded inside JSON so a thin client can
write them to disk byte-for-byte; simulation is deterministic for a
given config + seed, so repeated requests reproduce identical payloads.
"""

from __future__ import annotations

import base64
from typing import Dict, List, Optional

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from .config import load_config, scenario_names, scenario_text, serialize
from .errors import LovsimError
from .runner import (
    ALL_OUTPUTS,
    OBJECTIVES,
    RunSpec,
    run,
    run_optimize,
    run_sweep,
)

app = FastAPI(
    title="lovsim",
    description="Simulator of polarized spin-1/2 beams through magnetic beamline "
    "elements, producing lattices of spin-orbit correlations.",
)


class ConfigSource(BaseModel):
    """Either an inline config document or the name of a packaged scenario."""

    config_text: Optional[str] = None
    scenario: Optional[str] = None

    def resolve_text(self) -> str:
        if (self.config_text is None) == (self.scenario is None):
            raise HTTPException(
                status_code=422,
                detail={"category": "config", "message": "provide exactly one of config_text or scenario"},
            )
        if self.scenario is not None:
            return scenario_text(self.scenario)
        return self.config_text


class RunRequest(ConfigSource):
    seed: Optional[int] = None
    n_rays: Optional[int] = Field(default=None, ge=1)
    outputs: List[str] = list(ALL_OUTPUTS)
    csv: bool = False


class FilePayload(BaseModel):
    name: str
    content_b64: str


class RunResponse(BaseModel):
    report: str
    summary: dict
    files: List[FilePayload]


class SweepRequest(RunRequest):
    param: Optional[str] = None
    values: Optional[List[float]] = None


class SweepResponse(BaseModel):
    param: str
    values: List[float]
    runs: List[RunResponse]


class OptimizeRequest(ConfigSource):
    objective: str = "visibility"
    free_currents: Optional[List[int]] = None
    seed: Optional[int] = None
    n_rays: Optional[int] = Field(default=None, ge=1)
    bounds: List[float] = [0.0, 10.0]


class OptimizeResponse(BaseModel):
    currents: List[float]
    objective: float
    initial_objective: float
    flat: bool
    evaluations: int
    trace: List[dict]


class ValidateResponse(BaseModel):
    valid: bool
    resolved_config: str
    applied_defaults: List[str]
    sweep: Optional[dict] = None


def _error(exc: LovsimError) -> HTTPException:
    return HTTPException(status_code=422, detail={"category": exc.category, "message": str(exc)})


def _to_response(result) -> RunResponse:
    files = [
        FilePayload(name=name, content_b64=base64.b64encode(data).decode("ascii"))
        for name, data in sorted(result.files.items())
    ]
    return RunResponse(report=result.report, summary=result.summary, files=files)


@app.get("/scenarios")
def list_scenarios() -> Dict[str, List[str]]:
    return {"scenarios": scenario_names()}


@app.post("/validate", response_model=ValidateResponse)
def validate(request: ConfigSource):
    try:
        bundle = load_config(request.resolve_text())
    except LovsimError as exc:
        raise _error(exc)
    sweep = None
    if bundle.sweep is not None:
        sweep = {"param": bundle.sweep.param, "values": list(bundle.sweep.values)}
    return ValidateResponse(
        valid=True,
        resolved_config=serialize(bundle.config),
        applied_defaults=list(bundle.applied_defaults),
        sweep=sweep,
    )


@app.post("/run", response_model=RunResponse)
def run_endpoint(request: RunRequest):
    try:
        spec = RunSpec(
            config_text=request.resolve_text(),
            seed=request.seed,
            n_rays=request.n_rays,
            outputs=tuple(request.outputs),
            csv=request.csv,
        )
        result = run(spec)
    except LovsimError as exc:
        raise _error(exc)
    return _to_response(result)


@app.post("/sweep", response_model=SweepResponse)
def sweep_endpoint(request: SweepRequest):
    try:
        text = request.resolve_text()
        param, values = request.param, request.values
        if param is None or values is None:
            bundle = load_config(text)
            if bundle.sweep is None:
                raise HTTPException(
                    status_code=422,
                    detail={"category": "config",
                            "message": "no sweep block in config; pass param and values"},
                )
            param = param or bundle.sweep.param
            values = values or list(bundle.sweep.values)
        results = run_sweep(
            text, param, values, seed=request.seed, n_rays=request.n_rays,
            outputs=tuple(request.outputs), csv=request.csv,
        )
    except LovsimError as exc:
        raise _error(exc)
    return SweepResponse(param=param, values=list(values), runs=[_to_response(r) for r in results])


@app.post("/optimize", response_model=OptimizeResponse)
def optimize_endpoint(request: OptimizeRequest):
    if request.objective not in OBJECTIVES:
        raise HTTPException(
            status_code=422,
            detail={"category": "config", "message": f"objective must be one of {OBJECTIVES}"},
        )
    if len(request.bounds) != 2 or request.bounds[0] >= request.bounds[1]:
        raise HTTPException(
            status_code=422,
            detail={"category": "config", "message": "bounds must be [lo, hi] with lo < hi"},
        )
    try:
        result = run_optimize(
            request.resolve_text(),
            request.objective,
            free_indices=request.free_currents,
            seed=request.seed,
            n_rays=request.n_rays,
            bounds=tuple(request.bounds),
        )
    except LovsimError as exc:
        raise _error(exc)
    return OptimizeResponse(
        currents=result.currents,
        objective=result.objective,
        initial_objective=result.initial_objective,
        flat=result.flat,
        evaluations=result.evaluations,
        trace=[{"currents": c, "objective": v} for c, v in result.trace],
    )
