"""HTTP/JSON service exposing allocation, glide-path and welfare endpoints.

Stateless apart from a read-only surface cache; see docs/api_reference.md
for the exact wire format.  Heuristic endpoints are always live; optimal-
policy queries require a cached risk-aversion surface and answer 409 with
guidance when none exists.
"""

from __future__ import annotations

import logging
import pathlib
import uuid

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import api_core, presets
from .errors import GlidepathError
from .hjb import load_surface, surface_cache_key
from .market import ContributionSchedule, MarketParams
from .welfare import StrategySpec, compare_strategies
from .utils import sig12

log = logging.getLogger(__name__)


class AllocateRequest(BaseModel):
    preset: str | None = None
    gamma: float = Field(gt=0.0)
    strategy: str = "pi3"
    alpha: float | None = None
    time: float | None = None
    wealth: float | None = None
    fidelity: str = "desk"


class GlidepathRequest(BaseModel):
    preset: str | None = None
    gamma: float = Field(gt=0.0)
    strategy: str = "pi3"
    alpha_grid: list[float] | None = None


class CompareRequest(BaseModel):
    preset: str | None = None
    gammas: list[float]
    strategies: list[str] = ["pi0", "pi1", "pi2", "pi3"]
    method: str = "pde"
    fidelity: str = "desk"
    mc_paths: int = 100_000
    mc_dt: float = 1.0 / 50.0
    seed: int = 20250810


class _Conflict(Exception):
    def __init__(self, detail):
        self.detail = detail


class _NotFound(Exception):
    def __init__(self, detail):
        self.detail = detail


def create_app(params: MarketParams | None = None,
               schedule: ContributionSchedule | None = None,
               cache_dir=None) -> FastAPI:
    """Build the service around a default market (the baseline preset)."""
    if params is None or schedule is None:
        params, schedule = presets.load_preset(presets.BASELINE)
    cache = pathlib.Path(cache_dir) if cache_dir is not None else None
    app = FastAPI(title="glidepath", version="0.1.0")

    def resolve(preset: str | None):
        if preset is None:
            return params, schedule
        try:
            return presets.load_preset(preset)
        except KeyError as exc:
            raise _NotFound(str(exc)) from exc

    def cached_surface(mkt, sched, gamma: float, fidelity: str):
        grid = presets.grid_for(fidelity, sched.horizon)
        key = surface_cache_key(mkt, sched, gamma, grid)
        path = (cache / f"rho-{key[:16]}.npz") if cache is not None else None
        if path is None or not path.exists():
            raise _Conflict(
                f"no cached risk-aversion surface for gamma={gamma} at fidelity "
                f"'{fidelity}'; run: glidepath solve-hjb --gamma {gamma} "
                f"--fidelity {fidelity}"
            )
        return load_surface(path)

    @app.exception_handler(RequestValidationError)
    async def on_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"detail": exc.errors()})

    @app.exception_handler(_NotFound)
    async def on_not_found(request: Request, exc: _NotFound):
        return JSONResponse(status_code=404, content={"detail": exc.detail})

    @app.exception_handler(_Conflict)
    async def on_conflict(request: Request, exc: _Conflict):
        return JSONResponse(status_code=409, content={"detail": exc.detail})

    @app.exception_handler(GlidepathError)
    async def on_domain_error(request: Request, exc: GlidepathError):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    @app.exception_handler(Exception)
    async def on_internal(request: Request, exc: Exception):
        correlation_id = uuid.uuid4().hex
        log.exception("internal error %s", correlation_id)
        return JSONResponse(status_code=500,
                            content={"detail": "internal error",
                                     "correlation_id": correlation_id})

    @app.get("/api/health")
    async def health():
        return {"status": "ok"}

    @app.post("/api/allocate")
    async def allocate(body: AllocateRequest):
        mkt, sched = resolve(body.preset)
        surface = None
        if body.strategy == "optimal":
            surface = cached_surface(mkt, sched, body.gamma, body.fidelity)
        return api_core.allocation_response(
            mkt, sched, strategy=body.strategy, gamma=body.gamma,
            alpha=body.alpha, time=body.time, wealth=body.wealth, surface=surface)

    @app.post("/api/glidepath")
    async def glidepath(body: GlidepathRequest):
        mkt, sched = resolve(body.preset)
        return api_core.glidepath_response(
            mkt, sched, gamma=body.gamma, strategy=body.strategy,
            alphas=body.alpha_grid)

    @app.post("/api/compare")
    async def compare(body: CompareRequest):
        mkt, sched = resolve(body.preset)
        grid = presets.grid_for(body.fidelity, sched.horizon)
        rows = []
        for gamma in body.gammas:
            specs = []
            for kind in body.strategies:
                if kind == "optimal":
                    surface = cached_surface(mkt, sched, gamma, body.fidelity)
                    specs.append(StrategySpec("optimal", gamma, surface=surface))
                else:
                    specs.append(StrategySpec(kind, gamma))
            report = compare_strategies(
                specs, mkt, sched, body.method, grid=grid,
                mc_paths=body.mc_paths, mc_dt=body.mc_dt, mc_seed=body.seed)
            for row in report.rows:
                rows.append({
                    "gamma": sig12(row.gamma), "strategy": row.strategy,
                    "ce": sig12(row.ce), "irr": sig12(row.irr),
                    "method": row.method,
                    "stderr": None if row.stderr is None else sig12(row.stderr),
                })
        return {"rows": rows}

    return app
