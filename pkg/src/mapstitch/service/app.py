"""FastAPI application exposing the map-restoration engine."""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..errors import InvalidConfig, MapstitchError, ScenarioMismatch
from ..presets import list_scenarios, scenario_text
from . import core, schemas


def create_app() -> FastAPI:
    app = FastAPI(
        title="mapstitch",
        description="Submap-based map restoration engine for multi-session "
                    "monocular SLAM, driven by synthetic scenarios.",
        version=__version__,
    )

    @app.exception_handler(InvalidConfig)
    async def _invalid_config(request, exc: InvalidConfig):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=400, content={"detail": str(exc), "field": exc.field})

    @app.exception_handler(MapstitchError)
    async def _domain_error(request, exc: MapstitchError):
        from fastapi.responses import JSONResponse

        return JSONResponse(status_code=422, content={"detail": str(exc)})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.get("/scenarios", response_model=schemas.ScenarioListResponse)
    def scenarios():
        return schemas.ScenarioListResponse(scenarios=list_scenarios())

    @app.get("/scenarios/{name}")
    def scenario(name: str):
        import json

        return json.loads(scenario_text(name))

    @app.post("/run", response_model=schemas.RunResponse)
    def run(request: schemas.RunRequest):
        return core.run(request)

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(request: schemas.CompareRequest):
        try:
            return core.compare(request)
        except ScenarioMismatch as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    @app.post("/query", response_model=schemas.QueryResponse)
    def query(request: schemas.QueryRequest):
        return core.query(request)

    @app.post("/graph-dot", response_model=schemas.GraphDotResponse)
    def graph_dot(request: schemas.GraphDotRequest):
        return core.graph_dot(request)

    return app


app = create_app()
