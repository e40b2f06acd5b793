"""HTTP surface of the researcher portal.

JSON API for users, sessions, projects, trip queries, stats, exports, and
fleet battery, plus optional static serving of a web UI bundle.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.middleware.cors import CORSMiddleware

from ..core import codec
from ..core.errors import MalformedInput
from ..controller.api import bearer_token, filter_from_params, install_error_handler
from .service import RampService


def build_ramp_app(ramp: RampService, static_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="scooterlab research portal", docs_url=None, redoc_url=None)
    install_error_handler(app)
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "service": "ramp"}

    # ---- users & sessions ----

    @app.post("/v1/users")
    async def create_user(request: Request):
        body = await request.json()
        try:
            return ramp.create_user(str(body["name"]), str(body["role"]), str(body["credential"]), bearer_token(request))
        except KeyError as e:
            raise MalformedInput(f"user body needs {e.args[0]}")

    @app.post("/v1/sessions")
    async def create_session(request: Request):
        body = await request.json()
        try:
            return ramp.authenticate(str(body["name"]), str(body["credential"]))
        except KeyError as e:
            raise MalformedInput(f"session body needs {e.args[0]}")

    # ---- projects ----

    @app.post("/v1/projects")
    async def create_project(request: Request):
        body = await request.json()
        policy = codec.parse_policy(body.get("policy"))
        fleet = body.get("fleet", [])
        if not isinstance(fleet, list):
            raise MalformedInput("fleet must be a list of scooter ids")
        return ramp.create_project(str(body.get("title", "untitled")), policy, [str(s) for s in fleet], bearer_token(request))

    @app.post("/v1/projects/{project_id}/activate")
    async def activate_project(project_id: str, request: Request):
        return ramp.activate_project(project_id, bearer_token(request))

    @app.get("/v1/projects")
    async def list_projects(request: Request):
        return {"projects": ramp.list_projects(bearer_token(request))}

    # ---- queries ----

    @app.get("/v1/trips")
    async def trips(request: Request):
        f = filter_from_params(request.query_params)
        limit = request.query_params.get("limit")
        return ramp.query_trips(
            f,
            bearer_token(request),
            cursor=request.query_params.get("cursor"),
            limit=int(limit) if limit else None,
        )

    @app.get("/v1/trips/geojson")
    async def trips_geojson(request: Request, ids: str = "", include_samples: bool = False):
        trip_ids = [t for t in ids.split(",") if t]
        return ramp.get_trip_geojson(trip_ids, bearer_token(request), include_samples=include_samples)

    @app.get("/v1/stats")
    async def stats(request: Request, include_empty: bool = False):
        f = filter_from_params(request.query_params)
        return ramp.stats(f, bearer_token(request), include_empty=include_empty)

    @app.get("/v1/export")
    async def export(request: Request, format: str = "csv"):
        f = filter_from_params(request.query_params)
        body, content_type = ramp.export(f, format, bearer_token(request))
        return Response(content=body, media_type=content_type)

    # ---- battery ----

    @app.get("/v1/battery")
    async def battery(request: Request):
        return {"scooters": ramp.battery_levels(bearer_token(request))}

    if static_dir and Path(static_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app
