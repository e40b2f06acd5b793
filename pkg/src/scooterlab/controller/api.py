"""HTTP surface of the fleet controller.

Node protocol (chunk upload, finalize, config poll, battery), admin fleet
operations, the internal trip query API, and the census endpoint. Errors
render as ``{code, message, details}`` with the domain status code.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse

from ..core import codec
from ..core.errors import AuthFailure, DomainError, InvalidFilter, MalformedInput
from ..core.geo import GeoFence, GeoPoint
from ..ramp.queries import TripFilter, filter_trips, paginate, trip_summary
from .service import FleetController


def bearer_token(request: Request) -> str:
    auth = request.headers.get("authorization", "")
    if not auth.lower().startswith("bearer "):
        raise AuthFailure("missing bearer token")
    return auth[7:].strip()


def parse_region(text: str) -> GeoFence:
    """URL polygon encoding: 'lat,lon;lat,lon;...' (exterior ring only)."""
    try:
        points = []
        for pair in text.split(";"):
            lat, lon = pair.split(",")
            points.append(GeoPoint(float(lat), float(lon)))
        return GeoFence(points)
    except (ValueError, TypeError) as e:
        raise InvalidFilter(f"bad region polygon: {e}")


def filter_from_params(params) -> TripFilter:
    def opt_int(name):
        v = params.get(name)
        try:
            return int(v) if v is not None else None
        except ValueError:
            raise InvalidFilter(f"{name} must be an integer")

    scooter_ids = params.get("scooter_ids")
    region = params.get("region")
    min_distance = params.get("min_distance_m")
    try:
        min_distance = float(min_distance) if min_distance is not None else None
    except ValueError:
        raise InvalidFilter("min_distance_m must be a number")
    return TripFilter(
        project_id=params.get("project_id"),
        scooter_ids=frozenset(scooter_ids.split(",")) if scooter_ids else None,
        from_ms=opt_int("from_ms"),
        to_ms=opt_int("to_ms"),
        region=parse_region(region) if region else None,
        region_contained=params.get("contained", "").lower() in ("1", "true", "yes"),
        min_distance_m=min_distance,
    )


def install_error_handler(app: FastAPI) -> None:
    @app.exception_handler(DomainError)
    async def _domain_error(request: Request, exc: DomainError):
        return JSONResponse(status_code=exc.http_status, content=exc.to_obj())


def build_controller_app(fc: FleetController) -> FastAPI:
    app = FastAPI(title="scooterlab fleet controller", docs_url=None, redoc_url=None)
    install_error_handler(app)

    @app.get("/healthz")
    async def healthz():
        return {"ok": True, "service": "fleet-controller"}

    # ---- node protocol ----

    @app.put("/v1/chunks/{scooter_id}/{trip_id}/{seq}")
    async def put_chunk(scooter_id: str, trip_id: str, seq: int, request: Request):
        try:
            obj = await request.json()
        except Exception:
            raise MalformedInput("chunk body must be JSON")
        if not isinstance(obj, dict) or (obj.get("scooter_id"), obj.get("trip_id"), obj.get("seq")) != (scooter_id, trip_id, seq):
            raise MalformedInput("chunk body does not match the URL key")
        return fc.receive_chunk_json(obj, bearer_token(request))

    @app.post("/v1/trips/{scooter_id}/{trip_id}/finalize")
    async def finalize(scooter_id: str, trip_id: str, request: Request):
        body = await request.json()
        try:
            chunk_count = int(body["chunk_count"])
        except (KeyError, TypeError, ValueError):
            raise MalformedInput("finalize body needs an integer chunk_count")
        return fc.finalize_trip(scooter_id, trip_id, chunk_count, bearer_token(request))

    @app.get("/v1/config/{scooter_id}")
    async def get_config(scooter_id: str, request: Request, current: int = 0, battery: Optional[float] = None):
        cfg = fc.get_config(scooter_id, current, bearer_token(request), battery_pct=battery)
        if cfg is None:
            return Response(status_code=204)
        return cfg

    @app.get("/v1/scooters/{scooter_id}/battery")
    async def battery(scooter_id: str, request: Request):
        bearer_token(request)  # any valid bearer, scooter or admin
        return fc.battery_of(scooter_id)

    # ---- admin fleet ops ----

    @app.post("/v1/scooters")
    async def register(request: Request):
        body = await request.json()
        try:
            return fc.register_scooter(str(body["scooter_id"]), str(body.get("model", "segway-g30max")), bearer_token(request))
        except KeyError:
            raise MalformedInput("registration needs a scooter_id")

    @app.get("/v1/scooters")
    async def scooters(request: Request):
        fc._require_admin(bearer_token(request))
        return {"scooters": fc.list_scooters()}

    @app.post("/v1/configs/{scooter_id}")
    async def issue_config(scooter_id: str, request: Request):
        body = await request.json()
        policy = codec.parse_policy(body.get("policy"))
        cfg = fc.issue_config(scooter_id, policy, project_id=body.get("project_id"), token=bearer_token(request))
        return codec.config_obj(cfg)

    @app.post("/v1/loans")
    async def checkout(request: Request):
        body = await request.json()
        loan = fc.checkout(str(body.get("rider_id", "")), str(body.get("scooter_id", "")), body, bearer_token(request))
        return codec.loan_obj(loan)

    @app.post("/v1/loans/{loan_id}/renew")
    async def renew(loan_id: str, request: Request):
        body = await request.json()
        return codec.loan_obj(fc.renew(loan_id, body, bearer_token(request)))

    @app.post("/v1/loans/{loan_id}/return")
    async def loan_return(loan_id: str, request: Request):
        body = await request.json()
        return fc.return_and_inspect(loan_id, bool(body.get("inspection_pass", True)), bearer_token(request))

    # ---- internal query + census ----

    @app.get("/v1/trips")
    async def trips(request: Request):
        fc._require_admin(bearer_token(request))
        f = filter_from_params(request.query_params)
        matched = filter_trips(fc.storage.iter_trips(), f)
        limit = request.query_params.get("limit")
        page, cursor = paginate(matched, request.query_params.get("cursor"), int(limit) if limit else None)
        return {"trips": [trip_summary(t) for t in page], "next_cursor": cursor}

    @app.get("/v1/census")
    async def census(request: Request):
        fc._require_admin(bearer_token(request))
        return fc.sample_census()

    return app
