"""Canonical JSON encoding of every domain type.

This is the single wire and file schema: field names are fixed, timestamps
are integer UTC epoch milliseconds, coordinates are decimal degrees at full
double precision (repr round-trip, well past six fractional digits). Dicts
are built in documented field order and nested maps use sorted keys, so a
record always serializes to the same bytes.
"""

from __future__ import annotations

import hashlib
import json
from datetime import date
from typing import Any, Callable, Iterable, Optional

from .errors import MalformedChunk, MalformedInput
from .geo import GeoFence, GeoPoint
from .model import (
    ChunkKey,
    EnrichmentRecord,
    Loan,
    Project,
    Scooter,
    ScooterConfig,
    Trip,
    TripChunk,
    User,
)
from .policy import DataCollectionPolicy
from .schedule import DAY_NAMES, Schedule, ScheduleWindow
from .sensors import BlobRef, GpsFix, Scalar, SensorSample, Vector3


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False)


def _expect(obj: Any, cls: type, what: str):
    if not isinstance(obj, cls):
        raise MalformedInput(f"{what}: expected {cls.__name__}, got {type(obj).__name__}")
    return obj


def _num(obj: Any, what: str) -> float:
    if isinstance(obj, bool) or not isinstance(obj, (int, float)):
        raise MalformedInput(f"{what}: expected number")
    return obj


def _int(obj: Any, what: str) -> int:
    if isinstance(obj, bool) or not isinstance(obj, int):
        raise MalformedInput(f"{what}: expected integer")
    return obj


def _wrap(what: str, fn: Callable[[], Any]):
    try:
        return fn()
    except MalformedInput:
        raise
    except (ValueError, KeyError, TypeError) as e:
        raise MalformedInput(f"{what}: {e}")


# ---- geo ----

def point_obj(p: GeoPoint) -> dict:
    return {"lat": p.lat, "lon": p.lon}


def parse_point(obj: Any) -> GeoPoint:
    _expect(obj, dict, "point")
    return _wrap("point", lambda: GeoPoint(_num(obj.get("lat"), "lat"), _num(obj.get("lon"), "lon")))


def fence_obj(f: GeoFence) -> dict:
    return {"rings": [[point_obj(p) for p in ring] for ring in f.rings]}


def parse_fence(obj: Any) -> GeoFence:
    _expect(obj, dict, "fence")
    rings = _expect(obj.get("rings"), list, "fence.rings")
    if not rings:
        raise MalformedInput("fence needs at least an exterior ring")
    parsed = [[parse_point(p) for p in _expect(r, list, "fence ring")] for r in rings]
    return _wrap("fence", lambda: GeoFence(parsed[0], parsed[1:]))


# ---- schedule ----

def window_obj(w: ScheduleWindow) -> dict:
    return {
        "days": [DAY_NAMES[i] for i in sorted(w.days)],
        "start": f"{w.start_minute // 60:02d}:{w.start_minute % 60:02d}",
        "end": f"{w.end_minute // 60:02d}:{w.end_minute % 60:02d}",
        "tz": w.tz,
    }


def parse_window(obj: Any) -> ScheduleWindow:
    _expect(obj, dict, "schedule window")
    return _wrap(
        "schedule window",
        lambda: ScheduleWindow.of(obj["days"], obj["start"], obj["end"], obj["tz"]),
    )


def schedule_obj(s: Schedule) -> dict:
    return {
        "active_from": s.active_from.isoformat(),
        "active_until": s.active_until.isoformat(),
        "windows": [window_obj(w) for w in s.windows],
    }


def parse_schedule(obj: Any) -> Schedule:
    _expect(obj, dict, "schedule")
    windows = tuple(parse_window(w) for w in obj.get("windows", []))
    return _wrap(
        "schedule",
        lambda: Schedule(date.fromisoformat(obj["active_from"]), date.fromisoformat(obj["active_until"]), windows),
    )


# ---- policy / config ----

def policy_obj(p: DataCollectionPolicy) -> dict:
    return {
        "sensors": {k: p.sensors[k] for k in sorted(p.sensors)},
        "fence": fence_obj(p.fence) if p.fence is not None else None,
        "schedule": schedule_obj(p.schedule),
    }


def parse_policy(obj: Any) -> DataCollectionPolicy:
    _expect(obj, dict, "policy")
    sensors = _expect(obj.get("sensors"), dict, "policy.sensors")
    rates = {str(k): _num(v, f"rate for {k}") for k, v in sensors.items()}
    fence = parse_fence(obj["fence"]) if obj.get("fence") is not None else None
    schedule = parse_schedule(obj.get("schedule"))
    return DataCollectionPolicy(sensors=rates, schedule=schedule, fence=fence)


def config_obj(c: ScooterConfig) -> dict:
    return {
        "scooter_id": c.scooter_id,
        "version": c.version,
        "policy": policy_obj(c.policy),
        "issued_at": c.issued_at,
        "project_id": c.project_id,
    }


def parse_config(obj: Any) -> ScooterConfig:
    _expect(obj, dict, "config")
    return _wrap(
        "config",
        lambda: ScooterConfig(
            scooter_id=_expect(obj["scooter_id"], str, "config.scooter_id"),
            version=_int(obj["version"], "config.version"),
            policy=parse_policy(obj["policy"]),
            issued_at=_int(obj["issued_at"], "config.issued_at"),
            project_id=obj.get("project_id"),
        ),
    )


# ---- samples / chunks ----

def _value_obj(v) -> dict:
    if isinstance(v, Scalar):
        return {"type": "scalar", "value": v.value, "unit": v.unit}
    if isinstance(v, Vector3):
        return {"type": "vector3", "x": v.x, "y": v.y, "z": v.z, "unit": v.unit}
    if isinstance(v, GpsFix):
        return {
            "type": "fix",
            "lat": v.point.lat,
            "lon": v.point.lon,
            "speed_mps": v.speed_mps,
            "heading_deg": v.heading_deg,
            "hdop": v.hdop,
        }
    if isinstance(v, BlobRef):
        return {"type": "blob_ref", "byte_len": v.byte_len, "digest": v.digest}
    raise MalformedInput(f"unknown sample value {type(v).__name__}")


def _parse_value(obj: Any):
    _expect(obj, dict, "sample value")
    t = obj.get("type")
    if t == "scalar":
        return Scalar(_num(obj["value"], "scalar.value"), _expect(obj["unit"], str, "scalar.unit"))
    if t == "vector3":
        return Vector3(_num(obj["x"], "x"), _num(obj["y"], "y"), _num(obj["z"], "z"), _expect(obj["unit"], str, "unit"))
    if t == "fix":
        return GpsFix(
            point=GeoPoint(_num(obj["lat"], "lat"), _num(obj["lon"], "lon")),
            speed_mps=_num(obj["speed_mps"], "speed_mps"),
            heading_deg=_num(obj["heading_deg"], "heading_deg"),
            hdop=_num(obj["hdop"], "hdop"),
        )
    if t == "blob_ref":
        return BlobRef(_int(obj["byte_len"], "byte_len"), _expect(obj["digest"], str, "digest"))
    raise MalformedInput(f"unknown sample value type {t!r}")


def sample_obj(s: SensorSample) -> dict:
    return {
        "scooter_id": s.scooter_id,
        "trip_id": s.trip_id,
        "kind": s.kind,
        "t": s.t,
        "value": _value_obj(s.value),
    }


def sample_line(s: SensorSample) -> str:
    """Canonical one-line encoding; the unit of the digest census."""
    return canonical_dumps(sample_obj(s))


def parse_sample(obj: Any) -> SensorSample:
    _expect(obj, dict, "sample")
    return _wrap(
        "sample",
        lambda: SensorSample(
            scooter_id=_expect(obj["scooter_id"], str, "sample.scooter_id"),
            trip_id=_expect(obj["trip_id"], str, "sample.trip_id"),
            kind=_expect(obj["kind"], str, "sample.kind"),
            t=_int(obj["t"], "sample.t"),
            value=_parse_value(obj["value"]),
        ),
    )


def chunk_digest(samples: Iterable[SensorSample]) -> str:
    """SHA-256 over the newline-joined canonical sample lines."""
    h = hashlib.sha256()
    first = True
    for s in samples:
        if not first:
            h.update(b"\n")
        h.update(sample_line(s).encode("utf-8"))
        first = False
    return h.hexdigest()


def chunk_obj(c: TripChunk) -> dict:
    return {
        "scooter_id": c.key.scooter_id,
        "trip_id": c.key.trip_id,
        "seq": c.key.seq,
        "samples": [sample_obj(s) for s in c.samples],
        "sealed_at": c.sealed_at,
        "config_version": c.config_version,
        "digest": c.digest,
    }


def parse_chunk(obj: Any, verify_digest: bool = True) -> TripChunk:
    if not isinstance(obj, dict):
        raise MalformedChunk("chunk body must be a JSON object")
    try:
        key = ChunkKey(
            scooter_id=_expect(obj["scooter_id"], str, "chunk.scooter_id"),
            trip_id=_expect(obj["trip_id"], str, "chunk.trip_id"),
            seq=_int(obj["seq"], "chunk.seq"),
        )
        samples = tuple(parse_sample(s) for s in _expect(obj["samples"], list, "chunk.samples"))
        chunk = TripChunk(
            key=key,
            samples=samples,
            sealed_at=_int(obj["sealed_at"], "chunk.sealed_at"),
            config_version=_int(obj["config_version"], "chunk.config_version"),
            digest=_expect(obj["digest"], str, "chunk.digest"),
        )
    except (MalformedInput, ValueError, KeyError, TypeError) as e:
        raise MalformedChunk(f"bad chunk: {e}")
    if verify_digest and chunk.digest != chunk_digest(chunk.samples):
        raise MalformedChunk("chunk digest does not match its samples")
    return chunk


def make_chunk(key: ChunkKey, samples, sealed_at: int, config_version: int) -> TripChunk:
    return TripChunk(
        key=key,
        samples=tuple(samples),
        sealed_at=sealed_at,
        config_version=config_version,
        digest=chunk_digest(samples),
    )


# ---- fleet records ----

def scooter_obj(s: Scooter) -> dict:
    return {
        "scooter_id": s.scooter_id,
        "model": s.model,
        "battery_pct": s.battery_pct,
        "odometer_m": s.odometer_m,
        "status": s.status,
        "current_config_version": s.current_config_version,
    }


def parse_scooter(obj: Any) -> Scooter:
    _expect(obj, dict, "scooter")
    return _wrap(
        "scooter",
        lambda: Scooter(
            scooter_id=_expect(obj["scooter_id"], str, "scooter_id"),
            model=_expect(obj["model"], str, "model"),
            battery_pct=_num(obj["battery_pct"], "battery_pct"),
            odometer_m=_num(obj["odometer_m"], "odometer_m"),
            status=_expect(obj["status"], str, "status"),
            current_config_version=_int(obj["current_config_version"], "current_config_version"),
        ),
    )


def user_obj(u: User) -> dict:
    return {
        "user_id": u.user_id,
        "role": u.role,
        "display_name": u.display_name,
        "credential_digest": u.credential_digest,
    }


def parse_user(obj: Any) -> User:
    _expect(obj, dict, "user")
    return _wrap(
        "user",
        lambda: User(obj["user_id"], obj["role"], obj["display_name"], obj["credential_digest"]),
    )


def loan_obj(l: Loan) -> dict:
    return {
        "loan_id": l.loan_id,
        "rider_id": l.rider_id,
        "scooter_id": l.scooter_id,
        "started_at": l.started_at,
        "due_at": l.due_at,
        "returned_at": l.returned_at,
        "consent_ack": l.consent_ack,
        "safety_video_ack": l.safety_video_ack,
        "survey_done": l.survey_done,
    }


def parse_loan(obj: Any) -> Loan:
    _expect(obj, dict, "loan")
    return _wrap(
        "loan",
        lambda: Loan(
            loan_id=obj["loan_id"],
            rider_id=obj["rider_id"],
            scooter_id=obj["scooter_id"],
            started_at=_int(obj["started_at"], "started_at"),
            due_at=_int(obj["due_at"], "due_at"),
            consent_ack=bool(obj["consent_ack"]),
            safety_video_ack=bool(obj["safety_video_ack"]),
            survey_done=bool(obj["survey_done"]),
            returned_at=obj.get("returned_at"),
        ),
    )


def project_obj(p: Project) -> dict:
    return {
        "project_id": p.project_id,
        "owner": p.owner,
        "title": p.title,
        "policy": policy_obj(p.policy),
        "fleet": sorted(p.fleet),
        "state": p.state,
    }


def parse_project(obj: Any) -> Project:
    _expect(obj, dict, "project")
    return _wrap(
        "project",
        lambda: Project(
            project_id=obj["project_id"],
            owner=obj["owner"],
            title=obj["title"],
            policy=parse_policy(obj["policy"]),
            fleet=frozenset(_expect(obj["fleet"], list, "fleet")),
            state=obj["state"],
        ),
    )


# ---- trips / enrichment ----

def enrichment_obj(r: EnrichmentRecord) -> dict:
    return {
        "source": r.source,
        "valid_for": {"cell": r.cell, "hour_utc": r.hour_utc},
        "payload": {k: r.payload[k] for k in sorted(r.payload)},
        "fetched_at": r.fetched_at,
        "status": r.status,
    }


def parse_enrichment(obj: Any) -> EnrichmentRecord:
    _expect(obj, dict, "enrichment record")
    vf = _expect(obj.get("valid_for"), dict, "valid_for")
    return _wrap(
        "enrichment record",
        lambda: EnrichmentRecord(
            source=obj["source"],
            cell=vf["cell"],
            hour_utc=_int(vf["hour_utc"], "hour_utc"),
            payload=dict(obj["payload"]),
            fetched_at=_int(obj["fetched_at"], "fetched_at"),
            status=obj["status"],
        ),
    )


def trip_obj(t: Trip) -> dict:
    return {
        "trip_id": t.trip_id,
        "scooter_id": t.scooter_id,
        "loan_id": t.loan_id,
        "project_id": t.project_id,
        "started_at": t.started_at,
        "ended_at": t.ended_at,
        "samples": {k: [sample_obj(s) for s in t.samples[k]] for k in sorted(t.samples)},
        "distance_m": t.distance_m,
        "enrichment": [enrichment_obj(r) for r in t.enrichment],
        "quality_flags": sorted(t.quality_flags),
    }


def trip_line(t: Trip) -> str:
    return canonical_dumps(trip_obj(t))


def parse_trip(obj: Any) -> Trip:
    _expect(obj, dict, "trip")
    samples = _expect(obj.get("samples"), dict, "trip.samples")
    return _wrap(
        "trip",
        lambda: Trip(
            trip_id=obj["trip_id"],
            scooter_id=obj["scooter_id"],
            started_at=_int(obj["started_at"], "started_at"),
            ended_at=_int(obj["ended_at"], "ended_at"),
            samples={k: [parse_sample(s) for s in v] for k, v in samples.items()},
            distance_m=_num(obj["distance_m"], "distance_m"),
            loan_id=obj.get("loan_id"),
            project_id=obj.get("project_id"),
            enrichment=[parse_enrichment(r) for r in obj.get("enrichment", [])],
            quality_flags=frozenset(obj.get("quality_flags", [])),
        ),
    )
