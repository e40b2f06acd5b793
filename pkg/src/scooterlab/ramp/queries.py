"""Trip filtering, pagination, GeoJSON, statistics, and export encodings.

Pure functions over assembled trips; authorization happens in the service
layer above. Region matching defaults to *intersects* (at least one fix
inside the fence), with a contained-only flag. Time matching overlaps the
trip interval with the half-open [from, to) range. Results are ordered by
(started_at, trip_id) and paginated with an opaque cursor, so exports are
deterministic for a fixed store state.
"""

from __future__ import annotations

import base64
import csv
import io
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

from ..core import codec
from ..core.errors import InvalidFilter
from ..core.geo import GeoFence, point_in_fence
from ..core.model import EMPTY_TRIP, Trip
from ..core.sensors import GPS, BlobRef, GpsFix, Scalar, Vector3

DEFAULT_PAGE = 100
MAX_PAGE = 1000


@dataclass(frozen=True)
class TripFilter:
    project_id: Optional[str] = None
    scooter_ids: Optional[frozenset[str]] = None
    from_ms: Optional[int] = None
    to_ms: Optional[int] = None
    region: Optional[GeoFence] = None
    region_contained: bool = False
    min_distance_m: Optional[float] = None

    def __post_init__(self):
        if all(
            v is None
            for v in (self.project_id, self.scooter_ids, self.from_ms, self.to_ms, self.region, self.min_distance_m)
        ):
            raise InvalidFilter("a trip filter needs at least one criterion")
        if self.from_ms is not None and self.to_ms is not None and not self.from_ms < self.to_ms:
            raise InvalidFilter("time range requires from < to")


def trip_matches(trip: Trip, f: TripFilter) -> bool:
    """All present criteria must hold."""
    if f.project_id is not None and trip.project_id != f.project_id:
        return False
    if f.scooter_ids is not None and trip.scooter_id not in f.scooter_ids:
        return False
    if f.to_ms is not None and trip.started_at >= f.to_ms:
        return False
    if f.from_ms is not None and trip.ended_at < f.from_ms:
        return False
    if f.min_distance_m is not None and trip.distance_m < f.min_distance_m:
        return False
    if f.region is not None:
        fixes = trip.samples.get(GPS, ())
        if not fixes:
            return False
        inside = (point_in_fence(s.value.point, f.region) for s in fixes)
        if f.region_contained:
            if not all(inside):
                return False
        elif not any(inside):
            return False
    return True


def _order_key(trip: Trip) -> tuple:
    return (trip.started_at, trip.trip_id)


def encode_cursor(trip: Trip) -> str:
    raw = f"{trip.started_at}:{trip.trip_id}".encode("utf-8")
    return base64.urlsafe_b64encode(raw).decode("ascii")


def decode_cursor(cursor: str) -> tuple:
    try:
        raw = base64.urlsafe_b64decode(cursor.encode("ascii")).decode("utf-8")
        started, trip_id = raw.split(":", 1)
        return (int(started), trip_id)
    except Exception:
        raise InvalidFilter(f"bad cursor {cursor!r}")


def filter_trips(trips: list[Trip], f: TripFilter) -> list[Trip]:
    return sorted((t for t in trips if trip_matches(t, f)), key=_order_key)


def paginate(matched: list[Trip], cursor: Optional[str], limit: Optional[int]) -> tuple[list[Trip], Optional[str]]:
    limit = min(limit or DEFAULT_PAGE, MAX_PAGE)
    if limit < 1:
        raise InvalidFilter("limit must be positive")
    if cursor:
        after = decode_cursor(cursor)
        matched = [t for t in matched if _order_key(t) > after]
    page = matched[:limit]
    next_cursor = encode_cursor(page[-1]) if len(matched) > limit else None
    return page, next_cursor


def trip_summary(trip: Trip) -> dict:
    return {
        "trip_id": trip.trip_id,
        "scooter_id": trip.scooter_id,
        "project_id": trip.project_id,
        "loan_id": trip.loan_id,
        "started_at": trip.started_at,
        "ended_at": trip.ended_at,
        "duration_s": trip.duration_s(),
        "distance_m": trip.distance_m,
        "sample_counts": trip.sample_counts(),
        "quality_flags": sorted(trip.quality_flags),
        "enrichment": [codec.enrichment_obj(r) for r in trip.enrichment],
    }


# ---- GeoJSON ----

def trips_geojson(trips: list[Trip], include_samples: bool = False) -> dict:
    features = []
    for trip in sorted(trips, key=_order_key):
        fixes = trip.samples.get(GPS, [])
        features.append(
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[s.value.point.lon, s.value.point.lat] for s in fixes],
                },
                "properties": trip_summary(trip),
            }
        )
        if include_samples:
            features.extend(_scalar_points(trip, fixes))
    return {"type": "FeatureCollection", "features": features}


def _scalar_points(trip: Trip, fixes: list) -> list[dict]:
    """Point features for scalar kinds, placed at the nearest fix in time."""
    out = []
    if not fixes:
        return out
    fix_ts = [s.t for s in fixes]
    for kind in sorted(trip.samples):
        for s in trip.samples[kind]:
            if not isinstance(s.value, Scalar):
                continue
            nearest = min(range(len(fix_ts)), key=lambda i: abs(fix_ts[i] - s.t))
            p = fixes[nearest].value.point
            out.append(
                {
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": [p.lon, p.lat]},
                    "properties": {
                        "trip_id": trip.trip_id,
                        "kind": kind,
                        "t": s.t,
                        "value": s.value.value,
                        "unit": s.value.unit,
                    },
                }
            )
    return out


# ---- statistics ----

def stats_report(matched: list[Trip], include_empty: bool = False) -> dict:
    """Aggregate totals plus per-day and per-scooter buckets.

    Totals are accumulated from the per-day buckets (in sorted day order),
    so bucket sums reconcile with totals exactly, not just within float
    error. Trips flagged EmptyTrip are excluded unless asked for.
    """
    trips = [t for t in matched if include_empty or EMPTY_TRIP not in t.quality_flags]
    per_day: dict[str, dict] = {}
    per_scooter: dict[str, dict] = {}
    for t in trips:
        day = datetime.fromtimestamp(t.started_at / 1000.0, tz=timezone.utc).date().isoformat()
        for bucket in (per_day.setdefault(day, {"count": 0, "distance_m": 0.0}),
                       per_scooter.setdefault(t.scooter_id, {"count": 0, "distance_m": 0.0})):
            bucket["count"] += 1
            bucket["distance_m"] += t.distance_m
    per_day = {k: per_day[k] for k in sorted(per_day)}
    total_distance = sum(b["distance_m"] for b in per_day.values())
    total_duration = sum(t.duration_s() for t in trips)
    return {
        "trip_count": len(trips),
        "total_distance_m": total_distance,
        "total_duration_s": total_duration,
        "mean_speed_mps": (total_distance / total_duration) if total_duration > 0 else 0.0,
        "per_day": per_day,
        "per_scooter": {k: per_scooter[k] for k in sorted(per_scooter)},
    }


# ---- export ----

CSV_COLUMNS = [
    "trip_id", "scooter_id", "kind", "t_ms",
    "lat", "lon", "speed_mps", "heading_deg",
    "v0", "v1", "v2", "scalar", "unit",
]


def export_csv(matched: list[Trip]) -> str:
    """One row per sample, header always present, empty where inapplicable."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for trip in sorted(matched, key=_order_key):
        for kind in sorted(trip.samples):
            for s in trip.samples[kind]:
                row = {"trip_id": trip.trip_id, "scooter_id": trip.scooter_id, "kind": kind, "t_ms": s.t}
                v = s.value
                if isinstance(v, GpsFix):
                    row.update(lat=v.point.lat, lon=v.point.lon, speed_mps=v.speed_mps, heading_deg=v.heading_deg)
                elif isinstance(v, Vector3):
                    row.update(v0=v.x, v1=v.y, v2=v.z, unit=v.unit)
                elif isinstance(v, Scalar):
                    row.update(scalar=v.value, unit=v.unit)
                elif isinstance(v, BlobRef):
                    pass  # opaque payload: identity and timestamp only
                writer.writerow([row.get(c, "") for c in CSV_COLUMNS])
    return buf.getvalue()


def export_jsonl(matched: list[Trip]) -> str:
    return "".join(codec.trip_line(t) + "\n" for t in sorted(matched, key=_order_key))
