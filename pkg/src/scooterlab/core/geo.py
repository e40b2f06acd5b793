"""Geodesy and geofencing primitives.

Distances use a spherical earth of radius 6,371,000 m; at campus scale the
error against an ellipsoid is well under 0.5% and irrelevant here.
Geofences are simple polygons (one exterior ring, optional hole rings) on
the lat/lon plane, with the boundary counting as inside.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

EARTH_RADIUS_M = 6_371_000.0

#: Physical speed cap of the modeled vehicle, 18 mph in m/s.
MAX_SPEED_MPS = 8.05


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise ValueError("coordinates must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} out of range [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} out of range [-180, 180]")


def haversine_distance(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance between two points, in meters.

    Symmetric, non-negative, and zero exactly for identical coordinates.
    """
    if a.lat == b.lat and a.lon == b.lon:
        return 0.0
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlat = lat2 - lat1
    dlon = math.radians(b.lon - a.lon)
    h = math.sin(dlat / 2.0) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin(dlon / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def initial_bearing_deg(a: GeoPoint, b: GeoPoint) -> float:
    """Initial great-circle bearing from ``a`` toward ``b``, degrees in [0, 360)."""
    lat1 = math.radians(a.lat)
    lat2 = math.radians(b.lat)
    dlon = math.radians(b.lon - a.lon)
    y = math.sin(dlon) * math.cos(lat2)
    x = math.cos(lat1) * math.sin(lat2) - math.sin(lat1) * math.cos(lat2) * math.cos(dlon)
    return math.degrees(math.atan2(y, x)) % 360.0


def offset_point(p: GeoPoint, north_m: float, east_m: float) -> GeoPoint:
    """Displace ``p`` by meters north/east (small-offset approximation)."""
    dlat = math.degrees(north_m / EARTH_RADIUS_M)
    dlon = math.degrees(east_m / (EARTH_RADIUS_M * math.cos(math.radians(p.lat))))
    return GeoPoint(p.lat + dlat, p.lon + dlon)


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    """True if open segments (p1,p2) and (p3,p4) cross at an interior point."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if v == 0 else (1 if v > 0 else -1)

    o1 = orient(p1, p2, p3)
    o2 = orient(p1, p2, p4)
    o3 = orient(p3, p4, p1)
    o4 = orient(p3, p4, p2)
    return o1 != o2 and o3 != o4 and 0 not in (o1, o2, o3, o4)


class GeoFence:
    """A polygonal collection zone: one exterior ring plus optional holes.

    Rings are ordered vertex lists, implicitly closed. Construction
    validates ring size, consecutive duplicates, and self-intersection.
    """

    def __init__(self, exterior: Sequence[GeoPoint], holes: Iterable[Sequence[GeoPoint]] = ()):
        self.exterior = tuple(exterior)
        self.holes = tuple(tuple(h) for h in holes)
        for ring in (self.exterior, *self.holes):
            _validate_ring(ring)
        lats = [p.lat for p in self.exterior]
        lons = [p.lon for p in self.exterior]
        self._bbox = (min(lats), min(lons), max(lats), max(lons))

    @property
    def rings(self) -> tuple[tuple[GeoPoint, ...], ...]:
        return (self.exterior, *self.holes)

    def bbox(self) -> tuple[float, float, float, float]:
        """(min_lat, min_lon, max_lat, max_lon) of the exterior ring."""
        return self._bbox

    def __eq__(self, other):
        return isinstance(other, GeoFence) and self.rings == other.rings

    def __repr__(self):
        return f"GeoFence(exterior={len(self.exterior)} pts, holes={len(self.holes)})"


def _validate_ring(ring: Sequence[GeoPoint]) -> None:
    if len(set((p.lat, p.lon) for p in ring)) < 3:
        raise ValueError("ring needs at least 3 distinct vertices")
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if a.lat == b.lat and a.lon == b.lon:
            raise ValueError("ring has consecutive duplicate vertices")
    # O(n^2) edge crossing check; fences are small.
    edges = [((ring[i].lon, ring[i].lat), (ring[(i + 1) % n].lon, ring[(i + 1) % n].lat)) for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            if _segments_properly_intersect(*edges[i], *edges[j]):
                raise ValueError("ring is self-intersecting")


def _on_ring_boundary(p: GeoPoint, ring: Sequence[GeoPoint]) -> bool:
    x, y = p.lon, p.lat
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        cross = (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon)
        if cross == 0 and min(a.lon, b.lon) <= x <= max(a.lon, b.lon) and min(a.lat, b.lat) <= y <= max(a.lat, b.lat):
            return True
    return False


def _winding_number(p: GeoPoint, ring: Sequence[GeoPoint]) -> int:
    x, y = p.lon, p.lat
    wn = 0
    n = len(ring)
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        if a.lat <= y:
            if b.lat > y and (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon) > 0:
                wn += 1
        elif b.lat <= y and (b.lon - a.lon) * (y - a.lat) - (b.lat - a.lat) * (x - a.lon) < 0:
            wn -= 1
    return wn


def point_in_fence(p: GeoPoint, f: GeoFence) -> bool:
    """True iff ``p`` is inside the exterior ring and outside every hole.

    Boundary points (of the exterior or of a hole) count as inside, so
    collection zones behave predictably at curb edges.
    """
    min_lat, min_lon, max_lat, max_lon = f.bbox()
    if not (min_lat <= p.lat <= max_lat and min_lon <= p.lon <= max_lon):
        return False
    for ring in f.rings:
        if _on_ring_boundary(p, ring):
            return True
    if _winding_number(p, f.exterior) == 0:
        return False
    return all(_winding_number(p, hole) == 0 for hole in f.holes)


def trip_length(points: Sequence[GeoPoint]) -> float:
    """Sum of great-circle distances over consecutive points; 0 for < 2."""
    total = 0.0
    for i in range(1, len(points)):
        total += haversine_distance(points[i - 1], points[i])
    return total
