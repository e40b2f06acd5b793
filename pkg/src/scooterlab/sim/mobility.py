"""Kinematics: great-circle leg interpolation with trapezoidal speed ramps.

Commanded speeds are clamped to the vehicle cap (8.05 m/s). Acceleration
and deceleration ramp at 1 m/s^2; a leg too short for a full trapezoid
degrades to a triangular profile. Between legs the scooter is stationary
at its last position, so poses are continuous in time.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from ..core.geo import MAX_SPEED_MPS, GeoPoint, haversine_distance, initial_bearing_deg
from .scenario import LegSpec

ACCEL_MPS2 = 1.0


@dataclass(frozen=True)
class Pose:
    position: GeoPoint
    speed_mps: float
    heading_deg: float
    t_ms: int


def _to_vec(p: GeoPoint) -> tuple[float, float, float]:
    lat, lon = math.radians(p.lat), math.radians(p.lon)
    return (math.cos(lat) * math.cos(lon), math.cos(lat) * math.sin(lon), math.sin(lat))


def _to_point(v: tuple[float, float, float]) -> GeoPoint:
    x, y, z = v
    return GeoPoint(math.degrees(math.atan2(z, math.hypot(x, y))), math.degrees(math.atan2(y, x)))


def slerp(a: GeoPoint, b: GeoPoint, f: float) -> GeoPoint:
    """Spherical linear interpolation along the great circle from a to b."""
    if f <= 0.0:
        return a
    if f >= 1.0:
        return b
    va, vb = _to_vec(a), _to_vec(b)
    dot = max(-1.0, min(1.0, sum(x * y for x, y in zip(va, vb))))
    omega = math.acos(dot)
    if omega < 1e-9:
        return GeoPoint(a.lat + (b.lat - a.lat) * f, a.lon + (b.lon - a.lon) * f)
    sa, sb = math.sin((1.0 - f) * omega), math.sin(f * omega)
    so = math.sin(omega)
    return _to_point(tuple((sa * x + sb * y) / so for x, y in zip(va, vb)))


class Leg:
    """A LegSpec with its speed profile and polyline geometry resolved."""

    def __init__(self, spec: LegSpec):
        self.points = spec.points
        self.depart_ms = int(spec.depart_at_s * 1000)
        self.cruise = min(spec.speed_mps, MAX_SPEED_MPS)
        self.seg_cum = [0.0]
        for i in range(1, len(self.points)):
            self.seg_cum.append(self.seg_cum[-1] + haversine_distance(self.points[i - 1], self.points[i]))
        self.length = self.seg_cum[-1]
        a, v = ACCEL_MPS2, self.cruise
        if self.length >= v * v / a:
            self.t_ramp = v / a
            self.t_cruise = (self.length - v * v / a) / v
            self.v_peak = v
        else:
            self.v_peak = math.sqrt(a * self.length)
            self.t_ramp = self.v_peak / a
            self.t_cruise = 0.0
        self.duration_s = 2.0 * self.t_ramp + self.t_cruise
        self.end_ms = self.depart_ms + int(math.ceil(self.duration_s * 1000))

    def profile(self, tau: float) -> tuple[float, float]:
        """(distance, speed) at ``tau`` seconds into the leg."""
        a = ACCEL_MPS2
        if tau <= 0.0:
            return 0.0, 0.0
        if tau >= self.duration_s:
            return self.length, 0.0
        if tau < self.t_ramp:
            return 0.5 * a * tau * tau, a * tau
        if tau <= self.t_ramp + self.t_cruise:
            return 0.5 * a * self.t_ramp ** 2 + self.v_peak * (tau - self.t_ramp), self.v_peak
        remain = self.duration_s - tau
        return self.length - 0.5 * a * remain * remain, a * remain

    def position_at_distance(self, s: float) -> tuple[GeoPoint, float]:
        """Point at distance ``s`` along the polyline, plus local heading."""
        if s <= 0.0:
            return self.points[0], initial_bearing_deg(self.points[0], self.points[1])
        if s >= self.length:
            return self.points[-1], initial_bearing_deg(self.points[-2], self.points[-1])
        i = bisect.bisect_right(self.seg_cum, s) - 1
        i = min(i, len(self.points) - 2)
        seg_len = self.seg_cum[i + 1] - self.seg_cum[i]
        f = (s - self.seg_cum[i]) / seg_len if seg_len > 0 else 0.0
        p = slerp(self.points[i], self.points[i + 1], f)
        return p, initial_bearing_deg(p, self.points[i + 1])


class Route:
    """A scooter's timed legs; stationary at endpoints between them."""

    def __init__(self, start: GeoPoint, legs: list[LegSpec]):
        self.start = start
        self.legs = sorted((Leg(l) for l in legs), key=lambda l: l.depart_ms)
        for prev, nxt in zip(self.legs, self.legs[1:]):
            if nxt.depart_ms < prev.end_ms:
                raise ValueError("route legs overlap in time")

    def end_of_motion_ms(self) -> int:
        return self.legs[-1].end_ms if self.legs else 0

    def pose_at(self, rel_ms: int, t_ms: int) -> Pose:
        """Pose at ``rel_ms`` since scenario start (``t_ms`` is absolute)."""
        current = None
        for leg in self.legs:
            if rel_ms < leg.depart_ms:
                break
            current = leg
        if current is None:
            first = self.legs[0].points[0] if self.legs else self.start
            return Pose(first, 0.0, 0.0, t_ms)
        tau = (rel_ms - current.depart_ms) / 1000.0
        if tau >= current.duration_s:
            p = current.points[-1]
            heading = initial_bearing_deg(current.points[-2], current.points[-1])
            return Pose(p, 0.0, heading, t_ms)
        s, speed = current.profile(tau)
        p, heading = current.position_at_distance(s)
        return Pose(p, speed, heading, t_ms)


def mobility_step(route: Route, rel_ms: int, t_ms: int) -> Pose:
    return route.pose_at(rel_ms, t_ms)
