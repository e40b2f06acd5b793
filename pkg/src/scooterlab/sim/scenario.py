"""Scenario files: everything a simulation run needs, JSON-serializable.

A scenario's seed fully determines all randomness in a run. Wi-Fi
availability is either "always", a per-minute Bernoulli draw (deterministic
from the seed), or explicit uptime windows in virtual seconds.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..core import codec
from ..core.errors import MalformedInput
from ..core.geo import GeoFence, GeoPoint, haversine_distance, point_in_fence

#: Default virtual epoch: 2025-06-02 08:00:00 UTC (a Monday morning).
DEFAULT_START_AT_MS = 1_748_851_200_000


@dataclass(frozen=True)
class ScooterSpec:
    scooter_id: str
    start: GeoPoint
    battery_pct: float = 100.0


@dataclass(frozen=True)
class LegSpec:
    """One commanded ride: depart a point sequence at a time and speed."""

    depart_at_s: float
    speed_mps: float
    points: tuple[GeoPoint, ...]

    def __post_init__(self):
        if len(self.points) < 2:
            raise ValueError("a leg needs at least two waypoints")
        if self.speed_mps <= 0:
            raise ValueError("leg speed must be positive")


@dataclass(frozen=True)
class WifiZone:
    """Disc (center + radius) or polygon coverage area."""

    center: Optional[GeoPoint] = None
    radius_m: float = 0.0
    fence: Optional[GeoFence] = None

    def covers(self, p: GeoPoint) -> bool:
        if self.fence is not None:
            return point_in_fence(p, self.fence)
        return haversine_distance(self.center, p) <= self.radius_m


@dataclass(frozen=True)
class Uptime:
    kind: str = "always"  # always | bernoulli | windows
    p: float = 1.0
    windows: tuple[tuple[float, float], ...] = ()

    def up_at(self, zone_index: int, t_s: float, seed: int) -> bool:
        if self.kind == "always":
            return True
        if self.kind == "windows":
            return any(a <= t_s < b for a, b in self.windows)
        minute = int(t_s // 60)
        draw = zlib.crc32(f"{seed}:wifi:{zone_index}:{minute}".encode()) / 0xFFFFFFFF
        return draw < self.p


@dataclass
class Scenario:
    seed: int
    duration_s: float
    scooters: list[ScooterSpec]
    routes: dict[str, list[LegSpec]]
    wifi_zones: list[WifiZone] = field(default_factory=list)
    wifi_uptime: Uptime = field(default_factory=Uptime)
    gps_sigma_m: float = 0.0
    imu_sigma: float = 0.0
    start_at_ms: int = DEFAULT_START_AT_MS
    policy_obj: Optional[dict] = None  # initial config for every scooter
    restarts: list[tuple[str, float]] = field(default_factory=list)  # (scooter_id, at_s)
    config_updates: list[dict] = field(default_factory=list)  # {"at_s", "policy", "project_id"?}
    env: dict = field(default_factory=dict)
    drain_timeout_s: float = 900.0


def connectivity_at(position: GeoPoint, t_s: float, scenario: Scenario) -> bool:
    """Online iff inside some zone whose availability is up at ``t_s``."""
    for i, zone in enumerate(scenario.wifi_zones):
        if zone.covers(position) and scenario.wifi_uptime.up_at(i, t_s, scenario.seed):
            return True
    return False


# ---- JSON (scenario file schema) ----

def scenario_obj(s: Scenario) -> dict:
    return {
        "seed": s.seed,
        "duration_s": s.duration_s,
        "start_at_ms": s.start_at_ms,
        "scooters": [
            {"scooter_id": sc.scooter_id, "start": codec.point_obj(sc.start), "battery_pct": sc.battery_pct}
            for sc in s.scooters
        ],
        "routes": {
            sid: [
                {"depart_at_s": leg.depart_at_s, "speed_mps": leg.speed_mps, "points": [codec.point_obj(p) for p in leg.points]}
                for leg in legs
            ]
            for sid, legs in sorted(s.routes.items())
        },
        "wifi_zones": [
            {"type": "fence", "fence": codec.fence_obj(z.fence)}
            if z.fence is not None
            else {"type": "disc", "center": codec.point_obj(z.center), "radius_m": z.radius_m}
            for z in s.wifi_zones
        ],
        "wifi_uptime": {"kind": s.wifi_uptime.kind, "p": s.wifi_uptime.p, "windows": [list(w) for w in s.wifi_uptime.windows]},
        "noise": {"gps_sigma_m": s.gps_sigma_m, "imu_sigma": s.imu_sigma},
        "policy": s.policy_obj,
        "restarts": [{"scooter_id": sid, "at_s": at} for sid, at in s.restarts],
        "config_updates": s.config_updates,
        "env": s.env,
        "drain_timeout_s": s.drain_timeout_s,
    }


def parse_scenario(obj: dict) -> Scenario:
    try:
        scooters = [
            ScooterSpec(o["scooter_id"], codec.parse_point(o["start"]), o.get("battery_pct", 100.0))
            for o in obj["scooters"]
        ]
        routes = {
            sid: [
                LegSpec(l["depart_at_s"], l["speed_mps"], tuple(codec.parse_point(p) for p in l["points"]))
                for l in legs
            ]
            for sid, legs in obj.get("routes", {}).items()
        }
        zones = []
        for z in obj.get("wifi_zones", []):
            if z.get("type") == "fence":
                zones.append(WifiZone(fence=codec.parse_fence(z["fence"])))
            else:
                zones.append(WifiZone(center=codec.parse_point(z["center"]), radius_m=z["radius_m"]))
        up = obj.get("wifi_uptime", {})
        uptime = Uptime(
            kind=up.get("kind", "always"),
            p=up.get("p", 1.0),
            windows=tuple((w[0], w[1]) for w in up.get("windows", [])),
        )
        noise = obj.get("noise", {})
        return Scenario(
            seed=int(obj["seed"]),
            duration_s=float(obj["duration_s"]),
            scooters=scooters,
            routes=routes,
            wifi_zones=zones,
            wifi_uptime=uptime,
            gps_sigma_m=noise.get("gps_sigma_m", 0.0),
            imu_sigma=noise.get("imu_sigma", 0.0),
            start_at_ms=int(obj.get("start_at_ms", DEFAULT_START_AT_MS)),
            policy_obj=obj.get("policy"),
            restarts=[(r["scooter_id"], float(r["at_s"])) for r in obj.get("restarts", [])],
            config_updates=obj.get("config_updates", []),
            env=obj.get("env", {}),
            drain_timeout_s=float(obj.get("drain_timeout_s", 900.0)),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MalformedInput(f"bad scenario: {e}")


def load_scenario(path: str | Path) -> Scenario:
    return parse_scenario(json.loads(Path(path).read_text()))


def save_scenario(s: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario_obj(s), indent=2) + "\n")
