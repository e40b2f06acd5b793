"""Built-in scenario generators: demo, verification, and stress shapes.

All geometry is placed around a campus-scale bounding box. Generators are
pure functions of their seed, so a scenario written to disk equals the one
rebuilt in a test.
"""

from __future__ import annotations

import math
from datetime import date
from random import Random

from ..core import codec, sensors
from ..core.geo import GeoPoint, offset_point
from ..core.policy import DataCollectionPolicy
from ..core.schedule import Schedule, ScheduleWindow, unrestricted_schedule
from .scenario import DEFAULT_START_AT_MS, LegSpec, Scenario, ScooterSpec, Uptime, WifiZone

CAMPUS = GeoPoint(29.4241, -98.4936)
CAMPUS_HALF_M = 1_500.0  # the route box spans +-1.5 km around campus

#: Ride/pause cadence: pauses must exceed the 120 s trip-stop threshold.
MIN_PAUSE_S = 150.0


def _policy_obj(rates: dict, fence=None, schedule=None) -> dict:
    policy = DataCollectionPolicy(sensors=rates, schedule=schedule or unrestricted_schedule(), fence=fence)
    return codec.policy_obj(policy)


def _rand_point(rng: Random, half_m: float = CAMPUS_HALF_M, center: GeoPoint = CAMPUS) -> GeoPoint:
    return offset_point(center, rng.uniform(-half_m, half_m), rng.uniform(-half_m, half_m))


def _ride_legs(rng: Random, start: GeoPoint, *, n_trips: int, first_depart_s: float,
               ride_s: tuple[float, float], pause_s: tuple[float, float],
               speed: tuple[float, float], center: GeoPoint = CAMPUS, half_m: float = CAMPUS_HALF_M):
    """Chained ride/pause cycles; every pause is long enough to end a trip."""
    legs = []
    t = first_depart_s
    pos = start
    for _ in range(n_trips):
        v = rng.uniform(*speed)
        duration = rng.uniform(*ride_s)
        length = v * duration
        points = [pos]
        remaining = length
        while remaining > 0:
            step = min(remaining, rng.uniform(150.0, 500.0))
            bearing = rng.uniform(0, 2 * math.pi)
            nxt = offset_point(points[-1], step * math.cos(bearing), step * math.sin(bearing))
            # Reflect back toward campus when drifting out of the box.
            if abs(nxt.lat - center.lat) > half_m / 111_320 or abs(nxt.lon - center.lon) > half_m / 96_000:
                nxt = offset_point(points[-1], -step * math.cos(bearing), -step * math.sin(bearing))
            points.append(nxt)
            remaining -= step
        leg = LegSpec(depart_at_s=t, speed_mps=v, points=tuple(points))
        legs.append(leg)
        # Actual traversal takes longer than length/v because of ramps.
        t += duration + v / 1.0 + rng.uniform(*pause_s)
        pos = points[-1]
    return legs, t


def demo_scenario(seed: int = 1) -> Scenario:
    """Three scooters, ~12 minutes, one good Wi-Fi zone. Quick to run."""
    rng = Random(seed)
    scooters = []
    routes = {}
    for i in range(3):
        sid = f"scooter-{i+1:02d}"
        start = _rand_point(rng, 400.0)
        scooters.append(ScooterSpec(sid, start))
        legs, _ = _ride_legs(
            rng, start, n_trips=2, first_depart_s=5.0 + 10.0 * i,
            ride_s=(60.0, 120.0), pause_s=(MIN_PAUSE_S, 200.0), speed=(3.0, 6.0),
        )
        routes[sid] = legs
    return Scenario(
        seed=seed,
        duration_s=720.0,
        scooters=scooters,
        routes=routes,
        wifi_zones=[WifiZone(center=CAMPUS, radius_m=900.0)],
        wifi_uptime=Uptime("always"),
        policy_obj=_policy_obj({sensors.GPS: 1.0, sensors.ACCELEROMETER: 2.0, sensors.TEMPERATURE: 0.5}),
        drain_timeout_s=600.0,
    )


def exactly_once_scenario(seed: int = 42) -> Scenario:
    """8 scooters, ~100+ trips, sparse flaky Wi-Fi, injected agent restarts.

    Zone discs cover at most 20% of the route box and are up 30% of
    minutes, so most trips upload late, across connectivity windows, and
    through restarts.
    """
    rng = Random(seed)
    scooters = []
    routes = {}
    duration = 5_400.0
    for i in range(8):
        sid = f"scooter-{i+1:02d}"
        start = _rand_point(rng)
        scooters.append(ScooterSpec(sid, start))
        legs, end = _ride_legs(
            rng, start, n_trips=14, first_depart_s=rng.uniform(5.0, 60.0),
            ride_s=(90.0, 160.0), pause_s=(MIN_PAUSE_S, 190.0), speed=(2.5, 7.5),
        )
        # Keep every route comfortably inside the duration (drain margin).
        routes[sid] = [l for l in legs if l.depart_at_s + 300.0 < duration - 300.0]
    # <=20% coverage: box is 3 km x 3 km = 9 km^2; budget 1.8 km^2.
    zones = []
    budget_m2 = 0.2 * (2 * CAMPUS_HALF_M) ** 2
    used = 0.0
    while True:
        r = rng.uniform(220.0, 420.0)
        if used + math.pi * r * r > budget_m2:
            break
        zones.append(WifiZone(center=_rand_point(rng, 1_200.0), radius_m=r))
        used += math.pi * r * r
    restarts = []
    for sid in sorted(routes):
        for _ in range(rng.randint(1, 3)):
            restarts.append((sid, rng.uniform(300.0, duration - 600.0)))
    restarts.sort(key=lambda r: (r[1], r[0]))
    return Scenario(
        seed=seed,
        duration_s=duration,
        scooters=scooters,
        routes=routes,
        wifi_zones=zones,
        wifi_uptime=Uptime("bernoulli", p=0.30),
        policy_obj=_policy_obj({sensors.GPS: 1.0, sensors.ACCELEROMETER: 2.0, sensors.TEMPERATURE: 0.5}),
        restarts=restarts,
        drain_timeout_s=900.0,
    )


def config_propagation_scenario(seed: int = 7) -> Scenario:
    """8 scooters under good Wi-Fi; mid-run the policy drops the camera and
    raises GPS from 1 Hz to 5 Hz."""
    rng = Random(seed)
    scooters = []
    routes = {}
    duration = 1_800.0
    for i in range(8):
        sid = f"scooter-{i+1:02d}"
        start = _rand_point(rng, 600.0)
        scooters.append(ScooterSpec(sid, start))
        legs, _ = _ride_legs(
            rng, start, n_trips=4, first_depart_s=rng.uniform(5.0, 40.0),
            ride_s=(80.0, 120.0), pause_s=(MIN_PAUSE_S, 180.0), speed=(3.0, 7.0),
            half_m=800.0,
        )
        routes[sid] = [l for l in legs if l.depart_at_s + 250.0 < duration - 200.0]
    return Scenario(
        seed=seed,
        duration_s=duration,
        scooters=scooters,
        routes=routes,
        wifi_zones=[WifiZone(center=CAMPUS, radius_m=2_500.0)],
        wifi_uptime=Uptime("always"),
        policy_obj=_policy_obj({sensors.GPS: 1.0, sensors.CAMERA: 1.0, sensors.ACCELEROMETER: 2.0}),
        config_updates=[{"at_s": 700.0, "policy": _policy_obj({sensors.GPS: 5.0, sensors.ACCELEROMETER: 2.0})}],
        drain_timeout_s=600.0,
    )


def gating_scenario(seed: int = 11) -> Scenario:
    """Fenced + scheduled policy: one scooter rides inside the fence, one
    outside; the schedule window closes partway through the run."""
    fence_center = offset_point(CAMPUS, 0.0, -600.0)
    fence_pts = [
        offset_point(fence_center, -500.0, -500.0),
        offset_point(fence_center, -500.0, 500.0),
        offset_point(fence_center, 500.0, 500.0),
        offset_point(fence_center, 500.0, -500.0),
    ]
    from ..core.geo import GeoFence

    fence = GeoFence(fence_pts)
    # Virtual clock starts 2025-06-02 08:00 UTC; window closes at 08:20.
    schedule = Schedule(
        date(2025, 6, 1),
        date(2025, 6, 30),
        (ScheduleWindow.of("mon", "00:00", "08:20", "UTC"),),
    )
    inside_start = offset_point(fence_center, -300.0, -300.0)
    outside_start = offset_point(CAMPUS, 900.0, 900.0)
    scooters = [ScooterSpec("scooter-in", inside_start), ScooterSpec("scooter-out", outside_start)]
    routes = {}
    # Inside rider: square laps that stay ~100 m inside the fence.
    lap = [
        offset_point(fence_center, -300.0, -300.0),
        offset_point(fence_center, -300.0, 300.0),
        offset_point(fence_center, 300.0, 300.0),
        offset_point(fence_center, 300.0, -300.0),
        offset_point(fence_center, -300.0, -300.0),
    ]
    routes["scooter-in"] = [
        LegSpec(depart_at_s=10.0, speed_mps=5.0, points=tuple(lap)),
        LegSpec(depart_at_s=900.0, speed_mps=5.0, points=tuple(lap)),   # rides across the window close
        LegSpec(depart_at_s=1400.0, speed_mps=5.0, points=tuple(lap)),  # fully outside the window
    ]
    far_lap = [
        outside_start,
        offset_point(outside_start, 0.0, 400.0),
        offset_point(outside_start, 400.0, 400.0),
        outside_start,
    ]
    routes["scooter-out"] = [
        LegSpec(depart_at_s=20.0, speed_mps=5.0, points=tuple(far_lap)),
        LegSpec(depart_at_s=720.0, speed_mps=5.0, points=tuple(far_lap)),
    ]
    return Scenario(
        seed=seed,
        duration_s=1_900.0,
        scooters=scooters,
        routes=routes,
        wifi_zones=[WifiZone(center=CAMPUS, radius_m=3_000.0)],
        wifi_uptime=Uptime("always"),
        policy_obj=_policy_obj({sensors.GPS: 2.0, sensors.TEMPERATURE: 1.0}, fence=fence, schedule=schedule),
        drain_timeout_s=600.0,
    )


def battery_depletion_scenario(seed: int = 3) -> Scenario:
    """One scooter commanded above the speed cap on a long out-and-back
    course until the battery empties (~64.4 km)."""
    start = offset_point(CAMPUS, -1_000.0, -1_000.0)
    far = offset_point(start, 2_000.0, 0.0)
    points = [start]
    for k in range(1, 38):  # 37 x 2 km ping-pong = 74 km, past the 64.4 km range
        points.append(far if k % 2 == 1 else start)
    legs = [LegSpec(depart_at_s=5.0, speed_mps=10.0, points=tuple(points))]  # clamped to 8.05
    return Scenario(
        seed=seed,
        duration_s=8_400.0,
        scooters=[ScooterSpec("scooter-01", start)],
        routes={"scooter-01": legs},
        wifi_zones=[WifiZone(center=CAMPUS, radius_m=5_000.0)],
        wifi_uptime=Uptime("always"),
        policy_obj=_policy_obj({sensors.TEMPERATURE: 0.1}),
        drain_timeout_s=600.0,
    )


SCENARIO_KINDS = {
    "demo": demo_scenario,
    "exactly-once": exactly_once_scenario,
    "config-propagation": config_propagation_scenario,
    "gating": gating_scenario,
    "battery-depletion": battery_depletion_scenario,
}


def make_scenario(kind: str, seed: int | None = None) -> Scenario:
    factory = SCENARIO_KINDS[kind]
    return factory(seed) if seed is not None else factory()
