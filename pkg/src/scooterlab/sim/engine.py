"""Deterministic fixed-step simulation driver.

Each 100 ms step, per scooter in ascending id order: mobility, battery,
synthesis, agent tick (segmentation + sampling + sealing), connectivity,
sync, config refresh. After the scheduled duration an optional drain phase
keeps stepping with connectivity forced online until every outbox empties.

The event log is a pure function of (scenario, seed): two runs with the
same inputs produce byte-identical logs. Conservation is asserted at every
step boundary: generated = suppressed + acked + in-outbox + dropped.
"""

from __future__ import annotations

import json
import time
from collections import Counter
from pathlib import Path
from typing import Callable, Optional

from ..core import codec
from ..core.geo import haversine_distance
from ..core.model import FULL_RANGE_M
from ..node.agent import IDLE, NodeAgent
from .mobility import Pose, Route
from .scenario import Scenario, connectivity_at
from .synth import TickReadings

STEP_MS = 100


def battery_step(battery_pct: float, distance_delta_m: float) -> float:
    """Linear discharge over the rated 40-mile (64,374 m) range."""
    return max(0.0, battery_pct - 100.0 * distance_delta_m / FULL_RANGE_M)


class EventLog:
    """Ordered event record; one JSON line per event."""

    def __init__(self):
        self._lines: list[str] = []

    def emit(self, step: int, scooter_id: str, event_type: str, payload) -> None:
        raw = payload if isinstance(payload, str) else codec.canonical_dumps(payload)
        self._lines.append(f'{{"step":{step},"scooter_id":"{scooter_id}","event_type":"{event_type}","payload":{raw}}}')

    def to_bytes(self) -> bytes:
        return ("\n".join(self._lines) + "\n").encode("utf-8") if self._lines else b""

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_bytes())

    def __len__(self) -> int:
        return len(self._lines)

    def events(self):
        for line in self._lines:
            yield json.loads(line)


class Census:
    """Incremental sample accounting driven by agent events."""

    def __init__(self, full_multisets: bool = True):
        self.full = full_multisets
        self.recorded = Counter()
        self.suppressed = Counter()
        self.generated_count = 0
        self.recorded_count = 0
        self.suppressed_count = 0
        self.acked_count = 0
        self.outbox_count = 0
        self.open_count = 0
        self.dropped_count = 0
        self.quarantined_count = 0

    def conserved(self) -> bool:
        return self.recorded_count == (
            self.open_count + self.outbox_count + self.acked_count + self.dropped_count + self.quarantined_count
        )

    def summary(self) -> dict:
        return {
            "generated": self.generated_count,
            "suppressed": self.suppressed_count,
            "recorded": self.recorded_count,
            "acked": self.acked_count,
            "in_outbox": self.outbox_count + self.open_count,
            "dropped": self.dropped_count,
            "quarantined": self.quarantined_count,
        }


class ScooterSim:
    """Per-scooter world state: route, battery, odometer, agent handle."""

    def __init__(self, spec, route: Route, agent: NodeAgent, uplink):
        self.spec = spec
        self.scooter_id = spec.scooter_id
        self.route = route
        self.agent = agent
        self.uplink = uplink
        self.battery_pct = spec.battery_pct
        self.odometer_m = 0.0
        self.prev_pose: Optional[Pose] = None
        self.depleted_logged = False
        self.failed = False


class Simulation:
    """Drives node agents against a controller on a virtual clock.

    ``admin`` performs registration/config issuance (DirectAdmin or
    HttpAdmin); ``uplink_factory(scooter_id, token)`` builds each agent's
    uplink. Outboxes live under ``outbox_root``, one directory per scooter.
    """

    def __init__(
        self,
        scenario: Scenario,
        admin,
        uplink_factory: Callable[[str, str], object],
        outbox_root,
        *,
        verify_conservation: bool = True,
        drain: bool = True,
    ):
        self.scenario = scenario
        self.admin = admin
        self.uplink_factory = uplink_factory
        self.outbox_root = Path(outbox_root)
        self.verify_conservation = verify_conservation
        self.drain = drain
        self.log = EventLog()
        self.census = Census()
        self.degraded = False
        self.max_speed_seen = 0.0
        self._now_ms = scenario.start_at_ms

    # ---- event plumbing ----

    def _sink(self, scooter_id: str):
        census = self.census

        def emit(kind: str, payload) -> None:
            if kind == "sample_recorded":
                census.generated_count += 1
                census.recorded_count += 1
                census.open_count += 1
                if census.full:
                    census.recorded[payload] += 1
            elif kind == "sample_suppressed":
                census.generated_count += 1
                census.suppressed_count += 1
                if census.full:
                    census.suppressed[payload] += 1
            elif kind == "chunk_sealed":
                census.open_count -= payload["samples"]
                census.outbox_count += payload["samples"]
            elif kind == "chunk_acked":
                census.outbox_count -= payload["samples"]
                census.acked_count += payload["samples"]
            elif kind == "samples_dropped":
                census.open_count -= payload["count"]
                census.dropped_count += payload["count"]
            elif kind == "chunk_quarantined":
                census.quarantined_count += payload.get("samples", 0)
            self.log.emit(self._step, scooter_id, kind, payload)

        return emit

    # ---- setup ----

    def _provision(self) -> list[ScooterSim]:
        sims = []
        for spec in sorted(self.scenario.scooters, key=lambda s: s.scooter_id):
            sid = spec.scooter_id
            token = self.admin.register_scooter(sid, "segway-g30max")
            if self.scenario.policy_obj is not None:
                self.admin.issue_config(sid, self.scenario.policy_obj)
            cfg_obj = self.admin.fetch_config(sid)
            config = codec.parse_config(cfg_obj) if cfg_obj else None
            agent = NodeAgent(
                sid,
                self.outbox_root / sid,
                now_ms=self.scenario.start_at_ms,
                config=config,
                events=self._sink(sid),
            )
            if config is not None:
                self.log.emit(0, sid, "config_provisioned", {"version": config.version})
            route = Route(spec.start, self.scenario.routes.get(sid, []))
            sims.append(ScooterSim(spec, route, agent, self.uplink_factory(sid, token)))
        return sims

    # ---- main loop ----

    def run(self) -> dict:
        started_wall = time.monotonic()
        self._step = 0
        sims = self._provision()
        restarts: dict[int, list[str]] = {}
        for sid, at_s in self.scenario.restarts:
            restarts.setdefault(int(at_s * 1000) // STEP_MS, []).append(sid)
        config_updates: dict[int, list[dict]] = {}
        for upd in self.scenario.config_updates:
            config_updates.setdefault(int(upd["at_s"] * 1000) // STEP_MS, []).append(upd)

        n_steps = int(self.scenario.duration_s * 1000) // STEP_MS
        step = 0
        draining = False
        drain_deadline = n_steps + int(self.scenario.drain_timeout_s * 1000) // STEP_MS
        while True:
            step += 1
            self._step = step
            if step > n_steps:
                if not self.drain:
                    break
                draining = True
                if all(s.agent.state == IDLE and s.agent.outbox.fully_drained() for s in sims if not s.failed):
                    break
                if step > drain_deadline:
                    self.degraded = True
                    self.log.emit(step, "-", "drain_timeout", self.census.summary())
                    break
            rel_ms = step * STEP_MS
            t = self.scenario.start_at_ms + rel_ms
            self._now_ms = t
            for upd in config_updates.get(step, ()):  # operator-driven reissues
                for spec in sorted(self.scenario.scooters, key=lambda s: s.scooter_id):
                    version = self.admin.issue_config(spec.scooter_id, upd["policy"], upd.get("project_id"))
                    self.log.emit(step, spec.scooter_id, "config_issued", {"version": version})
            for sim in sims:
                if sim.failed:
                    continue
                try:
                    self._step_scooter(sim, step, rel_ms, t, force_online=draining)
                except Exception as e:  # a wedged agent must not sink the fleet
                    sim.failed = True
                    self.degraded = True
                    self.log.emit(step, sim.scooter_id, "agent_error", {"error": repr(e)})
            for sid in restarts.get(step, ()):
                sim = next(s for s in sims if s.scooter_id == sid)
                sim.agent.close()
                self.log.emit(step, sid, "restart", {})
                sim.agent = NodeAgent(sid, self.outbox_root / sid, now_ms=t, events=self._sink(sid))
            if self.verify_conservation and not self.census.conserved():
                self.degraded = True
                self.log.emit(step, "-", "conservation_violation", self.census.summary())
                raise AssertionError(f"sample conservation violated at step {step}: {self.census.summary()}")

        for sim in sims:
            sim.agent.close()
        wall_s = time.monotonic() - started_wall
        virtual_s = step * STEP_MS / 1000.0
        self.log.emit(step, "-", "run_complete", {**self.census.summary(), "degraded": self.degraded})
        return {
            "census": self.census.summary(),
            "events": len(self.log),
            "degraded": self.degraded,
            "virtual_s": virtual_s,
            "wall_s": wall_s,
            "speedup": virtual_s / wall_s if wall_s > 0 else float("inf"),
            "max_speed_mps": self.max_speed_seen,
        }

    def _step_scooter(self, sim: ScooterSim, step: int, rel_ms: int, t: int, force_online: bool) -> None:
        if sim.battery_pct > 0.0:
            pose = sim.route.pose_at(rel_ms, t)
        else:  # immobilized at 0%
            prev = sim.prev_pose
            pose = Pose(prev.position, 0.0, prev.heading_deg, t)
        prev = sim.prev_pose or Pose(pose.position, 0.0, pose.heading_deg, t - STEP_MS)
        if pose.speed_mps > self.max_speed_seen:
            self.max_speed_seen = pose.speed_mps
        d = haversine_distance(prev.position, pose.position)
        if d > 0:
            sim.odometer_m += d
            sim.battery_pct = battery_step(sim.battery_pct, d)
            if sim.battery_pct == 0.0 and not sim.depleted_logged:
                sim.depleted_logged = True
                self.log.emit(step, sim.scooter_id, "battery_depleted", {"odometer_m": sim.odometer_m})
        readings = TickReadings(
            sim.scooter_id,
            step,
            pose,
            prev,
            seed=self.scenario.seed,
            gps_sigma_m=self.scenario.gps_sigma_m,
            imu_sigma=self.scenario.imu_sigma,
            env=self.scenario.env,
            t0_ms=self.scenario.start_at_ms,
        )
        sim.agent.tick(t, pose.speed_mps, readings, battery_pct=sim.battery_pct)
        online = force_online or connectivity_at(pose.position, rel_ms / 1000.0, self.scenario)
        if online:
            sim.agent.sync(True, sim.uplink)
            sim.agent.maybe_refresh_config(sim.uplink, t)
        if step % 10 == 0:
            self.log.emit(
                step,
                sim.scooter_id,
                "pose",
                {
                    "lat": pose.position.lat,
                    "lon": pose.position.lon,
                    "speed_mps": pose.speed_mps,
                    "heading_deg": pose.heading_deg,
                    "battery_pct": sim.battery_pct,
                    "odometer_m": sim.odometer_m,
                },
            )
        sim.prev_pose = pose


class DirectAdmin:
    """Admin client over an in-process FleetController."""

    def __init__(self, controller):
        self.controller = controller
        self.token = controller.admin_token()

    def register_scooter(self, scooter_id: str, model: str) -> str:
        return self.controller.register_scooter(scooter_id, model, self.token)["token"]

    def issue_config(self, scooter_id: str, policy_obj: dict, project_id: Optional[str] = None) -> int:
        policy = codec.parse_policy(policy_obj)
        return self.controller.issue_config(scooter_id, policy, project_id=project_id, token=self.token).version

    def fetch_config(self, scooter_id: str) -> Optional[dict]:
        return self.controller.get_config(scooter_id, 0, self.token)

    def census(self) -> dict:
        return self.controller.sample_census()


class HttpAdmin:
    """Admin client over the controller's HTTP surface."""

    def __init__(self, base_url: str, token: str, client=None):
        import httpx

        self.base_url = base_url.rstrip("/")
        self.token = token
        self.client = client or httpx.Client(timeout=30.0)

    def _headers(self):
        return {"Authorization": f"Bearer {self.token}"}

    def register_scooter(self, scooter_id: str, model: str) -> str:
        r = self.client.post(
            f"{self.base_url}/v1/scooters",
            json={"scooter_id": scooter_id, "model": model},
            headers=self._headers(),
        )
        r.raise_for_status()
        return r.json()["token"]

    def issue_config(self, scooter_id: str, policy_obj: dict, project_id: Optional[str] = None) -> int:
        body = {"policy": policy_obj}
        if project_id:
            body["project_id"] = project_id
        r = self.client.post(f"{self.base_url}/v1/configs/{scooter_id}", json=body, headers=self._headers())
        r.raise_for_status()
        return r.json()["version"]

    def fetch_config(self, scooter_id: str) -> Optional[dict]:
        r = self.client.get(f"{self.base_url}/v1/config/{scooter_id}", params={"current": 0}, headers=self._headers())
        if r.status_code == 204:
            return None
        r.raise_for_status()
        return r.json()

    def census(self) -> dict:
        r = self.client.get(f"{self.base_url}/v1/census", headers=self._headers())
        r.raise_for_status()
        return r.json()
