import json
from datetime import date

import pytest

from scooterlab.core import codec, sensors
from scooterlab.core.geo import GeoFence, GeoPoint
from scooterlab.core.model import ScooterConfig
from scooterlab.core.policy import DataCollectionPolicy
from scooterlab.core.schedule import Schedule, ScheduleWindow, unrestricted_schedule
from scooterlab.core.sensors import BlobRef, GpsFix, Scalar, Vector3
from scooterlab.node.agent import DRAINING, IDLE, RECORDING, NodeAgent
from scooterlab.node.uplink import FlakyUplink, UplinkUnavailable

T0 = 1_750_000_000_000  # an arbitrary mid-2025 epoch-ms anchor


def make_config(rates, version=1, fence=None, schedule=None, project_id=None):
    policy = DataCollectionPolicy(sensors=rates, schedule=schedule or unrestricted_schedule(), fence=fence)
    return ScooterConfig("s1", version, policy, issued_at=T0, project_id=project_id)


class StaticSources:
    """Per-kind reading provider returning fixed values."""

    def __init__(self, fix_point=GeoPoint(29.4241, -98.4936), failing=()):
        self.fix_point = fix_point
        self.failing = set(failing)
        self.reads = 0

    def read(self, kind):
        self.reads += 1
        if kind in self.failing:
            raise RuntimeError(f"{kind} source down")
        if kind == sensors.GPS:
            return GpsFix(self.fix_point, 2.0, 90.0, 0.8)
        if kind in sensors.IMU_KINDS:
            return Vector3(0.0, 0.0, 9.81, sensors.IMU_UNITS.get(kind, "m/s2"))
        if kind in sensors.BLOB_KINDS:
            return BlobRef(1024, "00" * 32)
        return Scalar(25.0, sensors.SCALAR_UNITS.get(kind, "unitless"))


class MemoryServer:
    """Tiny controller double honoring the idempotent-ack contract."""

    def __init__(self):
        self.stored = {}
        self.puts = 0
        self.finalized = {}

    def put_chunk(self, scooter_id, trip_id, seq, chunk_line):
        self.puts += 1
        obj = json.loads(chunk_line)
        key = (scooter_id, trip_id, seq)
        if key in self.stored and self.stored[key]["digest"] != obj["digest"]:
            return {"ok": False, "code": "digest_mismatch"}
        self.stored.setdefault(key, obj)
        return {"ok": True, "digest": obj["digest"]}

    def finalize_trip(self, scooter_id, trip_id, chunk_count):
        self.finalized[(scooter_id, trip_id)] = chunk_count
        return {"ok": True, "outcome": "complete"}

    def get_config(self, scooter_id, current_version, battery_pct=None):
        return {"ok": True, "config": None}


def start_recording(agent, t=T0, sources=None, speed=2.0):
    """Drive the agent through motion detection; returns first sampling tick."""
    sources = sources or StaticSources()
    for dt in (0, 1000, 2000, 3000):
        agent.tick(t + dt, speed, sources)
    assert agent.state == RECORDING
    return t + 3000


def run_ticks(agent, sources, start, duration_ms, step_ms=100, speed=2.0):
    t = start
    end = start + duration_ms
    while t < end:
        t += step_ms
        agent.tick(t, speed, sources)
    return t


class TestSampling:
    def test_accelerometer_50hz_for_one_second_of_1ms_ticks(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.ACCELEROMETER: 50.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        collected = []
        for k in range(1, 1001):
            collected += agent.tick(t + k, 2.0, sources)
        assert len(collected) == 1000 // 20  # 50 Hz over (t, t+1000]
        ts = [s.t for s in collected]
        assert ts == sorted(ts)

    def test_gps_1hz_over_120s(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        collected = list(agent.sample_tick(t, sources))
        end = t + 120_000
        while t < end:
            t += 100
            collected += agent.tick(t, 2.0, sources)
        # Emissions on the 1 Hz grid in [start, start+120s]: 121 inclusive.
        assert len(collected) in (120, 121)

    def test_disabled_kind_never_sampled(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        collected = run_and_collect(agent, sources, t, 10_000)
        assert all(s.kind == sensors.GPS for s in collected)

    def test_multiple_crossings_per_tick(self, tmp_path):
        # 50 Hz sensor ticked at 100 ms: 5 samples per tick, distinct stamps.
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.ACCELEROMETER: 50.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        out = agent.tick(t + 100, 2.0, sources)
        assert len(out) == 5
        assert len({s.t for s in out}) == 5

    def test_source_failure_counts_dropout_and_skips(self, tmp_path):
        agent = NodeAgent(
            "s1", tmp_path, now_ms=T0,
            config=make_config({sensors.GPS: 1.0, sensors.TEMPERATURE: 1.0}),
        )
        sources = StaticSources(failing={sensors.TEMPERATURE})
        t = start_recording(agent, sources=sources)
        collected = run_and_collect(agent, sources, t, 5_000)
        assert all(s.kind == sensors.GPS for s in collected)
        assert agent.dropout_counts[sensors.TEMPERATURE] >= 5

    def test_no_sampling_while_stationary_and_no_burst_on_resume(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 2.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        t = run_ticks(agent, sources, t, 5_000)
        paused = []
        for _ in range(100):  # 10 s at 0 m/s
            t += 100
            paused += agent.tick(t, 0.0, sources)
        assert paused == []
        assert agent.state == RECORDING
        resumed = []
        for _ in range(10):
            t += 100
            resumed += agent.tick(t, 2.0, sources)
        assert len(resumed) <= 3  # 2 Hz over 1 s, no catch-up burst


def run_and_collect(agent, sources, start, duration_ms, step_ms=100, speed=2.0):
    out = list(agent.sample_tick(start, sources))
    t = start
    end = start + duration_ms
    while t < end:
        t += step_ms
        out += agent.tick(t, speed, sources)
    return out


class TestMotionTransitions:
    def test_idle_to_recording_after_sustained_motion(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        assert agent.motion_transition(T0, 1.2) == IDLE
        assert agent.motion_transition(T0 + 1000, 1.2) == IDLE
        assert agent.motion_transition(T0 + 3000, 1.2) == RECORDING
        assert agent.trip_id is not None

    def test_brief_motion_does_not_start_trip(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        agent.motion_transition(T0, 1.2)
        agent.motion_transition(T0 + 1000, 0.0)  # blip over
        agent.motion_transition(T0 + 4000, 1.2)
        assert agent.state == IDLE

    def test_short_pause_keeps_trip(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        trip = agent.trip_id
        for k in range(100):  # 10 s stationary
            agent.tick(t + 100 * (k + 1), 0.0, sources)
        t += 10_000
        agent.tick(t + 100, 1.5, sources)
        assert agent.state == RECORDING and agent.trip_id == trip

    def test_120s_stationary_ends_trip_with_backdated_end(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        trip = agent.trip_id
        t = run_ticks(agent, sources, t, 10_000)
        pause_start = t + 100
        state = None
        for k in range(1203):
            state = agent.motion_transition(pause_start + 100 * k, 0.0)
            if state == DRAINING:
                break
        assert state == DRAINING
        agent.drain(pause_start + 100 * k)
        assert agent.state == IDLE
        assert agent.last_trip["trip_id"] == trip
        assert agent.last_trip["ended_at"] == pause_start

    def test_new_trip_gets_fresh_id(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        first = agent.trip_id
        t = run_ticks(agent, sources, t, 5_000)
        for k in range(1201):
            agent.tick(t + 100 * (k + 1), 0.0, sources)
        assert agent.state == IDLE
        t += 1201 * 100
        start_recording(agent, t=t + 100, sources=sources)
        assert agent.trip_id != first and agent.trip_id > first


class TestSealing:
    def test_size_limit_seal_increments_seq(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.ACCELEROMETER: 100.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        # 100 Hz x ~41 s of 100 ms ticks -> crosses 4096 samples.
        run_ticks(agent, sources, t, 45_000)
        box = agent.outbox.trips[agent.trip_id]
        assert 0 in box.chunk_lines
        first = json.loads(box.chunk_lines[0])
        assert len(first["samples"]) >= 4096
        assert sorted(box.chunk_lines) == list(range(len(box.chunk_lines)))

    def test_time_limit_seal(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        run_ticks(agent, sources, t, 61_000)
        assert 0 in agent.outbox.trips[agent.trip_id].chunk_lines

    def test_trip_end_with_empty_buffer_emits_marker_only(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        t = run_ticks(agent, sources, t, 185_000)  # seals 60 s chunks; drains buffer over time
        trip = agent.trip_id
        agent.seal_chunk("TimeLimit", t)  # force-empty the buffer
        n_before = len(agent.outbox.trips[trip].chunk_lines)
        for k in range(1201):
            agent.tick(t + 100 * (k + 1), 0.0, sources)
        assert agent.state == IDLE
        box = agent.outbox.trips[trip]
        assert len(box.chunk_lines) == n_before
        assert box.finalize_count == n_before

    def test_sealed_chunks_survive_restart_with_valid_digest(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        run_ticks(agent, sources, t, 61_000)
        trip = agent.trip_id
        agent.close()

        again = NodeAgent("s1", tmp_path, now_ms=T0 + 100_000)
        box = again.outbox.trips[trip]
        for line in box.chunk_lines.values():
            if line:
                codec.parse_chunk(json.loads(line))  # digest verified inside


class TestRecovery:
    def test_journal_recovers_into_final_chunk(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        run_ticks(agent, sources, t, 10_000)
        trip = agent.trip_id
        n_buffered = len(agent._buffer)
        assert n_buffered > 0
        agent.close()  # abrupt stop: no drain, no finalize

        events = []
        again = NodeAgent("s1", tmp_path, now_ms=T0 + 60_000, events=lambda k, p: events.append((k, p)))
        box = again.outbox.trips[trip]
        assert box.finalize_count == len(box.chunk_lines)
        total = sum(box.chunk_sample_counts.values())
        assert total == n_buffered
        assert ("trip_recovered", {"trip_id": trip, "chunk_count": box.finalize_count}) in events

    def test_recovered_samples_upload_cleanly(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        run_ticks(agent, sources, t, 10_000)
        agent.close()

        again = NodeAgent("s1", tmp_path, now_ms=T0 + 60_000)
        server = MemoryServer()
        report = again.sync(True, server)
        assert report["failed"] == 0
        assert again.outbox.fully_drained()
        assert server.finalized


class TestSync:
    def _agent_with_three_chunks(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 2.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        for _ in range(3):
            t = run_ticks(agent, sources, t, 5_000)
            agent.seal_chunk("TimeLimit", t)
        return agent, t

    def test_offline_sync_is_noop(self, tmp_path):
        agent, _ = self._agent_with_three_chunks(tmp_path)
        report = agent.sync(False, MemoryServer())
        assert report == {"sent": 0, "acked": 0, "failed": 0}
        assert len(agent.outbox.pending()) == 3

    def test_online_sync_acks_everything(self, tmp_path):
        agent, _ = self._agent_with_three_chunks(tmp_path)
        server = MemoryServer()
        report = agent.sync(True, server)
        assert report == {"sent": 3, "acked": 3, "failed": 0}
        assert len(server.stored) == 3
        assert agent.outbox.pending() == []

    def test_link_drop_resumes_without_duplicates(self, tmp_path):
        agent, _ = self._agent_with_three_chunks(tmp_path)
        server = MemoryServer()
        flaky = FlakyUplink(server, fail_after=2)
        first = agent.sync(True, flaky)
        assert first["acked"] == 2 and first["failed"] == 1
        second = agent.sync(True, server)
        assert second["sent"] == 1 and second["acked"] == 1
        assert len(server.stored) == 3
        assert server.puts == 3  # no duplicate transmissions at all

    def test_auth_failure_suspends_until_refresh(self, tmp_path):
        agent, _ = self._agent_with_three_chunks(tmp_path)

        class AuthRejects(MemoryServer):
            def put_chunk(self, *a, **kw):
                return {"ok": False, "code": "auth_failure"}

        report = agent.sync(True, AuthRejects())
        assert agent.uploads_suspended
        assert report["acked"] == 0
        # A successful config round-trip clears the suspension.
        agent.refresh_config(MemoryServer(), T0 + 500_000)
        assert not agent.uploads_suspended
        server = MemoryServer()
        assert agent.sync(True, server)["acked"] == 3


class TestConfig:
    def test_newer_config_applies_at_trip_boundary(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0, sensors.CAMERA: 1.0}))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        t = run_ticks(agent, sources, t, 5_000)

        v2 = make_config({sensors.GPS: 5.0}, version=2)

        class Offers(MemoryServer):
            def get_config(self, scooter_id, current_version, battery_pct=None):
                return {"ok": True, "config": codec.config_obj(v2)}

        agent.refresh_config(Offers(), t)
        assert agent.config_version == 1  # still mid-trip
        assert agent.pending_config.version == 2
        mid_trip = run_and_collect(agent, sources, t, 3_000)
        assert any(s.kind == sensors.CAMERA for s in mid_trip)  # old policy holds
        t += 3_000
        for k in range(1201):
            agent.tick(t + 100 * (k + 1), 0.0, sources)
        assert agent.state == IDLE
        assert agent.config_version == 2
        t += 1201 * 100
        start_recording(agent, t=t + 100, sources=sources)
        fresh = run_and_collect(agent, sources, t + 3100, 5_000)
        assert fresh and not any(s.kind == sensors.CAMERA for s in fresh)

    def test_stale_config_rejected(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}, version=5))
        stale = make_config({sensors.GPS: 2.0}, version=4)

        class Offers(MemoryServer):
            def get_config(self, scooter_id, current_version, battery_pct=None):
                return {"ok": True, "config": codec.config_obj(stale)}

        assert agent.refresh_config(Offers(), T0) is None
        assert agent.config_version == 5
        assert agent.alert_count == 1

    def test_malformed_config_rejected(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))

        class Offers(MemoryServer):
            def get_config(self, scooter_id, current_version, battery_pct=None):
                return {"ok": True, "config": {"version": "nope"}}

        assert agent.refresh_config(Offers(), T0) is None
        assert agent.config_version == 1
        assert agent.alert_count == 1

    def test_config_survives_restart(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}, version=3))
        agent.close()
        again = NodeAgent("s1", tmp_path, now_ms=T0 + 1000)
        assert again.config_version == 3


class TestGating:
    def fenced_config(self, **kw):
        fence = GeoFence([GeoPoint(29.0, -99.0), GeoPoint(29.0, -98.0), GeoPoint(30.0, -98.0), GeoPoint(30.0, -99.0)])
        return make_config({sensors.GPS: 2.0, sensors.TEMPERATURE: 2.0}, fence=fence, **kw)

    def test_fix_inside_fence_records(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=self.fenced_config())
        sources = StaticSources(fix_point=GeoPoint(29.5, -98.5))
        t = start_recording(agent, sources=sources)
        out = run_and_collect(agent, sources, t, 5_000)
        assert out and agent.suppressed_count == 0

    def test_fix_outside_fence_suppresses_everything(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=self.fenced_config())
        sources = StaticSources(fix_point=GeoPoint(40.0, -98.5))
        t = start_recording(agent, sources=sources)
        out = run_and_collect(agent, sources, t, 5_000)
        assert out == []
        assert agent.suppressed_count > 0

    def test_no_fix_defaults_to_suppressed_under_fence(self, tmp_path):
        fence = GeoFence([GeoPoint(29.0, -99.0), GeoPoint(29.0, -98.0), GeoPoint(30.0, -98.0), GeoPoint(30.0, -99.0)])
        cfg = make_config({sensors.TEMPERATURE: 2.0}, fence=fence)  # no gps enabled
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=cfg)
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        out = run_and_collect(agent, sources, t, 5_000)
        assert out == [] and agent.suppressed_count > 0

    def test_schedule_gates_by_timestamp(self, tmp_path):
        # Window on Tuesdays 09:00-17:00 UTC; T0 anchor is inside a Sunday.
        sched = Schedule(date(2025, 1, 1), date(2025, 12, 31), (ScheduleWindow.of("tue", "09:00", "17:00", "UTC"),))
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 2.0}, schedule=sched))
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        out = run_and_collect(agent, sources, t, 5_000)
        assert out == [] and agent.suppressed_count > 0


class TestBattery:
    def test_full_battery_is_forty_miles(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        agent.tick(T0, 0.0, StaticSources(), battery_pct=100.0)
        assert agent.battery_status() == {"battery_pct": 100.0, "est_range_miles": 40.0}

    def test_empty_battery_is_zero_miles(self, tmp_path):
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=make_config({sensors.GPS: 1.0}))
        agent.tick(T0, 0.0, StaticSources(), battery_pct=0.0)
        assert agent.battery_status()["est_range_miles"] == 0.0


class TestStorageFull:
    def test_prune_then_thin_blobs(self, tmp_path):
        cfg = make_config({sensors.CAMERA: 2.0, sensors.GPS: 2.0})
        agent = NodeAgent("s1", tmp_path, now_ms=T0, config=cfg, outbox_capacity_bytes=9_000)
        sources = StaticSources()
        t = start_recording(agent, sources=sources)
        agent.sample_tick(t, sources)
        t = run_ticks(agent, sources, t, 8_000)
        agent.seal_chunk("TimeLimit", t)
        assert agent.dropped_count == 0

        # Ack what's there, then fill again: pruning acked entries must
        # happen before any blob dropping.
        server = MemoryServer()
        agent.sync(True, server)
        t = run_ticks(agent, sources, t, 8_000)
        agent.seal_chunk("TimeLimit", t)
        assert agent.dropped_count == 0

        # Now with nothing acked and the cap far exceeded, blobs drop.
        t = run_ticks(agent, sources, t, 70_000)
        assert agent.dropped_count > 0
        assert "BlobsDroppedStorageFull" in agent.quality_flags
        for _, _, line, _ in agent.outbox.pending():
            obj = json.loads(line)
            codec.parse_chunk(obj)  # digests remain valid after thinning
