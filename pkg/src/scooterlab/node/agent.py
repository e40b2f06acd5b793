"""On-scooter agent: trip segmentation, sampling, sealing, opportunistic sync.

One agent is one logical actor: ticks, transitions, and sealing run on a
single timeline, and sync touches the outbox only through its serialized
append/ack operations. State that matters across a process restart (sealed
chunks, the open-chunk journal, ack ledger, configs) lives in the Outbox;
everything else is rebuilt on startup.

Trip detection: motion above 0.5 m/s sustained for 3 s opens a trip;
0.5 m/s or less sustained for 120 s closes it, with the trip's end backdated
to the start of the stationary period. Samples are only emitted while
moving, so a traffic-light stop neither splits the trip nor pads its tail.
"""

from __future__ import annotations

import hashlib
import json
import math
from typing import Callable, Optional

from ..core import codec
from ..core.geo import point_in_fence
from ..core.model import ChunkKey, ScooterConfig, TripChunk, est_range_miles
from ..core.schedule import schedule_contains
from ..core.sensors import BLOB_KINDS, GPS, SensorSample
from .outbox import Outbox, OutboxFull
from .uplink import UplinkUnavailable

IDLE = "idle"
RECORDING = "recording"
DRAINING = "draining"

MOTION_START_MPS = 0.5
MOTION_START_SUSTAIN_MS = 3_000
MOTION_STOP_SUSTAIN_MS = 120_000

CHUNK_MAX_SAMPLES = 4096
CHUNK_MAX_AGE_MS = 60_000

SEAL_SIZE_LIMIT = "SizeLimit"
SEAL_TIME_LIMIT = "TimeLimit"
SEAL_TRIP_END = "TripEnd"

EventSink = Callable[[str, object], None]


class SourceError(Exception):
    """A reading provider failed for one kind on one tick."""


class NodeAgent:
    def __init__(
        self,
        scooter_id: str,
        outbox_dir,
        *,
        now_ms: int,
        config: Optional[ScooterConfig] = None,
        events: Optional[EventSink] = None,
        outbox_capacity_bytes: Optional[int] = None,
        config_poll_interval_ms: int = 30_000,
    ):
        self.scooter_id = scooter_id
        self.outbox = Outbox(outbox_dir, capacity_bytes=outbox_capacity_bytes)
        self._events = events or (lambda kind, payload: None)
        self.state = IDLE
        self.config_poll_interval_ms = config_poll_interval_ms

        self.active_config: Optional[ScooterConfig] = None
        self.pending_config: Optional[ScooterConfig] = None
        self._load_configs(config)

        self.trip_id: Optional[str] = None
        self.trip_started_at: Optional[int] = None
        self.last_trip: Optional[dict] = None
        self._buffer: list[tuple] = []  # (SensorSample, canonical line)
        self._chunk_opened_at: Optional[int] = None
        self._next_seq = 0
        self._emit_index: dict[str, int] = {}
        self._emit_t0 = 0
        self._sampling_floor = 0
        self._last_fix = None

        self._moving_since: Optional[int] = None
        self._stationary_since: Optional[int] = None
        self._last_battery_pct: Optional[float] = None
        self._last_config_poll: Optional[int] = None
        self.uploads_suspended = False
        self._schedule_cache: dict[int, bool] = {}

        self.dropout_counts: dict[str, int] = {}
        self.suppressed_count = 0
        self.dropped_count = 0
        self.alert_count = 0
        self.quality_flags: set[str] = set()

        self._recover(now_ms)

    # ---- startup ----

    def _load_configs(self, provisioned: Optional[ScooterConfig]) -> None:
        stored = self.outbox.load_config()
        if stored:
            try:
                self.active_config = codec.parse_config(json.loads(stored))
            except Exception:
                self.active_config = None
        if provisioned is not None and (self.active_config is None or provisioned.version > self.active_config.version):
            self.active_config = provisioned
            self.outbox.save_config(codec.canonical_dumps(codec.config_obj(provisioned)))
        pending = self.outbox.load_config(pending=True)
        if pending:
            try:
                cfg = codec.parse_config(json.loads(pending))
                if self.active_config is None or cfg.version > self.active_config.version:
                    self.pending_config = cfg
            except Exception:
                pass
        self._promote_pending_config()

    def _recover(self, now_ms: int) -> None:
        """Seal and finalize trips that were open when the process died."""
        for box in self.outbox.unfinished_trips():
            trip_id = box.trip_id
            if box.journal_samples:
                pairs = sorted(
                    ((codec.parse_sample(json.loads(l)), l) for l in box.journal_samples),
                    key=lambda pair: pair[0].t,
                )
                samples = [s for s, _ in pairs]
                lines = [l for _, l in pairs]
                seq = max(box.chunk_lines, default=-1) + 1
                chunk = TripChunk(
                    key=ChunkKey(self.scooter_id, trip_id, seq),
                    samples=tuple(samples),
                    sealed_at=now_ms,
                    config_version=box.config_version,
                    digest=_digest_lines(lines),
                )
                line = codec.canonical_dumps(codec.chunk_obj(chunk))
                self.outbox.append_chunk(trip_id, seq, line, len(samples), force=True)
                self.outbox.rotate_journal(trip_id)
                self._events("chunk_sealed", {"trip_id": trip_id, "seq": seq, "samples": len(samples), "reason": "Recovery"})
            else:
                self.outbox.rotate_journal(trip_id)
            chunk_count = max(box.chunk_lines, default=-1) + 1
            self.outbox.record_finalize(trip_id, chunk_count)
            self._events("trip_recovered", {"trip_id": trip_id, "chunk_count": chunk_count})

    # ---- trip segmentation ----

    def motion_transition(self, now_ms: int, speed_mps: float) -> str:
        """Advance the ride state machine with one speed estimate."""
        moving = speed_mps > MOTION_START_MPS
        if self.state == IDLE:
            if moving and self.active_config is not None:
                if self._moving_since is None:
                    self._moving_since = now_ms
                if now_ms - self._moving_since >= MOTION_START_SUSTAIN_MS:
                    self._start_trip(now_ms)
            else:
                self._moving_since = None
        elif self.state == RECORDING:
            if moving:
                self._stationary_since = None
            else:
                if self._stationary_since is None:
                    self._stationary_since = now_ms
                # No sampling while stationary: grid points up to here are
                # skipped, not emitted, when motion resumes.
                self._sampling_floor = now_ms
                if now_ms - self._stationary_since >= MOTION_STOP_SUSTAIN_MS:
                    self.state = DRAINING
        return self.state

    def _start_trip(self, now_ms: int) -> None:
        self.trip_id = f"{self.scooter_id}-t{now_ms:013d}"
        self.trip_started_at = now_ms
        self.state = RECORDING
        self._moving_since = None
        self._stationary_since = None
        self._buffer = []
        self._chunk_opened_at = None
        self._next_seq = 0
        self._emit_index = {}
        self._emit_t0 = now_ms
        self._sampling_floor = now_ms - 1
        self._last_fix = None
        self.outbox.open_trip(self.trip_id, self.active_config.version)
        self._events("trip_started", {"trip_id": self.trip_id, "t": now_ms})

    def drain(self, now_ms: int) -> None:
        """Seal the final chunk, record the finalize marker, return to idle."""
        assert self.state == DRAINING
        ended_at = self._stationary_since if self._stationary_since is not None else now_ms
        trip_id = self.trip_id
        self.seal_chunk(SEAL_TRIP_END, now_ms)
        self.outbox.record_finalize(trip_id, self._next_seq)
        self.last_trip = {"trip_id": trip_id, "started_at": self.trip_started_at, "ended_at": ended_at, "chunk_count": self._next_seq}
        self._events("trip_ended", {"trip_id": trip_id, "ended_at": ended_at, "chunk_count": self._next_seq})
        self.state = IDLE
        self.trip_id = None
        self.trip_started_at = None
        self._stationary_since = None
        self._moving_since = None
        self._promote_pending_config()

    @property
    def local_trip_ended_at(self) -> Optional[int]:
        return self.last_trip["ended_at"] if self.last_trip else None

    # ---- sampling ----

    def sample_tick(self, now_ms: int, sources) -> list:
        """Emit one sample per due phase crossing per enabled sensor.

        Emission times sit on a fixed per-kind grid anchored at trip start
        (t_i = t0 + round(i * 1000 / rate)), so counts over any moving
        interval are within one of rate x interval regardless of tick
        cadence. Failed reads skip the crossing and bump a dropout counter.
        """
        if self.state != RECORDING or self.active_config is None:
            return []
        policy = self.active_config.policy
        floor = self._sampling_floor
        emitted = []
        journal_lines = []
        kinds = sorted(policy.sensors)
        if GPS in policy.sensors:  # gps first so the fence gate sees this tick's fix
            kinds.remove(GPS)
            kinds.insert(0, GPS)
        for kind in kinds:
            rate = policy.sensors[kind]
            period_grid = 1000.0 / rate
            i = self._emit_index.get(kind, 0)
            # Skip grid points that fell inside a stationary window.
            if self._emit_t0 + round(i * period_grid) <= floor:
                i = max(i, int(math.floor((floor - self._emit_t0) / period_grid)))
                while self._emit_t0 + round(i * period_grid) <= floor:
                    i += 1
            reading = None
            failed = False
            while True:
                t_i = self._emit_t0 + round(i * period_grid)
                if t_i > now_ms:
                    break
                if reading is None and not failed:
                    try:
                        reading = sources.read(kind)
                    except Exception:
                        failed = True
                        self.dropout_counts[kind] = self.dropout_counts.get(kind, 0) + 1
                if failed:
                    i += 1
                    continue
                sample = SensorSample(self.scooter_id, self.trip_id, kind, t_i, reading)
                line = codec.sample_line(sample)
                if kind == GPS:
                    self._last_fix = reading
                if self._gate(t_i, policy):
                    self._buffer.append((sample, line))
                    journal_lines.append(line)
                    if self._chunk_opened_at is None:
                        self._chunk_opened_at = t_i
                    emitted.append(sample)
                    self._events("sample_recorded", line)
                else:
                    self.suppressed_count += 1
                    self._events("sample_suppressed", line)
                i += 1
            self._emit_index[kind] = i
        if journal_lines:
            self.outbox.journal_samples(self.trip_id, journal_lines)
        # Seal on size or age, whichever trips first.
        if len(self._buffer) >= CHUNK_MAX_SAMPLES:
            self.seal_chunk(SEAL_SIZE_LIMIT, now_ms)
        elif self._buffer and self._chunk_opened_at is not None and now_ms - self._chunk_opened_at >= CHUNK_MAX_AGE_MS:
            self.seal_chunk(SEAL_TIME_LIMIT, now_ms)
        return emitted

    def _gate(self, t_ms: int, policy) -> bool:
        """Recorded (True) or suppressed (False) under fence/schedule rules."""
        minute = t_ms // 60_000
        allowed = self._schedule_cache.get(minute)
        if allowed is None:
            allowed = schedule_contains(policy.schedule, t_ms)
            self._schedule_cache[minute] = allowed
            if len(self._schedule_cache) > 4096:
                self._schedule_cache.clear()
        if not allowed:
            return False
        if policy.fence is not None:
            if self._last_fix is None:
                return False  # no fix yet: default to suppressed under a fence
            if not point_in_fence(self._last_fix.point, policy.fence):
                return False
        return True

    # ---- sealing ----

    def seal_chunk(self, reason: str, now_ms: int) -> Optional[TripChunk]:
        """Seal the open buffer into the outbox as the trip's next chunk."""
        if not self._buffer:
            return None  # TripEnd with an empty buffer emits no chunk
        # Per-kind grids interleave within a tick; chunks are time-sorted.
        ordered = sorted(self._buffer, key=lambda pair: pair[0].t)
        samples = tuple(s for s, _ in ordered)
        lines = [l for _, l in ordered]
        chunk = TripChunk(
            key=ChunkKey(self.scooter_id, self.trip_id, self._next_seq),
            samples=samples,
            sealed_at=now_ms,
            config_version=self.active_config.version,
            digest=_digest_lines(lines),
        )
        line = codec.canonical_dumps(codec.chunk_obj(chunk))
        try:
            self.outbox.append_chunk(self.trip_id, chunk.key.seq, line, len(samples))
        except OutboxFull:
            self.outbox.prune_acked()
            try:
                self.outbox.append_chunk(self.trip_id, chunk.key.seq, line, len(samples))
            except OutboxFull:
                chunk, line, dropped = self._thin_blobs(chunk)
                if dropped:
                    self.dropped_count += dropped
                    self.quality_flags.add("BlobsDroppedStorageFull")
                    self._events("samples_dropped", {"trip_id": self.trip_id, "count": dropped})
                self.outbox.append_chunk(self.trip_id, chunk.key.seq, line, len(chunk.samples), force=True)
        self._events(
            "chunk_sealed",
            {"trip_id": self.trip_id, "seq": chunk.key.seq, "samples": len(chunk.samples), "reason": reason},
        )
        self._buffer = []
        self._chunk_opened_at = None
        self._next_seq += 1
        return chunk

    def _thin_blobs(self, chunk: TripChunk):
        """Drop camera/microphone samples from a chunk when storage is full."""
        kept = [s for s in chunk.samples if s.kind not in BLOB_KINDS]
        dropped = len(chunk.samples) - len(kept)
        thinned = codec.make_chunk(chunk.key, kept, chunk.sealed_at, chunk.config_version)
        return thinned, codec.canonical_dumps(codec.chunk_obj(thinned)), dropped

    # ---- upload / config ----

    def sync(self, online: bool, uplink) -> dict:
        """Upload pending chunks and finalize markers in (trip, seq) order."""
        report = {"sent": 0, "acked": 0, "failed": 0}
        if not online:
            return report
        if not self.uploads_suspended:
            for trip_id, seq, line, n_samples in self.outbox.pending():
                report["sent"] += 1
                try:
                    resp = uplink.put_chunk(self.scooter_id, trip_id, seq, line)
                except UplinkUnavailable:
                    report["failed"] += 1
                    return report
                if resp.get("ok"):
                    self.outbox.mark_acked(trip_id, seq)
                    report["acked"] += 1
                    self._events("chunk_acked", {"trip_id": trip_id, "seq": seq, "samples": n_samples})
                elif resp.get("code") == "auth_failure":
                    self.uploads_suspended = True
                    self.alert_count += 1
                    report["failed"] += 1
                    self._events("uploads_suspended", {"trip_id": trip_id, "seq": seq})
                    break
                else:
                    # Permanent rejection (digest mismatch etc.): park it.
                    self.outbox.quarantine(trip_id, seq)
                    self.alert_count += 1
                    report["failed"] += 1
                    self._events(
                        "chunk_quarantined",
                        {"trip_id": trip_id, "seq": seq, "samples": n_samples, "code": resp.get("code")},
                    )
        if not self.uploads_suspended:
            for trip_id, chunk_count in self.outbox.pending_finalizes():
                try:
                    resp = uplink.finalize_trip(self.scooter_id, trip_id, chunk_count)
                except UplinkUnavailable:
                    return report
                if resp.get("ok"):
                    self.outbox.mark_finalize_acked(trip_id)
                    self._events("finalize_acked", {"trip_id": trip_id, "chunk_count": chunk_count})
                elif resp.get("code") == "auth_failure":
                    self.uploads_suspended = True
                    self.alert_count += 1
                    break
                else:
                    self.alert_count += 1
                    self.outbox.mark_finalize_acked(trip_id)
                    self._events("finalize_rejected", {"trip_id": trip_id, "code": resp.get("code")})
        return report

    def refresh_config(self, uplink, now_ms: int) -> Optional[ScooterConfig]:
        """Poll for a newer config; it takes effect at the next trip boundary."""
        current = self.active_config.version if self.active_config else 0
        try:
            resp = uplink.get_config(self.scooter_id, current, battery_pct=self._last_battery_pct)
        except UplinkUnavailable:
            return None
        if not resp.get("ok"):
            self.alert_count += 1
            return None
        self.uploads_suspended = False
        obj = resp.get("config")
        if obj is None:
            return None
        try:
            cfg = codec.parse_config(obj)
        except Exception:
            self.alert_count += 1
            self._events("config_rejected", {"reason": "malformed"})
            return None
        if cfg.version <= current:
            self.alert_count += 1
            self._events("config_rejected", {"reason": "stale", "version": cfg.version})
            return None
        self.pending_config = cfg
        self.outbox.save_config(codec.canonical_dumps(codec.config_obj(cfg)), pending=True)
        self._events("config_downloaded", {"version": cfg.version})
        if self.state == IDLE:
            self._promote_pending_config()
        return cfg

    def _promote_pending_config(self) -> None:
        if self.pending_config is None or self.state != IDLE:
            return
        self.active_config = self.pending_config
        self.pending_config = None
        self.outbox.save_config(codec.canonical_dumps(codec.config_obj(self.active_config)))
        self.outbox.clear_pending_config()
        self._schedule_cache.clear()
        self._events("config_applied", {"version": self.active_config.version, "project_id": self.active_config.project_id})

    @property
    def config_version(self) -> int:
        return self.active_config.version if self.active_config else 0

    # ---- battery ----

    def battery_status(self) -> dict:
        pct = self._last_battery_pct if self._last_battery_pct is not None else 0.0
        return {"battery_pct": pct, "est_range_miles": est_range_miles(pct)}

    # ---- orchestration ----

    def tick(self, now_ms: int, speed_mps: float, sources, battery_pct: Optional[float] = None) -> list:
        """One sensing step: transition, sample while moving, seal as needed."""
        if battery_pct is not None:
            self._last_battery_pct = battery_pct
        state = self.motion_transition(now_ms, speed_mps)
        if state == DRAINING:
            self.drain(now_ms)
            return []
        if state == RECORDING and speed_mps > MOTION_START_MPS:
            return self.sample_tick(now_ms, sources)
        return []

    def maybe_refresh_config(self, uplink, now_ms: int) -> None:
        due = (
            self._last_config_poll is None
            or now_ms - self._last_config_poll >= self.config_poll_interval_ms
            or self.uploads_suspended
        )
        if due:
            self._last_config_poll = now_ms
            self.refresh_config(uplink, now_ms)

    def close(self) -> None:
        self.outbox.close()


def _digest_lines(lines: list[str]) -> str:
    h = hashlib.sha256()
    h.update("\n".join(lines).encode("utf-8"))
    return h.hexdigest()
