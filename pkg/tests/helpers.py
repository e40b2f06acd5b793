"""Shared test helpers: synthetic trip ingestion through the real chunk path."""

from __future__ import annotations

from scooterlab.core import codec, sensors
from scooterlab.core.geo import GeoPoint, offset_point
from scooterlab.core.model import ChunkKey
from scooterlab.core.sensors import GpsFix, Scalar, SensorSample

BASE = GeoPoint(29.4241, -98.4936)


def straight_trip_samples(scooter_id, trip_id, t0_ms, *, seconds=100, speed_mps=5.0,
                          heading_deg=0.0, origin=None, gps_hz=1.0, temp_every_s=0):
    """Constant-speed straight-line fixes (plus optional temperature scalars)."""
    origin = origin or BASE
    samples = []
    n = int(seconds * gps_hz)
    import math

    rad = math.radians(heading_deg)
    for i in range(n + 1):
        t = t0_ms + int(i * 1000 / gps_hz)
        d = speed_mps * i / gps_hz
        p = offset_point(origin, d * math.cos(rad), d * math.sin(rad))
        samples.append(SensorSample(scooter_id, trip_id, sensors.GPS, t, GpsFix(p, speed_mps, heading_deg, 0.8)))
        if temp_every_s and i % temp_every_s == 0:
            samples.append(SensorSample(scooter_id, trip_id, sensors.TEMPERATURE, t, Scalar(24.0 + i * 0.01, "degC")))
    samples.sort(key=lambda s: s.t)
    return samples


def ingest_trip(fc, scooter_id, trip_id, samples, config_version=0, chunk_size=500):
    """Push samples through receive_chunk/finalize like a real node would."""
    token = fc.scooter_token(scooter_id)
    seq = 0
    for i in range(0, len(samples), chunk_size):
        batch = samples[i : i + chunk_size]
        chunk = codec.make_chunk(ChunkKey(scooter_id, trip_id, seq), batch, batch[-1].t, config_version)
        fc.receive_chunk_json(codec.chunk_obj(chunk), token)
        seq += 1
    return fc.finalize_trip(scooter_id, trip_id, seq, token)
