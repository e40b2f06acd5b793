"""Sensor reading synthesis from consecutive poses.

Readings are pure functions of (scenario seed, scooter, step), so runs are
reproducible. The accelerometer carries gravity plus finite-difference
longitudinal/centripetal terms; environmental kinds follow slow sinusoids
around scenario constants; camera/microphone produce opaque payload
references (synthetic length + digest, no payload bytes).
"""

from __future__ import annotations

import hashlib
import math
import zlib
from random import Random
from typing import Optional

from ..core import sensors
from ..core.geo import GeoPoint, offset_point
from ..core.sensors import BlobRef, GpsFix, Scalar, Vector3
from .mobility import Pose

GRAVITY = 9.81

ENV_DEFAULTS = {"temp_c": 27.0, "pressure_hpa": 1013.25, "humidity_rh": 48.0, "light_lux": 600.0}


def _norm_heading_delta(a: float, b: float) -> float:
    d = (b - a + 180.0) % 360.0 - 180.0
    return d


class TickReadings:
    """Lazy per-kind provider for one scooter at one step."""

    def __init__(
        self,
        scooter_id: str,
        step: int,
        pose: Pose,
        prev_pose: Pose,
        *,
        seed: int = 0,
        gps_sigma_m: float = 0.0,
        imu_sigma: float = 0.0,
        env: Optional[dict] = None,
        t0_ms: int = 0,
    ):
        self.scooter_id = scooter_id
        self.step = step
        self.pose = pose
        self.prev = prev_pose
        self.seed = seed
        self.gps_sigma_m = gps_sigma_m
        self.imu_sigma = imu_sigma
        self.env = {**ENV_DEFAULTS, **(env or {})}
        self.t0_ms = t0_ms
        self._rng: Optional[Random] = None

    def rng(self) -> Random:
        if self._rng is None:
            key = zlib.crc32(f"{self.seed}:{self.scooter_id}:{self.step}".encode())
            self._rng = Random(key)
        return self._rng

    def _gauss(self, sigma: float) -> float:
        return self.rng().gauss(0.0, sigma) if sigma > 0 else 0.0

    def _dt_s(self) -> float:
        return max(1e-3, (self.pose.t_ms - self.prev.t_ms) / 1000.0)

    def read(self, kind: str):
        if kind == sensors.GPS:
            return self._gps()
        if kind == sensors.ACCELEROMETER:
            return self._accelerometer()
        if kind == sensors.GYROSCOPE:
            return self._gyroscope()
        if kind == sensors.MAGNETOMETER:
            return self._magnetometer()
        if kind in sensors.ENVIRONMENTAL_KINDS:
            return self._environmental(kind)
        if kind in sensors.BLOB_KINDS:
            return self._blob(kind)
        return Scalar(math.sin(2.0 * math.pi * self._elapsed_s() / 60.0), "unitless")

    def _elapsed_s(self) -> float:
        return (self.pose.t_ms - self.t0_ms) / 1000.0

    def _gps(self) -> GpsFix:
        p = self.pose.position
        if self.gps_sigma_m > 0:
            p = offset_point(p, self._gauss(self.gps_sigma_m), self._gauss(self.gps_sigma_m))
        return GpsFix(p, self.pose.speed_mps, self.pose.heading_deg, 0.8)

    def _yaw_rate_rad(self) -> float:
        return math.radians(_norm_heading_delta(self.prev.heading_deg, self.pose.heading_deg)) / self._dt_s()

    def _accelerometer(self) -> Vector3:
        forward = (self.pose.speed_mps - self.prev.speed_mps) / self._dt_s()
        lateral = self.pose.speed_mps * self._yaw_rate_rad()
        return Vector3(
            forward + self._gauss(self.imu_sigma),
            lateral + self._gauss(self.imu_sigma),
            GRAVITY + self._gauss(self.imu_sigma),
            "m/s2",
        )

    def _gyroscope(self) -> Vector3:
        return Vector3(
            self._gauss(self.imu_sigma),
            self._gauss(self.imu_sigma),
            self._yaw_rate_rad() + self._gauss(self.imu_sigma),
            "rad/s",
        )

    def _magnetometer(self) -> Vector3:
        h = math.radians(self.pose.heading_deg)
        return Vector3(
            28.0 * math.cos(h) + self._gauss(self.imu_sigma),
            -28.0 * math.sin(h) + self._gauss(self.imu_sigma),
            38.0 + self._gauss(self.imu_sigma),
            "uT",
        )

    def _environmental(self, kind: str) -> Scalar:
        t = self._elapsed_s()
        if kind == sensors.TEMPERATURE:
            return Scalar(round(self.env["temp_c"] + 2.0 * math.sin(2 * math.pi * t / 3600.0), 3), "degC")
        if kind == sensors.PRESSURE:
            return Scalar(round(self.env["pressure_hpa"] + 1.2 * math.sin(2 * math.pi * t / 7200.0), 3), "hPa")
        if kind == sensors.HUMIDITY:
            return Scalar(round(self.env["humidity_rh"] + 6.0 * math.sin(2 * math.pi * t / 5400.0), 3), "%RH")
        return Scalar(round(max(0.0, self.env["light_lux"] + 400.0 * math.sin(2 * math.pi * t / 43200.0)), 3), "lux")

    def _blob(self, kind: str) -> BlobRef:
        tag = f"{kind}:{self.scooter_id}:{self.pose.t_ms}"
        digest = hashlib.sha256(tag.encode()).hexdigest()
        length = 24_576 + zlib.crc32(tag.encode()) % 8_192 if kind == sensors.CAMERA else 4_096
        return BlobRef(length, digest)


def synthesize_readings(scooter_id, step, pose, prev_pose, **kw) -> TickReadings:
    return TickReadings(scooter_id, step, pose, prev_pose, **kw)
