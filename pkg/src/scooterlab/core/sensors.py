"""Sensor kinds, reading variants, and the atomic SensorSample record."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .geo import GeoPoint

# Canonical kind names (wire values).
GYROSCOPE = "gyroscope"
ACCELEROMETER = "accelerometer"
MAGNETOMETER = "magnetometer"
TEMPERATURE = "temperature"
PRESSURE = "pressure"
HUMIDITY = "humidity"
LIGHT = "light"
GPS = "gps"
CAMERA = "camera"
MICROPHONE = "microphone"

IMU_KINDS = frozenset({GYROSCOPE, ACCELEROMETER, MAGNETOMETER})
ENVIRONMENTAL_KINDS = frozenset({TEMPERATURE, PRESSURE, HUMIDITY, LIGHT})
BLOB_KINDS = frozenset({CAMERA, MICROPHONE})
BUILTIN_KINDS = IMU_KINDS | ENVIRONMENTAL_KINDS | BLOB_KINDS | {GPS}

_CUSTOM_RE = re.compile(r"^custom:[a-z0-9_]+$")

#: Scalar units fixed per environmental kind.
SCALAR_UNITS = {TEMPERATURE: "degC", PRESSURE: "hPa", HUMIDITY: "%RH", LIGHT: "lux"}
IMU_UNITS = {ACCELEROMETER: "m/s2", GYROSCOPE: "rad/s", MAGNETOMETER: "uT"}

#: Per-kind sampling rate caps in Hz. Microphone is a 1 Hz segment marker.
def rate_cap_hz(kind: str) -> float:
    if kind in IMU_KINDS:
        return 100.0
    if kind == GPS:
        return 10.0
    if kind in ENVIRONMENTAL_KINDS:
        return 10.0
    if kind == CAMERA:
        return 2.0
    if kind == MICROPHONE:
        return 1.0
    return 100.0  # custom kinds


def is_custom(kind: str) -> bool:
    return kind.startswith("custom:")


def validate_kind(kind: str) -> str:
    """Return ``kind`` if it is a builtin or a well-formed custom name."""
    if kind in BUILTIN_KINDS:
        return kind
    if _CUSTOM_RE.match(kind):
        return kind
    raise ValueError(f"unknown sensor kind {kind!r}")


@dataclass(frozen=True)
class Scalar:
    value: float
    unit: str


@dataclass(frozen=True)
class Vector3:
    x: float
    y: float
    z: float
    unit: str


@dataclass(frozen=True)
class GpsFix:
    point: GeoPoint
    speed_mps: float
    heading_deg: float
    hdop: float


@dataclass(frozen=True)
class BlobRef:
    """Opaque payload reference: only size and content digest travel."""

    byte_len: int
    digest: str


SampleValue = Union[Scalar, Vector3, GpsFix, BlobRef]


@dataclass(frozen=True)
class SensorSample:
    """One timestamped reading from one sensor during one trip.

    ``t`` is a UTC epoch timestamp in milliseconds. The value variant is
    constrained by kind: vector3 for IMU kinds, fix for gps, blob_ref for
    camera/microphone, scalar (with the fixed unit) for environmental and
    custom kinds.
    """

    scooter_id: str
    trip_id: str
    kind: str
    t: int
    value: SampleValue

    def __post_init__(self):
        validate_kind(self.kind)
        if self.t <= 0:
            raise ValueError("sample timestamp must be strictly positive")
        v = self.value
        if self.kind in IMU_KINDS:
            if not isinstance(v, Vector3):
                raise ValueError(f"{self.kind} samples must carry a vector3 value")
        elif self.kind == GPS:
            if not isinstance(v, GpsFix):
                raise ValueError("gps samples must carry a fix value")
        elif self.kind in BLOB_KINDS:
            if not isinstance(v, BlobRef):
                raise ValueError(f"{self.kind} samples must carry a blob_ref value")
        else:
            if not isinstance(v, Scalar):
                raise ValueError(f"{self.kind} samples must carry a scalar value")
            expected = SCALAR_UNITS.get(self.kind)
            if expected is not None and v.unit != expected:
                raise ValueError(f"{self.kind} scalar unit must be {expected!r}")
        if isinstance(v, (Scalar, Vector3)):
            nums = (v.value,) if isinstance(v, Scalar) else (v.x, v.y, v.z)
            if not all(math.isfinite(n) for n in nums):
                raise ValueError("sample values must be finite")
