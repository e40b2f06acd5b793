"""Data collection policies: enabled sensors + rates, geofence, schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .errors import InvalidPolicy
from .geo import GeoFence
from .schedule import Schedule
from .sensors import MICROPHONE, rate_cap_hz, validate_kind


@dataclass(frozen=True)
class PolicyViolation:
    code: str  # RateExceedsCap | EmptySensorSet | InvalidFence | InvalidSchedule
    message: str
    kind: Optional[str] = None

    def to_obj(self) -> dict:
        obj = {"code": self.code, "message": self.message}
        if self.kind is not None:
            obj["kind"] = self.kind
        return obj


@dataclass(frozen=True)
class DataCollectionPolicy:
    """Per-project recipe for what nodes record, where, and when.

    ``sensors`` maps kind -> rate in Hz. The microphone rate is a segment
    marker cadence and is capped at 1 Hz.
    """

    sensors: dict[str, float]
    schedule: Schedule
    fence: Optional[GeoFence] = None

    def rate(self, kind: str) -> Optional[float]:
        return self.sensors.get(kind)


def policy_violations(p: DataCollectionPolicy) -> list[PolicyViolation]:
    """All rate-cap and sensor-set violations, not just the first."""
    out: list[PolicyViolation] = []
    if not p.sensors:
        out.append(PolicyViolation("EmptySensorSet", "policy enables no sensors"))
    for kind, rate in sorted(p.sensors.items()):
        try:
            validate_kind(kind)
        except ValueError as e:
            out.append(PolicyViolation("UnknownKind", str(e), kind))
            continue
        cap = rate_cap_hz(kind)
        if not (isinstance(rate, (int, float)) and rate > 0):
            out.append(PolicyViolation("RateExceedsCap", f"{kind} rate must be a positive number", kind))
        elif rate > cap:
            label = "1 Hz segment markers" if kind == MICROPHONE else f"max {cap:g}"
            out.append(PolicyViolation("RateExceedsCap", f"{kind} rate {rate:g} Hz exceeds cap ({label})", kind))
    return out


def validate_policy(p: DataCollectionPolicy) -> DataCollectionPolicy:
    """Return ``p`` unchanged, or raise InvalidPolicy listing every violation.

    Fence and schedule objects are validated at construction; a policy that
    holds them is structurally sound, so only rate/sensor rules remain.
    """
    violations = policy_violations(p)
    if violations:
        raise InvalidPolicy("policy validation failed", [v.to_obj() for v in violations])
    return p
