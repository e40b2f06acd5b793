"""Shared domain model: geodesy, schedules, sensors, policies, records."""

from .geo import (
    EARTH_RADIUS_M,
    MAX_SPEED_MPS,
    GeoFence,
    GeoPoint,
    haversine_distance,
    point_in_fence,
    trip_length,
)
from .policy import DataCollectionPolicy, policy_violations, validate_policy
from .schedule import Schedule, ScheduleWindow, schedule_contains, unrestricted_schedule
from .sensors import SensorSample

__all__ = [
    "EARTH_RADIUS_M",
    "MAX_SPEED_MPS",
    "GeoFence",
    "GeoPoint",
    "haversine_distance",
    "point_in_fence",
    "trip_length",
    "DataCollectionPolicy",
    "policy_violations",
    "validate_policy",
    "Schedule",
    "ScheduleWindow",
    "schedule_contains",
    "unrestricted_schedule",
    "SensorSample",
]
