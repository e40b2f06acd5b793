"""Deterministic scooter-world simulation: mobility, sensors, connectivity."""

from .engine import Census, DirectAdmin, EventLog, HttpAdmin, Simulation, battery_step
from .mobility import Pose, Route, mobility_step, slerp
from .scenario import (
    LegSpec,
    Scenario,
    ScooterSpec,
    Uptime,
    WifiZone,
    connectivity_at,
    load_scenario,
    parse_scenario,
    save_scenario,
    scenario_obj,
)
from .scenarios import SCENARIO_KINDS, make_scenario
from .synth import TickReadings, synthesize_readings

__all__ = [
    "Simulation",
    "EventLog",
    "Census",
    "DirectAdmin",
    "HttpAdmin",
    "battery_step",
    "Pose",
    "Route",
    "mobility_step",
    "slerp",
    "Scenario",
    "ScooterSpec",
    "LegSpec",
    "WifiZone",
    "Uptime",
    "connectivity_at",
    "load_scenario",
    "parse_scenario",
    "save_scenario",
    "scenario_obj",
    "SCENARIO_KINDS",
    "make_scenario",
    "TickReadings",
    "synthesize_readings",
]
