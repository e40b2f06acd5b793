"""Researcher portal service: auth, projects, spatiotemporal queries, export."""

from .queries import TripFilter, export_csv, export_jsonl, stats_report, trips_geojson
from .service import RampService

__all__ = ["RampService", "TripFilter", "export_csv", "export_jsonl", "stats_report", "trips_geojson"]
