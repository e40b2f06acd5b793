"""Central fleet controller: ingestion, assembly, enrichment, fleet ops."""

from .enrichment import StubTrafficProvider, StubWeatherProvider, default_providers
from .service import FleetController, clean_samples
from .storage import FileStorage, Storage

__all__ = [
    "FleetController",
    "clean_samples",
    "Storage",
    "FileStorage",
    "StubWeatherProvider",
    "StubTrafficProvider",
    "default_providers",
]
