"""External context providers (weather, traffic) and deterministic stubs.

A provider answers lookups keyed by (0.01-degree grid cell, UTC hour) and
must be pure for a given key within a run. The stubs derive their payloads
from a seed so simulations stay reproducible; a real API client can be
swapped in behind the same interface.
"""

from __future__ import annotations

import zlib
from random import Random
from typing import Optional, Protocol

from ..core.model import TRAFFIC, WEATHER

GRID_DEG = 0.01


def grid_cell(lat: float, lon: float) -> str:
    """0.01-degree grid cell id, 'latIdx:lonIdx'."""
    return f"{int(lat // GRID_DEG)}:{int(lon // GRID_DEG)}"


def hour_of(t_ms: int) -> int:
    return t_ms // 3_600_000


class EnrichmentProvider(Protocol):
    source: str

    def lookup(self, cell: str, hour_utc: int) -> Optional[dict]:
        """Payload for the cell-hour, or None when unavailable."""


class _StubBase:
    def __init__(self, seed: int = 0, unavailable_every: int = 0):
        self.seed = seed
        # Every Nth lookup key is reported unavailable (0 = always available);
        # deterministic per key, for exercising the pending/failed paths.
        self.unavailable_every = unavailable_every

    def _rng(self, cell: str, hour_utc: int) -> Random:
        key = f"{self.seed}:{self.source}:{cell}:{hour_utc}"
        return Random(zlib.crc32(key.encode("utf-8")))

    def _unavailable(self, cell: str, hour_utc: int) -> bool:
        if not self.unavailable_every:
            return False
        key = f"avail:{self.seed}:{self.source}:{cell}:{hour_utc}"
        return zlib.crc32(key.encode("utf-8")) % self.unavailable_every == 0


class StubWeatherProvider(_StubBase):
    source = WEATHER

    def lookup(self, cell: str, hour_utc: int) -> Optional[dict]:
        if self._unavailable(cell, hour_utc):
            return None
        r = self._rng(cell, hour_utc)
        return {
            "temp_c": round(18.0 + 16.0 * r.random(), 1),
            "precip_mm": round(max(0.0, r.random() * 4.0 - 2.0), 1),
            "wind_mps": round(r.random() * 9.0, 1),
        }


class StubTrafficProvider(_StubBase):
    source = TRAFFIC

    def lookup(self, cell: str, hour_utc: int) -> Optional[dict]:
        if self._unavailable(cell, hour_utc):
            return None
        r = self._rng(cell, hour_utc)
        return {"congestion_idx": round(r.random(), 2), "incidents": r.randint(0, 2)}


def default_providers(seed: int = 0) -> list:
    return [StubWeatherProvider(seed), StubTrafficProvider(seed)]
