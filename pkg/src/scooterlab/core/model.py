"""Fleet, user, loan, project, trip, and config records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .policy import DataCollectionPolicy
from .sensors import SensorSample

# Scooter statuses
AVAILABLE = "available"
LOANED = "loaned"
MAINTENANCE = "maintenance"
SCOOTER_STATUSES = (AVAILABLE, LOANED, MAINTENANCE)

# User roles
ADMIN = "admin"
RESEARCHER = "researcher"
RIDER = "rider"
ROLES = (ADMIN, RESEARCHER, RIDER)

# Project states
DRAFT = "draft"
ACTIVE = "active"
COMPLETED = "completed"
PROJECT_STATES = (DRAFT, ACTIVE, COMPLETED)

# Enrichment sources and statuses
WEATHER = "weather"
TRAFFIC = "traffic"
ENRICHMENT_SOURCES = (WEATHER, TRAFFIC)
ATTACHED = "attached"
PENDING = "pending"
FAILED = "failed"

# Trip quality flags
GPS_OUTLIERS_REMOVED = "GpsOutliersRemoved"
EMPTY_TRIP = "EmptyTrip"
BLOBS_DROPPED = "BlobsDroppedStorageFull"

#: Loans run at most two weeks.
MAX_LOAN_MS = 14 * 24 * 3600 * 1000

#: Rated range of the vehicle: 40 miles in meters.
FULL_RANGE_M = 64_374.0
FULL_RANGE_MILES = 40.0


def est_range_miles(battery_pct: float) -> float:
    """Linear range model over the rated 40-mile full-charge range."""
    return FULL_RANGE_MILES * battery_pct / 100.0


@dataclass(frozen=True)
class ChunkKey:
    scooter_id: str
    trip_id: str
    seq: int

    def __post_init__(self):
        if self.seq < 0:
            raise ValueError("chunk seq must be non-negative")


@dataclass(frozen=True)
class TripChunk:
    """Durable, idempotency-keyed batch of samples; the unit of transfer.

    All samples share the key's scooter/trip ids, timestamps are
    non-decreasing, and ``digest`` hashes the canonical serialized sample
    list (see codec.chunk_digest).
    """

    key: ChunkKey
    samples: tuple[SensorSample, ...]
    sealed_at: int
    config_version: int
    digest: str

    def __post_init__(self):
        prev_t = 0
        for s in self.samples:
            if s.scooter_id != self.key.scooter_id or s.trip_id != self.key.trip_id:
                raise ValueError("chunk sample does not match chunk key")
            if s.t < prev_t:
                raise ValueError("chunk samples must be time-ordered")
            prev_t = s.t


@dataclass(frozen=True)
class ScooterConfig:
    scooter_id: str
    version: int
    policy: DataCollectionPolicy
    issued_at: int
    project_id: Optional[str] = None

    def __post_init__(self):
        if self.version < 1:
            raise ValueError("config versions start at 1")


@dataclass
class Scooter:
    scooter_id: str
    model: str
    battery_pct: float = 100.0
    odometer_m: float = 0.0
    status: str = AVAILABLE
    current_config_version: int = 0

    def __post_init__(self):
        if not 0.0 <= self.battery_pct <= 100.0:
            raise ValueError("battery_pct out of range")
        if self.status not in SCOOTER_STATUSES:
            raise ValueError(f"bad scooter status {self.status!r}")


@dataclass
class User:
    user_id: str
    role: str
    display_name: str
    credential_digest: str

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"bad role {self.role!r}")


@dataclass
class Loan:
    """A rider's time-bounded possession of one scooter.

    All three acknowledgment flags must be true while the loan is active,
    and the due date may never exceed start + 14 days.
    """

    loan_id: str
    rider_id: str
    scooter_id: str
    started_at: int
    due_at: int
    consent_ack: bool
    safety_video_ack: bool
    survey_done: bool
    returned_at: Optional[int] = None

    def __post_init__(self):
        if self.due_at - self.started_at > MAX_LOAN_MS:
            raise ValueError("loan duration exceeds 14 days")
        if self.returned_at is not None and self.returned_at < self.started_at:
            raise ValueError("returned_at precedes started_at")

    @property
    def active(self) -> bool:
        return self.returned_at is None


@dataclass
class Project:
    project_id: str
    owner: str
    title: str
    policy: DataCollectionPolicy
    fleet: frozenset[str]
    state: str = DRAFT

    def __post_init__(self):
        if self.state not in PROJECT_STATES:
            raise ValueError(f"bad project state {self.state!r}")
        if self.state == ACTIVE and not self.fleet:
            raise ValueError("active project needs a nonempty fleet")


@dataclass(frozen=True)
class EnrichmentRecord:
    """External context attached to a trip for one (grid cell, UTC hour)."""

    source: str  # weather | traffic
    cell: str  # 0.01-degree grid cell id, "latIdx:lonIdx"
    hour_utc: int  # epoch hours
    payload: dict
    fetched_at: int
    status: str  # attached | pending | failed


@dataclass
class Trip:
    """An assembled, preprocessed journey with enrichment attached."""

    trip_id: str
    scooter_id: str
    started_at: int
    ended_at: int
    samples: dict[str, list[SensorSample]]
    distance_m: float
    loan_id: Optional[str] = None
    project_id: Optional[str] = None
    enrichment: list[EnrichmentRecord] = field(default_factory=list)
    quality_flags: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.ended_at < self.started_at:
            raise ValueError("trip ends before it starts")
        if self.distance_m < 0:
            raise ValueError("negative distance")

    def sample_counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in sorted(self.samples.items())}

    def duration_s(self) -> float:
        return (self.ended_at - self.started_at) / 1000.0
