"""Fleet controller: ingestion, trip assembly, enrichment, fleet and loans.

Ingestion is idempotent: the ledger binds each chunk key to one digest
forever, repeats ack without a second store, and a re-submission with a
different digest is quarantined. Trip assembly runs synchronously (under
the storage lock, serialized per trip) as soon as the chunk set completes.
"""

from __future__ import annotations

import hashlib
import time
from typing import Optional

from ..core import codec
from ..core.errors import (
    AuthFailure,
    ChunkCountConflict,
    DigestMismatch,
    LoanNotActive,
    MissingAcknowledgment,
    ScooterUnavailable,
    UnknownLoan,
    UnknownScooter,
)
from ..core.geo import GeoPoint, haversine_distance, trip_length
from ..core.model import (
    ATTACHED,
    AVAILABLE,
    EMPTY_TRIP,
    FAILED,
    GPS_OUTLIERS_REMOVED,
    LOANED,
    MAINTENANCE,
    MAX_LOAN_MS,
    PENDING,
    EnrichmentRecord,
    Loan,
    Scooter,
    ScooterConfig,
    Trip,
    est_range_miles,
)
from ..core.policy import DataCollectionPolicy, validate_policy
from ..core.sensors import GPS
from .enrichment import default_providers, grid_cell, hour_of
from .storage import Storage

#: A fix implying more speed than this from its predecessor is a teleport.
GPS_OUTLIER_MPS = 15.0

ENRICH_MAX_ATTEMPTS = 3


def _wall_clock_ms() -> int:
    return int(time.time() * 1000)


def clean_samples(raw: dict[str, list]) -> tuple[dict[str, list], frozenset[str]]:
    """Sort per kind, drop exact duplicates, filter GPS teleports.

    Idempotent: cleaning its own output changes nothing.
    """
    by_kind: dict[str, list] = {}
    seen: set = set()
    for kind in sorted(raw):
        kept = []
        for s in sorted(raw[kind], key=lambda s: s.t):
            dkey = (s.kind, s.t, s.value)
            if dkey in seen:
                continue
            seen.add(dkey)
            kept.append(s)
        if kept:
            by_kind[kind] = kept
    flags: set[str] = set()
    if GPS in by_kind:
        kept, removed = _filter_gps_outliers(by_kind[GPS])
        if removed:
            flags.add(GPS_OUTLIERS_REMOVED)
            if kept:
                by_kind[GPS] = kept
            else:
                del by_kind[GPS]
    return by_kind, frozenset(flags)


def _filter_gps_outliers(fixes: list) -> tuple[list, int]:
    """Drop fixes implying more than 15 m/s from their kept predecessor."""
    kept: list = []
    removed = 0
    for s in fixes:
        if not kept:
            kept.append(s)
            continue
        prev = kept[-1]
        dt = (s.t - prev.t) / 1000.0
        if dt <= 0:
            removed += 1
            continue
        if haversine_distance(prev.value.point, s.value.point) / dt > GPS_OUTLIER_MPS:
            removed += 1
            continue
        kept.append(s)
    return kept, removed


class FleetController:
    def __init__(
        self,
        storage: Optional[Storage] = None,
        *,
        token_secret: str = "scooterlab-dev",
        providers: Optional[list] = None,
        clock=None,
    ):
        self.storage = storage if storage is not None else Storage()
        self.token_secret = token_secret
        self.providers = providers if providers is not None else default_providers()
        self.clock = clock or _wall_clock_ms
        self._loan_seq = len(self.storage.loans)

    # ---- auth ----

    def admin_token(self) -> str:
        return self.token_secret

    def scooter_token(self, scooter_id: str) -> str:
        return hashlib.sha256(f"{self.token_secret}:{scooter_id}".encode()).hexdigest()[:40]

    def _require_admin(self, token: str) -> None:
        if token != self.admin_token():
            raise AuthFailure("admin token required")

    def _require_scooter(self, token: str, scooter_id: str) -> None:
        if token != self.scooter_token(scooter_id) and token != self.admin_token():
            raise AuthFailure(f"token not valid for scooter {scooter_id}")

    # ---- fleet ----

    def register_scooter(self, scooter_id: str, model: str, token: str) -> dict:
        self._require_admin(token)
        with self.storage.lock:
            scooter = self.storage.scooters.get(scooter_id)
            if scooter is None:
                scooter = Scooter(scooter_id=scooter_id, model=model)
                self.storage.scooters[scooter_id] = scooter
                self.storage.state_changed()
            return {"scooter": codec.scooter_obj(scooter), "token": self.scooter_token(scooter_id)}

    def list_scooters(self) -> list[dict]:
        return [codec.scooter_obj(s) for _, s in sorted(self.storage.scooters.items())]

    def _scooter(self, scooter_id: str) -> Scooter:
        s = self.storage.scooters.get(scooter_id)
        if s is None:
            raise UnknownScooter(f"scooter {scooter_id} is not registered")
        return s

    def battery_of(self, scooter_id: str) -> dict:
        self._scooter(scooter_id)
        hb = self.storage.heartbeats.get(scooter_id)
        if not hb or hb.get("battery_pct") is None:
            return {"scooter_id": scooter_id, "status": "unknown", "battery_pct": None, "est_range_miles": None, "heartbeat_at": None}
        pct = hb["battery_pct"]
        return {
            "scooter_id": scooter_id,
            "status": "ok",
            "battery_pct": pct,
            "est_range_miles": est_range_miles(pct),
            "heartbeat_at": hb["at"],
        }

    def battery_levels(self) -> list[dict]:
        return [self.battery_of(sid) for sid in sorted(self.storage.scooters)]

    # ---- ingestion ----

    def receive_chunk_json(self, obj: dict, token: str) -> dict:
        chunk = codec.parse_chunk(obj)
        key = chunk.key
        self._require_scooter(token, key.scooter_id)
        self._scooter(key.scooter_id)
        with self.storage.lock:
            known = self.storage.chunk_digests.get((key.scooter_id, key.trip_id, key.seq))
            if known is not None:
                if known == chunk.digest:
                    return self._ack(key, chunk.digest)  # idempotent repeat
                self.storage.record_chunk_quarantined(key.scooter_id, key.trip_id, key.seq, "digest_mismatch")
                raise DigestMismatch(
                    f"chunk {key.scooter_id}/{key.trip_id}/{key.seq} already stored with a different digest"
                )
            self.storage.append_chunk(obj)
            self.storage.record_chunk_accepted(key.scooter_id, key.trip_id, key.seq, chunk.digest)
            self._maybe_assemble(key.scooter_id, key.trip_id)
            return self._ack(key, chunk.digest)

    @staticmethod
    def _ack(key, digest: str) -> dict:
        return {
            "chunk_key": {"scooter_id": key.scooter_id, "trip_id": key.trip_id, "seq": key.seq},
            "digest": digest,
        }

    def finalize_trip(self, scooter_id: str, trip_id: str, chunk_count: int, token: str) -> dict:
        self._require_scooter(token, scooter_id)
        self._scooter(scooter_id)
        with self.storage.lock:
            tkey = (scooter_id, trip_id)
            prior = self.storage.finalize_markers.get(tkey)
            if prior is not None and prior != chunk_count:
                self.storage.record_trip_quarantined(scooter_id, trip_id, "chunk_count_conflict")
                raise ChunkCountConflict(
                    f"finalize for {trip_id} with count {chunk_count} conflicts with prior {prior}"
                )
            if prior is None:
                self.storage.record_finalize_marker(scooter_id, trip_id, chunk_count)
            received = self.storage.received_seqs.get(tkey, set())
            missing = sorted(set(range(chunk_count)) - received)
            if missing:
                return {"outcome": "awaiting_chunks", "missing": missing}
            self._maybe_assemble(scooter_id, trip_id)
            return {"outcome": "complete", "missing": []}

    def _maybe_assemble(self, scooter_id: str, trip_id: str) -> None:
        """Assemble and enrich once all finalized chunks are present."""
        tkey = (scooter_id, trip_id)
        if tkey in self.storage.quarantined_trips:
            return
        count = self.storage.finalize_markers.get(tkey)
        if count is None:
            return
        received = self.storage.received_seqs.get(tkey, set())
        if not set(range(count)) <= received:
            return
        if trip_id in self.storage.trips:
            return
        trip = self.preprocess_trip(scooter_id, trip_id)
        trip = self.enrich_trip(trip)
        self.storage.upsert_trip(trip)

    # ---- preprocessing ----

    def preprocess_trip(self, scooter_id: str, trip_id: str) -> Trip:
        """Concatenate, sort, dedup, outlier-filter, and link one trip."""
        count = self.storage.finalize_markers.get((scooter_id, trip_id))
        chunk_objs = sorted(self.storage.trip_chunk_objs(scooter_id, trip_id), key=lambda o: o["seq"])
        if count is not None:
            chunk_objs = [o for o in chunk_objs if o["seq"] < count]
        config_version = chunk_objs[0]["config_version"] if chunk_objs else 0
        raw: dict[str, list] = {}
        for obj in chunk_objs:
            for sobj in obj["samples"]:
                s = codec.parse_sample(sobj)
                raw.setdefault(s.kind, []).append(s)
        by_kind, flags = clean_samples(raw)
        all_ts = [s.t for samples in by_kind.values() for s in samples]
        if not all_ts:
            now = self.clock()
            return Trip(
                trip_id=trip_id,
                scooter_id=scooter_id,
                started_at=now,
                ended_at=now,
                samples={},
                distance_m=0.0,
                loan_id=self._loan_at(scooter_id, now),
                project_id=self._project_for(scooter_id, config_version),
                quality_flags=frozenset(flags | {EMPTY_TRIP}),
            )
        started_at, ended_at = min(all_ts), max(all_ts)
        fixes = [s.value.point for s in by_kind.get(GPS, ())]
        return Trip(
            trip_id=trip_id,
            scooter_id=scooter_id,
            started_at=started_at,
            ended_at=ended_at,
            samples=by_kind,
            distance_m=trip_length(fixes),
            loan_id=self._loan_at(scooter_id, started_at),
            project_id=self._project_for(scooter_id, config_version),
            quality_flags=frozenset(flags),
        )

    def _loan_at(self, scooter_id: str, t_ms: int) -> Optional[str]:
        for loan in self.storage.loans.values():
            if loan.scooter_id != scooter_id or t_ms < loan.started_at:
                continue
            if loan.returned_at is None or t_ms <= loan.returned_at:
                return loan.loan_id
        return None

    def _project_for(self, scooter_id: str, config_version: int) -> Optional[str]:
        cfg = self.storage.config_by_version(scooter_id, config_version)
        return cfg.project_id if cfg else None

    # ---- enrichment ----

    def enrich_trip(self, trip: Trip) -> Trip:
        """Attach one record per provider per UTC hour the trip overlaps."""
        fixes = trip.samples.get(GPS, [])
        if not fixes:
            return trip
        records = list(trip.enrichment)
        have = {(r.source, r.hour_utc) for r in records}
        for hour in range(hour_of(trip.started_at), hour_of(trip.ended_at) + 1):
            cell = self._hour_cell(fixes, hour)
            for provider in self.providers:
                if (provider.source, hour) in have:
                    continue
                records.append(self._lookup_record(trip.trip_id, provider, cell, hour))
        trip.enrichment = records
        return trip

    @staticmethod
    def _hour_cell(fixes: list, hour: int) -> str:
        in_hour = [s.value.point for s in fixes if hour_of(s.t) == hour]
        pts = in_hour or [s.value.point for s in fixes]
        lat = sum(p.lat for p in pts) / len(pts)
        lon = sum(p.lon for p in pts) / len(pts)
        return grid_cell(lat, lon)

    def _lookup_record(self, trip_id: str, provider, cell: str, hour: int) -> EnrichmentRecord:
        akey = (trip_id, provider.source, hour)
        try:
            payload = provider.lookup(cell, hour)
        except Exception:
            payload = None  # a flaky provider never blocks the trip
        if payload is not None:
            self.storage.enrich_attempts.pop(akey, None)
            return EnrichmentRecord(provider.source, cell, hour, payload, self.clock(), ATTACHED)
        attempts = self.storage.enrich_attempts.get(akey, 0) + 1
        self.storage.enrich_attempts[akey] = attempts
        status = FAILED if attempts >= ENRICH_MAX_ATTEMPTS else PENDING
        return EnrichmentRecord(provider.source, cell, hour, {}, self.clock(), status)

    def enrichment_sweep(self) -> int:
        """Retry every pending record; returns how many are still pending."""
        still_pending = 0
        with self.storage.lock:
            for trip in self.storage.iter_trips():
                if not any(r.status == PENDING for r in trip.enrichment):
                    continue
                updated = []
                changed = False
                for r in trip.enrichment:
                    if r.status != PENDING:
                        updated.append(r)
                        continue
                    provider = next((p for p in self.providers if p.source == r.source), None)
                    if provider is None:
                        updated.append(r)
                        continue
                    fresh = self._lookup_record(trip.trip_id, provider, r.cell, r.hour_utc)
                    changed = changed or fresh.status != r.status or fresh.payload != r.payload
                    updated.append(fresh)
                    if fresh.status == PENDING:
                        still_pending += 1
                if changed:
                    trip.enrichment = updated
                    self.storage.upsert_trip(trip)
        return still_pending

    # ---- configs ----

    def issue_config(self, scooter_id: str, policy: DataCollectionPolicy, project_id: Optional[str] = None, token: Optional[str] = None) -> ScooterConfig:
        if token is not None:
            self._require_admin(token)
        self._scooter(scooter_id)
        validate_policy(policy)
        with self.storage.lock:
            prev = self.storage.current_config(scooter_id)
            cfg = ScooterConfig(
                scooter_id=scooter_id,
                version=(prev.version if prev else 0) + 1,
                policy=policy,
                issued_at=self.clock(),
                project_id=project_id,
            )
            self.storage.configs.setdefault(scooter_id, []).append(cfg)
            self.storage.state_changed()
            return cfg

    def get_config(self, scooter_id: str, client_version: int, token: str, battery_pct: Optional[float] = None) -> Optional[dict]:
        self._require_scooter(token, scooter_id)
        self._scooter(scooter_id)
        with self.storage.lock:
            self.storage.heartbeats[scooter_id] = {"at": self.clock(), "battery_pct": battery_pct}
            self.storage.state_changed()
            current = self.storage.current_config(scooter_id)
            if current is None:
                return None
            if client_version > current.version:
                self.storage.bump("config_version_anomalies")
                return None
            if current.version > client_version:
                scooter = self._scooter(scooter_id)
                scooter.current_config_version = current.version
                return codec.config_obj(current)
            return None

    # ---- loans ----

    @staticmethod
    def _missing_acks(acks: dict) -> list[str]:
        names = {"consent_ack": "consent", "safety_video_ack": "safety_video", "survey_done": "survey"}
        return [label for key, label in names.items() if not acks.get(key)]

    def checkout(self, rider_id: str, scooter_id: str, acks: dict, token: str) -> Loan:
        self._require_admin(token)
        with self.storage.lock:
            scooter = self._scooter(scooter_id)
            if scooter.status != AVAILABLE:
                raise ScooterUnavailable(f"scooter {scooter_id} is {scooter.status}")
            missing = self._missing_acks(acks)
            if missing:
                raise MissingAcknowledgment("checkout requires all acknowledgments", missing)
            self._loan_seq += 1
            now = self.clock()
            loan = Loan(
                loan_id=f"loan-{self._loan_seq:06d}",
                rider_id=rider_id,
                scooter_id=scooter_id,
                started_at=now,
                due_at=now + MAX_LOAN_MS,
                consent_ack=True,
                safety_video_ack=True,
                survey_done=True,
            )
            self.storage.loans[loan.loan_id] = loan
            scooter.status = LOANED
            self.storage.state_changed()
            return loan

    def _loan(self, loan_id: str) -> Loan:
        loan = self.storage.loans.get(loan_id)
        if loan is None:
            raise UnknownLoan(f"no loan {loan_id}")
        return loan

    def renew(self, loan_id: str, acks: dict, token: str) -> Loan:
        """Start a fresh 14-day term on an active loan, with fresh acks."""
        self._require_admin(token)
        with self.storage.lock:
            loan = self._loan(loan_id)
            if not loan.active:
                raise LoanNotActive(f"loan {loan_id} was already returned")
            missing = self._missing_acks(acks)
            if missing:
                raise MissingAcknowledgment("renewal repeats the full consent process", missing)
            now = self.clock()
            loan.started_at = now
            loan.due_at = now + MAX_LOAN_MS
            self.storage.state_changed()
            return loan

    def return_and_inspect(self, loan_id: str, inspection_pass: bool, token: str) -> dict:
        self._require_admin(token)
        with self.storage.lock:
            loan = self._loan(loan_id)
            if not loan.active:
                raise LoanNotActive(f"loan {loan_id} was already returned")
            loan.returned_at = max(self.clock(), loan.started_at)
            scooter = self._scooter(loan.scooter_id)
            scooter.status = AVAILABLE if inspection_pass else MAINTENANCE
            self.storage.state_changed()
            return {"loan": codec.loan_obj(loan), "scooter_status": scooter.status}

    # ---- census ----

    def sample_census(self) -> dict:
        """Multiset census of every stored sample, as count + order-free digest."""
        digests = []
        for obj in self.storage.iter_chunk_objs():
            for sobj in obj["samples"]:
                digests.append(hashlib.sha256(codec.canonical_dumps(sobj).encode()).hexdigest())
        digests.sort()
        h = hashlib.sha256()
        for d in digests:
            h.update(d.encode())
        return {"sample_count": len(digests), "census_digest": h.hexdigest()}

    def stored_sample_lines(self) -> list[str]:
        return [
            codec.canonical_dumps(sobj)
            for obj in self.storage.iter_chunk_objs()
            for sobj in obj["samples"]
        ]
