"""Controller storage: append-only chunk store plus indexed metadata.

``Storage`` is the in-memory implementation; ``FileStorage`` persists the
same state under a directory and reloads it on startup:

    state.json     fleet records, users, loans, projects, configs, heartbeats
    ledger.jsonl   append-only ingest ledger (accepted chunks, finalize
                   markers, quarantines) replayed on load
    chunks/<scooter>/<trip>.jsonl   canonical chunk lines, append-only
    trips.jsonl    canonical assembled trips, last write per trip_id wins

The working set stays in memory either way — this is a desk-scale store; a
relational backend could replace it behind the same surface.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path
from typing import Iterable, Optional

from ..core import codec
from ..core.model import Loan, Project, Scooter, ScooterConfig, Trip, User


class Storage:
    def __init__(self):
        self.lock = threading.RLock()
        self.scooters: dict[str, Scooter] = {}
        self.users: dict[str, User] = {}
        self.loans: dict[str, Loan] = {}
        self.projects: dict[str, Project] = {}
        self.configs: dict[str, list[ScooterConfig]] = {}
        self.heartbeats: dict[str, dict] = {}
        self.counters: dict[str, int] = {}
        # Ingest ledger: a chunk key maps to exactly one digest, forever.
        self.chunk_digests: dict[tuple, str] = {}
        self.received_seqs: dict[tuple, set[int]] = {}
        self.finalize_markers: dict[tuple, int] = {}
        self.quarantined_trips: set[tuple] = set()
        self.trips: dict[str, Trip] = {}
        self.enrich_attempts: dict[tuple, int] = {}
        self._chunks: dict[tuple, list[dict]] = {}

    # ---- chunks ----

    def append_chunk(self, obj: dict) -> None:
        key = (obj["scooter_id"], obj["trip_id"])
        with self.lock:
            self._chunks.setdefault(key, []).append(obj)
            self._persist_chunk(obj)

    def trip_chunk_objs(self, scooter_id: str, trip_id: str) -> list[dict]:
        return list(self._chunks.get((scooter_id, trip_id), ()))

    def iter_chunk_objs(self) -> Iterable[dict]:
        for key in sorted(self._chunks):
            yield from self._chunks[key]

    def chunk_count(self) -> int:
        return sum(len(v) for v in self._chunks.values())

    # ---- ingest ledger ----

    def record_chunk_accepted(self, scooter_id: str, trip_id: str, seq: int, digest: str) -> None:
        with self.lock:
            self.chunk_digests[(scooter_id, trip_id, seq)] = digest
            self.received_seqs.setdefault((scooter_id, trip_id), set()).add(seq)
            self._persist_ledger({"type": "chunk", "scooter_id": scooter_id, "trip_id": trip_id, "seq": seq, "digest": digest})

    def record_finalize_marker(self, scooter_id: str, trip_id: str, chunk_count: int) -> None:
        with self.lock:
            self.finalize_markers[(scooter_id, trip_id)] = chunk_count
            self._persist_ledger({"type": "finalize", "scooter_id": scooter_id, "trip_id": trip_id, "chunk_count": chunk_count})

    def record_trip_quarantined(self, scooter_id: str, trip_id: str, reason: str) -> None:
        with self.lock:
            self.quarantined_trips.add((scooter_id, trip_id))
            self.bump("quarantined_trips")
            self._persist_ledger({"type": "quarantine_trip", "scooter_id": scooter_id, "trip_id": trip_id, "reason": reason})

    def record_chunk_quarantined(self, scooter_id: str, trip_id: str, seq: int, reason: str) -> None:
        with self.lock:
            self.bump("quarantined_chunks")
            self._persist_ledger({"type": "quarantine_chunk", "scooter_id": scooter_id, "trip_id": trip_id, "seq": seq, "reason": reason})

    def bump(self, counter: str, by: int = 1) -> None:
        self.counters[counter] = self.counters.get(counter, 0) + by

    # ---- trips ----

    def upsert_trip(self, trip: Trip) -> None:
        with self.lock:
            self.trips[trip.trip_id] = trip
            self._persist_trip(trip)

    def iter_trips(self) -> list[Trip]:
        return list(self.trips.values())

    def import_trips_jsonl(self, lines: Iterable[str]) -> int:
        n = 0
        for line in lines:
            line = line.strip()
            if not line:
                continue
            self.upsert_trip(codec.parse_trip(json.loads(line)))
            n += 1
        return n

    # ---- fleet state ----

    def state_changed(self) -> None:
        self._persist_state()

    def current_config(self, scooter_id: str) -> Optional[ScooterConfig]:
        versions = self.configs.get(scooter_id)
        return versions[-1] if versions else None

    def config_by_version(self, scooter_id: str, version: int) -> Optional[ScooterConfig]:
        for cfg in self.configs.get(scooter_id, ()):
            if cfg.version == version:
                return cfg
        return None

    # ---- persistence hooks (no-ops in memory) ----

    def _persist_chunk(self, obj: dict) -> None:
        pass

    def _persist_ledger(self, event: dict) -> None:
        pass

    def _persist_trip(self, trip: Trip) -> None:
        pass

    def _persist_state(self) -> None:
        pass

    def flush(self) -> None:
        pass

    def close(self) -> None:
        self.flush()


class FileStorage(Storage):
    def __init__(self, root: str | Path):
        super().__init__()
        self.root = Path(root)
        self.chunks_dir = self.root / "chunks"
        self.chunks_dir.mkdir(parents=True, exist_ok=True)
        self._ledger_fh = None
        self._trips_fh = None
        self._load()
        self._ledger_fh = open(self.root / "ledger.jsonl", "a", encoding="utf-8")
        self._trips_fh = open(self.root / "trips.jsonl", "a", encoding="utf-8")

    # ---- load ----

    def _load(self) -> None:
        state_path = self.root / "state.json"
        if state_path.exists():
            state = json.loads(state_path.read_text())
            self.scooters = {o["scooter_id"]: codec.parse_scooter(o) for o in state.get("scooters", [])}
            self.users = {o["user_id"]: codec.parse_user(o) for o in state.get("users", [])}
            self.loans = {o["loan_id"]: codec.parse_loan(o) for o in state.get("loans", [])}
            self.projects = {o["project_id"]: codec.parse_project(o) for o in state.get("projects", [])}
            self.configs = {
                sid: [codec.parse_config(c) for c in cfgs] for sid, cfgs in state.get("configs", {}).items()
            }
            self.heartbeats = state.get("heartbeats", {})
            self.counters = state.get("counters", {})
        ledger_path = self.root / "ledger.jsonl"
        if ledger_path.exists():
            for line in ledger_path.read_text().splitlines():
                if not line:
                    continue
                ev = json.loads(line)
                key = (ev.get("scooter_id"), ev.get("trip_id"))
                if ev["type"] == "chunk":
                    self.chunk_digests[(*key, ev["seq"])] = ev["digest"]
                    self.received_seqs.setdefault(key, set()).add(ev["seq"])
                elif ev["type"] == "finalize":
                    self.finalize_markers[key] = ev["chunk_count"]
                elif ev["type"] == "quarantine_trip":
                    self.quarantined_trips.add(key)
        trips_path = self.root / "trips.jsonl"
        if trips_path.exists():
            for line in trips_path.read_text().splitlines():
                if line:
                    trip = codec.parse_trip(json.loads(line))
                    self.trips[trip.trip_id] = trip
        for scooter_dir in sorted(self.chunks_dir.iterdir()) if self.chunks_dir.exists() else []:
            for trip_file in sorted(scooter_dir.glob("*.jsonl")):
                for line in trip_file.read_text().splitlines():
                    if not line:
                        continue
                    obj = json.loads(line)
                    self._chunks.setdefault((obj["scooter_id"], obj["trip_id"]), []).append(obj)

    # ---- persistence ----

    def _persist_chunk(self, obj: dict) -> None:
        d = self.chunks_dir / obj["scooter_id"]
        d.mkdir(exist_ok=True)
        with open(d / f"{obj['trip_id']}.jsonl", "a", encoding="utf-8") as fh:
            fh.write(codec.canonical_dumps(obj) + "\n")

    def _persist_ledger(self, event: dict) -> None:
        if self._ledger_fh:
            self._ledger_fh.write(json.dumps(event, separators=(",", ":")) + "\n")
            self._ledger_fh.flush()

    def _persist_trip(self, trip: Trip) -> None:
        if self._trips_fh:
            self._trips_fh.write(codec.trip_line(trip) + "\n")
            self._trips_fh.flush()

    def _persist_state(self) -> None:
        state = {
            "scooters": [codec.scooter_obj(s) for _, s in sorted(self.scooters.items())],
            "users": [codec.user_obj(u) for _, u in sorted(self.users.items())],
            "loans": [codec.loan_obj(l) for _, l in sorted(self.loans.items())],
            "projects": [codec.project_obj(p) for _, p in sorted(self.projects.items())],
            "configs": {sid: [codec.config_obj(c) for c in cfgs] for sid, cfgs in sorted(self.configs.items())},
            "heartbeats": self.heartbeats,
            "counters": self.counters,
        }
        tmp = self.root / "state.json.tmp"
        tmp.write_text(json.dumps(state, separators=(",", ":")))
        os.replace(tmp, self.root / "state.json")

    def flush(self) -> None:
        self._persist_state()
        if self._ledger_fh:
            self._ledger_fh.flush()
        if self._trips_fh:
            self._trips_fh.flush()

    def close(self) -> None:
        self.flush()
        if self._ledger_fh:
            self._ledger_fh.close()
            self._ledger_fh = None
        if self._trips_fh:
            self._trips_fh.close()
            self._trips_fh = None
