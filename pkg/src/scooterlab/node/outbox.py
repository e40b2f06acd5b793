"""Durable node-side outbox: sealed chunks, ack ledger, open-trip journal.

Layout under one scooter's directory:

    config.json               currently applied config (canonical JSON)
    config.pending.json       downloaded config awaiting a trip boundary
    trips/<trip>.chunks.jsonl one canonical chunk per line, append-only
    trips/<trip>.open.jsonl   header line + journaled samples of the open chunk
    trips/<trip>.ack          acked chunk seqs, one per line; "F" = finalize acked
    trips/<trip>.finalize     {"chunk_count": n} once the trip ended locally
    trips/<trip>.quarantine.jsonl  chunks the server permanently rejected

Everything is written through with flush so an in-process agent restart
(the failure mode the simulator injects) sees a complete picture. A trip's
files are pruned once all of its chunks and its finalize marker are acked.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional


class OutboxFull(Exception):
    """Capacity exceeded even after pruning acked entries."""


@dataclass
class TripBox:
    trip_id: str
    config_version: int = 0
    chunk_lines: dict[int, Optional[str]] = field(default_factory=dict)  # seq -> line (None once acked)
    chunk_sample_counts: dict[int, int] = field(default_factory=dict)
    acked: set[int] = field(default_factory=set)
    finalize_count: Optional[int] = None
    finalize_acked: bool = False
    journal_samples: list[str] = field(default_factory=list)  # populated only by recovery

    def pending_seqs(self) -> list[int]:
        return sorted(s for s in self.chunk_lines if s not in self.acked)


class Outbox:
    def __init__(self, root: str | Path, capacity_bytes: Optional[int] = None):
        self.root = Path(root)
        self.trips_dir = self.root / "trips"
        self.trips_dir.mkdir(parents=True, exist_ok=True)
        self.capacity_bytes = capacity_bytes
        self._bytes = 0
        self.trips: dict[str, TripBox] = {}
        self._journals: dict[str, object] = {}
        self._load()

    # ---- paths ----

    def _chunks_path(self, trip_id: str) -> Path:
        return self.trips_dir / f"{trip_id}.chunks.jsonl"

    def _journal_path(self, trip_id: str) -> Path:
        return self.trips_dir / f"{trip_id}.open.jsonl"

    def _ack_path(self, trip_id: str) -> Path:
        return self.trips_dir / f"{trip_id}.ack"

    def _finalize_path(self, trip_id: str) -> Path:
        return self.trips_dir / f"{trip_id}.finalize"

    # ---- recovery ----

    def _load(self) -> None:
        trip_ids = {p.name.split(".")[0] for p in self.trips_dir.iterdir()}
        for trip_id in sorted(trip_ids):
            box = TripBox(trip_id)
            cpath = self._chunks_path(trip_id)
            if cpath.exists():
                for line in cpath.read_text().splitlines():
                    if not line:
                        continue
                    try:
                        obj = json.loads(line)
                    except json.JSONDecodeError:
                        continue  # tolerate a torn tail line
                    box.chunk_lines[int(obj["seq"])] = line
                    box.chunk_sample_counts[int(obj["seq"])] = len(obj.get("samples", ()))
                    box.config_version = int(obj.get("config_version", 0))
                    self._bytes += len(line) + 1
            apath = self._ack_path(trip_id)
            if apath.exists():
                for line in apath.read_text().splitlines():
                    if line == "F":
                        box.finalize_acked = True
                    elif line:
                        seq = int(line)
                        box.acked.add(seq)
                        if box.chunk_lines.get(seq) is not None:
                            self._bytes -= len(box.chunk_lines[seq]) + 1
                            box.chunk_lines[seq] = None
            fpath = self._finalize_path(trip_id)
            if fpath.exists():
                try:
                    box.finalize_count = int(json.loads(fpath.read_text())["chunk_count"])
                except (json.JSONDecodeError, KeyError, ValueError):
                    box.finalize_count = None
            jpath = self._journal_path(trip_id)
            if jpath.exists():
                lines = jpath.read_text().splitlines()
                self._bytes += jpath.stat().st_size
                if lines:
                    try:
                        header = json.loads(lines[0])
                        box.config_version = int(header.get("config_version", box.config_version))
                    except json.JSONDecodeError:
                        pass
                    for raw in lines[1:]:
                        try:
                            json.loads(raw)
                        except json.JSONDecodeError:
                            continue
                        box.journal_samples.append(raw)
            self.trips[trip_id] = box

    # ---- configs ----

    def save_config(self, text: str, pending: bool = False) -> None:
        name = "config.pending.json" if pending else "config.json"
        tmp = self.root / (name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, self.root / name)

    def load_config(self, pending: bool = False) -> Optional[str]:
        p = self.root / ("config.pending.json" if pending else "config.json")
        return p.read_text() if p.exists() else None

    def clear_pending_config(self) -> None:
        p = self.root / "config.pending.json"
        if p.exists():
            p.unlink()

    # ---- open-trip journal ----

    def open_trip(self, trip_id: str, config_version: int) -> None:
        box = self.trips.setdefault(trip_id, TripBox(trip_id))
        box.config_version = config_version
        fh = open(self._journal_path(trip_id), "a", encoding="utf-8")
        if fh.tell() == 0:
            header = json.dumps({"trip_id": trip_id, "config_version": config_version}) + "\n"
            fh.write(header)
            fh.flush()
            self._bytes += len(header)
        self._journals[trip_id] = fh

    def journal_samples(self, trip_id: str, lines: list[str]) -> None:
        fh = self._journals[trip_id]
        fh.write("".join(l + "\n" for l in lines))
        fh.flush()
        self._bytes += sum(len(l) + 1 for l in lines)

    def rotate_journal(self, trip_id: str) -> None:
        """Drop journaled samples once they are sealed into a chunk."""
        fh = self._journals.pop(trip_id, None)
        if fh:
            fh.close()
        jp = self._journal_path(trip_id)
        if jp.exists():
            self._bytes -= jp.stat().st_size
            jp.unlink()
        box = self.trips.get(trip_id)
        if box:
            box.journal_samples = []

    # ---- sealed chunks ----

    def usage_bytes(self) -> int:
        return self._bytes

    def prune_acked(self) -> int:
        """Rewrite chunk files dropping acked entries; returns bytes freed.

        Oldest trips first. Only chunks the server already acked are touched.
        """
        freed = 0
        for trip_id in sorted(self.trips):
            box = self.trips[trip_id]
            if not box.acked:
                continue
            cpath = self._chunks_path(trip_id)
            if not cpath.exists():
                continue
            keep: list[str] = []
            for line in cpath.read_text().splitlines():
                if not line:
                    continue
                try:
                    seq = int(json.loads(line)["seq"])
                except (json.JSONDecodeError, KeyError, ValueError):
                    continue
                if seq in box.acked:
                    freed += len(line) + 1
                else:
                    keep.append(line)
            tmp = cpath.with_suffix(".tmp")
            tmp.write_text("".join(l + "\n" for l in keep))
            os.replace(tmp, cpath)
        self._bytes -= freed
        return freed

    def append_chunk(self, trip_id: str, seq: int, line: str, sample_count: int, force: bool = False) -> None:
        """Durably append one sealed chunk, then rotate the trip journal.

        Raises OutboxFull before writing when capacity would be exceeded;
        callers may prune acked entries, thin the chunk, and retry (or
        force) — the journal rotation credits back the journaled bytes.
        """
        journal_credit = 0
        jp = self._journal_path(trip_id)
        if trip_id in self._journals and jp.exists():
            journal_credit = jp.stat().st_size
        if not force and self.capacity_bytes is not None:
            if self._bytes + len(line) + 1 - journal_credit > self.capacity_bytes:
                raise OutboxFull(f"outbox at {self._bytes} bytes, cap {self.capacity_bytes}")
        with open(self._chunks_path(trip_id), "a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()
        self._bytes += len(line) + 1
        box = self.trips.setdefault(trip_id, TripBox(trip_id))
        box.chunk_lines[seq] = line
        box.chunk_sample_counts[seq] = sample_count
        if trip_id in self._journals:
            self.rotate_journal(trip_id)
            self.open_trip(trip_id, box.config_version)

    # ---- acks / finalize ----

    def record_finalize(self, trip_id: str, chunk_count: int) -> None:
        box = self.trips.setdefault(trip_id, TripBox(trip_id))
        box.finalize_count = chunk_count
        self._finalize_path(trip_id).write_text(json.dumps({"chunk_count": chunk_count}))
        self.rotate_journal(trip_id)

    def mark_acked(self, trip_id: str, seq: int) -> None:
        box = self.trips[trip_id]
        box.acked.add(seq)
        box.chunk_lines[seq] = None
        with open(self._ack_path(trip_id), "a", encoding="utf-8") as fh:
            fh.write(f"{seq}\n")
            fh.flush()

    def quarantine(self, trip_id: str, seq: int) -> None:
        """Park a permanently-rejected chunk; it no longer blocks the trip."""
        box = self.trips[trip_id]
        line = box.chunk_lines.get(seq)
        if line:
            with open(self.trips_dir / f"{trip_id}.quarantine.jsonl", "a", encoding="utf-8") as fh:
                fh.write(line + "\n")
        box.acked.add(seq)
        box.chunk_lines[seq] = None
        with open(self._ack_path(trip_id), "a", encoding="utf-8") as fh:
            fh.write(f"{seq}\n")
            fh.flush()

    def mark_finalize_acked(self, trip_id: str) -> None:
        box = self.trips[trip_id]
        box.finalize_acked = True
        with open(self._ack_path(trip_id), "a", encoding="utf-8") as fh:
            fh.write("F\n")
            fh.flush()
        self._prune_trip(trip_id)

    def _prune_trip(self, trip_id: str) -> None:
        fh = self._journals.pop(trip_id, None)
        if fh:
            fh.close()
        for p in (
            self._chunks_path(trip_id),
            self._ack_path(trip_id),
            self._finalize_path(trip_id),
            self._journal_path(trip_id),
            self.trips_dir / f"{trip_id}.quarantine.jsonl",
        ):
            if p.exists():
                if p.name.endswith(".jsonl"):
                    self._bytes -= p.stat().st_size
                p.unlink()
        self.trips.pop(trip_id, None)

    # ---- views ----

    def pending(self) -> list[tuple[str, int, str, int]]:
        """All unacked sealed chunks in (trip_id, seq) order."""
        out = []
        for trip_id in sorted(self.trips):
            box = self.trips[trip_id]
            for seq in box.pending_seqs():
                line = box.chunk_lines[seq]
                if line is not None:
                    out.append((trip_id, seq, line, box.chunk_sample_counts.get(seq, 0)))
        return out

    def pending_finalizes(self) -> list[tuple[str, int]]:
        """Trips whose chunks are all acked and whose finalize isn't."""
        out = []
        for trip_id in sorted(self.trips):
            box = self.trips[trip_id]
            if box.finalize_count is None or box.finalize_acked:
                continue
            if all(s in box.acked for s in box.chunk_lines):
                out.append((trip_id, box.finalize_count))
        return out

    def unfinished_trips(self) -> list[TripBox]:
        """Trips on disk without a local finalize marker.

        These were open when the process died; the agent seals any
        journaled samples and finalizes them on recovery.
        """
        return [b for t, b in sorted(self.trips.items()) if b.finalize_count is None]

    def fully_drained(self) -> bool:
        return not self.trips

    def close(self) -> None:
        for fh in self._journals.values():
            fh.close()
        self._journals.clear()
