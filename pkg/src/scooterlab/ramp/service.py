"""Researcher portal back end: users, sessions, projects, queries, export.

Stateless request handling over the fleet controller's storage; the only
service-local state is the session table. Role matrix: riders may read
battery levels only, researchers manage and query their own projects,
admins see everything. The controller's admin token doubles as a bootstrap
Admin session so a fresh deployment can create its first users.
"""

from __future__ import annotations

import hashlib
import secrets
import time
from typing import Optional

from ..core import codec
from ..core.errors import (
    AuthFailure,
    BadCredential,
    DuplicateName,
    ExpiredToken,
    FleetConflict,
    Forbidden,
    InvalidPolicy,
    MalformedInput,
    UnknownProject,
    UnknownScooter,
    UnknownTrip,
    UnsupportedFormat,
)
from ..core.model import ACTIVE, ADMIN, DRAFT, RESEARCHER, RIDER, ROLES, Project, Trip, User
from ..core.policy import DataCollectionPolicy, policy_violations, validate_policy
from .queries import (
    TripFilter,
    export_csv,
    export_jsonl,
    filter_trips,
    paginate,
    stats_report,
    trip_summary,
    trips_geojson,
)

TOKEN_TTL_MS = 24 * 3600 * 1000
PBKDF2_ROUNDS = 30_000

EXPORT_CONTENT_TYPES = {
    "csv": "text/csv; charset=utf-8",
    "geojson": "application/geo+json",
    "jsonl": "application/x-ndjson",
}

_BOOTSTRAP_ADMIN = User("admin", ADMIN, "Bootstrap admin", "")


def hash_credential(credential: str, salt: Optional[str] = None) -> str:
    salt = salt or secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac("sha256", credential.encode(), bytes.fromhex(salt), PBKDF2_ROUNDS).hex()
    return f"pbkdf2${salt}${digest}"


def verify_credential(credential: str, stored: str) -> bool:
    try:
        _, salt, _ = stored.split("$")
    except ValueError:
        return False
    return secrets.compare_digest(hash_credential(credential, salt), stored)


class RampService:
    def __init__(self, controller, *, clock=None, token_ttl_ms: int = TOKEN_TTL_MS):
        self.controller = controller
        self.storage = controller.storage
        self.clock = clock or controller.clock or (lambda: int(time.time() * 1000))
        self.token_ttl_ms = token_ttl_ms
        self.sessions: dict[str, tuple[str, int]] = {}
        self._project_seq = len(self.storage.projects)

    # ---- users & sessions ----

    def create_user(self, name: str, role: str, credential: str, token: str) -> dict:
        self._require_role(self._auth(token), ADMIN)
        if role not in ROLES:
            raise MalformedInput(f"unknown role {role!r}")
        with self.storage.lock:
            if name in self.storage.users:
                raise DuplicateName(f"user {name!r} already exists")
            user = User(user_id=name, role=role, display_name=name, credential_digest=hash_credential(credential))
            self.storage.users[name] = user
            self.storage.state_changed()
            return {"user_id": user.user_id, "role": user.role}

    def authenticate(self, name: str, credential: str) -> dict:
        user = self.storage.users.get(name)
        if user is None or not verify_credential(credential, user.credential_digest):
            raise BadCredential("unknown user or wrong credential")
        token = secrets.token_urlsafe(24)
        expires_at = self.clock() + self.token_ttl_ms
        self.sessions[token] = (user.user_id, expires_at)
        return {"token": token, "expires_at": expires_at, "user_id": user.user_id, "role": user.role}

    def _auth(self, token: Optional[str]) -> User:
        if not token:
            raise AuthFailure("missing bearer token")
        if token == self.controller.admin_token():
            return _BOOTSTRAP_ADMIN
        session = self.sessions.get(token)
        if session is None:
            raise AuthFailure("unknown session token")
        user_id, expires_at = session
        if self.clock() >= expires_at:
            raise ExpiredToken("session expired; authenticate again")
        user = self.storage.users.get(user_id)
        if user is None:
            raise AuthFailure("session user no longer exists")
        return user

    @staticmethod
    def _require_role(user: User, *roles: str) -> None:
        if user.role not in roles:
            raise Forbidden(f"role {user.role} may not perform this operation")

    # ---- projects ----

    def create_project(self, title: str, policy: DataCollectionPolicy, fleet: list[str], token: str) -> dict:
        user = self._auth(token)
        self._require_role(user, RESEARCHER, ADMIN)
        validate_policy(policy)
        with self.storage.lock:
            for sid in fleet:
                if sid not in self.storage.scooters:
                    raise UnknownScooter(f"scooter {sid} is not registered")
            self._project_seq += 1
            project = Project(
                project_id=f"proj-{self._project_seq:04d}",
                owner=user.user_id,
                title=title,
                policy=policy,
                fleet=frozenset(fleet),
                state=DRAFT,
            )
            self.storage.projects[project.project_id] = project
            self.storage.state_changed()
            return codec.project_obj(project)

    def activate_project(self, project_id: str, token: str) -> dict:
        user = self._auth(token)
        with self.storage.lock:
            project = self._project(project_id)
            self._require_owner(user, project)
            if project.state == ACTIVE:
                return codec.project_obj(project)
            if not project.fleet:
                raise InvalidPolicy("an active project needs a nonempty fleet", [])
            conflicts = sorted(
                sid
                for sid in project.fleet
                for other in self.storage.projects.values()
                if other.project_id != project_id and other.state == ACTIVE and sid in other.fleet
            )
            if conflicts:
                raise FleetConflict("scooters already allocated to an active project", sorted(set(conflicts)))
            issued = {}
            for sid in sorted(project.fleet):
                cfg = self.controller.issue_config(sid, project.policy, project_id=project.project_id)
                issued[sid] = cfg.version
            project.state = ACTIVE
            self.storage.state_changed()
            return {**codec.project_obj(project), "issued_config_versions": issued}

    def list_projects(self, token: str) -> list[dict]:
        user = self._auth(token)
        self._require_role(user, RESEARCHER, ADMIN)
        projects = sorted(self.storage.projects.values(), key=lambda p: p.project_id)
        if user.role != ADMIN:
            projects = [p for p in projects if p.owner == user.user_id]
        return [codec.project_obj(p) for p in projects]

    def _project(self, project_id: str) -> Project:
        project = self.storage.projects.get(project_id)
        if project is None:
            raise UnknownProject(f"no project {project_id}")
        return project

    def _require_owner(self, user: User, project: Project) -> None:
        if user.role != ADMIN and project.owner != user.user_id:
            raise Forbidden("not your project")

    # ---- queries ----

    def _visible_trips(self, f: TripFilter, user: User) -> list[Trip]:
        """Filter trips and clamp visibility to what the caller may see."""
        self._require_role(user, RESEARCHER, ADMIN)
        if f.project_id is not None:
            self._require_owner(user, self._project(f.project_id))
        matched = filter_trips(self.storage.iter_trips(), f)
        if user.role != ADMIN and f.project_id is None:
            owned = {p.project_id for p in self.storage.projects.values() if p.owner == user.user_id}
            matched = [t for t in matched if t.project_id in owned]
        return matched

    def query_trips(self, f: TripFilter, token: str, cursor: Optional[str] = None, limit: Optional[int] = None) -> dict:
        user = self._auth(token)
        matched = self._visible_trips(f, user)
        page, next_cursor = paginate(matched, cursor, limit)
        return {"trips": [trip_summary(t) for t in page], "next_cursor": next_cursor}

    def get_trip_geojson(self, trip_ids: list[str], token: str, include_samples: bool = False) -> dict:
        user = self._auth(token)
        self._require_role(user, RESEARCHER, ADMIN)
        owned = {p.project_id for p in self.storage.projects.values() if p.owner == user.user_id}
        trips = []
        for tid in trip_ids:
            trip = self.storage.trips.get(tid)
            if trip is None:
                raise UnknownTrip(f"no trip {tid}")
            if user.role != ADMIN and trip.project_id not in owned:
                raise Forbidden(f"trip {tid} is not in your projects")
            trips.append(trip)
        return trips_geojson(trips, include_samples=include_samples)

    def stats(self, f: TripFilter, token: str, include_empty: bool = False) -> dict:
        user = self._auth(token)
        return stats_report(self._visible_trips(f, user), include_empty=include_empty)

    def export(self, f: TripFilter, fmt: str, token: str) -> tuple[bytes, str]:
        user = self._auth(token)
        if fmt not in EXPORT_CONTENT_TYPES:
            raise UnsupportedFormat(f"format {fmt!r}; expected csv, geojson, or jsonl")
        matched = self._visible_trips(f, user)
        if fmt == "csv":
            body = export_csv(matched)
        elif fmt == "jsonl":
            body = export_jsonl(matched)
        else:
            body = codec.canonical_dumps(trips_geojson(matched))
        return body.encode("utf-8"), EXPORT_CONTENT_TYPES[fmt]

    # ---- battery ----

    def battery_levels(self, token: str) -> list[dict]:
        self._auth(token)  # any authenticated role, riders included
        return self.controller.battery_levels()
