"""Users, sessions, roles, and project lifecycle."""

import pytest

from scooterlab.core import sensors
from scooterlab.core.errors import (
    AuthFailure,
    BadCredential,
    DuplicateName,
    ExpiredToken,
    FleetConflict,
    Forbidden,
    InvalidPolicy,
    UnknownScooter,
)
from scooterlab.core.policy import DataCollectionPolicy
from scooterlab.core.schedule import unrestricted_schedule
from scooterlab.controller.service import FleetController
from scooterlab.controller.storage import Storage
from scooterlab.ramp.service import RampService

T0 = 1_750_000_000_000
SECRET = "test-secret"


def gps_policy(rate=1.0):
    return DataCollectionPolicy(sensors={sensors.GPS: rate}, schedule=unrestricted_schedule())


@pytest.fixture
def world():
    clock = {"now": T0}
    fc = FleetController(Storage(), token_secret=SECRET, clock=lambda: clock["now"])
    ramp = RampService(fc)
    ramp._test_clock = clock
    for sid in ("s1", "s2", "s3"):
        fc.register_scooter(sid, "m", SECRET)
    ramp.create_user("alice", "researcher", "pw-alice", SECRET)
    ramp.create_user("bob", "researcher", "pw-bob", SECRET)
    ramp.create_user("carol", "rider", "pw-carol", SECRET)
    tokens = {
        "admin": SECRET,
        "alice": ramp.authenticate("alice", "pw-alice")["token"],
        "bob": ramp.authenticate("bob", "pw-bob")["token"],
        "carol": ramp.authenticate("carol", "pw-carol")["token"],
    }
    return fc, ramp, tokens


class TestAuth:
    def test_create_then_authenticate_and_use(self, world):
        fc, ramp, tokens = world
        assert ramp.list_projects(tokens["alice"]) == []

    def test_wrong_credential(self, world):
        _, ramp, _ = world
        with pytest.raises(BadCredential):
            ramp.authenticate("alice", "wrong")
        with pytest.raises(BadCredential):
            ramp.authenticate("nobody", "pw")

    def test_duplicate_name(self, world):
        _, ramp, _ = world
        with pytest.raises(DuplicateName):
            ramp.create_user("alice", "rider", "x", SECRET)

    def test_token_expiry(self, world):
        _, ramp, tokens = world
        ramp._test_clock["now"] = T0 + 24 * 3600 * 1000 + 1
        with pytest.raises(ExpiredToken):
            ramp.list_projects(tokens["alice"])

    def test_unknown_token(self, world):
        _, ramp, _ = world
        with pytest.raises(AuthFailure):
            ramp.list_projects("bogus")

    def test_rider_cannot_create_project(self, world):
        _, ramp, tokens = world
        with pytest.raises(Forbidden):
            ramp.create_project("nope", gps_policy(), ["s1"], tokens["carol"])

    def test_rider_can_read_battery(self, world):
        _, ramp, tokens = world
        levels = ramp.battery_levels(tokens["carol"])
        assert [e["scooter_id"] for e in levels] == ["s1", "s2", "s3"]
        assert all(e["status"] == "unknown" for e in levels)

    def test_only_admin_creates_users(self, world):
        _, ramp, tokens = world
        with pytest.raises(Forbidden):
            ramp.create_user("dave", "rider", "pw", tokens["alice"])


class TestProjects:
    def test_create_draft_issues_no_configs(self, world):
        fc, ramp, tokens = world
        p = ramp.create_project("Curbs", gps_policy(), ["s1", "s2"], tokens["alice"])
        assert p["state"] == "draft"
        assert fc.storage.current_config("s1") is None

    def test_activation_bumps_configs_and_stamps_project(self, world):
        fc, ramp, tokens = world
        p = ramp.create_project("Curbs", gps_policy(), ["s1", "s2"], tokens["alice"])
        out = ramp.activate_project(p["project_id"], tokens["alice"])
        assert out["state"] == "active"
        assert out["issued_config_versions"] == {"s1": 1, "s2": 1}
        cfg = fc.storage.current_config("s1")
        assert cfg.project_id == p["project_id"]

    def test_fleet_conflict_lists_scooters(self, world):
        fc, ramp, tokens = world
        p1 = ramp.create_project("A", gps_policy(), ["s1", "s2"], tokens["alice"])
        ramp.activate_project(p1["project_id"], tokens["alice"])
        p2 = ramp.create_project("B", gps_policy(), ["s1", "s3"], tokens["bob"])
        with pytest.raises(FleetConflict) as exc:
            ramp.activate_project(p2["project_id"], tokens["bob"])
        assert exc.value.details == ["s1"]

    def test_completed_project_frees_fleet(self, world):
        fc, ramp, tokens = world
        p1 = ramp.create_project("A", gps_policy(), ["s1"], tokens["alice"])
        ramp.activate_project(p1["project_id"], tokens["alice"])
        fc.storage.projects[p1["project_id"]].state = "completed"
        p2 = ramp.create_project("B", gps_policy(), ["s1"], tokens["bob"])
        assert ramp.activate_project(p2["project_id"], tokens["bob"])["state"] == "active"

    def test_invalid_policy_rejected(self, world):
        _, ramp, tokens = world
        with pytest.raises(InvalidPolicy) as exc:
            ramp.create_project("bad", gps_policy(50.0), ["s1"], tokens["alice"])
        assert exc.value.details[0]["code"] == "RateExceedsCap"

    def test_unknown_scooter_rejected(self, world):
        _, ramp, tokens = world
        with pytest.raises(UnknownScooter):
            ramp.create_project("bad", gps_policy(), ["ghost"], tokens["alice"])

    def test_owner_isolation(self, world):
        _, ramp, tokens = world
        p = ramp.create_project("A", gps_policy(), ["s1"], tokens["alice"])
        with pytest.raises(Forbidden):
            ramp.activate_project(p["project_id"], tokens["bob"])
        assert ramp.list_projects(tokens["bob"]) == []
        assert len(ramp.list_projects(tokens["admin"])) == 1

    def test_activation_is_idempotent(self, world):
        fc, ramp, tokens = world
        p = ramp.create_project("A", gps_policy(), ["s1"], tokens["alice"])
        ramp.activate_project(p["project_id"], tokens["alice"])
        again = ramp.activate_project(p["project_id"], tokens["alice"])
        assert again["state"] == "active"
        assert fc.storage.current_config("s1").version == 1  # no re-issue
