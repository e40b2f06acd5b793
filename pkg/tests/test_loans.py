import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scooterlab.core.errors import LoanNotActive, MissingAcknowledgment, ScooterUnavailable, UnknownLoan
from scooterlab.core.model import AVAILABLE, LOANED, MAINTENANCE, MAX_LOAN_MS
from scooterlab.controller.service import FleetController
from scooterlab.controller.storage import Storage

T0 = 1_750_000_000_000
DAY = 24 * 3600 * 1000
SECRET = "test-secret"
ALL_ACKS = {"consent_ack": True, "safety_video_ack": True, "survey_done": True}


@pytest.fixture
def fc():
    clock = {"now": T0}
    controller = FleetController(Storage(), token_secret=SECRET, clock=lambda: clock["now"])
    controller._test_clock = clock
    controller.register_scooter("s1", "m", SECRET)
    return controller


def test_checkout_due_in_exactly_14_days(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    assert loan.due_at - loan.started_at == 14 * DAY
    assert fc.storage.scooters["s1"].status == LOANED


def test_checkout_of_loaned_scooter_rejected(fc):
    fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    with pytest.raises(ScooterUnavailable):
        fc.checkout("rider2", "s1", ALL_ACKS, SECRET)


def test_missing_ack_names_the_gap(fc):
    with pytest.raises(MissingAcknowledgment) as exc:
        fc.checkout("rider1", "s1", {**ALL_ACKS, "consent_ack": False}, SECRET)
    assert exc.value.details == ["consent"]
    with pytest.raises(MissingAcknowledgment) as exc:
        fc.checkout("rider1", "s1", {}, SECRET)
    assert set(exc.value.details) == {"consent", "safety_video", "survey"}


def test_renew_on_day_10_runs_14_more_days(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    fc._test_clock["now"] = T0 + 10 * DAY
    renewed = fc.renew(loan.loan_id, ALL_ACKS, SECRET)
    assert renewed.due_at == T0 + 10 * DAY + 14 * DAY
    assert renewed.due_at - renewed.started_at <= MAX_LOAN_MS


def test_renew_requires_full_reconsent(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    with pytest.raises(MissingAcknowledgment):
        fc.renew(loan.loan_id, {**ALL_ACKS, "survey_done": False}, SECRET)


def test_renew_returned_loan_rejected(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    fc.return_and_inspect(loan.loan_id, True, SECRET)
    with pytest.raises(LoanNotActive):
        fc.renew(loan.loan_id, ALL_ACKS, SECRET)


def test_return_pass_makes_available(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    out = fc.return_and_inspect(loan.loan_id, True, SECRET)
    assert out["scooter_status"] == AVAILABLE
    assert fc.storage.scooters["s1"].status == AVAILABLE


def test_failed_inspection_blocks_next_checkout(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    out = fc.return_and_inspect(loan.loan_id, False, SECRET)
    assert out["scooter_status"] == MAINTENANCE
    with pytest.raises(ScooterUnavailable):
        fc.checkout("rider2", "s1", ALL_ACKS, SECRET)


def test_double_return_rejected(fc):
    loan = fc.checkout("rider1", "s1", ALL_ACKS, SECRET)
    fc.return_and_inspect(loan.loan_id, True, SECRET)
    with pytest.raises(LoanNotActive):
        fc.return_and_inspect(loan.loan_id, True, SECRET)


def test_unknown_loan(fc):
    with pytest.raises(UnknownLoan):
        fc.renew("loan-999999", ALL_ACKS, SECRET)


op_strategy = st.lists(
    st.tuples(
        st.sampled_from(["checkout", "renew", "return", "advance"]),
        st.integers(0, 2),       # scooter index
        st.booleans(),           # full acks?
        st.booleans(),           # inspection pass
        st.integers(1, 9 * DAY),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(ops=op_strategy)
def test_loan_rules_hold_over_random_sequences(ops):
    """Sequenced property check of the loan state machine.

    Invariants: due never exceeds the current term start + 14 days; a
    scooter has at most one active loan; renewal or checkout without full
    acknowledgments never succeeds.
    """
    clock = {"now": T0}
    fc = FleetController(Storage(), token_secret=SECRET, clock=lambda: clock["now"])
    scooters = ["s1", "s2", "s3"]
    for sid in scooters:
        fc.register_scooter(sid, "m", SECRET)
    live_loans: list = []

    for op, idx, full_acks, inspection, dt in ops:
        sid = scooters[idx]
        acks = ALL_ACKS if full_acks else {**ALL_ACKS, "consent_ack": False}
        if op == "advance":
            clock["now"] += dt
        elif op == "checkout":
            try:
                loan = fc.checkout(f"rider-{idx}", sid, acks, SECRET)
                assert full_acks, "checkout succeeded without acknowledgments"
                live_loans.append(loan.loan_id)
            except (ScooterUnavailable, MissingAcknowledgment):
                pass
        elif op == "renew" and live_loans:
            try:
                fc.renew(live_loans[-1], acks, SECRET)
                assert full_acks, "renewal succeeded without re-acknowledgment"
            except (MissingAcknowledgment, LoanNotActive):
                pass
        elif op == "return" and live_loans:
            try:
                fc.return_and_inspect(live_loans[-1], inspection, SECRET)
            except LoanNotActive:
                pass

        for loan in fc.storage.loans.values():
            assert loan.due_at - loan.started_at <= MAX_LOAN_MS
        for sid2 in scooters:
            active = [l for l in fc.storage.loans.values() if l.scooter_id == sid2 and l.active]
            assert len(active) <= 1
            if active:
                assert fc.storage.scooters[sid2].status == LOANED
