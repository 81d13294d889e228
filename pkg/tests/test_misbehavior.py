from rolelog.core import SystemParams
from rolelog.misbehavior import (
    INVALID_AGGREGATE,
    AggregateVote,
    Complaint,
    MisbehaviorMonitor,
    check_aggregate,
    verify_complaint,
)
from rolelog.suspicion import SuspicionState


def test_valid_complaint_convicts_accused():
    c = Complaint(accuser=0, accused=2, kind="equivocation", evidence_valid=True)
    valid, faulty = verify_complaint(c, set())
    assert valid and faulty == {2}


def test_invalid_complaint_convicts_accuser():
    c = Complaint(accuser=0, accused=2, kind="equivocation", evidence_valid=False)
    valid, faulty = verify_complaint(c, set())
    assert not valid and faulty == {0}


def test_duplicate_complaint_idempotent():
    c = Complaint(accuser=0, accused=2, kind="equivocation", evidence_valid=True)
    _, faulty = verify_complaint(c, {2})
    assert faulty == {2}


def test_faulty_accusers_cannot_grow_faulty_arbitrarily():
    # a single lying accuser convicts only itself, however many times it files
    faulty: set[int] = set()
    for accused in range(1, 6):
        c = Complaint(accuser=0, accused=accused, kind="invalid_vote", evidence_valid=False)
        _, faulty = verify_complaint(c, faulty)
    assert faulty == {0}


def test_aggregate_with_full_votes_ok():
    assert check_aggregate(AggregateVote(author=1, votes=4, suspicions=0), 3) is None


def test_aggregate_votes_plus_suspicions_ok():
    assert check_aggregate(AggregateVote(author=1, votes=2, suspicions=2), 3) is None


def test_short_aggregate_is_provable_misbehavior():
    c = check_aggregate(AggregateVote(author=1, votes=3, suspicions=0), 3, observer=0)
    assert c is not None
    assert c.kind == INVALID_AGGREGATE
    assert c.accused == 1 and c.evidence_valid


def test_monitor_applies_once_per_key_and_feeds_suspicion_state():
    params = SystemParams(n=4, f=1, delta=1.2)
    sus = SuspicionState(params)
    mon = MisbehaviorMonitor(sus)
    c = Complaint(accuser=0, accused=2, kind="equivocation", evidence_valid=True)
    mon.on_complaint(c)
    mon.on_complaint(c)
    assert mon.faulty == {2}
    assert 2 not in sus.vertices()  # graph vertex set excludes the convicted


def test_faulty_monotone_over_run():
    mon = MisbehaviorMonitor()
    sizes = []
    complaints = [
        Complaint(accuser=0, accused=1, kind="equivocation", evidence_valid=True),
        Complaint(accuser=1, accused=0, kind="invalid_vote", evidence_valid=False),
        Complaint(accuser=2, accused=3, kind="invalid_proposal", evidence_valid=True),
    ]
    for c in complaints:
        mon.on_complaint(c)
        sizes.append(len(mon.faulty))
    assert sizes == sorted(sizes)
    assert mon.faulty == {1, 3}
