import random

import pytest

from rolelog.core import MS, SystemParams
from rolelog.suspicion import (
    FALSE,
    PROPOSAL_INTERVAL,
    SLOW,
    RoundObservations,
    Suspicion,
    SuspicionState,
    TimeoutTable,
    check_round,
    edge_of,
    filter_suspicions,
    reciprocate,
)

ORDER = {PROPOSAL_INTERVAL: 0, "propose": 1, "write": 2, "accept": 3}


def make_params(n=4, f=1, delta=1.2, window_w=50):
    return SystemParams(n=n, f=f, delta=delta, window_w=window_w)


# --- check_round -------------------------------------------------------------


def obs(round_no=1, ts=0, prev=None, arrivals=None):
    return RoundObservations(
        round=round_no,
        proposal_timestamp=ts,
        prev_proposal_timestamp=prev,
        arrivals=arrivals or {},
    )


def test_check_round_all_timely_is_quiet():
    t = TimeoutTable(d={("write", 0, 1): 30 * MS}, round_duration=100 * MS)
    o = obs(ts=200 * MS, prev=100 * MS, arrivals={("write", 1): 30 * MS})
    assert check_round(o, t, delta=1.2, observer=0, leader=3) == []


def test_check_round_condition_a_late_timestamp():
    t = TimeoutTable(d={}, round_duration=100 * MS)
    o = obs(ts=230 * MS, prev=100 * MS)
    out = check_round(o, t, delta=1.2, observer=0, leader=3)
    assert len(out) == 1
    s = out[0]
    assert (s.kind, s.accuser, s.accused, s.message_type) == (
        SLOW,
        0,
        3,
        PROPOSAL_INTERVAL,
    )


def test_check_round_condition_b_late_message():
    t = TimeoutTable(d={("vote", 0, 1): 30 * MS}, round_duration=100 * MS)
    o = obs(arrivals={("vote", 1): 40 * MS})
    out = check_round(o, t, delta=1.2, observer=0, leader=3)
    assert [(s.accused, s.message_type) for s in out] == [(1, "vote")]


def test_check_round_missing_message_is_late():
    t = TimeoutTable(d={("vote", 0, 1): 30 * MS}, round_duration=100 * MS)
    o = obs(arrivals={("vote", 1): None})
    out = check_round(o, t, delta=1.2, observer=0, leader=3)
    assert len(out) == 1


def test_check_round_boundary_not_late():
    # exactly delta * d is on time
    t = TimeoutTable(d={("vote", 0, 1): 30 * MS}, round_duration=100 * MS)
    o = obs(arrivals={("vote", 1): 36 * MS})
    assert check_round(o, t, delta=1.2, observer=0, leader=3) == []


# --- reciprocate ---------------------------------------------------------------


def test_reciprocate_answers_slow_against_self():
    state = SuspicionState(make_params())
    incoming = Suspicion(SLOW, accuser=1, accused=0, round=3, message_type="write")
    answer = reciprocate(state, incoming, self_id=0)
    assert answer is not None
    assert (answer.kind, answer.accuser, answer.accused) == (FALSE, 0, 1)


def test_reciprocate_ignores_other_targets():
    state = SuspicionState(make_params())
    incoming = Suspicion(SLOW, accuser=1, accused=2, round=3, message_type="write")
    assert reciprocate(state, incoming, self_id=0) is None


def test_reciprocate_never_chains_on_false():
    state = SuspicionState(make_params())
    incoming = Suspicion(FALSE, accuser=1, accused=0, round=3, message_type="write")
    assert reciprocate(state, incoming, self_id=0) is None


def test_two_correct_replicas_reach_fixpoint():
    # one Slow, one False answer, then silence: no infinite mutual accusation
    state = SuspicionState(make_params())
    first = Suspicion(SLOW, accuser=0, accused=1, round=1, message_type="write")
    msgs = [first]
    for self_id in (1, 0, 1, 0):
        nxt = reciprocate(state, msgs[-1], self_id=self_id)
        if nxt is None:
            break
        msgs.append(nxt)
    assert len(msgs) == 2


# --- filter ---------------------------------------------------------------------


def s(kind, accuser, accused, mt, rnd=1):
    return Suspicion(kind, accuser=accuser, accused=accused, round=rnd, message_type=mt)


def test_filter_keeps_earliest_phase_only():
    raw = [s(SLOW, 0, 1, "accept"), s(SLOW, 0, 2, "write")]
    out = filter_suspicions(raw, False, ORDER)
    assert [x.message_type for x in out] == ["write"]


def test_filter_keeps_all_minimal_ties():
    raw = [s(SLOW, 0, 1, "write"), s(SLOW, 0, 2, "write"), s(SLOW, 0, 3, "accept")]
    out = filter_suspicions(raw, False, ORDER)
    assert {x.accused for x in out} == {1, 2}


def test_filter_drops_interval_after_leader_suspected():
    raw = [s(SLOW, 0, 3, PROPOSAL_INTERVAL)]
    assert filter_suspicions(raw, True, ORDER) == []
    assert len(filter_suspicions(raw, False, ORDER)) == 1


def test_filter_empty():
    assert filter_suspicions([], True, ORDER) == []


# --- monitor state ---------------------------------------------------------------


def test_crash_after_unanswered_window():
    params = make_params()  # f=1 -> deadline = view + 2
    state = SuspicionState(params)
    state.monitor_apply(s(SLOW, 0, 1, "write"), current_view=3)
    state.view_tick(4)
    assert 1 not in state.crash_set
    state.view_tick(5)
    assert 1 in state.crash_set
    assert all(1 not in e for e in state.edges)
    assert 1 not in state.vertices()


def test_reciprocation_clears_deadline():
    params = make_params()
    state = SuspicionState(params)
    state.monitor_apply(s(SLOW, 0, 1, "write"), current_view=3)
    state.monitor_apply(s(FALSE, 1, 0, "write"), current_view=4)
    state.view_tick(5)
    state.view_tick(6)
    assert state.crash_set == set()
    assert edge_of(0, 1) in state.edges


def test_suspicion_touching_excluded_vertex_ignored():
    params = make_params()
    state = SuspicionState(params)
    state.mark_faulty(1)
    state.monitor_apply(s(SLOW, 0, 1, "write"), current_view=1)
    assert state.edges == set()


def test_purge_after_stable_window():
    params = make_params(n=7, f=2, window_w=5)
    state = SuspicionState(params)
    state.monitor_apply(s(SLOW, 0, 1, "a", rnd=1), current_view=1)
    state.monitor_apply(s(FALSE, 1, 0, "a", rnd=1), current_view=1)
    state.monitor_apply(s(SLOW, 2, 3, "a", rnd=2), current_view=2)
    state.monitor_apply(s(FALSE, 3, 2, "a", rnd=2), current_view=2)
    assert len(state.edges) == 2
    state.view_tick(6)  # 6 - 2 < 5: still inside the window
    assert len(state.edges) == 2
    state.view_tick(7)  # stable for a full window: oldest edge goes
    assert state.edges == {edge_of(2, 3)}
    state.view_tick(8)
    assert state.edges == set()


def test_purge_restores_candidate_floor():
    # n=4, f=1: a triangle on {0,1,2} plus edge {0,3} kills any 3-vertex
    # independent set; the floor enforcement sheds oldest edges until back
    params = make_params()
    state = SuspicionState(params)
    pairs = [(0, 1), (1, 2), (0, 2), (0, 3)]
    for view, (a, b) in enumerate(pairs, start=1):
        state.monitor_apply(s(SLOW, a, b, "m", rnd=view), current_view=view)
        state.monitor_apply(s(FALSE, b, a, "m", rnd=view), current_view=view)
        cand, _ = state.base_candidates()
        assert len(cand) >= params.q


def test_base_candidates_counts():
    params = make_params(n=5, f=1)
    state = SuspicionState(params)
    cand, u = state.base_candidates()
    assert cand == {0, 1, 2, 3, 4} and u == 0
    state.monitor_apply(s(SLOW, 0, 1, "m"), current_view=1)
    cand, u = state.base_candidates()
    assert len(cand) == 4 and u == 1


def test_identical_logs_identical_candidates():
    params = make_params(n=7, f=2)
    rng = random.Random(0)
    events = []
    for view in range(1, 40):
        a, b = rng.sample(range(7), 2)
        events.append((s(SLOW, a, b, "m", rnd=view), view))
        events.append((s(FALSE, b, a, "m", rnd=view), view))
    results = []
    for _ in range(2):
        state = SuspicionState(params)
        for susp, view in events:
            state.monitor_apply(susp, view)
            state.view_tick(view + 1)
        results.append(state.base_candidates())
    assert results[0] == results[1]
