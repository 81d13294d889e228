import itertools
import random

import pytest

from rolelog.config_search import (
    AnnealingParams,
    ConfigMonitor,
    ConfigProposal,
    InsufficientCandidates,
    config_id,
    config_monitor_step,
    flatten,
    is_valid,
    kauri_bins,
    mutate,
    random_valid_config,
    sa_search,
    special_count,
)
from rolelog.core import SystemParams
from rolelog.star import StarConfig
from rolelog.tree import build_tree, tree_score


def symmetric_random(n, rng, lo=1000, hi=150_000):
    lat = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            lat[a][b] = lat[b][a] = rng.randrange(lo, hi)
    return lat


def test_mutate_preserves_membership_and_changes_two():
    rng = random.Random(0)
    t = build_tree(list(range(13)))
    out = mutate(t, set(range(13)), rng)
    before, after = flatten(t), flatten(out)
    assert sorted(before) == sorted(after)
    assert sum(1 for a, b in zip(before, after) if a != b) == 2


def test_mutate_never_places_non_candidate_in_special_role():
    rng = random.Random(1)
    candidates = set(range(6))  # replicas 6..12 never take special roles
    config = build_tree(list(range(13)))
    n_special = special_count(config)
    for _ in range(10_000):
        config = mutate(config, candidates, rng)
        assert all(r in candidates for r in flatten(config)[:n_special])


def test_mutate_insufficient_candidates():
    rng = random.Random(2)
    t = build_tree(list(range(13)))
    with pytest.raises(InsufficientCandidates):
        mutate(t, {0, 1}, rng)  # 4 special roles, 2 candidates


def test_random_valid_config_respects_candidates():
    rng = random.Random(3)
    for _ in range(50):
        cand = set(rng.sample(range(13), 7))
        cfg = random_valid_config("tree", 13, cand, rng)
        assert is_valid(cfg, cand)
        assert sorted(flatten(cfg)) == list(range(13))


def test_sa_search_deterministic_under_seed():
    rng = random.Random(4)
    lat = symmetric_random(13, rng)
    params = SystemParams(n=13, f=4, delta=1.2)
    ann = AnnealingParams(max_iterations=500, seed=99)
    results = [
        sa_search(lambda c: tree_score(c, lat, 9), set(range(13)), params, "tree", ann)
        for _ in range(2)
    ]
    assert config_id(results[0][0]) == config_id(results[1][0])
    assert results[0][1] == results[1][1]


def test_sa_search_constant_landscape_returns_valid_config():
    params = SystemParams(n=4, f=1, delta=1.2)
    ann = AnnealingParams(max_iterations=50, seed=1)
    cfg, score = sa_search(lambda c: 42, set(range(4)), params, "star", ann)
    assert score == 42
    assert isinstance(cfg, StarConfig)


def test_sa_best_scores_never_worse_than_initial_tracking():
    # best-so-far is monotone: the returned score is the minimum ever seen
    rng = random.Random(5)
    lat = symmetric_random(13, rng)
    params = SystemParams(n=13, f=4, delta=1.2)
    seen = []
    real_score = lambda c: tree_score(c, lat, 9)

    def spy(c):
        s = real_score(c)
        seen.append(s)
        return s

    _, best = sa_search(spy, set(range(13)), params, "tree", AnnealingParams(max_iterations=400, seed=7))
    assert best == min(seen)


def test_sa_search_insufficient_candidates_propagates():
    params = SystemParams(n=13, f=4, delta=1.2)
    with pytest.raises(InsufficientCandidates):
        sa_search(lambda c: 1, {0, 1}, params, "tree", AnnealingParams(max_iterations=10, seed=0))


# --- monitor ---------------------------------------------------------------------


def proposal(author, cfg, score, basis=(1, 0)):
    return ConfigProposal(author=author, config=cfg, claimed_score=score, basis_generation=basis)


def fresh_monitor(score_fn, candidates, params, basis=(1, 0)):
    monitor = ConfigMonitor(params)
    monitor.set_basis(score_fn, candidates, basis)
    return monitor


def test_monitor_waits_for_f_plus_one_then_picks_best():
    params = SystemParams(n=4, f=1, delta=1.2)
    score_by_leader = {0: 120_000, 1: 90_000, 2: 110_000, 3: 100_000}
    monitor = fresh_monitor(
        lambda c: score_by_leader[c.leader], set(range(4)), params
    )
    d1 = config_monitor_step(
        monitor, proposal(0, StarConfig(0, 4), 120_000), current_valid=False
    )
    assert not d1.reconfigure  # only one author so far
    d2 = config_monitor_step(
        monitor, proposal(1, StarConfig(1, 4), 90_000), current_valid=False
    )
    assert d2.reconfigure and d2.target.leader == 1 and d2.target_score == 90_000


def test_monitor_keeps_valid_config_unless_significantly_better():
    params = SystemParams(n=4, f=1, delta=1.2)
    score_by_leader = {0: 95_000, 1: 100_000, 2: 80_000, 3: 99_000}
    monitor = fresh_monitor(lambda c: score_by_leader[c.leader], set(range(4)), params)
    monitor.current = StarConfig(1, 4)
    monitor.current_score = 100_000
    monitor.on_proposal(proposal(0, StarConfig(0, 4), 95_000))
    monitor.on_proposal(proposal(3, StarConfig(3, 4), 99_000))
    assert not monitor.step(current_valid=True).reconfigure  # 95k >= 0.9 * 100k
    monitor.on_proposal(proposal(2, StarConfig(2, 4), 80_000))
    d = monitor.step(current_valid=True)
    assert d.reconfigure and d.target.leader == 2


def test_monitor_rejects_score_mismatch():
    params = SystemParams(n=4, f=1, delta=1.2)
    monitor = fresh_monitor(lambda c: 100_000, set(range(4)), params)
    monitor.on_proposal(proposal(0, StarConfig(0, 4), 50_000))  # lie
    assert monitor.pending == {}
    assert monitor.rejected == [(0, "score_mismatch")]


def test_monitor_rejects_non_candidate_special_role():
    params = SystemParams(n=4, f=1, delta=1.2)
    monitor = fresh_monitor(lambda c: 100_000, {1, 2, 3}, params)
    monitor.on_proposal(proposal(2, StarConfig(0, 4), 100_000))
    assert monitor.rejected == [(2, "invalid_roles")]


def test_monitor_rejects_stale_basis():
    params = SystemParams(n=4, f=1, delta=1.2)
    monitor = fresh_monitor(lambda c: 100_000, set(range(4)), params, basis=(2, 5))
    monitor.on_proposal(proposal(1, StarConfig(1, 4), 100_000, basis=(1, 4)))
    assert monitor.rejected == [(1, "stale_basis")]


def test_monitor_ties_break_to_lowest_author():
    params = SystemParams(n=4, f=1, delta=1.2)
    monitor = fresh_monitor(lambda c: 70_000, set(range(4)), params)
    monitor.on_proposal(proposal(3, StarConfig(3, 4), 70_000))
    monitor.on_proposal(proposal(1, StarConfig(1, 4), 70_000))
    d = monitor.step(current_valid=False)
    assert d.reconfigure and d.target.leader == 1


def test_monitor_decision_pure_function_of_log_prefix():
    params = SystemParams(n=7, f=2, delta=1.2)
    rng = random.Random(6)
    proposals = [
        proposal(a, StarConfig(rng.randrange(7), 7), 0) for a in range(5)
    ]
    proposals = [
        ConfigProposal(p.author, p.config, 50_000 + p.config.leader, (1, 0))
        for p in proposals
    ]
    outcomes = []
    for _ in range(2):
        monitor = fresh_monitor(lambda c: 50_000 + c.leader, set(range(7)), params)
        decision = None
        for p in proposals:
            decision = config_monitor_step(monitor, p, current_valid=False)
            if decision.reconfigure:
                break
        outcomes.append((decision.reconfigure, config_id(decision.target)))
    assert outcomes[0] == outcomes[1]


# --- bin rotation -----------------------------------------------------------------


def test_kauri_bins_disjoint_internals():
    params = SystemParams(n=9, f=2, delta=1.2)
    trees = kauri_bins(params, internal_count=3, rng=random.Random(0))
    assert len(trees) == 3
    internal_sets = [set(t.internals) for t in trees]
    for a, b in itertools.combinations(internal_sets, 2):
        assert not (a & b)
    for t in trees:
        assert sorted(t.members()) == list(range(9))


def test_kauri_bins_pigeonhole_one_clean_tree():
    # with f < t bins, some tree has all-correct internals for every placement
    params = SystemParams(n=9, f=2, delta=1.2)
    trees = kauri_bins(params, internal_count=3, rng=random.Random(1))
    for faulty in itertools.combinations(range(9), 2):
        clean = [t for t in trees if not (set(t.internals) & set(faulty))]
        assert clean, f"no clean tree for faulty={faulty}"


def test_kauri_bins_count_floor_division():
    params = SystemParams(n=21, f=6, delta=1.2)
    trees = kauri_bins(params, internal_count=5, rng=random.Random(2))
    assert len(trees) == 4  # floor(21/5); leftovers stay leaves
