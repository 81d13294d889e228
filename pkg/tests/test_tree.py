import itertools
import random

import pytest

from rolelog.core import INFINITE, MS
from rolelog.tree import (
    NonPerfectTreeSize,
    TreeConfig,
    aggregation_latency,
    branch_factor,
    build_tree,
    fitting_branch_factor,
    tree_score,
    tree_timeouts,
)

from oracles import brute_tree_score, tree_schedule_oracle


def uniform(n, us):
    return [[0 if a == b else us for b in range(n)] for a in range(n)]


def symmetric_random(n, rng, lo=1000, hi=200_000):
    lat = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(a + 1, n):
            lat[a][b] = lat[b][a] = rng.randrange(lo, hi)
    return lat


def test_branch_factor_known_sizes():
    assert branch_factor(13) == 3
    assert branch_factor(21) == 4
    assert branch_factor(7) == 2
    assert branch_factor(31) == 5
    assert branch_factor(57) == 7


def test_branch_factor_rejects_imperfect():
    with pytest.raises(NonPerfectTreeSize):
        branch_factor(12)
    with pytest.raises(NonPerfectTreeSize):
        branch_factor(4)


def test_fitting_branch_factor_covers_size():
    assert fitting_branch_factor(13) == 3
    assert fitting_branch_factor(11) == 3
    assert fitting_branch_factor(14) == 4
    assert fitting_branch_factor(21) == 4
    for n in range(4, 60):
        b = fitting_branch_factor(n)
        assert b * b + b + 1 >= n
        assert b == 1 or (b - 1) ** 2 + (b - 1) + 1 < n


def test_build_tree_shape():
    t = build_tree(list(range(13)))
    assert t.root == 0
    assert t.intermediates == (1, 2, 3)
    assert all(len(t.children[i]) == 3 for i in t.intermediates)
    assert sorted(t.members()) == list(range(13))


def test_build_tree_imperfect_last_short():
    t = build_tree(list(range(11)))  # b=3: 1 + 3 + 7 leaves
    sizes = [len(t.children[i]) for i in t.intermediates]
    assert sum(sizes) == 7
    assert sizes == [3, 3, 1]
    assert sorted(t.members()) == list(range(11))


def test_aggregation_latency_cases():
    t = build_tree(list(range(7)))
    lat = uniform(7, 10)
    lat[1][3] = lat[3][1] = 5
    lat[1][4] = lat[4][1] = 7
    assert aggregation_latency(t, lat, 1) == 7
    empty = TreeConfig(root=0, intermediates=(1,), children={1: ()})
    assert aggregation_latency(empty, lat, 1) == 0
    lat[1][4] = lat[4][1] = INFINITE
    assert aggregation_latency(t, lat, 1) == INFINITE


def test_score_worked_example():
    lat = [[0] * 7 for _ in range(7)]

    def setl(a, b, v):
        lat[a][b] = lat[b][a] = v

    setl(0, 1, 10)
    setl(0, 2, 20)
    setl(1, 3, 5)
    setl(1, 4, 7)
    setl(2, 5, 3)
    setl(2, 6, 4)
    t = build_tree(list(range(7)))
    assert tree_score(t, lat, 5) == 24  # both subtrees needed
    assert tree_score(t, lat, 4) == 17  # cheapest single subtree
    assert tree_score(t, lat, 1) == 0  # root's own vote suffices


def test_score_infinite_when_uncoverable():
    t = build_tree(list(range(7)))
    assert tree_score(t, uniform(7, 10), 8) == INFINITE


def test_greedy_equals_brute_force_small_trees():
    rng = random.Random(0)
    for trial in range(60):
        n = rng.choice([4, 7, 9, 13, 16])
        t = build_tree(list(range(n)))
        lat = symmetric_random(n, rng)
        for k in range(1, n + 1):
            assert tree_score(t, lat, k) == brute_tree_score(t, lat, k), (n, k)


def test_score_monotone_in_k():
    rng = random.Random(1)
    for trial in range(20):
        t = build_tree(list(range(13)))
        lat = symmetric_random(13, rng)
        scores = [tree_score(t, lat, k) for k in range(1, 14)]
        assert scores == sorted(scores)


def test_score_invariant_to_leaf_permutation_within_subtree():
    rng = random.Random(2)
    t = build_tree(list(range(13)))
    lat = symmetric_random(13, rng)
    base = tree_score(t, lat, 9)
    for i in t.intermediates:
        kids = list(t.children[i])
        rng.shuffle(kids)
        t2 = TreeConfig(root=t.root, intermediates=t.intermediates,
                        children={**t.children, i: tuple(kids)})
        assert tree_score(t2, lat, 9) == base


def test_score_invariant_under_relabeling():
    rng = random.Random(3)
    n = 13
    t = build_tree(list(range(n)))
    lat = symmetric_random(n, rng)
    perm = list(range(n))
    rng.shuffle(perm)
    relabeled = build_tree([perm[r] for r in range(n)])
    lat2 = [[0] * n for _ in range(n)]
    for a in range(n):
        for b in range(n):
            lat2[perm[a]][perm[b]] = lat[a][b]
    # same shape, renamed replicas, renamed matrix: same score
    assert tree_score(relabeled, lat2, 9) == tree_score(t, lat, 9)


def test_timeouts_uniform_cascade():
    t = build_tree(list(range(7)))
    tt = tree_timeouts(t, uniform(7, 10 * MS), k=5)
    assert tt.d[("propose", 1, 0)] == 10 * MS
    assert tt.d[("fwd_propose", 3, 1)] == 20 * MS
    assert tt.d[("vote", 1, 3)] == 30 * MS
    assert tt.d[("agg_vote", 0, 1)] == 40 * MS
    assert tt.round_duration == 40 * MS


def test_timeouts_asymmetric_aggregate():
    # children at 5ms and 50ms, root link 10ms: agg deadline rides the slow child
    lat = uniform(7, 10 * MS)

    def setl(a, b, v):
        lat[a][b] = lat[b][a] = v

    setl(1, 3, 5 * MS)
    setl(1, 4, 50 * MS)
    setl(0, 1, 10 * MS)
    t = build_tree(list(range(7)))
    tt = tree_timeouts(t, lat, k=5)
    assert tt.d[("agg_vote", 0, 1)] == (10 + 50 + 50 + 10) * MS


def test_timeouts_match_schedule_oracle():
    rng = random.Random(4)
    for trial in range(25):
        n = rng.choice([7, 13])
        t = build_tree(list(range(n)))
        lat = symmetric_random(n, rng)
        k = rng.randrange(1, n + 1)
        tt = tree_timeouts(t, lat, k)
        fwd_at, vote_at, agg_at, collect = tree_schedule_oracle(t, lat, k)
        for i in t.intermediates:
            assert tt.d[("propose", i, t.root)] == lat[t.root][i]
            for c in t.children.get(i, ()):
                assert tt.d[("fwd_propose", c, i)] == fwd_at[c]
                assert tt.d[("vote", i, c)] == vote_at[c]
            assert tt.d[("agg_vote", t.root, i)] == agg_at[i]
        assert tt.round_duration == collect


def test_round_duration_covers_score_paths():
    # the round deadline is the score taken over full down-and-up paths; on a
    # symmetric matrix that is exactly twice the collect-only score
    rng = random.Random(5)
    for trial in range(10):
        t = build_tree(list(range(13)))
        lat = symmetric_random(13, rng)
        k = rng.randrange(2, 14)
        assert tree_timeouts(t, lat, k).round_duration == 2 * tree_score(t, lat, k)


def test_timeout_derivation_witness_chains_one_link():
    t = build_tree(list(range(13)))
    rng = random.Random(6)
    lat = symmetric_random(13, rng)
    tt = tree_timeouts(t, lat, k=9)
    for key, (parent, link) in tt.derivation.items():
        base = 0 if parent is None else tt.d[parent]
        assert tt.d[key] == base + link
