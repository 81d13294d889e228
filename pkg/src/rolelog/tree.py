"""Height-3 dissemination/aggregation trees: geometry, latency score, and the
per-message timeout table.

The score of a tree is the minimum time to collect votes from k nodes, where
each intermediate contributes its whole subtree at cost
aggregation(i) + link(i -> root) and the root's own vote is free. Sorting
intermediates by that cost and taking the shortest covering prefix is exact
for this min-max objective: any cheaper answer would have to cover k-1 votes
using only strictly cheaper subtrees, and the prefix is by construction the
largest such family.

Timeouts chain one link at a time down and up the tree, so each message's
deadline decomposes as an earlier message's deadline plus one recorded link
latency. The protocol adapter raises no suspicions on forwarded proposals and
checks leaf votes against the round trip from the forwarding send, both of
which keep a correct intermediate with slow children inside its own deadline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .core import INFINITE, ReplicaId, is_infinite, sat_add
from .suspicion import TimeoutTable

MSG_PROPOSE = "propose"
MSG_FWD_PROPOSE = "fwd_propose"
MSG_VOTE = "vote"
MSG_AGG_VOTE = "agg_vote"

# phase order used to keep only the causally first suspicion of a round;
# the proposal-interval check sorts before everything
TREE_CAUSAL_ORDER = {
    "proposal_interval": 0,
    MSG_PROPOSE: 1,
    MSG_FWD_PROPOSE: 2,
    MSG_VOTE: 3,
    MSG_AGG_VOTE: 4,
}


class NonPerfectTreeSize(ValueError):
    """n does not admit a perfect height-3 tree (n = b^2 + b + 1)."""


def branch_factor(n: int) -> int:
    """Branch factor for a perfect tree of n replicas: b = (sqrt(4n-3)-1)/2."""
    if n < 7:
        raise NonPerfectTreeSize(f"n={n} too small for a height-3 tree")
    root = math.isqrt(4 * n - 3)
    if root * root != 4 * n - 3 or root % 2 == 0:
        raise NonPerfectTreeSize(
            f"n={n} does not form a perfect tree; nearest admissible sizes: "
            f"{admissible_sizes_around(n)}"
        )
    return (root - 1) // 2


def fitting_branch_factor(n: int) -> int:
    """Smallest b whose perfect size b^2 + b + 1 covers n.

    Keeps every intermediate within b children for imperfect sizes; the last
    intermediates simply run short.
    """
    b = 1
    while b * b + b + 1 < n:
        b += 1
    return b


def admissible_sizes_around(n: int, count: int = 2) -> list[int]:
    sizes = [b * b + b + 1 for b in range(2, max(3, int(math.isqrt(n)) + 3))]
    below = [s for s in sizes if s <= n][-count:]
    above = [s for s in sizes if s > n][:count]
    return below + above


@dataclass(frozen=True)
class TreeConfig:
    """Role assignment: root -> intermediates -> leaves."""

    root: ReplicaId
    intermediates: tuple[ReplicaId, ...]
    children: dict[ReplicaId, tuple[ReplicaId, ...]]

    def __post_init__(self) -> None:
        seen = [self.root, *self.intermediates]
        for i in self.intermediates:
            seen.extend(self.children.get(i, ()))
        if len(seen) != len(set(seen)):
            raise ValueError("replica appears in two tree positions")

    @property
    def branch_factor(self) -> int:
        return len(self.intermediates)

    @property
    def internal_count(self) -> int:
        return len(self.intermediates) + 1

    @property
    def internals(self) -> tuple[ReplicaId, ...]:
        return (self.root, *self.intermediates)

    @property
    def size(self) -> int:
        return 1 + len(self.intermediates) + sum(
            len(self.children.get(i, ())) for i in self.intermediates
        )

    def members(self) -> tuple[ReplicaId, ...]:
        out = [self.root, *self.intermediates]
        for i in self.intermediates:
            out.extend(self.children.get(i, ()))
        return tuple(out)

    def parent_of(self, leaf: ReplicaId) -> ReplicaId:
        for i in self.intermediates:
            if leaf in self.children.get(i, ()):
                return i
        raise KeyError(leaf)

    def to_json_dict(self) -> dict:
        return {
            "root": self.root,
            "intermediates": [
                {"id": i, "children": list(self.children.get(i, ()))}
                for i in self.intermediates
            ],
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "TreeConfig":
        return cls(
            root=d["root"],
            intermediates=tuple(e["id"] for e in d["intermediates"]),
            children={e["id"]: tuple(e["children"]) for e in d["intermediates"]},
        )


def build_tree(assignment: list[ReplicaId]) -> TreeConfig:
    """Shape a flat assignment [root, intermediates..., leaves...] into a tree.

    Uses the largest branch factor fitting the size; leaves fill left to
    right, so only the last intermediate can run short of children.
    """
    n = len(assignment)
    b = fitting_branch_factor(n)
    root = assignment[0]
    intermediates = tuple(assignment[1 : 1 + b])
    leaves = assignment[1 + b :]
    children: dict[ReplicaId, tuple[ReplicaId, ...]] = {}
    pos = 0
    for i in intermediates:
        take = min(b, len(leaves) - pos)
        children[i] = tuple(leaves[pos : pos + take])
        pos += take
    return TreeConfig(root=root, intermediates=intermediates, children=children)


def aggregation_latency(tree: TreeConfig, lat, i: ReplicaId) -> int:
    """Max latency from intermediate i to any of its children; 0 if none."""
    kids = tree.children.get(i, ())
    if not kids:
        return 0
    return max(lat[i][c] for c in kids)


def _subtree_costs(tree: TreeConfig, lat) -> list[tuple[int, int, ReplicaId]]:
    """Per intermediate: (collect cost agg+link-to-root, votes covered, id),
    sorted ascending with id as the deterministic tiebreak."""
    rows = []
    for i in tree.intermediates:
        cost = sat_add(aggregation_latency(tree, lat, i), lat[i][tree.root])
        rows.append((cost, len(tree.children.get(i, ())) + 1, i))
    rows.sort(key=lambda r: (r[0], r[2]))
    return rows


def tree_score(tree: TreeConfig, lat, k: int) -> int:
    """Minimum latency to collect votes from k nodes (root's vote is free)."""
    need = k - 1
    if need <= 0:
        return 0
    covered = 0
    for cost, votes, _ in _subtree_costs(tree, lat):
        covered += votes
        if covered >= need:
            return cost
    return INFINITE


def tree_timeouts(tree: TreeConfig, lat, k: int) -> TimeoutTable:
    """Per-message deadlines measured from the proposal timestamp.

    propose: one link down. fwd_propose: propose + one link. vote:
    fwd_propose + one link back. agg_vote: slowest expected child vote + the
    link to the root. Round duration: cheapest family of subtrees covering
    k-1 votes, i.e. the same min-max as the score over full up-down paths.
    """
    d: dict[tuple[str, ReplicaId, ReplicaId], int] = {}
    derivation: dict = {}
    r = tree.root
    agg_keys: list[tuple[int, int, tuple]] = []  # (d_agg, votes, key)
    for i in tree.intermediates:
        k_prop = (MSG_PROPOSE, i, r)
        d[k_prop] = lat[r][i]
        derivation[k_prop] = (None, lat[r][i])
        slowest_vote: tuple[int, tuple | None] = (d[k_prop], k_prop)
        for leaf in tree.children.get(i, ()):
            k_fwd = (MSG_FWD_PROPOSE, leaf, i)
            d[k_fwd] = sat_add(d[k_prop], lat[i][leaf])
            derivation[k_fwd] = (k_prop, lat[i][leaf])
            k_vote = (MSG_VOTE, i, leaf)
            d[k_vote] = sat_add(d[k_fwd], lat[leaf][i])
            derivation[k_vote] = (k_fwd, lat[leaf][i])
            if d[k_vote] > slowest_vote[0]:
                slowest_vote = (d[k_vote], k_vote)
        k_agg = (MSG_AGG_VOTE, r, i)
        d[k_agg] = sat_add(slowest_vote[0], lat[i][r])
        derivation[k_agg] = (slowest_vote[1], lat[i][r])
        agg_keys.append((d[k_agg], len(tree.children.get(i, ())) + 1, k_agg))

    round_duration = INFINITE
    need = k - 1
    if need <= 0:
        round_duration = 0
    else:
        agg_keys.sort(key=lambda row: (row[0], row[2]))
        covered = 0
        for cost, votes, _ in agg_keys:
            covered += votes
            if covered >= need:
                round_duration = cost
                break
    return TimeoutTable(d=d, round_duration=round_duration, derivation=derivation)
