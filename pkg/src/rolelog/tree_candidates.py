"""Tree-topology candidate selection from the suspicion graph.

Instead of a maximum independent set, tree deployments track a maximal set of
vertex-disjoint suspicion edges (every such edge contains at least one faulty
replica) plus the vertices completing a triangle with one of those edges
(certifying two faults in the triangle). Both endpoints of matched edges and
all triangle vertices are withheld from internal-node roles; everyone else
stays eligible. The fault estimate u = |matching| + |triangles| feeds the
vote target of the tree score.

The payoff over the independent-set rule: once every faulty replica is pinned
inside the matching, fresh accusations from those replicas cannot evict any
further correct replicas, which bounds forced reconfigurations.
"""

from __future__ import annotations

from typing import Iterable, Optional

from .core import ReplicaId, SystemParams
from .suspicion import Edge, SuspicionState, edge_of


class TreeSuspicionState:
    """Wraps a SuspicionState and maintains the matching and triangle set."""

    def __init__(self, base: SuspicionState):
        self.base = base
        # the n-f independent-set floor is an artifact of independent-set
        # candidate selection; matched pairs must be allowed to accumulate
        base.enforce_floor = False
        self.mg: list[Edge] = []  # insertion-ordered, pairwise vertex-disjoint
        self.t_set: set[ReplicaId] = set()
        base.add_edge_listener(self)

    # -- listener hooks driven by the base graph ------------------------------

    def edge_added(self, e: Edge) -> None:
        self.maintain_matching(e)
        self._recompute_triangles()

    def edge_removed(self, e: Edge) -> None:
        if e in self.mg:
            self._rebuild()
        else:
            self._remaximalize()
            self._recompute_triangles()

    def vertex_dropped(self, replica: ReplicaId) -> None:
        if any(replica in e for e in self.mg):
            self._rebuild()
        else:
            self._recompute_triangles()

    # -- matching maintenance --------------------------------------------------

    def matched_vertices(self) -> set[ReplicaId]:
        return {v for e in self.mg for v in e}

    def maintain_matching(self, new_edge: Edge) -> None:
        """Keep the matching maximal after new_edge joined the graph.

        If the edge is disjoint from the matching it is simply added. If not,
        try to grow the matching by one: remove a single incident matched edge
        when that frees both its endpoints to be re-matched by two other graph
        edges. Swaps are searched exhaustively and chosen by lowest insertion
        index, so every replica lands on the same matching.
        """
        matched = self.matched_vertices()
        if new_edge[0] not in matched and new_edge[1] not in matched:
            self.mg.append(new_edge)
            return
        for victim in list(self.mg):
            if not (set(victim) & set(new_edge)):
                continue
            pair = self._disjoint_pair_after_removal(victim)
            if pair is not None:
                self.mg.remove(victim)
                self.mg.extend(pair)
                self._remaximalize()
                return
        self._remaximalize()

    def _disjoint_pair_after_removal(self, victim: Edge) -> Optional[tuple[Edge, Edge]]:
        blocked = self.matched_vertices() - set(victim)
        free = [
            e
            for e in self.base.edge_order
            if e != victim and not (set(e) & blocked)
        ]
        for i, e1 in enumerate(free):
            for e2 in free[i + 1 :]:
                if not (set(e1) & set(e2)):
                    return (e1, e2)
        return None

    def _remaximalize(self) -> None:
        matched = self.matched_vertices()
        for e in self.base.edge_order:
            if e in self.mg:
                continue
            if e[0] not in matched and e[1] not in matched:
                self.mg.append(e)
                matched.update(e)

    def _rebuild(self) -> None:
        """Replay surviving edges in insertion order through maintenance."""
        self.mg = []
        for e in self.base.edge_order:
            self.maintain_matching(e)
        self._recompute_triangles()

    # -- triangles ---------------------------------------------------------------

    def _recompute_triangles(self) -> None:
        self.t_set = self.triangle_set()

    def triangle_set(self) -> set[ReplicaId]:
        """Vertices off the matching that close a triangle with a matched edge."""
        edges = self.base.edges
        matched = self.matched_vertices()
        out = set()
        for v in self.base.vertices() - matched:
            for (x, y) in self.mg:
                if edge_of(v, x) in edges and edge_of(v, y) in edges:
                    out.add(v)
                    break
        return out

    # -- candidates ---------------------------------------------------------------

    def tree_candidates(self) -> tuple[set[ReplicaId], int]:
        """(vertices eligible for internal roles, fault estimate u)."""
        cand = self.base.vertices() - self.matched_vertices() - self.t_set
        return cand, len(self.mg) + len(self.t_set)

    def snapshot(self) -> dict:
        return {
            "base": self.base.snapshot(),
            "mg": list(self.mg),
            "t": set(self.t_set),
        }

    def to_json_dict(self) -> dict:
        cand, u = self.tree_candidates()
        return {
            "edges": sorted(self.base.edges),
            "mg": sorted(self.mg),
            "t": sorted(self.t_set),
            "crash": sorted(self.base.crash_set),
            "candidates": sorted(cand),
            "u": u,
        }


def maintain_matching(state: TreeSuspicionState, new_edge: Edge) -> TreeSuspicionState:
    state.maintain_matching(edge_of(*new_edge))
    state._recompute_triangles()
    return state


def tree_candidates(
    state: TreeSuspicionState, faulty: Iterable[ReplicaId], params: SystemParams
) -> tuple[set[ReplicaId], int]:
    for r in faulty:
        state.base.mark_faulty(r)
    return state.tree_candidates()
