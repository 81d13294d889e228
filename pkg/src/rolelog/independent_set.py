"""Deterministic maximum-independent-set search.

An independent set in the suspicion graph is a clique in its complement, so
the search runs Bron-Kerbosch with pivoting over complement adjacency encoded
as bitmasks. Small graphs (<= EXACT_LIMIT vertices) are enumerated completely
and the result is the true maximum; larger graphs reuse the same recursion
under an expansion budget, which keeps candidate selection well under the
one-second mark at n=100 while staying deterministic.

Tie-breaking everywhere is lexicographic on the sorted vertex tuple, so every
replica running this on the same graph picks the same set.
"""

from __future__ import annotations

from typing import Iterable, Sequence

ReplicaId = int

EXACT_LIMIT = 20
DEFAULT_BUDGET = 60_000


def max_independent_set(
    vertices: Iterable[ReplicaId],
    edges: Iterable[tuple[ReplicaId, ReplicaId]],
    budget: int = DEFAULT_BUDGET,
) -> set[ReplicaId]:
    """Best independent set found; exact maximum when |V| <= EXACT_LIMIT."""
    order = sorted(set(vertices))
    n = len(order)
    if n == 0:
        return set()
    index = {v: i for i, v in enumerate(order)}

    full = (1 << n) - 1
    # complement adjacency: vertex i is compatible with j iff no edge (i, j)
    comp = [full & ~(1 << i) for i in range(n)]
    for a, b in edges:
        if a == b or a not in index or b not in index:
            continue
        i, j = index[a], index[b]
        comp[i] &= ~(1 << j)
        comp[j] &= ~(1 << i)

    limit = None if n <= EXACT_LIMIT else max(budget, 1)
    best = _bron_kerbosch(n, comp, limit)
    return {order[i] for i in _bits(best)}


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _bron_kerbosch(n: int, adj: Sequence[int], limit: int | None) -> int:
    best_mask = 0
    best_key: tuple[int, tuple[int, ...]] | None = None
    calls = 0

    def consider(clique: int) -> None:
        nonlocal best_mask, best_key
        members = tuple(_bits(clique))
        key = (-len(members), members)
        if best_key is None or key < best_key:
            best_key = key
            best_mask = clique

    def expand(clique: int, cand: int, excl: int) -> None:
        nonlocal calls
        calls += 1
        if limit is not None and calls > limit:
            return
        if cand == 0 and excl == 0:
            consider(clique)
            return
        if cand == 0:
            return
        # size bound: even taking every candidate cannot beat the best
        if best_key is not None and bin(clique | cand).count("1") < -best_key[0]:
            return
        pivot = _pick_pivot(cand, excl, adj)
        branch = cand & ~adj[pivot]
        for i in _bits(branch):
            bit = 1 << i
            expand(clique | bit, cand & adj[i], excl & adj[i])
            cand &= ~bit
            excl |= bit
            if limit is not None and calls > limit:
                return

    expand(0, (1 << n) - 1, 0)
    if best_key is None:
        # budget exhausted before any maximal clique completed; fall back to a
        # deterministic greedy fill so a nonempty set is always returned
        best_mask = _greedy(n, adj)
    return best_mask


def _pick_pivot(cand: int, excl: int, adj: Sequence[int]) -> int:
    # max |N(u) & cand|, ties to the lowest index
    best_i = -1
    best_deg = -1
    for i in _bits(cand | excl):
        deg = bin(adj[i] & cand).count("1")
        if deg > best_deg:
            best_deg = deg
            best_i = i
    return best_i


def _greedy(n: int, adj: Sequence[int]) -> int:
    clique = 0
    cand = (1 << n) - 1
    while cand:
        i = (cand & -cand).bit_length() - 1
        clique |= 1 << i
        cand &= adj[i]
    return clique
