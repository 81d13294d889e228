"""Suspicion raising, reciprocation, filtering, and the suspicion graph.

Sensors raise Slow suspicions when messages miss their slack-adjusted
deadlines and False suspicions to push back against accusations. The monitor
folds logged suspicions into an undirected graph over the replicas not yet
proven faulty or crashed; a maximum independent set of that graph is the pool
of replicas eligible for special roles.

Crash detection: a Slow suspicion opens a reciprocation window of f+1 views.
If the accused never answers with a False suspicion, it is moved to the crash
set and drops out of the graph. Old edges are purged once the system has been
quiet for a full stability window, and whenever the graph gets too tangled to
still contain n-f independent vertices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from .core import (
    MalformedPayload,
    ReplicaId,
    SystemParams,
    ViewNumber,
    is_infinite,
    register_payload,
    sat_scale,
)
from .independent_set import max_independent_set

SLOW = "slow"
FALSE = "false"

# message tag for condition-(a) findings: consecutive proposal timestamps too
# far apart; ranks before every real protocol message in the causal order
PROPOSAL_INTERVAL = "proposal_interval"

Edge = tuple[ReplicaId, ReplicaId]


def edge_of(a: ReplicaId, b: ReplicaId) -> Edge:
    return (a, b) if a < b else (b, a)


@dataclass(frozen=True)
class Suspicion:
    kind: str  # SLOW | FALSE
    accuser: ReplicaId
    accused: ReplicaId
    round: int
    message_type: str

    def __post_init__(self) -> None:
        if self.accuser == self.accused:
            raise MalformedPayload("self-suspicion")
        if self.kind not in (SLOW, FALSE):
            raise MalformedPayload(f"unknown suspicion kind {self.kind!r}")

    @property
    def author(self) -> ReplicaId:
        return self.accuser


register_payload(
    Suspicion,
    "suspicion",
    encode=lambda s: {
        "kind": s.kind,
        "accused": s.accused,
        "round": s.round,
        "message_type": s.message_type,
    },
    decode=lambda author, body: Suspicion(
        kind=body["kind"],
        accuser=author,
        accused=int(body["accused"]),
        round=int(body["round"]),
        message_type=body["message_type"],
    ),
)


@dataclass
class RoundObservations:
    """What one replica saw of one round, offsets relative to the round's
    reference timestamp (the leader's proposal timestamp)."""

    round: int
    proposal_timestamp: int
    prev_proposal_timestamp: Optional[int]
    # (message_type, sender) -> arrival offset in microseconds, None if the
    # message never arrived
    arrivals: dict[tuple[str, ReplicaId], Optional[int]] = field(default_factory=dict)


def check_round(
    observations: RoundObservations,
    timeouts: "TimeoutTable",
    delta: float,
    observer: ReplicaId,
    leader: ReplicaId,
) -> list[Suspicion]:
    """Raise Slow suspicions for this observer's view of one round.

    Condition (a): consecutive proposal timestamps more than delta * D_R
    apart point at the leader. Condition (b): an expected message missing
    its delta * d_m deadline points at its sender.
    """
    out: list[Suspicion] = []
    prev = observations.prev_proposal_timestamp
    if (
        prev is not None
        and observer != leader
        and not is_infinite(timeouts.round_duration)
        and observations.proposal_timestamp - prev
        > sat_scale(timeouts.round_duration, delta)
    ):
        out.append(
            Suspicion(
                kind=SLOW,
                accuser=observer,
                accused=leader,
                round=observations.round,
                message_type=PROPOSAL_INTERVAL,
            )
        )
    for (message_type, sender), arrival in observations.arrivals.items():
        if sender == observer:
            continue
        d = timeouts.d.get((message_type, observer, sender))
        if d is None or is_infinite(d):
            continue
        deadline = sat_scale(d, delta)
        if arrival is None or arrival > deadline:
            out.append(
                Suspicion(
                    kind=SLOW,
                    accuser=observer,
                    accused=sender,
                    round=observations.round,
                    message_type=message_type,
                )
            )
    return out


@dataclass
class TimeoutTable:
    """Expected message delays from round start, plus the round duration."""

    # (message_type, recipient, sender) -> microseconds
    d: dict[tuple[str, ReplicaId, ReplicaId], int]
    round_duration: int
    # witness for the timeout requirements: message key -> (key of the
    # enabling earlier message or None for leader-sent, link latency added)
    derivation: dict[tuple, tuple[Optional[tuple], int]] = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "round_duration_us": self.round_duration,
            "d": [
                {"message": m, "recipient": r, "sender": s, "us": v}
                for (m, r, s), v in sorted(self.d.items())
            ],
        }


def reciprocate(
    state: "SuspicionState",
    incoming: Suspicion,
    self_id: ReplicaId,
    self_timely: bool = True,
) -> Optional[Suspicion]:
    """Answer a Slow accusation against self with a False counter-suspicion.

    False suspicions are never reciprocated; that would chain forever.
    """
    if incoming.kind != SLOW or incoming.accused != self_id or not self_timely:
        return None
    return Suspicion(
        kind=FALSE,
        accuser=self_id,
        accused=incoming.accuser,
        round=incoming.round,
        message_type=incoming.message_type,
    )


def filter_suspicions(
    raw: list[Suspicion],
    previous_round_leader_suspected: bool,
    causal_order: dict[str, int],
) -> list[Suspicion]:
    """Keep one observer's causally-first suspicions for one round.

    A single delayed message knocks on through later protocol phases; only the
    earliest phase is informative. A late proposal timestamp is likewise
    excused when the leader itself reported a late message the round before.
    """
    kept = [
        s
        for s in raw
        if not (
            previous_round_leader_suspected and s.message_type == PROPOSAL_INTERVAL
        )
    ]
    if not kept:
        return []
    lowest = min(causal_order.get(s.message_type, len(causal_order)) for s in kept)
    return [
        s for s in kept if causal_order.get(s.message_type, len(causal_order)) == lowest
    ]


class SuspicionState:
    """Log-driven graph of two-way suspicions plus crash bookkeeping."""

    def __init__(
        self,
        params: SystemParams,
        faulty: Optional[set[ReplicaId]] = None,
        enforce_floor: bool = True,
    ):
        self.params = params
        self.faulty: set[ReplicaId] = set(faulty or ())
        self.crash_set: set[ReplicaId] = set()
        self.edges: set[Edge] = set()
        self.edge_order: list[Edge] = []  # insertion order, oldest first
        self.pending_reciprocation: dict[tuple[ReplicaId, ReplicaId], ViewNumber] = {}
        self.last_suspicion_view: ViewNumber = 0
        self.current_view: ViewNumber = 0
        # Independent-set candidate selection needs n-f independent vertices
        # at all times; the matching-based tree variant keeps every edge and
        # turns this off (its candidate sufficiency is structural).
        self.enforce_floor = enforce_floor
        self._version = 0
        self._cached_candidates: Optional[tuple[int, frozenset[ReplicaId]]] = None
        self._edge_listeners: list = []

    # -- vertex set ----------------------------------------------------------

    def vertices(self) -> set[ReplicaId]:
        return set(self.params.replica_set) - self.faulty - self.crash_set

    def in_graph(self, r: ReplicaId) -> bool:
        return r not in self.faulty and r not in self.crash_set and 0 <= r < self.params.n

    # -- log application -----------------------------------------------------

    def on_suspicion(self, s: Suspicion, view: ViewNumber) -> None:
        self.monitor_apply(s, view)

    def monitor_apply(self, s: Suspicion, current_view: ViewNumber) -> None:
        """Fold one committed suspicion into the graph at the given view."""
        if not self.in_graph(s.accuser) or not self.in_graph(s.accused):
            return
        self.last_suspicion_view = max(self.last_suspicion_view, current_view)
        self._add_edge(edge_of(s.accuser, s.accused))
        if s.kind == SLOW:
            key = (s.accuser, s.accused)
            self.pending_reciprocation.setdefault(
                key, current_view + self.params.f + 1
            )
        else:
            # False(accused -> accuser) answers Slow(accuser -> accused)
            self.pending_reciprocation.pop((s.accused, s.accuser), None)
        self._enforce_candidate_floor()

    def view_tick(self, current_view: ViewNumber) -> None:
        """Advance to a view: expire reciprocation deadlines, then purge."""
        self.current_view = current_view
        expired = [
            (accuser, accused)
            for (accuser, accused), deadline in self.pending_reciprocation.items()
            if current_view >= deadline
        ]
        for accuser, accused in expired:
            self.pending_reciprocation.pop((accuser, accused), None)
            self._crash(accused)
        if expired:
            self._enforce_candidate_floor()
        self.purge_old(current_view)

    def mark_faulty(self, replica: ReplicaId) -> None:
        """Drop a provably faulty replica from the graph."""
        if replica in self.faulty:
            return
        self.faulty.add(replica)
        self._drop_vertex(replica)
        self._enforce_candidate_floor()

    def purge_old(self, current_view: ViewNumber) -> None:
        """Stability-window purge: one oldest edge per fully quiet window,
        plus however many needed to keep an independent set of size n-f."""
        if (
            self.edge_order
            and current_view - self.last_suspicion_view >= self.params.window_w
        ):
            self._remove_edge(self.edge_order[0])
        self._enforce_candidate_floor()

    def drop_oldest_edge(self) -> bool:
        """Force out the single oldest edge (too-many-suspicions relief)."""
        if not self.edge_order:
            return False
        self._remove_edge(self.edge_order[0])
        return True

    # -- candidates ----------------------------------------------------------

    def base_candidates(self) -> tuple[set[ReplicaId], int]:
        """(candidate set, estimated misbehaving count u = |V| - |Cand|)."""
        cand = self._independent_set()
        return set(cand), len(self.vertices()) - len(cand)

    def _independent_set(self) -> frozenset[ReplicaId]:
        if self._cached_candidates is not None and self._cached_candidates[0] == self._version:
            return self._cached_candidates[1]
        result = frozenset(max_independent_set(self.vertices(), self.edges))
        self._cached_candidates = (self._version, result)
        return result

    def _enforce_candidate_floor(self) -> None:
        # Remove oldest edges until an independent set of size n-f exists.
        # |V| can fall below n-f only outside the fault model; the min() keeps
        # the loop terminating there too.
        if not self.enforce_floor:
            return
        target = min(self.params.q, len(self.vertices()))
        while self.edge_order and len(self._independent_set()) < target:
            self._remove_edge(self.edge_order[0])

    # -- internal graph mutation ----------------------------------------------

    def add_edge_listener(self, listener) -> None:
        """listener.edge_added(edge) / edge_removed(edge) / vertex_dropped(r)"""
        self._edge_listeners.append(listener)

    def _add_edge(self, e: Edge) -> None:
        if e in self.edges:
            return
        self.edges.add(e)
        self.edge_order.append(e)
        self._version += 1
        for lst in self._edge_listeners:
            lst.edge_added(e)

    def _remove_edge(self, e: Edge) -> None:
        if e not in self.edges:
            return
        self.edges.discard(e)
        self.edge_order.remove(e)
        self._version += 1
        for lst in self._edge_listeners:
            lst.edge_removed(e)

    def _crash(self, replica: ReplicaId) -> None:
        if replica in self.crash_set:
            return
        self.crash_set.add(replica)
        self._drop_vertex(replica)

    def _drop_vertex(self, replica: ReplicaId) -> None:
        for e in [e for e in self.edge_order if replica in e]:
            self.edges.discard(e)
            self.edge_order.remove(e)
        self.pending_reciprocation = {
            k: v for k, v in self.pending_reciprocation.items() if replica not in k
        }
        self._version += 1
        for lst in self._edge_listeners:
            lst.vertex_dropped(replica)

    # -- snapshot --------------------------------------------------------------

    def snapshot(self) -> dict:
        return {
            "edges": [e for e in self.edge_order],
            "crash": set(self.crash_set),
            "faulty": set(self.faulty),
            "pending": {k: v for k, v in self.pending_reciprocation.items()},
            "last_view": self.last_suspicion_view,
        }


def base_candidates(state: SuspicionState) -> tuple[set[ReplicaId], int]:
    return state.base_candidates()
