"""Provable misbehavior: logged complaints and the resulting faulty set.

Evidence is modeled, not cryptographically verified: the simulator's
omniscient side computes a validity bit when it fabricates the evidence blob,
and every replica's verifier reads the same bit, giving a sound and
deterministic verdict. A valid complaint convicts the accused; an invalid
complaint is itself provable misbehavior and convicts the accuser.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import MalformedPayload, ReplicaId, register_payload

EQUIVOCATION = "equivocation"
INVALID_AGGREGATE = "invalid_aggregate"
INVALID_VOTE = "invalid_vote"
INVALID_PROPOSAL = "invalid_proposal"
INVALID_COMPLAINT = "invalid_complaint"

KINDS = (
    EQUIVOCATION,
    INVALID_AGGREGATE,
    INVALID_VOTE,
    INVALID_PROPOSAL,
    INVALID_COMPLAINT,
)


@dataclass(frozen=True)
class Complaint:
    accuser: ReplicaId
    accused: ReplicaId
    kind: str
    evidence_valid: bool  # stands in for checking the evidence blob

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise MalformedPayload(f"unknown complaint kind {self.kind!r}")

    @property
    def author(self) -> ReplicaId:
        return self.accuser


register_payload(
    Complaint,
    "complaint",
    encode=lambda c: {
        "accused": c.accused,
        "kind": c.kind,
        "evidence_valid": c.evidence_valid,
    },
    decode=lambda author, body: Complaint(
        accuser=author,
        accused=int(body["accused"]),
        kind=body["kind"],
        evidence_valid=bool(body["evidence_valid"]),
    ),
)


def verify_complaint(c: Complaint, faulty: set[ReplicaId]) -> tuple[bool, set[ReplicaId]]:
    """Returns (evidence held up, updated faulty set).

    Invalid evidence convicts the accuser: filing a bogus complaint is on the
    listed misbehavior menu itself.
    """
    updated = set(faulty)
    if c.evidence_valid:
        updated.add(c.accused)
    else:
        updated.add(c.accuser)
    return c.evidence_valid, updated


@dataclass(frozen=True)
class AggregateVote:
    """What an intermediate node sends up: its subtree's votes plus
    suspicions covering any child that did not vote."""

    author: ReplicaId
    votes: int  # includes the intermediate's own vote
    suspicions: int

    @property
    def items(self) -> int:
        return self.votes + self.suspicions


def check_aggregate(
    agg: AggregateVote, branch_factor: int, observer: ReplicaId = 0
) -> Optional[Complaint]:
    """An aggregate must carry branch_factor + 1 votes or suspicions (own vote
    plus one item per child); anything shorter is proof of misbehavior."""
    if agg.items >= branch_factor + 1:
        return None
    return Complaint(
        accuser=observer,
        accused=agg.author,
        kind=INVALID_AGGREGATE,
        evidence_valid=True,
    )


class MisbehaviorMonitor:
    """Log-driven view of the provably faulty set."""

    def __init__(self, suspicion_state=None):
        self.faulty: set[ReplicaId] = set()
        self.seen: set[tuple[ReplicaId, ReplicaId, str]] = set()
        self._suspicion_state = suspicion_state

    def on_complaint(self, c: Complaint) -> None:
        key = (c.accuser, c.accused, c.kind)
        if key in self.seen:
            return  # complaints count at most once per (accuser, accused, kind)
        self.seen.add(key)
        _, self.faulty = verify_complaint(c, self.faulty)
        if self._suspicion_state is not None:
            for r in self.faulty:
                self._suspicion_state.mark_faulty(r)

    def snapshot(self) -> dict:
        return {"faulty": set(self.faulty), "seen": set(self.seen)}
