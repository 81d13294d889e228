"""Round-duration and per-message timeouts for the three-phase all-to-all
pattern (propose, write, accept) under a fixed leader.

Every deadline is measured from the leader's proposal timestamp and
decomposes as an earlier message's deadline plus one recorded link latency:
writes follow the propose that enabled them, accepts follow the completing
write of the fastest write quorum, and the round ends with the completing
accept of the fastest accept quorum at the leader. A replica's own message is
available to it at creation time.

The score used to rank leader choices is the same computation with every
quorum widened by u, the current estimate of misbehaving replicas: if u
members contribute nothing, the q-th usable arrival is the (q+u)-th overall.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import INFINITE, ReplicaId, SystemParams, is_infinite, sat_add
from .suspicion import TimeoutTable

MSG_PROPOSE = "propose"
MSG_WRITE = "write"
MSG_ACCEPT = "accept"

STAR_CAUSAL_ORDER = {
    "proposal_interval": 0,
    MSG_PROPOSE: 1,
    MSG_WRITE: 2,
    MSG_ACCEPT: 3,
}


@dataclass(frozen=True)
class StarConfig:
    leader: ReplicaId
    n: int

    def __post_init__(self) -> None:
        if not 0 <= self.leader < self.n:
            raise ValueError("leader outside replica set")

    @property
    def members(self) -> tuple[ReplicaId, ...]:
        return tuple(range(self.n))

    def to_json_dict(self) -> dict:
        return {"leader": self.leader, "n": self.n}

    @classmethod
    def from_json_dict(cls, d: dict) -> "StarConfig":
        return cls(leader=d["leader"], n=d["n"])


def _quorum_completion(
    arrivals: list[tuple[int, tuple | None]], size: int
) -> tuple[int, tuple | None]:
    """(time the quorum completes, key of its completing message).

    arrivals: (deadline, derivation key) per potential contributor; the
    fastest `size` of them form the quorum, so completion is the size-th
    smallest deadline.
    """
    if size > len(arrivals):
        return INFINITE, None
    ordered = sorted(arrivals, key=lambda t: (t[0], t[1] or ()))
    return ordered[size - 1]


def pbft_timeouts(
    cfg: StarConfig, lat, params: SystemParams, u: int = 0
) -> TimeoutTable:
    """Timeout table for the star pattern; u widens every quorum (see score)."""
    n, leader = cfg.n, cfg.leader
    quorum = params.q + u
    d: dict[tuple[str, ReplicaId, ReplicaId], int] = {}
    derivation: dict = {}

    # propose: leader to everyone; its own copy exists at time 0
    propose_at: dict[ReplicaId, int] = {}
    for a in range(n):
        propose_at[a] = 0 if a == leader else lat[leader][a]
        if a != leader:
            key = (MSG_PROPOSE, a, leader)
            d[key] = propose_at[a]
            derivation[key] = (None, lat[leader][a])

    # write: sent on receiving the propose; own write counts at creation
    write_created = dict(propose_at)
    for a in range(n):
        for b in range(n):
            if b == a:
                continue
            key = (MSG_WRITE, b, a)
            d[key] = sat_add(write_created[a], lat[a][b])
            derivation[key] = (
                (MSG_PROPOSE, a, leader) if a != leader else None,
                lat[a][b],
            )

    # accept: sent once a quorum of writes has reached the sender
    accept_created: dict[ReplicaId, int] = {}
    accept_basis: dict[ReplicaId, tuple | None] = {}
    for a in range(n):
        arrivals = [(write_created[a], None if a == leader else (MSG_PROPOSE, a, leader))]
        for c in range(n):
            if c != a:
                arrivals.append((d[(MSG_WRITE, a, c)], (MSG_WRITE, a, c)))
        accept_created[a], accept_basis[a] = _quorum_completion(arrivals, quorum)
    for a in range(n):
        for b in range(n):
            if b == a:
                continue
            key = (MSG_ACCEPT, b, a)
            d[key] = sat_add(accept_created[a], lat[a][b])
            derivation[key] = (accept_basis[a], lat[a][b])

    # round ends when the leader holds a quorum of accepts (its own included)
    arrivals = [(accept_created[leader], accept_basis[leader])]
    for c in range(n):
        if c != leader:
            arrivals.append((d[(MSG_ACCEPT, leader, c)], (MSG_ACCEPT, leader, c)))
    round_duration, round_basis = _quorum_completion(arrivals, quorum)
    derivation[("round", leader, leader)] = (round_basis, 0)

    return TimeoutTable(d=d, round_duration=round_duration, derivation=derivation)


def pbft_score(cfg: StarConfig, lat, params: SystemParams, u: int = 0) -> int:
    """Predicted round duration with u presumed-silent replicas."""
    if u > params.f:
        raise ValueError(f"u={u} exceeds f={params.f}")
    return pbft_timeouts(cfg, lat, params, u=u).round_duration
