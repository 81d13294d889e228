"""Deterministic discrete-event simulation of consensus rounds over a WAN.

The world holds the actual link latencies; every delivered message draws a
seeded per-message jitter multiplier in [1, delta] (wider before the
stabilization time), so honest runs stay inside the slack the timeout tables
allow for. Adversaries can crash, stretch their own links, sit on proposals,
or inject suspicions into the log; they can never touch traffic between
correct replicas.

One experiment is a loop of rounds: run the message pattern, let every
correct replica check what it saw against the timeout table, filter and log
the resulting suspicions, reciprocate yesterday's accusations, advance the
view, and reconfigure through the proposal/selection pipeline whenever the
current configuration fails or loses a special-role holder from the
candidate set. Everything is a pure function of the scenario and its seed.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field
from typing import Optional, Union

from .config_search import (
    AnnealingParams,
    ConfigMonitor,
    ConfigProposal,
    Configuration,
    config_id,
    is_valid,
    sa_search,
)
from .core import (
    INFINITE,
    MonitorSet,
    ReplicaId,
    SharedLog,
    SystemParams,
    is_infinite,
    sat_scale,
)
from .latency import LatencyMatrix, build_latency_vector
from .misbehavior import MisbehaviorMonitor
from .star import MSG_ACCEPT, MSG_PROPOSE, MSG_WRITE, STAR_CAUSAL_ORDER, StarConfig, pbft_score, pbft_timeouts
from .suspicion import (
    FALSE,
    PROPOSAL_INTERVAL,
    SLOW,
    RoundObservations,
    Suspicion,
    SuspicionState,
    TimeoutTable,
    check_round,
    filter_suspicions,
    reciprocate,
)
from .tree import (
    MSG_AGG_VOTE,
    MSG_FWD_PROPOSE,
    MSG_VOTE,
    TREE_CAUSAL_ORDER,
    TreeConfig,
    build_tree,
    tree_score,
    tree_timeouts,
)
from .tree_candidates import TreeSuspicionState

_TAG_INDEX = {
    MSG_PROPOSE: 0,
    MSG_FWD_PROPOSE: 1,
    MSG_WRITE: 1,
    MSG_VOTE: 2,
    MSG_ACCEPT: 2,
    MSG_AGG_VOTE: 3,
    "deadline": 9,
}


def _mix(*parts: int) -> int:
    """Stable 64-bit hash of integer tuples (splitmix-style)."""
    acc = 0x9E3779B97F4A7C15
    for p in parts:
        acc ^= (p & 0xFFFFFFFFFFFFFFFF) + 0x9E3779B97F4A7C15 + ((acc << 6) & 0xFFFFFFFFFFFFFFFF) + (acc >> 2)
        acc &= 0xFFFFFFFFFFFFFFFF
        acc ^= acc >> 30
        acc = (acc * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
        acc ^= acc >> 27
        acc = (acc * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        acc ^= acc >> 31
    return acc


def synth_latency_matrix(city_count: int, seed: int) -> list[list[int]]:
    """Cities uniform on a sphere; latency = 1 ms + great-circle share of
    249 ms, so antipodal pairs sit near 250 ms. Symmetric, zero diagonal."""
    rng = random.Random(_mix(seed, 0xC17135))
    points = []
    for _ in range(city_count):
        z = rng.uniform(-1.0, 1.0)
        phi = rng.uniform(0.0, 2.0 * math.pi)
        s = math.sqrt(max(0.0, 1.0 - z * z))
        points.append((s * math.cos(phi), s * math.sin(phi), z))
    lat = [[0] * city_count for _ in range(city_count)]
    for a in range(city_count):
        for b in range(a + 1, city_count):
            dot = sum(points[a][i] * points[b][i] for i in range(3))
            angle = math.acos(max(-1.0, min(1.0, dot)))
            us = 1000 + int(round(angle / math.pi * 249_000))
            lat[a][b] = lat[b][a] = us
    return lat


# --- adversaries -------------------------------------------------------------

CRASH = "crash"
DELAY_ATTACK = "delay_attack"
PROPOSAL_DELAY = "proposal_delay"
TARGETED_SUSPICION = "targeted_suspicion"
FALSE_SUSPICION_FLOOD = "false_suspicion_flood"

ADVERSARY_KINDS = (
    CRASH,
    DELAY_ATTACK,
    PROPOSAL_DELAY,
    TARGETED_SUSPICION,
    FALSE_SUSPICION_FLOOD,
)


@dataclass(frozen=True)
class AdversarySpec:
    kind: str
    members: tuple[ReplicaId, ...]
    at_round: int = 0  # activation round (crash round for CRASH)
    factor: float = 1.0  # latency multiplier for DELAY_ATTACK
    targets: tuple[str, ...] = ()  # message types hit by DELAY_ATTACK; () = all
    extra_us: int = 0  # timestamp delay for PROPOSAL_DELAY
    per_round: int = 1  # injected suspicions per round for floods


@dataclass
class WorldModel:
    actual_lat: list[list[int]]
    delta: float
    seed: int
    gst_us: int = 0
    pre_gst_factor: float = 1.0  # jitter bound before GST (may exceed delta)

    @property
    def n(self) -> int:
        return len(self.actual_lat)

    def jitter(self, *key: int) -> float:
        hi = self.delta
        return 1.0 + (_mix(self.seed, *key) / 2**64) * (hi - 1.0)

    def delivery_us(
        self, sender: int, receiver: int, send_time: int, round_no: int, tag: str
    ) -> int:
        base = self.actual_lat[sender][receiver]
        hi = self.delta if send_time >= self.gst_us else max(self.pre_gst_factor, 1.0)
        j = 1.0 + (_mix(self.seed, round_no, sender, receiver, _TAG_INDEX[tag]) / 2**64) * (hi - 1.0)
        return int(base * j)

    def probe_rtt(self, a: int, b: int, epoch: int) -> int:
        base = self.actual_lat[a][b]
        j = 1.0 + (_mix(self.seed, 0x9B0BE, epoch, a, b) / 2**64) * (self.delta - 1.0)
        return int(base * j)


@dataclass
class RoundTrace:
    round: int
    reference: int  # time the round's checks are measured from
    proposal_timestamp: Optional[int]
    arrivals: dict[tuple[str, ReplicaId, ReplicaId], int] = field(default_factory=dict)
    fwd_sent: dict[tuple[ReplicaId, ReplicaId], int] = field(default_factory=dict)
    embedded_suspicions: list[Suspicion] = field(default_factory=list)
    committed: bool = False
    commit_time: Optional[int] = None
    votes_total: int = 0  # tree: votes the root could count by the deadline
    suspicions_raised: list[Suspicion] = field(default_factory=list)


class _Adversaries:
    """Resolved per-replica adversary behavior."""

    def __init__(self, specs: list[AdversarySpec], params: SystemParams):
        members = set()
        for spec in specs:
            if spec.kind not in ADVERSARY_KINDS:
                raise ValueError(f"unknown adversary kind {spec.kind!r}")
            members.update(spec.members)
        if len(members) > params.f:
            raise ValueError(
                f"{len(members)} adversarial members exceed f={params.f}"
            )
        self.specs = specs
        self.members = members

    def crashed(self, r: ReplicaId, round_no: int) -> bool:
        return any(
            s.kind == CRASH and r in s.members and round_no >= s.at_round
            for s in self.specs
        )

    def is_faulty(self, r: ReplicaId) -> bool:
        return r in self.members

    def send_delay_factor(self, r: ReplicaId, tag: str, round_no: int) -> float:
        factor = 1.0
        for s in self.specs:
            if (
                s.kind == DELAY_ATTACK
                and r in s.members
                and round_no >= s.at_round
                and (not s.targets or tag in s.targets)
            ):
                factor = max(factor, s.factor)
        return factor

    def proposal_extra_us(self, r: ReplicaId, round_no: int) -> int:
        return sum(
            s.extra_us
            for s in self.specs
            if s.kind == PROPOSAL_DELAY and r in s.members and round_no >= s.at_round
        )

    def reciprocates(self, r: ReplicaId, round_no: int) -> bool:
        # non-crashed misbehavers answer accusations to stay in the graph
        return not self.crashed(r, round_no)


def run_round(
    world: WorldModel,
    config: Configuration,
    timeouts: TimeoutTable,
    adversaries: _Adversaries,
    round_no: int,
    now: int,
    quorum: Optional[int] = None,
) -> RoundTrace:
    n = config.n if isinstance(config, StarConfig) else config.size
    q = quorum if quorum is not None else n - (n - 1) // 3
    if isinstance(config, StarConfig):
        return _run_star_round(world, config, timeouts, adversaries, round_no, now, q)
    return _run_tree_round(world, config, timeouts, adversaries, round_no, now, q)


class _EventQueue:
    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0

    def push(self, time_us: int, tag: str, sender: int, receiver: int, info=None) -> None:
        heapq.heappush(
            self._heap, (time_us, _TAG_INDEX[tag], sender, receiver, self._seq, tag, info)
        )
        self._seq += 1

    def pop(self):
        time_us, _, sender, receiver, _, tag, info = heapq.heappop(self._heap)
        return time_us, tag, sender, receiver, info

    def __bool__(self) -> bool:
        return bool(self._heap)


def _run_star_round(
    world: WorldModel,
    config: StarConfig,
    timeouts: TimeoutTable,
    adversaries: _Adversaries,
    round_no: int,
    now: int,
    q: int,
) -> RoundTrace:
    n, leader = config.n, config.leader
    trace = RoundTrace(round=round_no, reference=now, proposal_timestamp=None)

    if adversaries.crashed(leader, round_no):
        return trace

    t0 = now + adversaries.proposal_extra_us(leader, round_no)
    trace.proposal_timestamp = t0
    trace.reference = t0

    queue = _EventQueue()
    write_arrivals: dict[int, int] = {r: 0 for r in range(n)}
    accept_arrivals_at_leader = 0
    wrote: set[int] = set()
    accepted: set[int] = set()

    def send(tag: str, sender: int, receiver: int, at: int) -> None:
        if adversaries.crashed(sender, round_no):
            return
        latency = world.delivery_us(sender, receiver, at, round_no, tag)
        latency = int(latency * adversaries.send_delay_factor(sender, tag, round_no))
        queue.push(at + latency, tag, sender, receiver)

    def create_write(r: int, at: int) -> None:
        if r in wrote or adversaries.crashed(r, round_no):
            return
        wrote.add(r)
        note_write(r, r, at)
        for b in range(n):
            if b != r:
                send(MSG_WRITE, r, b, at)

    def note_write(recipient: int, sender: int, at: int) -> None:
        if sender != recipient:
            trace.arrivals[(MSG_WRITE, recipient, sender)] = at
        write_arrivals[recipient] += 1
        if write_arrivals[recipient] >= q:
            create_accept(recipient, at)

    def create_accept(r: int, at: int) -> None:
        if r in accepted or adversaries.crashed(r, round_no):
            return
        accepted.add(r)
        note_accept(r, r, at)
        for b in range(n):
            if b != r:
                send(MSG_ACCEPT, r, b, at)

    def note_accept(recipient: int, sender: int, at: int) -> None:
        nonlocal accept_arrivals_at_leader
        if sender != recipient:
            trace.arrivals[(MSG_ACCEPT, recipient, sender)] = at
        if recipient == leader:
            accept_arrivals_at_leader += 1
            if (
                accept_arrivals_at_leader >= q
                and not trace.committed
                and at <= t0 + sat_scale(timeouts.round_duration, world.delta)
            ):
                trace.committed = True
                trace.commit_time = at

    # leader proposes; its own write is created at the timestamp
    for b in range(n):
        if b != leader:
            send(MSG_PROPOSE, leader, b, t0)
    create_write(leader, t0)

    while queue:
        at, tag, sender, receiver, _ = queue.pop()
        if adversaries.crashed(receiver, round_no):
            continue
        if tag == MSG_PROPOSE:
            trace.arrivals[(MSG_PROPOSE, receiver, sender)] = at
            create_write(receiver, at)
        elif tag == MSG_WRITE:
            note_write(receiver, sender, at)
        elif tag == MSG_ACCEPT:
            note_accept(receiver, sender, at)
    return trace


def _run_tree_round(
    world: WorldModel,
    config: TreeConfig,
    timeouts: TimeoutTable,
    adversaries: _Adversaries,
    round_no: int,
    now: int,
    q: int,
) -> RoundTrace:
    root = config.root
    trace = RoundTrace(round=round_no, reference=now, proposal_timestamp=None)

    if adversaries.crashed(root, round_no):
        return trace

    t0 = now + adversaries.proposal_extra_us(root, round_no)
    trace.proposal_timestamp = t0
    trace.reference = t0
    delta = world.delta

    queue = _EventQueue()
    votes_at: dict[int, set[int]] = {i: set() for i in config.intermediates}
    deadline_done: dict[int, set[int]] = {i: set() for i in config.intermediates}
    agg_votes: dict[int, int] = {}  # votes inside i's aggregate, frozen at send
    root_votes = 1  # root's own vote
    commit_at: Optional[int] = None

    def send(tag: str, sender: int, receiver: int, at: int) -> None:
        if adversaries.crashed(sender, round_no):
            return
        latency = world.delivery_us(sender, receiver, at, round_no, tag)
        latency = int(latency * adversaries.send_delay_factor(sender, tag, round_no))
        queue.push(at + latency, tag, sender, receiver)

    def maybe_aggregate(i: int, at: int) -> None:
        if i in agg_votes or adversaries.crashed(i, round_no):
            return
        kids = config.children.get(i, ())
        if any(
            c not in votes_at[i] and c not in deadline_done[i] for c in kids
        ):
            return
        agg_votes[i] = 1 + len(votes_at[i])
        for c in kids:
            if c not in votes_at[i]:
                trace.embedded_suspicions.append(
                    Suspicion(
                        kind=SLOW,
                        accuser=i,
                        accused=c,
                        round=round_no,
                        message_type=MSG_VOTE,
                    )
                )
        send(MSG_AGG_VOTE, i, root, at)

    for i in config.intermediates:
        send(MSG_PROPOSE, root, i, t0)

    while queue:
        at, tag, sender, receiver, info = queue.pop()
        if tag != "deadline" and adversaries.crashed(receiver, round_no):
            continue
        if tag == MSG_PROPOSE:
            i = receiver
            trace.arrivals[(MSG_PROPOSE, i, sender)] = at
            for c in config.children.get(i, ()):
                trace.fwd_sent[(i, c)] = at
                send(MSG_FWD_PROPOSE, i, c, at)
                # stop waiting for c after the recorded round trip, stretched
                rtt = timeouts.d[(MSG_VOTE, i, c)] - timeouts.d[(MSG_PROPOSE, i, root)]
                queue.push(at + sat_scale(rtt, delta), "deadline", i, c)
            maybe_aggregate(i, at)  # childless intermediate answers right away
        elif tag == MSG_FWD_PROPOSE:
            leaf = receiver
            trace.arrivals[(MSG_FWD_PROPOSE, leaf, sender)] = at
            send(MSG_VOTE, leaf, sender, at)
        elif tag == MSG_VOTE:
            i = receiver
            if sender not in votes_at[i]:
                votes_at[i].add(sender)
                trace.arrivals[(MSG_VOTE, i, sender)] = at
            maybe_aggregate(i, at)
        elif tag == "deadline":
            i, c = sender, receiver
            deadline_done[i].add(c)
            maybe_aggregate(i, at)
        elif tag == MSG_AGG_VOTE:
            if receiver != root:
                continue
            i = sender
            if (MSG_AGG_VOTE, root, i) in trace.arrivals:
                continue
            trace.arrivals[(MSG_AGG_VOTE, root, i)] = at
            root_votes += agg_votes.get(i, 1)
            if root_votes >= q and commit_at is None:
                commit_at = at

    # votes are judged missing against each aggregate's own deadline: an
    # aggregate slower than the quorum path is fine as long as it meets
    # delta * d(agg); votes replaced by embedded suspicions stay missing
    missing = 0
    for i in config.intermediates:
        own_deadline = t0 + sat_scale(timeouts.d[(MSG_AGG_VOTE, root, i)], delta)
        arrived = trace.arrivals.get((MSG_AGG_VOTE, root, i))
        if arrived is None or arrived > own_deadline:
            missing += 1 + len(config.children.get(i, ()))
        else:
            missing += (1 + len(config.children.get(i, ()))) - agg_votes.get(i, 1)
    trace.votes_total = (1 + len(config.intermediates) + sum(
        len(config.children.get(i, ())) for i in config.intermediates
    )) - missing

    deadline = t0 + sat_scale(timeouts.round_duration, delta)
    if commit_at is not None and commit_at <= deadline:
        trace.committed = True
        trace.commit_time = commit_at
    return trace


# --- protocol adapters --------------------------------------------------------


class StarProtocol:
    causal_order = STAR_CAUSAL_ORDER
    topology = "star"

    @staticmethod
    def timeouts(config: StarConfig, lat_rows, params: SystemParams, u: int) -> TimeoutTable:
        return pbft_timeouts(config, lat_rows, params, u=u)

    @staticmethod
    def score(config: StarConfig, lat_rows, params: SystemParams, u: int) -> int:
        return pbft_score(config, lat_rows, params, u=u)

    @staticmethod
    def leader(config: StarConfig) -> ReplicaId:
        return config.leader

    @staticmethod
    def expected_messages(
        config: StarConfig, observer: ReplicaId
    ) -> list[tuple[str, ReplicaId]]:
        keys = []
        if observer != config.leader:
            keys.append((MSG_PROPOSE, config.leader))
        for s in config.members:
            if s != observer:
                keys.append((MSG_WRITE, s))
                keys.append((MSG_ACCEPT, s))
        return keys


class TreeProtocol:
    """Timeout checks for trees skip forwarded proposals entirely, and leaf
    votes are policed by their parent inside the round (the aggregate embeds
    a suspicion per missing vote), so the table-driven checks cover only the
    proposal at intermediates and the aggregates at the root."""

    causal_order = TREE_CAUSAL_ORDER
    topology = "tree"

    @staticmethod
    def timeouts(config: TreeConfig, lat_rows, params: SystemParams, u: int) -> TimeoutTable:
        return tree_timeouts(config, lat_rows, k=params.q + u)

    @staticmethod
    def score(config: TreeConfig, lat_rows, params: SystemParams, u: int) -> int:
        return tree_score(config, lat_rows, k=params.q + u)

    @staticmethod
    def leader(config: TreeConfig) -> ReplicaId:
        return config.root

    @staticmethod
    def expected_messages(
        config: TreeConfig, observer: ReplicaId
    ) -> list[tuple[str, ReplicaId]]:
        if observer == config.root:
            return [(MSG_AGG_VOTE, i) for i in config.intermediates]
        if observer in config.intermediates:
            return [(MSG_PROPOSE, config.root)]
        return []  # leaves raise nothing on forwarded proposals


def protocol_for(config: Configuration):
    return StarProtocol if isinstance(config, StarConfig) else TreeProtocol


def build_observations(
    trace: RoundTrace,
    config: Configuration,
    observer: ReplicaId,
    prev_timestamp: Optional[int],
) -> RoundObservations:
    """One replica's round observations with offsets from the round reference."""
    proto = protocol_for(config)
    arrivals: dict[tuple[str, ReplicaId], Optional[int]] = {}
    for message_type, sender in proto.expected_messages(config, observer):
        absolute = trace.arrivals.get((message_type, observer, sender))
        arrivals[(message_type, sender)] = (
            None if absolute is None else absolute - trace.reference
        )
    return RoundObservations(
        round=trace.round,
        proposal_timestamp=(
            trace.proposal_timestamp
            if trace.proposal_timestamp is not None
            else trace.reference
        ),
        prev_proposal_timestamp=prev_timestamp,
        arrivals=arrivals,
    )


# --- scenario -----------------------------------------------------------------


@dataclass
class ScenarioSpec:
    params: SystemParams
    topology: str  # "tree" | "star"
    actual_lat: list[list[int]]
    adversaries: list[AdversarySpec]
    annealing: AnnealingParams
    rounds: int
    seed: int
    gst_us: int = 0
    pre_gst_factor: float = 1.0
    improvement_ratio: float = 0.9
    proposer_count: Optional[int] = None  # default f+1

    def world(self) -> WorldModel:
        return WorldModel(
            actual_lat=self.actual_lat,
            delta=self.params.delta,
            seed=self.seed,
            gst_us=self.gst_us,
            pre_gst_factor=self.pre_gst_factor,
        )


@dataclass
class ReconfigEvent:
    round: int
    cause: str  # invalid_config | tree_failure | quorum_timeout
    old_config: str
    new_config: str
    old_score: Optional[int]
    new_score: int


@dataclass
class RoundRecord:
    round: int
    view: int
    config: str
    score: int
    committed: bool
    commit_latency_us: Optional[int]
    suspicions_logged: int
    reconfigured: bool
    cause: str
    candidates: int
    u: int
    crash: int
    faulty: int


@dataclass
class ExperimentReport:
    scenario_seed: int
    rounds: list[RoundRecord]
    reconfigurations: list[ReconfigEvent]
    final_candidates: list[ReplicaId]
    final_u: int
    configs_seen: list[str]
    log: SharedLog
    final_config: Configuration
    initial_score: int

    def summary(self) -> dict:
        commits = [r for r in self.rounds if r.committed]
        mean_latency = (
            sum(r.commit_latency_us for r in commits) / len(commits) if commits else None
        )
        return {
            "seed": self.scenario_seed,
            "rounds": len(self.rounds),
            "commits": len(commits),
            "mean_commit_latency_us": mean_latency,
            "reconfigurations": [
                {
                    "round": e.round,
                    "cause": e.cause,
                    "old_config": e.old_config,
                    "new_config": e.new_config,
                    "old_score": e.old_score,
                    "new_score": e.new_score,
                }
                for e in self.reconfigurations
            ],
            "final_candidates": sorted(self.final_candidates),
            "final_u": self.final_u,
            "initial_score": self.initial_score,
        }


class _TargetedAttacker:
    """Raises one suspicion per round from a faulty replica against a correct
    internal node of the current configuration, mimicking an adversary that
    knows the latency matrix and targets the tree's backbone."""

    def __init__(self, spec: AdversarySpec, seed: int):
        self.members = sorted(spec.members)
        self.rng = random.Random(_mix(seed, 0x7A96E7))
        self.per_round = max(1, spec.per_round)
        self.at_round = spec.at_round

    def inject(
        self,
        round_no: int,
        config: Configuration,
        candidates: set[ReplicaId],
        crashed: set[ReplicaId],
        faulty_members: set[ReplicaId],
    ) -> list[Suspicion]:
        if round_no < self.at_round:
            return []
        internals = (
            [config.leader]
            if isinstance(config, StarConfig)
            else list(config.internals)
        )
        victims = [v for v in internals if v not in faulty_members and v not in crashed]
        accusers = [a for a in self.members if a not in crashed]
        if not victims or not accusers:
            return []
        preferred = [a for a in accusers if a in candidates]
        out = []
        for k in range(self.per_round):
            accuser_pool = preferred or accusers
            accuser = accuser_pool[self.rng.randrange(len(accuser_pool))]
            victim = victims[self.rng.randrange(len(victims))]
            if accuser == victim:
                continue
            out.append(
                Suspicion(
                    kind=SLOW,
                    accuser=accuser,
                    accused=victim,
                    round=round_no,
                    message_type=MSG_PROPOSE,
                )
            )
        return out


class _FloodAttacker:
    def __init__(self, spec: AdversarySpec, seed: int, n: int):
        self.members = sorted(spec.members)
        self.rng = random.Random(_mix(seed, 0xF100D))
        self.per_round = max(1, spec.per_round)
        self.at_round = spec.at_round
        self.n = n

    def inject(self, round_no: int, faulty_members: set[ReplicaId]) -> list[Suspicion]:
        if round_no < self.at_round:
            return []
        out = []
        for accuser in self.members:
            correct = [v for v in range(self.n) if v not in faulty_members]
            self.rng.shuffle(correct)
            for victim in correct[: self.per_round]:
                out.append(
                    Suspicion(
                        kind=FALSE,
                        accuser=accuser,
                        accused=victim,
                        round=round_no,
                        message_type=MSG_PROPOSE,
                    )
                )
        return out


def run_experiment(scenario: ScenarioSpec) -> ExperimentReport:
    params = scenario.params
    world = scenario.world()
    adversaries = _Adversaries(scenario.adversaries, params)
    log = SharedLog()

    latency_monitor = LatencyMatrix(params.n)
    suspicion_state = SuspicionState(params)
    tree_state = (
        TreeSuspicionState(suspicion_state) if scenario.topology == "tree" else None
    )
    misbehavior = MisbehaviorMonitor(suspicion_state)
    config_monitor = ConfigMonitor(params, improvement_ratio=scenario.improvement_ratio)
    monitors = MonitorSet(
        latency=latency_monitor,
        misbehavior=misbehavior,
        suspicion=suspicion_state,
        config=config_monitor,
    )

    # probe phase: every replica measures and logs a latency vector
    for author in range(params.n):
        rtts = {
            b: world.probe_rtt(author, b, epoch=0)
            for b in range(params.n)
            if b != author
        }
        vector = build_latency_vector(rtts, author, params.n)
        monitors.dispatch(log.append(vector, view=0))

    lat_rows = latency_monitor.as_rows()
    proto = TreeProtocol if scenario.topology == "tree" else StarProtocol
    proposer_count = scenario.proposer_count or (params.f + 1)
    cand_version = 0

    def current_candidates() -> tuple[set[ReplicaId], int]:
        if tree_state is not None:
            return tree_state.tree_candidates()
        return suspicion_state.base_candidates()

    def correct_replicas() -> list[ReplicaId]:
        return [r for r in range(params.n) if not adversaries.is_faulty(r)]

    def run_search_cycle(cycle: int, view: int) -> tuple[Configuration, int]:
        nonlocal cand_version
        candidates, u = current_candidates()
        # too-many-suspicions relief: shed oldest edges until the special
        # roles can be filled at all (pre-stabilization storms can transiently
        # tangle the graph beyond what the matching bound guarantees)
        needed = 1 if scenario.topology == "star" else 1 + len(
            build_tree(list(range(params.n))).intermediates
        )
        while len(candidates) < needed and suspicion_state.drop_oldest_edge():
            cand_version += 1
            candidates, u = current_candidates()
        basis = (latency_monitor.generation, cand_version)

        def score_fn(cfg: Configuration) -> int:
            return proto.score(cfg, lat_rows, params, u)

        config_monitor.set_basis(score_fn, candidates, basis)
        proposers = correct_replicas()[:proposer_count]
        for replica in proposers:
            annealing = AnnealingParams(
                cooling_rate=scenario.annealing.cooling_rate,
                initial_temperature=scenario.annealing.initial_temperature,
                convergence_ratio=scenario.annealing.convergence_ratio,
                max_iterations=scenario.annealing.max_iterations,
                time_budget_s=scenario.annealing.time_budget_s,
                seed=_mix(scenario.seed, replica, cycle, 0x5EA7C4),
            )
            best, best_score = sa_search(
                score_fn, candidates, params, scenario.topology, annealing
            )
            proposal = ConfigProposal(
                author=replica,
                config=best,
                claimed_score=best_score,
                basis_generation=basis,
            )
            monitors.dispatch(log.append(proposal, view=view))
        decision = config_monitor.step(current_valid=False)
        if not decision.reconfigure:
            raise RuntimeError("proposal pipeline failed to produce a configuration")
        return decision.target, decision.target_score

    config, config_score = run_search_cycle(cycle=0, view=0)

    targeted = [
        _TargetedAttacker(s, scenario.seed)
        for s in scenario.adversaries
        if s.kind == TARGETED_SUSPICION
    ]
    floods = [
        _FloodAttacker(s, scenario.seed, params.n)
        for s in scenario.adversaries
        if s.kind == FALSE_SUSPICION_FLOOD
    ]

    rounds: list[RoundRecord] = []
    reconfig_events: list[ReconfigEvent] = []
    configs_seen = [config_id(config)]
    initial_score = config_score
    now = 0
    prev_timestamp: Optional[int] = None
    leader_suspected_prev = False
    pending_reciprocation_queue: list[Suspicion] = []
    cycle = 0

    for round_no in range(scenario.rounds):
        view = round_no + 1
        candidates, u = current_candidates()
        timeouts = proto.timeouts(config, lat_rows, params, u)
        trace = run_round(
            world, config, timeouts, adversaries, round_no, now, quorum=params.q
        )

        # sensor side: reciprocations owed from the previous round, then this
        # round's filtered findings, then adversarial injections
        batch: list[Suspicion] = []
        batch.extend(
            sorted(
                pending_reciprocation_queue,
                key=lambda s: (s.accuser, s.accused, s.message_type),
            )
        )
        pending_reciprocation_queue = []

        leader = proto.leader(config)
        leader_suspected_now = False
        retained_all: list[Suspicion] = []
        for observer in correct_replicas():
            if adversaries.crashed(observer, round_no):
                continue
            obs = build_observations(trace, config, observer, prev_timestamp)
            raw = check_round(obs, timeouts, params.delta, observer, leader)
            raw.extend(
                s for s in trace.embedded_suspicions if s.accuser == observer
            )
            retained = filter_suspicions(raw, leader_suspected_prev, proto.causal_order)
            retained_all.extend(retained)
            if observer == leader and any(
                s.message_type != PROPOSAL_INTERVAL for s in retained
            ):
                leader_suspected_now = True
        retained_all.sort(key=lambda s: (s.accuser, s.accused, s.message_type))
        batch.extend(retained_all)

        for attacker in targeted:
            batch.extend(
                attacker.inject(
                    round_no,
                    config,
                    candidates,
                    suspicion_state.crash_set,
                    adversaries.members,
                )
            )
        for flood in floods:
            batch.extend(flood.inject(round_no, adversaries.members))

        for s in batch:
            monitors.dispatch(log.append(s, view=view))
            trace.suspicions_raised.append(s)
            # anyone still alive answers a Slow accusation; only the genuinely
            # crashed stay silent and age into the crash set
            if s.kind == SLOW and adversaries.reciprocates(s.accused, round_no):
                answer = reciprocate(suspicion_state, s, s.accused)
                if answer is not None:
                    pending_reciprocation_queue.append(answer)

        suspicion_state.view_tick(view)
        new_candidates, new_u = current_candidates()
        if (new_candidates, new_u) != (candidates, u):
            cand_version += 1

        # failure / validity assessment
        cause = ""
        if not is_valid(config, new_candidates):
            cause = "invalid_config"
        if scenario.topology == "tree":
            missing = params.n - trace.votes_total
            if not trace.committed or missing > u:
                cause = cause or "tree_failure"
        else:
            if not trace.committed:
                cause = cause or "quorum_timeout"

        reconfigured = False
        old_id = config_id(config)
        if cause:
            cycle += 1
            new_config, new_score = run_search_cycle(cycle=cycle, view=view)
            reconfig_events.append(
                ReconfigEvent(
                    round=round_no,
                    cause=cause,
                    old_config=old_id,
                    new_config=config_id(new_config),
                    old_score=config_score,
                    new_score=new_score,
                )
            )
            config, config_score = new_config, new_score
            if config_id(config) != old_id:
                configs_seen.append(config_id(config))
            reconfigured = True

        rounds.append(
            RoundRecord(
                round=round_no,
                view=view,
                config=old_id,
                score=config_score if not reconfigured else (reconfig_events[-1].old_score or 0),
                committed=trace.committed,
                commit_latency_us=(
                    trace.commit_time - trace.reference
                    if trace.commit_time is not None
                    else None
                ),
                suspicions_logged=len(trace.suspicions_raised),
                reconfigured=reconfigured,
                cause=cause,
                candidates=len(new_candidates),
                u=new_u,
                crash=len(suspicion_state.crash_set),
                faulty=len(suspicion_state.faulty),
            )
        )

        prev_timestamp = (
            trace.proposal_timestamp
            if trace.proposal_timestamp is not None
            else prev_timestamp
        )
        leader_suspected_prev = leader_suspected_now
        if trace.commit_time is not None:
            now = trace.commit_time
        else:
            now = trace.reference + sat_scale(timeouts.round_duration, params.delta)

    final_candidates, final_u = current_candidates()
    return ExperimentReport(
        scenario_seed=scenario.seed,
        rounds=rounds,
        reconfigurations=reconfig_events,
        final_candidates=sorted(final_candidates),
        final_u=final_u,
        configs_seen=configs_seen,
        log=log,
        final_config=config,
        initial_score=initial_score,
    )
