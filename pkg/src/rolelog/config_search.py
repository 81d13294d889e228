"""Configuration search and selection.

Each replica's sensor side runs seeded simulated annealing over role
assignments, swapping pairs of positions while keeping every special role
(leader, root, intermediate) on a candidate replica, and logs its best find.
The monitor side is deterministic: it re-scores each proposal from the shared
measurement basis, waits for proposals from f+1 distinct authors, and then
either installs the best one (current configuration invalid) or keeps the
incumbent unless the challenger is better by the improvement ratio.

The bin-rotation baseline partitions the replicas into disjoint internal-node
bins; each tree consumes one bin, and when the bins run out the caller falls
back to a star.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Optional, Union

from .core import (
    INFINITE,
    MalformedPayload,
    ReplicaId,
    SystemParams,
    canonical_bytes,
    is_infinite,
    register_payload,
)
from .star import StarConfig
from .tree import TreeConfig, build_tree

Configuration = Union[TreeConfig, StarConfig]


class InsufficientCandidates(ValueError):
    pass


def special_count(config: Configuration) -> int:
    if isinstance(config, StarConfig):
        return 1
    return 1 + len(config.intermediates)


def flatten(config: Configuration) -> list[ReplicaId]:
    """Positions in special-first order: leader/root, intermediates, leaves."""
    if isinstance(config, StarConfig):
        return [config.leader] + [r for r in config.members if r != config.leader]
    out = [config.root, *config.intermediates]
    for i in config.intermediates:
        out.extend(config.children.get(i, ()))
    return out


def unflatten(positions: list[ReplicaId], template: Configuration) -> Configuration:
    if isinstance(template, StarConfig):
        return StarConfig(leader=positions[0], n=template.n)
    return build_tree(positions)


def config_id(config: Configuration) -> str:
    import hashlib

    blob = canonical_bytes(
        tuple(flatten(config)) + (("star",) if isinstance(config, StarConfig) else ("tree",))
    )
    return hashlib.sha256(blob).hexdigest()[:12]


def is_valid(config: Configuration, candidates: set[ReplicaId]) -> bool:
    """Valid means every special role is held by a candidate."""
    specials = flatten(config)[: special_count(config)]
    return all(r in candidates for r in specials)


def mutate(
    config: Configuration, candidates: set[ReplicaId], rng: random.Random
) -> Configuration:
    """Swap two positions; special positions only ever receive candidates."""
    positions = flatten(config)
    n_special = special_count(config)
    if len(candidates) < n_special:
        raise InsufficientCandidates(
            f"{len(candidates)} candidates for {n_special} special roles"
        )
    n = len(positions)
    for _ in range(64 * n):
        i = rng.randrange(n)
        j = rng.randrange(n)
        if i == j:
            continue
        ri, rj = positions[i], positions[j]
        if i < n_special and rj not in candidates:
            continue
        if j < n_special and ri not in candidates:
            continue
        positions[i], positions[j] = rj, ri
        return unflatten(positions, config)
    raise InsufficientCandidates("no valid swap found")


def random_valid_config(
    topology: str,
    n: int,
    candidates: set[ReplicaId],
    rng: random.Random,
) -> Configuration:
    n_special = 1 if topology == "star" else None
    pool = sorted(candidates)
    others = [r for r in range(n) if r not in candidates]
    if topology == "star":
        if not pool:
            raise InsufficientCandidates("no candidates for the leader role")
        leader = pool[rng.randrange(len(pool))]
        return StarConfig(leader=leader, n=n)
    template = build_tree(list(range(n)))
    n_special = 1 + len(template.intermediates)
    if len(pool) < n_special:
        raise InsufficientCandidates(
            f"{len(pool)} candidates for {n_special} special roles"
        )
    specials = rng.sample(pool, n_special)
    rest = [r for r in range(n) if r not in specials]
    rng.shuffle(rest)
    return build_tree(specials + rest)


@dataclass
class AnnealingParams:
    cooling_rate: float = 0.995
    initial_temperature: Optional[float] = None  # default: initial score
    convergence_ratio: float = 1e-3  # threshold = ratio * initial temperature
    max_iterations: Optional[int] = 4000
    time_budget_s: Optional[float] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.cooling_rate < 1.0:
            raise ValueError("cooling_rate must be in (0, 1)")
        if self.max_iterations is None and self.time_budget_s is None:
            raise ValueError("need an iteration cap or a time budget")
        if self.max_iterations is not None and self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.time_budget_s is not None and self.time_budget_s <= 0:
            raise ValueError("time_budget_s must be positive")


def sa_search(
    score_fn: Callable[[Configuration], int],
    candidates: set[ReplicaId],
    params: SystemParams,
    topology: str,
    annealing: AnnealingParams,
) -> tuple[Configuration, int]:
    """Simulated annealing from a seeded random valid configuration.

    Worse neighbours are accepted with probability exp(-delta/T); the best
    configuration seen is tracked separately and returned. Stops when the
    temperature passes the convergence threshold or the budget runs out.
    """
    rng = random.Random(annealing.seed)
    current = random_valid_config(topology, params.n, candidates, rng)
    current_score = score_fn(current)
    best, best_score = current, current_score

    initial_t = annealing.initial_temperature
    if initial_t is None:
        initial_t = float(current_score) if 0 < current_score < INFINITE else 1.0
    threshold = annealing.convergence_ratio * initial_t
    temperature = initial_t

    deadline = (
        time.monotonic() + annealing.time_budget_s
        if annealing.time_budget_s is not None
        else None
    )
    iterations = 0
    while temperature >= threshold:
        if annealing.max_iterations is not None and iterations >= annealing.max_iterations:
            break
        if deadline is not None and time.monotonic() >= deadline:
            break
        neighbour = mutate(current, candidates, rng)
        neighbour_score = score_fn(neighbour)
        delta = neighbour_score - current_score
        if delta <= 0 or (
            not is_infinite(neighbour_score)
            and temperature > 0
            and rng.random() < math.exp(-delta / temperature)
        ):
            current, current_score = neighbour, neighbour_score
            if (current_score, flatten(current)) < (best_score, flatten(best)):
                best, best_score = current, current_score
        temperature *= annealing.cooling_rate
        iterations += 1
    return best, best_score


@dataclass(frozen=True)
class ConfigProposal:
    author: ReplicaId
    config: Configuration
    claimed_score: int
    basis_generation: tuple[int, int]  # (latency matrix generation, candidate version)


register_payload(
    ConfigProposal,
    "config_proposal",
    encode=lambda p: {
        "topology": "star" if isinstance(p.config, StarConfig) else "tree",
        "config": p.config.to_json_dict(),
        "claimed_score": p.claimed_score,
        "basis_generation": list(p.basis_generation),
    },
    decode=lambda author, body: ConfigProposal(
        author=author,
        config=(
            StarConfig.from_json_dict(body["config"])
            if body["topology"] == "star"
            else TreeConfig.from_json_dict(body["config"])
        ),
        claimed_score=int(body["claimed_score"]),
        basis_generation=tuple(body["basis_generation"]),
    ),
)


@dataclass(frozen=True)
class Decision:
    reconfigure: bool
    target: Optional[Configuration] = None
    target_score: Optional[int] = None


class ConfigMonitor:
    """Deterministic proposal selection over the shared log.

    The monitor's basis (score function and its generation stamp) is pinned by
    the caller before proposals arrive; proposals scored against any other
    basis, mis-scored proposals, and configurations with non-candidate special
    roles are all rejected.
    """

    def __init__(self, params: SystemParams, improvement_ratio: float = 0.9):
        self.params = params
        self.improvement_ratio = improvement_ratio
        self.score_fn: Optional[Callable[[Configuration], int]] = None
        self.candidates: set[ReplicaId] = set()
        self.basis_generation: tuple[int, int] = (0, 0)
        self.pending: dict[ReplicaId, ConfigProposal] = {}
        self.rejected: list[tuple[ReplicaId, str]] = []
        self.current: Optional[Configuration] = None
        self.current_score: Optional[int] = None

    def set_basis(
        self,
        score_fn: Callable[[Configuration], int],
        candidates: set[ReplicaId],
        basis_generation: tuple[int, int],
    ) -> None:
        self.score_fn = score_fn
        self.candidates = set(candidates)
        self.basis_generation = basis_generation
        self.pending.clear()

    def on_proposal(self, proposal: ConfigProposal) -> None:
        if self.score_fn is None:
            raise MalformedPayload("no scoring basis installed")
        if proposal.basis_generation != self.basis_generation:
            self.rejected.append((proposal.author, "stale_basis"))
            return
        if not is_valid(proposal.config, self.candidates):
            self.rejected.append((proposal.author, "invalid_roles"))
            return
        recomputed = self.score_fn(proposal.config)
        if recomputed != proposal.claimed_score:
            # complaint-worthy: the author lied about a recomputable value
            self.rejected.append((proposal.author, "score_mismatch"))
            return
        self.pending[proposal.author] = proposal

    def step(self, current_valid: bool) -> Decision:
        """Apply the f+1 rule against the accumulated proposals."""
        if len(self.pending) < self.params.f + 1:
            return Decision(reconfigure=False)
        best = min(
            self.pending.values(), key=lambda p: (p.claimed_score, p.author)
        )
        if not current_valid or self.current_score is None:
            return self._adopt(best)
        if best.claimed_score < self.improvement_ratio * self.current_score:
            return self._adopt(best)
        return Decision(reconfigure=False)

    def _adopt(self, proposal: ConfigProposal) -> Decision:
        self.current = proposal.config
        self.current_score = proposal.claimed_score
        self.pending.clear()
        return Decision(
            reconfigure=True, target=proposal.config, target_score=proposal.claimed_score
        )

    def snapshot(self) -> dict:
        return {
            "basis": tuple(self.basis_generation),
            "pending": {a: p.claimed_score for a, p in self.pending.items()},
            "current_score": self.current_score,
            "rejected": list(self.rejected),
        }


def config_monitor_step(
    monitor: ConfigMonitor, proposal: ConfigProposal, current_valid: bool
) -> Decision:
    monitor.on_proposal(proposal)
    return monitor.step(current_valid)


def kauri_bins(
    params: SystemParams, internal_count: int, rng: random.Random
) -> list[TreeConfig]:
    """Disjoint-bin tree sequence: bin i supplies tree i's internal nodes.

    With fewer faults than bins, at least one tree gets all-correct internals.
    When n is not a multiple of the bin size, the last bin is padded from the
    leaf pool. After the last tree the caller reverts to a star topology.
    """
    n, m = params.n, internal_count
    order = list(range(n))
    rng.shuffle(order)
    bin_count = n // m  # leftovers from a non-divisible n stay leaves
    trees = []
    for i in range(bin_count):
        internals = order[i * m : (i + 1) * m]
        leaves = [r for r in order if r not in internals]
        root, intermediates = internals[0], internals[1:]
        children: dict[ReplicaId, tuple[ReplicaId, ...]] = {}
        base, extra = divmod(len(leaves), len(intermediates))
        pos = 0
        for rank, inter in enumerate(intermediates):
            take = base + (1 if rank < extra else 0)
            children[inter] = tuple(leaves[pos : pos + take])
            pos += take
        trees.append(
            TreeConfig(root=root, intermediates=tuple(intermediates), children=children)
        )
    return trees
