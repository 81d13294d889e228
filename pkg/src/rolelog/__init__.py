"""Measurement-log driven role assignment for Byzantine consensus.

A library plus CLI that keeps a replicated system in a low-latency role
assignment despite faulty replicas: latency matrices built from logged
vectors, timing-based suspicions with reciprocation and filtering, a
candidate pool carved out of the suspicion graph, provable-misbehavior
tracking, simulated-annealing configuration search, and a deterministic
discrete-event simulator to exercise the whole loop against adversaries.
"""

from .core import INFINITE, MS, SharedLog, SystemParams, replay
from .latency import LatencyMatrix, LatencyVector, build_latency_vector
from .misbehavior import AggregateVote, Complaint, check_aggregate, verify_complaint
from .star import StarConfig, pbft_score, pbft_timeouts
from .suspicion import Suspicion, SuspicionState, TimeoutTable, check_round, filter_suspicions
from .tree import TreeConfig, branch_factor, build_tree, tree_score, tree_timeouts
from .tree_candidates import TreeSuspicionState

__all__ = [
    "INFINITE",
    "MS",
    "SharedLog",
    "SystemParams",
    "replay",
    "LatencyMatrix",
    "LatencyVector",
    "build_latency_vector",
    "AggregateVote",
    "Complaint",
    "check_aggregate",
    "verify_complaint",
    "StarConfig",
    "pbft_score",
    "pbft_timeouts",
    "Suspicion",
    "SuspicionState",
    "TimeoutTable",
    "check_round",
    "filter_suspicions",
    "TreeConfig",
    "branch_factor",
    "build_tree",
    "tree_score",
    "tree_timeouts",
    "TreeSuspicionState",
]

__version__ = "0.1.0"
