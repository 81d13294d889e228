"""Scenario files: the JSON front door to the simulator.

A scenario pins everything an experiment needs: system size and fault
threshold, topology, where the actual latency matrix comes from (a seeded
synthetic world or a CSV), the adversary cast, annealing settings, round
count and the master seed. Loading validates eagerly and reports the JSON
path of the offending field; reruns of the same file and seed are
byte-reproducible.
"""

from __future__ import annotations

import json
import os
from typing import Any

from .config_search import AnnealingParams
from .core import MS, SystemParams
from .latency import import_csv
from .simnet import ADVERSARY_KINDS, AdversarySpec, ScenarioSpec, synth_latency_matrix


class ScenarioError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.field_path = path


def _require(cond: bool, path: str, message: str) -> None:
    if not cond:
        raise ScenarioError(path, message)


def load_scenario(path: str, seed_override: int | None = None) -> ScenarioSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(
                f"{path}:{exc.lineno}:{exc.colno}", f"invalid JSON: {exc.msg}"
            ) from exc
    return parse_scenario(raw, base_dir=os.path.dirname(os.path.abspath(path)),
                          seed_override=seed_override)


def parse_scenario(
    raw: dict, base_dir: str = ".", seed_override: int | None = None
) -> ScenarioSpec:
    _require(isinstance(raw, dict), "$", "scenario must be a JSON object")
    for key in ("n", "f", "delta", "topology", "latency", "rounds", "seed"):
        _require(key in raw, f"$.{key}", "required field missing")

    n = _as_int(raw, "n")
    f = _as_int(raw, "f")
    delta = float(raw["delta"])
    window_w = _as_int(raw, "window_w") if "window_w" in raw else 50
    try:
        params = SystemParams(n=n, f=f, delta=delta, window_w=window_w)
    except ValueError as exc:
        raise ScenarioError("$.n", str(exc)) from exc

    topology = raw["topology"]
    _require(topology in ("tree", "star"), "$.topology", "must be 'tree' or 'star'")

    seed = seed_override if seed_override is not None else _as_int(raw, "seed")

    lat_spec = raw["latency"]
    _require(isinstance(lat_spec, dict), "$.latency", "must be an object")
    if "synthetic" in lat_spec:
        synth = lat_spec["synthetic"]
        lat_seed = synth.get("seed", seed)
        actual = synth_latency_matrix(n, lat_seed)
    elif "csv" in lat_spec:
        csv_path = lat_spec["csv"]
        if not os.path.isabs(csv_path):
            csv_path = os.path.join(base_dir, csv_path)
        actual = import_csv(csv_path)
        _require(
            len(actual) == n,
            "$.latency.csv",
            f"matrix is {len(actual)}x{len(actual)}, scenario has n={n}",
        )
    else:
        raise ScenarioError("$.latency", "need either 'synthetic' or 'csv'")

    adversaries = []
    for idx, entry in enumerate(raw.get("adversaries", [])):
        p = f"$.adversaries[{idx}]"
        _require(isinstance(entry, dict), p, "must be an object")
        kind = entry.get("kind")
        _require(kind in ADVERSARY_KINDS, f"{p}.kind", f"must be one of {ADVERSARY_KINDS}")
        members = entry.get("members", [])
        _require(
            isinstance(members, list) and members, f"{p}.members", "must be non-empty"
        )
        _require(
            all(isinstance(m, int) and 0 <= m < n for m in members),
            f"{p}.members",
            "members must be replica ids in range",
        )
        adversaries.append(
            AdversarySpec(
                kind=kind,
                members=tuple(sorted(members)),
                at_round=int(entry.get("at_round", 0)),
                factor=float(entry.get("factor", 1.0)),
                targets=tuple(entry.get("targets", ())),
                extra_us=int(entry.get("extra_ms", 0) * MS) or int(entry.get("extra_us", 0)),
                per_round=int(entry.get("per_round", 1)),
            )
        )
    all_members: set[int] = set()
    for a in adversaries:
        all_members.update(a.members)
    _require(
        len(all_members) <= f,
        "$.adversaries",
        f"{len(all_members)} distinct adversarial replicas exceed f={f}",
    )

    ann_raw = raw.get("annealing", {})
    try:
        annealing = AnnealingParams(
            cooling_rate=float(ann_raw.get("cooling_rate", 0.995)),
            initial_temperature=ann_raw.get("initial_temperature"),
            convergence_ratio=float(ann_raw.get("convergence_ratio", 1e-3)),
            max_iterations=ann_raw.get("max_iterations", 2000),
            time_budget_s=ann_raw.get("time_budget_s"),
            seed=0,
        )
    except ValueError as exc:
        raise ScenarioError("$.annealing", str(exc)) from exc

    rounds = _as_int(raw, "rounds")
    _require(rounds >= 0, "$.rounds", "must be >= 0")

    return ScenarioSpec(
        params=params,
        topology=topology,
        actual_lat=actual,
        adversaries=adversaries,
        annealing=annealing,
        rounds=rounds,
        seed=seed,
        gst_us=int(raw.get("gst_us", 0)),
        pre_gst_factor=float(raw.get("pre_gst_factor", 1.0)),
        improvement_ratio=float(raw.get("improvement_ratio", 0.9)),
        proposer_count=raw.get("proposers"),
    )


def _as_int(raw: dict, key: str) -> int:
    value = raw[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"$.{key}", f"must be an integer, got {value!r}")
    return value
