"""Experiment runner CLI.

Subcommands:
  run             execute a scenario file with N seeded replications; writes
                  one per-round CSV per replication, summary.json with mean
                  and 95% t-interval aggregates, manifest.json with the seeds,
                  and a latency figure.
  reconfig-curve  score of successive trees under repeated targeted
                  suspicions, for the matching-based monitor vs the bin
                  baseline vs annealing-with-exclusion; CSV plus figure.
  candidate-bench wall-clock cost of candidate selection on random suspicion
                  graphs of growing size; CSV plus figure.

OPTILOG_THREADS caps the number of parallel replication workers. All result
rows derive from the manifest seeds; the data files are byte-stable across
reruns (figures are renderings of the same data and may differ at the byte
level across matplotlib versions).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import os
import random
import statistics
import sys
import time

from .config_search import AnnealingParams, kauri_bins, sa_search
from .core import SystemParams
from .independent_set import max_independent_set
from .report import (
    aggregate_reports,
    mean_ci,
    plot_candidate_bench,
    plot_reconfig_curve,
    plot_run,
    write_csv_rows,
    write_round_csv,
    write_summary_json,
)
from .scenario import ScenarioError, load_scenario
from .simnet import _mix, run_experiment, synth_latency_matrix
from .suspicion import SLOW, Suspicion, SuspicionState, reciprocate
from .tree import tree_score
from .tree_candidates import TreeSuspicionState


def _worker_count(reps: int) -> int:
    env = os.environ.get("OPTILOG_THREADS")
    if env:
        return max(1, min(int(env), reps))
    return max(1, min(os.cpu_count() or 1, reps))


def _run_one(args: tuple) -> "object":
    scenario_path, seed = args
    scenario = load_scenario(scenario_path, seed_override=seed)
    return run_experiment(scenario)


def cmd_run(args: argparse.Namespace) -> int:
    if args.reps < 1:
        print("error: --reps must be >= 1", file=sys.stderr)
        return 2
    try:
        scenario = load_scenario(args.scenario, seed_override=args.seed)
    except (ScenarioError, FileNotFoundError, ValueError) as exc:
        print(f"error: bad scenario: {exc}", file=sys.stderr)
        return 2
    os.makedirs(args.out, exist_ok=True)
    base_seed = scenario.seed
    seeds = [_mix(base_seed, rep) % 2**31 for rep in range(args.reps)]

    workers = _worker_count(args.reps)
    jobs = [(args.scenario, s) for s in seeds]
    if workers == 1 or args.reps == 1:
        reports = [_run_one(j) for j in jobs]
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_one, jobs))

    outputs = []
    for rep_idx, report in enumerate(reports):
        csv_path = os.path.join(args.out, f"rep{rep_idx:03d}.csv")
        write_round_csv(report, csv_path)
        outputs.append(os.path.basename(csv_path))
    write_summary_json(
        [r.summary() for r in reports],
        aggregate_reports(reports),
        os.path.join(args.out, "summary.json"),
    )
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "scenario": os.path.abspath(args.scenario),
                "reps": args.reps,
                "base_seed": base_seed,
                "seeds": seeds,
                "outputs": outputs,
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    plot_run(reports, os.path.join(args.out, "latency.png"))
    print(f"wrote {len(reports)} replications to {args.out}")
    return 0


# --- reconfig curve --------------------------------------------------------------


def _curve_params(n: int, delta: float = 1.2) -> SystemParams:
    return SystemParams(n=n, f=(n - 1) // 3, delta=delta)


def _sa(score_fn, candidates, params, seed: int, iters: int):
    return sa_search(
        score_fn,
        candidates,
        params,
        "tree",
        AnnealingParams(max_iterations=iters, seed=seed),
    )


def opti_curve(
    n: int, faults: int, seed: int, iters: int, lat=None
) -> list[int]:
    """Scores of successive trees as faulty replicas evict correct internals.

    Each attack step: a not-yet-excluded faulty replica (random seeded pick)
    raises a suspicion against the current root; the accused reciprocates, the
    matching absorbs the pair, u rises, and the next tree is searched among
    the survivors with vote target q+u.
    """
    params = _curve_params(n)
    lat = lat if lat is not None else synth_latency_matrix(n, _mix(seed, 0x1A7))
    rng = random.Random(_mix(seed, 0x0971))
    state = SuspicionState(params)
    tree_state = TreeSuspicionState(state)

    scores = []
    cand, u = tree_state.tree_candidates()
    config, score = _sa(
        lambda c: tree_score(c, lat, params.q + u), cand, params, _mix(seed, 0), iters
    )
    scores.append(score)
    for step in range(1, faults + 1):
        cand, u = tree_state.tree_candidates()
        accusers = [a for a in cand if a != config.root] or [
            a for a in range(n) if a != config.root
        ]
        accuser = accusers[rng.randrange(len(accusers))]
        s = Suspicion(
            kind=SLOW, accuser=accuser, accused=config.root, round=step, message_type="propose"
        )
        state.monitor_apply(s, current_view=step)
        answer = reciprocate(state, s, s.accused)
        if answer is not None:
            state.monitor_apply(answer, current_view=step)
        cand, u = tree_state.tree_candidates()
        config, score = _sa(
            lambda c: tree_score(c, lat, params.q + u),
            cand,
            params,
            _mix(seed, step),
            iters,
        )
        scores.append(score)
    return scores


def kauri_sa_curve(
    n: int, faults: int, seed: int, iters: int, lat=None
) -> list[int]:
    """Annealing with blanket exclusion: after every failed tree all its
    internal nodes leave the candidate pool, and the vote target stays q+f."""
    params = _curve_params(n)
    lat = lat if lat is not None else synth_latency_matrix(n, _mix(seed, 0x1A7))
    k = params.q + params.f
    m = 1 + len(_template_intermediates(n))
    excluded: set[int] = set()
    scores = []
    candidates = set(range(n))
    config, score = _sa(
        lambda c: tree_score(c, lat, k), candidates, params, _mix(seed, 0x4B1, 0), iters
    )
    scores.append(score)
    for step in range(1, faults + 1):
        excluded.update(config.internals)
        candidates = set(range(n)) - excluded
        if len(candidates) < m:
            break  # candidate pool exhausted
        config, score = _sa(
            lambda c: tree_score(c, lat, k),
            candidates,
            params,
            _mix(seed, 0x4B1, step),
            iters,
        )
        scores.append(score)
    return scores


def kauri_curve(n: int, faults: int, seed: int, lat=None) -> list[int]:
    """Random disjoint-bin rotation; capped at n/m trees, then star fallback."""
    params = _curve_params(n)
    lat = lat if lat is not None else synth_latency_matrix(n, _mix(seed, 0x1A7))
    k = params.q + params.f
    m = 1 + len(_template_intermediates(n))
    rng = random.Random(_mix(seed, 0xB125))
    trees = kauri_bins(params, m, rng)
    return [tree_score(t, lat, k) for t in trees[: faults + 1]]


def _template_intermediates(n: int):
    from .tree import build_tree

    return build_tree(list(range(n))).intermediates


def cmd_reconfig_curve(args: argparse.Namespace) -> int:
    os.makedirs(args.out, exist_ok=True)
    params = _curve_params(args.n)
    if args.faults is None:
        args.faults = params.f
    per_strategy: dict[str, dict[int, list[int]]] = {
        "opti": {},
        "kauri-sa": {},
        "kauri": {},
    }
    for rep in range(args.reps):
        seed = _mix(args.seed, rep) % 2**31
        lat = synth_latency_matrix(args.n, _mix(seed, 0x1A7))
        for strategy, scores in (
            ("opti", opti_curve(args.n, args.faults, seed, args.sa_iters, lat)),
            ("kauri-sa", kauri_sa_curve(args.n, args.faults, seed, args.sa_iters, lat)),
            ("kauri", kauri_curve(args.n, args.faults, seed, lat)),
        ):
            for idx, score in enumerate(scores):
                per_strategy[strategy].setdefault(idx, []).append(score)

    rows = []
    for strategy, by_index in per_strategy.items():
        for idx in sorted(by_index):
            ci = mean_ci(by_index[idx])
            rows.append(
                {
                    "strategy": strategy,
                    "reconfiguration": idx,
                    "score_us": ci["mean"],
                    "ci_us": ci["ci95"],
                    "samples": ci["n"],
                }
            )
    csv_path = os.path.join(args.out, f"reconfig_curve_n{args.n}.csv")
    write_csv_rows(
        csv_path, ["strategy", "reconfiguration", "score_us", "ci_us", "samples"], rows
    )
    plot_reconfig_curve(rows, os.path.join(args.out, f"reconfig_curve_n{args.n}.png"), args.n)
    print(f"wrote {csv_path}")
    return 0


# --- candidate bench ---------------------------------------------------------------


def bench_candidates(
    sizes: list[int], graphs_per_size: int, seed: int, edge_prob: float = 0.5
) -> list[dict]:
    rows = []
    for n in sorted(sizes):
        times_ms = []
        for g in range(graphs_per_size):
            rng = random.Random(_mix(seed, n, g))
            edges = [
                (a, b)
                for a in range(n)
                for b in range(a + 1, n)
                if rng.random() < edge_prob
            ]
            start = time.perf_counter()
            max_independent_set(range(n), edges)
            times_ms.append((time.perf_counter() - start) * 1000.0)
        rows.append(
            {
                "n": n,
                "mean_ms": statistics.fmean(times_ms),
                "std_ms": statistics.pstdev(times_ms),
                "graphs": graphs_per_size,
            }
        )
    return rows


def cmd_candidate_bench(args: argparse.Namespace) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    os.makedirs(args.out, exist_ok=True)
    rows = bench_candidates(sizes, args.reps, args.seed)
    csv_path = os.path.join(args.out, "candidate_bench.csv")
    write_csv_rows(csv_path, ["n", "mean_ms", "std_ms", "graphs"], rows)
    plot_candidate_bench(rows, os.path.join(args.out, "candidate_bench.png"))
    for row in rows:
        print(f"n={row['n']:>4}  mean={row['mean_ms']:.3f} ms  std={row['std_ms']:.3f} ms")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rolelog",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file with replications")
    p_run.add_argument("scenario", help="path to a scenario JSON file")
    p_run.add_argument("--reps", type=int, default=1, help="replication count")
    p_run.add_argument("--out", default="out", help="output directory")
    p_run.add_argument("--seed", type=int, default=None, help="override scenario seed")
    p_run.set_defaults(func=cmd_run)

    p_curve = sub.add_parser(
        "reconfig-curve", help="tree score vs reconfigurations under attack"
    )
    p_curve.add_argument("--n", type=int, required=True, help="replica count")
    p_curve.add_argument(
        "--faults", type=int, default=None, help="attack steps (default f)"
    )
    p_curve.add_argument("--reps", type=int, default=100)
    p_curve.add_argument("--seed", type=int, default=0)
    p_curve.add_argument("--sa-iters", type=int, default=2000)
    p_curve.add_argument("--out", default="out")
    p_curve.set_defaults(func=cmd_reconfig_curve)

    p_bench = sub.add_parser(
        "candidate-bench", help="time candidate selection on random graphs"
    )
    p_bench.add_argument("--sizes", default="4,10,25,50,100")
    p_bench.add_argument("--reps", type=int, default=100, help="graphs per size")
    p_bench.add_argument("--seed", type=int, default=0)
    p_bench.add_argument("--out", default="out")
    p_bench.set_defaults(func=cmd_candidate_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
