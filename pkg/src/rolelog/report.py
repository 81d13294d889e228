"""Result files: per-round CSVs, JSON summaries, aggregates, and the figures
rendered next to them.

Everything data-bearing is CSV or JSON and byte-reproducible from the
manifest seeds; figures are a rendering of those same files for quick
eyeballing and carry no extra information.
"""

from __future__ import annotations

import csv
import json
import math
import os
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from scipy import stats

from .simnet import ExperimentReport, RoundRecord

ROUND_COLUMNS = [
    "round",
    "view",
    "config",
    "score_us",
    "committed",
    "commit_latency_us",
    "suspicions_logged",
    "reconfigured",
    "cause",
    "candidates",
    "u",
    "crash",
    "faulty",
]


def write_round_csv(report: ExperimentReport, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ROUND_COLUMNS)
        for r in report.rounds:
            writer.writerow(
                [
                    r.round,
                    r.view,
                    r.config,
                    r.score,
                    int(r.committed),
                    "" if r.commit_latency_us is None else r.commit_latency_us,
                    r.suspicions_logged,
                    int(r.reconfigured),
                    r.cause,
                    r.candidates,
                    r.u,
                    r.crash,
                    r.faulty,
                ]
            )


def write_summary_json(summaries: list[dict], aggregate: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(
            {"replications": summaries, "aggregate": aggregate},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def mean_ci(values: Sequence[float], confidence: float = 0.95) -> dict:
    """Mean with a two-sided t-interval; degenerate inputs get a zero width."""
    vals = [float(v) for v in values]
    k = len(vals)
    if k == 0:
        return {"mean": None, "ci95": None, "n": 0}
    mean = sum(vals) / k
    if k == 1:
        return {"mean": mean, "ci95": 0.0, "n": 1}
    var = sum((v - mean) ** 2 for v in vals) / (k - 1)
    half = float(stats.t.ppf(0.5 + confidence / 2.0, k - 1)) * math.sqrt(var / k)
    return {"mean": mean, "ci95": half, "n": k}


def aggregate_reports(reports: list[ExperimentReport]) -> dict:
    commit_latencies = []
    for rep in reports:
        lat = [r.commit_latency_us for r in rep.rounds if r.commit_latency_us is not None]
        if lat:
            commit_latencies.append(sum(lat) / len(lat))
    return {
        "mean_commit_latency_us": mean_ci(commit_latencies),
        "commit_rate": mean_ci(
            [
                sum(1 for r in rep.rounds if r.committed) / len(rep.rounds)
                for rep in reports
                if rep.rounds
            ]
        ),
        "reconfigurations": mean_ci([len(rep.reconfigurations) for rep in reports]),
        "final_u": mean_ci([rep.final_u for rep in reports]),
    }


# --- figures -------------------------------------------------------------------


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None, "CreationDate": None})
    plt.close(fig)


def plot_run(reports: list[ExperimentReport], path: str) -> None:
    """Commit latency per round, reconfigurations marked, first replication."""
    rep = reports[0]
    xs = [r.round for r in rep.rounds]
    ys = [
        (r.commit_latency_us / 1000.0) if r.commit_latency_us is not None else None
        for r in rep.rounds
    ]
    fig, ax = plt.subplots(figsize=(7, 3))
    ax.plot(xs, [y if y is not None else float("nan") for y in ys], lw=1.0)
    for ev in rep.reconfigurations:
        ax.axvline(ev.round, color="tab:red", alpha=0.4, lw=0.8)
    ax.set_xlabel("round")
    ax.set_ylabel("commit latency [ms]")
    ax.set_title("per-round commit latency (reconfigurations in red)")
    _finish(fig, path)


def plot_reconfig_curve(
    rows: list[dict], path: str, n: int
) -> None:
    """Score vs reconfiguration index, one line per strategy."""
    fig, ax = plt.subplots(figsize=(7, 3))
    strategies = sorted({row["strategy"] for row in rows})
    for strategy in strategies:
        pts = sorted(
            (row["reconfiguration"], row["score_us"], row.get("ci_us", 0.0))
            for row in rows
            if row["strategy"] == strategy
        )
        xs = [p[0] for p in pts]
        ys = [p[1] / 1000.0 for p in pts]
        err = [p[2] / 1000.0 for p in pts]
        ax.errorbar(xs, ys, yerr=err, label=strategy, lw=1.2, capsize=2)
    ax.set_xlabel("reconfigurations")
    ax.set_ylabel("tree score [ms]")
    ax.set_title(f"score under repeated targeted suspicions, n={n}")
    ax.legend()
    _finish(fig, path)


def plot_candidate_bench(rows: list[dict], path: str) -> None:
    fig, ax = plt.subplots(figsize=(6, 3))
    xs = [row["n"] for row in rows]
    ys = [row["mean_ms"] for row in rows]
    err = [row["std_ms"] for row in rows]
    ax.errorbar(xs, ys, yerr=err, marker="o", lw=1.2, capsize=2)
    ax.set_yscale("log")
    ax.set_xlabel("configuration size n")
    ax.set_ylabel("candidate-set time [ms]")
    ax.set_title("candidate selection cost on random suspicion graphs")
    _finish(fig, path)


def write_csv_rows(path: str, columns: list[str], rows: Iterable[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in columns})
