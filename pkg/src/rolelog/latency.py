"""Link latency measurement: per-replica vectors folded into the global
symmetric matrix.

Each replica periodically measures round trips to every peer and logs the
result as a vector; non-responders are recorded as INFINITE. The matrix keeps
the latest report from each side of a link and exposes the max of the two, so
a later, lower re-measurement can bring an entry back down while a single
inflated report still dominates until refuted.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import INFINITE, MalformedPayload, ReplicaId, is_infinite, register_payload


@dataclass(frozen=True)
class LatencyVector:
    author: ReplicaId
    entries: dict[ReplicaId, int]  # microseconds; INFINITE for no reply

    def validate(self, n: int) -> None:
        if not 0 <= self.author < n:
            raise MalformedPayload(f"author {self.author} outside replica set")
        if set(self.entries) != set(range(n)):
            raise MalformedPayload("vector must cover the whole replica set")
        if self.entries[self.author] != 0:
            raise MalformedPayload("self-latency must be 0")
        if any(v < 0 for v in self.entries.values()):
            raise MalformedPayload("negative latency")


register_payload(
    LatencyVector,
    "latency_vector",
    encode=lambda v: {"entries": {str(k): val for k, val in v.entries.items()}},
    decode=lambda author, body: LatencyVector(
        author=author, entries={int(k): int(val) for k, val in body["entries"].items()}
    ),
)


def build_latency_vector(
    round_trips: dict[ReplicaId, Optional[int]], author: ReplicaId, n: int
) -> LatencyVector:
    """Package raw round-trip measurements; missing peers become INFINITE."""
    entries = {}
    for r in range(n):
        if r == author:
            entries[r] = 0
        else:
            measured = round_trips.get(r)
            entries[r] = INFINITE if measured is None else int(measured)
    return LatencyVector(author=author, entries=entries)


class LatencyMatrix:
    """Symmetric n x n recorded-latency matrix with an update counter.

    Entry (a, b) is max(latest report by a for b, latest report by b for a);
    a side that has never reported counts as 0.
    """

    def __init__(self, n: int):
        self.n = n
        self.generation = 0
        # directed[a][b]: latest value author a reported for the link to b
        self._directed = [[0] * n for _ in range(n)]

    def apply_vector(self, v: LatencyVector) -> None:
        v.validate(self.n)
        a = v.author
        for b, value in v.entries.items():
            if b == a:
                continue
            self._directed[a][b] = value
        self.generation += 1

    def get(self, a: ReplicaId, b: ReplicaId) -> int:
        if a == b:
            return 0
        return max(self._directed[a][b], self._directed[b][a])

    def as_rows(self) -> list[list[int]]:
        return [[self.get(a, b) for b in range(self.n)] for a in range(self.n)]

    def snapshot(self) -> dict:
        return {
            "generation": self.generation,
            "directed": [tuple(row) for row in self._directed],
        }

    # log-driven monitor hook
    def on_latency_vector(self, v: LatencyVector) -> None:
        self.apply_vector(v)


def apply_latency_vector(matrix: LatencyMatrix, v: LatencyVector) -> LatencyMatrix:
    matrix.apply_vector(v)
    return matrix


def export_csv(rows: list[list[int]], path: str) -> None:
    """Write a matrix as CSV: header of replica ids, 'inf' for INFINITE."""
    n = len(rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(str(i) for i in range(n)) + "\n")
        for row in rows:
            fh.write(",".join("inf" if is_infinite(v) else str(v) for v in row) + "\n")


def import_csv(path: str) -> list[list[int]]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    n = len(header)
    rows = []
    for ln in lines[1:]:
        cells = ln.split(",")
        if len(cells) != n:
            raise ValueError(f"row width {len(cells)} != header width {n}")
        rows.append([INFINITE if c.strip() == "inf" else int(c) for c in cells])
    if len(rows) != n:
        raise ValueError(f"expected {n} rows, got {len(rows)}")
    return rows
