"""Shared domain types: system parameters, the append-only measurement log,
and the replay machinery that keeps monitor state identical on every replica.

All monitors are driven exclusively from the log. Replaying the same entry
sequence into fresh monitors must yield bit-identical serialized state; the
canonical byte encoding below is what the determinism checks compare.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from typing import Any, Iterable, Iterator, Optional

ReplicaId = int
ViewNumber = int

# Reserved sentinel for "no measurement / unreachable". Kept out of arithmetic:
# use sat_add / sat_mul instead of + and *.
INFINITE = 2**62

MS = 1000  # microseconds per millisecond, for readable test constants


def is_infinite(value: int) -> bool:
    return value >= INFINITE


def sat_add(*values: int) -> int:
    """Sum that absorbs INFINITE instead of overflowing past it."""
    total = 0
    for v in values:
        if is_infinite(v):
            return INFINITE
        total += v
    return total


def sat_scale(value: int, factor: float) -> int:
    """value * factor, rounded down to whole microseconds; INFINITE absorbs."""
    if is_infinite(value):
        return INFINITE
    return int(value * factor)


class InvalidParameters(ValueError):
    pass


@dataclass(frozen=True)
class SystemParams:
    """Static system-wide parameters: size, fault threshold, timing slack.

    Invariants: n >= 3f+1, q = n-f, delta >= 1.0.
    """

    n: int
    f: int
    delta: float
    window_w: int = 50

    def __post_init__(self) -> None:
        if self.n < 3 * self.f + 1:
            raise InvalidParameters(f"need n >= 3f+1, got n={self.n}, f={self.f}")
        if self.f < 0:
            raise InvalidParameters("f must be >= 0")
        if self.delta < 1.0:
            raise InvalidParameters(f"delta must be >= 1.0, got {self.delta}")
        if self.window_w < 1:
            raise InvalidParameters("window_w must be >= 1")

    @property
    def q(self) -> int:
        return self.n - self.f

    @property
    def replica_set(self) -> tuple[ReplicaId, ...]:
        return tuple(range(self.n))


@dataclass(frozen=True)
class LogEntry:
    sequence: int
    view: ViewNumber
    payload: Any  # LatencyVector | Suspicion | Complaint | ConfigProposal


class SharedLog:
    """Append-only, totally ordered record of sensor measurements.

    The consensus engine that produces this order is abstracted away; the
    simulator appends entries in its deterministic commit order.
    """

    def __init__(self) -> None:
        self._entries: list[LogEntry] = []

    def append(self, payload: Any, view: ViewNumber) -> LogEntry:
        entry = LogEntry(sequence=len(self._entries), view=view, payload=payload)
        self._entries.append(entry)
        return entry

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LogEntry]:
        return iter(self._entries)

    def __getitem__(self, idx: int) -> LogEntry:
        return self._entries[idx]

    def dump_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for entry in self._entries:
                kind, author, body = payload_wire_form(entry.payload)
                fh.write(
                    json.dumps(
                        {
                            "seq": entry.sequence,
                            "view": entry.view,
                            "kind": kind,
                            "author": author,
                            "body": body,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    @classmethod
    def load_jsonl(cls, path: str) -> "SharedLog":
        log = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                payload = payload_from_wire(rec["kind"], rec["author"], rec["body"])
                log.append(payload, rec["view"])
        return log


# --- wire form for log payloads -------------------------------------------
#
# Payload classes register themselves here so the log file format and the
# replay dispatcher stay in one place. Registration happens at import time in
# each module that defines a payload type.

_WIRE_ENCODERS: dict[type, tuple[str, Any]] = {}
_WIRE_DECODERS: dict[str, Any] = {}


def register_payload(cls: type, kind: str, encode, decode) -> None:
    _WIRE_ENCODERS[cls] = (kind, encode)
    _WIRE_DECODERS[kind] = decode


def payload_wire_form(payload: Any) -> tuple[str, ReplicaId, dict]:
    kind, encode = _WIRE_ENCODERS[type(payload)]
    return kind, payload.author, encode(payload)


def payload_from_wire(kind: str, author: ReplicaId, body: dict) -> Any:
    decode = _WIRE_DECODERS.get(kind)
    if decode is None:
        raise ValueError(f"unknown payload kind {kind!r}")
    return decode(author, body)


# --- canonical serialization ------------------------------------------------
#
# Fixed encoding for monitor-state snapshots: integers as 8-byte signed
# little-endian, strings length-prefixed UTF-8, sets emitted in sorted order.
# Two replicas are "in the same state" iff these bytes match.


def canonical_bytes(value: Any) -> bytes:
    out = bytearray()
    _encode(value, out)
    return bytes(out)


def _encode(value: Any, out: bytearray) -> None:
    if value is None:
        out += b"N"
    elif isinstance(value, bool):
        out += b"B" + (b"\x01" if value else b"\x00")
    elif isinstance(value, int):
        out += b"I" + struct.pack("<q", value)
    elif isinstance(value, float):
        out += b"F" + struct.pack("<d", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out += b"S" + struct.pack("<q", len(raw)) + raw
    elif isinstance(value, (list, tuple)):
        out += b"L" + struct.pack("<q", len(value))
        for item in value:
            _encode(item, out)
    elif isinstance(value, (set, frozenset)):
        items = sorted(value, key=_sort_key)
        out += b"T" + struct.pack("<q", len(items))
        for item in items:
            _encode(item, out)
    elif isinstance(value, dict):
        items = sorted(value.items(), key=lambda kv: _sort_key(kv[0]))
        out += b"D" + struct.pack("<q", len(items))
        for k, v in items:
            _encode(k, out)
            _encode(v, out)
    else:
        raise TypeError(f"not canonically serializable: {type(value)!r}")


def _sort_key(value: Any):
    # Snapshot collections hold homogeneous comparable elements (ints, strs,
    # or int tuples); the type tag keeps mixed dict keys totally ordered.
    return (type(value).__name__, value)


@dataclass
class MonitorSet:
    """The per-replica monitor stack fed from the shared log.

    Monitors are duck-typed: each exposes the on_* hook for the payloads it
    consumes and a snapshot() returning plain data for canonical_bytes.
    """

    latency: Any = None
    misbehavior: Any = None
    suspicion: Any = None
    config: Any = None
    skipped_entries: int = 0

    def dispatch(self, entry: LogEntry) -> None:
        payload = entry.payload
        registered = _WIRE_ENCODERS.get(type(payload))
        if registered is None:
            self.skipped_entries += 1
            return
        kind = registered[0]
        try:
            if kind == "latency_vector" and self.latency is not None:
                self.latency.on_latency_vector(payload)
            elif kind == "suspicion" and self.suspicion is not None:
                self.suspicion.on_suspicion(payload, entry.view)
            elif kind == "complaint" and self.misbehavior is not None:
                self.misbehavior.on_complaint(payload)
            elif kind == "config_proposal" and self.config is not None:
                self.config.on_proposal(payload)
        except MalformedPayload:
            # Faulty replicas may log garbage; count and move on.
            self.skipped_entries += 1

    def snapshot(self) -> dict:
        snap: dict[str, Any] = {"skipped": self.skipped_entries}
        for name in ("latency", "misbehavior", "suspicion", "config"):
            monitor = getattr(self, name)
            if monitor is not None:
                snap[name] = monitor.snapshot()
        return snap


class MalformedPayload(ValueError):
    """Raised by monitors when a logged payload fails validation."""


def replay(log: SharedLog, monitors: MonitorSet) -> MonitorSet:
    """Dispatch every entry in sequence order into the given monitor set."""
    for entry in log:
        monitors.dispatch(entry)
    return monitors
