"""Timestamped exposure / infection / session records.

The log is columnar (one numpy array per field) and is the interchange format
between the simulators and the estimators.  CSV layout::

    time,event_type,user_id,item_id,friend_count,signal_k,feed_position,friend_id

preceded by ``#`` provenance lines.  ``friend_id`` (the exposing friend) is
optional on input; -1 marks a missing integer field.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

EXPOSURE, INFECTION, SESSION = 0, 1, 2
KIND_NAMES = ("exposure", "infection", "session")
_KIND_CODES = {name: code for code, name in enumerate(KIND_NAMES)}

CSV_COLUMNS = (
    "time",
    "event_type",
    "user_id",
    "item_id",
    "friend_count",
    "signal_k",
    "feed_position",
    "friend_id",
)
_INT_FIELDS = ("user", "item", "friend_count", "signal_k", "position", "friend")


class EventLogError(ValueError):
    pass


@dataclass
class EventLog:
    time: np.ndarray
    kind: np.ndarray
    user: np.ndarray
    item: np.ndarray
    friend: np.ndarray
    friend_count: np.ndarray
    signal_k: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        self.time = np.asarray(self.time, dtype=float)
        self.kind = np.asarray(self.kind, dtype=np.int8)
        for name in _INT_FIELDS:
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        n = self.time.size
        for name in ("kind",) + _INT_FIELDS:
            if getattr(self, name).size != n:
                raise EventLogError(f"column {name!r} has the wrong length")

    @classmethod
    def empty(cls) -> "EventLog":
        z = np.zeros(0)
        return cls(z, z, z, z, z, z, z, z)

    def __len__(self):
        return int(self.time.size)

    def take(self, index) -> "EventLog":
        return EventLog(
            self.time[index],
            self.kind[index],
            self.user[index],
            self.item[index],
            self.friend[index],
            self.friend_count[index],
            self.signal_k[index],
            self.position[index],
        )

    def of_kind(self, kind: int) -> "EventLog":
        return self.take(self.kind == kind)

    def sorted(self) -> "EventLog":
        """Stable sort by time; ties keep their original order."""
        return self.take(np.argsort(self.time, kind="stable"))

    @staticmethod
    def concat(logs) -> "EventLog":
        logs = list(logs)
        if not logs:
            return EventLog.empty()
        cols = {
            name: np.concatenate([getattr(lg, name) for lg in logs])
            for name in ("time", "kind") + _INT_FIELDS
        }
        return EventLog(**cols)

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, dest, header_lines=()) -> None:
        lines = [f"# {h}" for h in header_lines]
        lines.append(",".join(CSV_COLUMNS))
        names = np.asarray(KIND_NAMES)[self.kind]
        for row in zip(
            self.time.tolist(),
            names.tolist(),
            self.user.tolist(),
            self.item.tolist(),
            self.friend_count.tolist(),
            self.signal_k.tolist(),
            self.position.tolist(),
            self.friend.tolist(),
        ):
            lines.append(f"{row[0]:.12g},{row[1]},{row[2]},{row[3]},{row[4]},{row[5]},{row[6]},{row[7]}")
        text = "\n".join(lines) + "\n"
        if isinstance(dest, (str, os.PathLike)):
            with open(dest, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        else:
            dest.write(text)

    @classmethod
    def from_csv(cls, source) -> "EventLog":
        if isinstance(source, (str, os.PathLike)):
            with open(source, "r", encoding="utf-8") as fh:
                text = fh.read()
        elif isinstance(source, (bytes, bytearray)):
            text = bytes(source).decode("utf-8")
        else:
            text = source.read()
            if isinstance(text, bytes):
                text = text.decode("utf-8")
        rows = [ln for ln in io.StringIO(text).read().splitlines() if ln.strip() and not ln.startswith("#")]
        if not rows:
            raise EventLogError("event log has no header row")
        header = [h.strip() for h in rows[0].split(",")]
        required = CSV_COLUMNS[:7]
        missing = [c for c in required if c not in header]
        if missing:
            raise EventLogError(f"event log is missing columns: {missing}")
        col = {name: i for i, name in enumerate(header)}
        body = rows[1:]
        m = len(body)
        time = np.empty(m)
        kind = np.empty(m, np.int8)
        ints = {name: np.full(m, -1, np.int64) for name in _INT_FIELDS}
        csv_of = {
            "user": "user_id",
            "item": "item_id",
            "friend_count": "friend_count",
            "signal_k": "signal_k",
            "position": "feed_position",
            "friend": "friend_id",
        }
        for i, line in enumerate(body):
            parts = line.split(",")
            if len(parts) != len(header):
                raise EventLogError(f"data row {i + 1}: expected {len(header)} fields")
            try:
                time[i] = float(parts[col["time"]])
                kind[i] = _KIND_CODES[parts[col["event_type"]].strip()]
                for name, cname in csv_of.items():
                    if cname in col:
                        ints[name][i] = int(parts[col[cname]])
            except (ValueError, KeyError) as exc:
                raise EventLogError(f"data row {i + 1}: {exc}") from None
        return cls(time, kind, **ints)


class EventLogBuilder:
    """Append-only row collector used inside simulators."""

    def __init__(self):
        self._rows = []

    def add(self, time, kind, user, item, friend=-1, friend_count=-1, signal_k=-1, position=-1):
        self._rows.append((time, kind, user, item, friend, friend_count, signal_k, position))

    def __len__(self):
        return len(self._rows)

    def build(self) -> EventLog:
        if not self._rows:
            return EventLog.empty()
        cols = list(zip(*self._rows))
        return EventLog(
            time=np.asarray(cols[0], float),
            kind=np.asarray(cols[1], np.int8),
            user=cols[2],
            item=cols[3],
            friend=cols[4],
            friend_count=cols[5],
            signal_k=cols[6],
            position=cols[7],
        )
