"""Durable, ordered event log with power-boundary segments.

Records are newline-delimited JSON in the canonical serialization, one file
per segment, named ``<run-id>.segment-<n>.ndjson``.  The writer assigns
run-wide sequence numbers; a power loss drops whatever is still buffered,
so the surviving files show a sequence gap exactly at the boundary (this is
what the evaluator counts as lost records).

Timestamps come from a ClockModel: a monotonic source plus an offset that
only changes at explicit sync events, mirroring NTP correction.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Optional

from .domain import (EventPayload, EventRecord, FaultKind, SystemFaultPayload,
                     iso_from_epoch)

logger = logging.getLogger(__name__)


class SegmentClosed(Exception):
    """Append attempted on a segment that a power boundary already closed."""


@dataclass(frozen=True)
class CorruptRecord:
    """Replay diagnostic for one malformed log line (skipped, not fatal)."""
    path: str
    byte_offset: int
    reason: str


@dataclass
class ClockModel:
    """Monotonic time plus an NTP-style offset applied at sync events."""

    offset: float = 0.0
    synced: bool = False
    sync_events: list = field(default_factory=list)

    def sync(self, reference_wall_time: float, now_monotonic: float) -> None:
        """Adopt a reference: the new offset wins for all later records."""
        self.offset = reference_wall_time - now_monotonic
        self.synced = True
        self.sync_events.append((now_monotonic, self.offset))

    def corrected(self, monotonic: float) -> float:
        return monotonic + self.offset


def segment_filename(run_id: str, index: int) -> str:
    return f"{run_id}.segment-{index}.ndjson"


class LogWriter:
    """Single-writer append log for one run.

    flush_every=1 gives the durable contract (record persisted before
    append returns); larger values buffer records in memory to model the
    data a real device loses when power drops mid-run.
    """

    def __init__(self, directory, run_id: str, clock: ClockModel,
                 flush_every: int = 1):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.run_id = run_id
        self.clock = clock
        self.flush_every = max(1, flush_every)
        self.segment_index = 0
        self._seq = 0
        self._buffer: list[EventRecord] = []
        self._fh = None
        self.closed = False
        self.on_persist: Optional[Callable[[EventRecord], None]] = None
        self._open_segment()

    @property
    def path(self) -> Path:
        return self.directory / segment_filename(self.run_id, self.segment_index)

    def _open_segment(self) -> None:
        self._fh = open(self.path, "w", encoding="utf-8")
        self.closed = False

    def append(self, payload: EventPayload,
               monotonic: Optional[float] = None,
               timestamp: Optional[float] = None) -> EventRecord:
        """Stamp, sequence and persist a payload.

        The timestamp defaults to the corrected clock at ``monotonic``;
        passing ``timestamp`` directly is for exact fault-edge times.
        """
        if self.closed:
            raise SegmentClosed(f"segment {self.segment_index} of {self.run_id}")
        if timestamp is None:
            if monotonic is None:
                raise ValueError("need monotonic time or explicit timestamp")
            timestamp = self.clock.corrected(monotonic)
        self._seq += 1
        record = EventRecord(self._seq, timestamp, payload)
        self._buffer.append(record)
        if len(self._buffer) >= self.flush_every:
            self.flush()
        return record

    def flush(self) -> None:
        for record in self._buffer:
            self._fh.write(record.to_json_line() + "\n")
            if self.on_persist is not None:
                self.on_persist(record)
        self._buffer.clear()
        self._fh.flush()
        os.fsync(self._fh.fileno())

    def power_loss(self, timestamp: float) -> int:
        """Model the plug being pulled: drop the unflushed tail, persist a
        final power-loss marker, close the segment.  Returns records lost."""
        lost = len(self._buffer)
        self._buffer.clear()
        self._seq += 1
        marker = EventRecord(self._seq, timestamp,
                             SystemFaultPayload(FaultKind.POWER_LOSS))
        self._fh.write(marker.to_json_line() + "\n")
        if self.on_persist is not None:
            self.on_persist(marker)
        self._fh.flush()
        os.fsync(self._fh.fileno())
        self._fh.close()
        self.closed = True
        if lost:
            logger.warning("power loss dropped %d unflushed records", lost)
        return lost

    def start_new_segment(self) -> None:
        """Begin the post-restore segment; sequence numbering continues."""
        if not self.closed:
            raise RuntimeError("previous segment still open")
        self.segment_index += 1
        self._open_segment()

    def close(self) -> None:
        """Clean shutdown: flush everything and close the file."""
        if not self.closed:
            self.flush()
            self._fh.close()
            self.closed = True


# --------------------------------------------------------------------------
# Reading and replay
# --------------------------------------------------------------------------

def read_segment(path, on_corrupt: Optional[Callable[[CorruptRecord], None]] = None,
                 ) -> list[EventRecord]:
    """Parse one segment file, skipping malformed lines with a diagnostic."""
    records = []
    offset = 0
    with open(path, "rb") as fh:
        for raw in fh:
            line_start = offset
            offset += len(raw)
            text = raw.decode("utf-8", errors="replace").strip()
            if not text:
                continue
            try:
                records.append(EventRecord.from_json_line(text))
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                report = CorruptRecord(str(path), line_start, str(exc))
                logger.warning("corrupt record at %s byte %d: %s",
                               report.path, report.byte_offset, report.reason)
                if on_corrupt is not None:
                    on_corrupt(report)
    return records


def run_segments(directory, run_id: str) -> list[Path]:
    directory = Path(directory)
    paths = []
    index = 0
    while True:
        p = directory / segment_filename(run_id, index)
        if not p.exists():
            break
        paths.append(p)
        index += 1
    return paths


def read_run(directory, run_id: str,
             on_corrupt: Optional[Callable[[CorruptRecord], None]] = None,
             ) -> list[tuple[int, list[EventRecord]]]:
    """All segments of a run, in order, as (segment_index, records)."""
    out = []
    for index, path in enumerate(run_segments(directory, run_id)):
        out.append((index, read_segment(path, on_corrupt)))
    return out


def replay(records: Iterable[EventRecord], from_ts: float,
           to_ts: float) -> Iterator[EventRecord]:
    """Records with timestamp in [from_ts, to_ts], in sequence order."""
    if from_ts > to_ts:
        raise ValueError(f"empty replay range: {iso_from_epoch(from_ts)} "
                         f"> {iso_from_epoch(to_ts)}")
    for record in sorted(records, key=lambda r: r.sequence_number):
        if from_ts <= record.timestamp <= to_ts:
            yield record
