"""Outbound cloud-publisher abstraction.

Stands in for the MQTT/cloud path: records are delivered through a sink
(file or in-memory) when the link is up and parked in a bounded queue when
it is not.  The queue drops from the oldest end on overflow, so delivered
records are always a prefix-preserving subsequence of what was offered.
Delivery failures back off exponentially (1 s doubling, capped at 30 s);
an explicit network-up notification drains immediately.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol

logger = logging.getLogger(__name__)

QUEUE_BOUND = 1024
BACKOFF_INITIAL_S = 1.0
BACKOFF_FACTOR = 2.0
BACKOFF_CAP_S = 30.0


class DeliveryError(Exception):
    """Sink could not accept the record (link down)."""


class Sink(Protocol):
    def deliver(self, line: str) -> None: ...


class MemorySink:
    """Test double: remembers every delivered line, can simulate outages."""

    def __init__(self):
        self.delivered: list[str] = []
        self.up = True

    def deliver(self, line: str) -> None:
        if not self.up:
            raise DeliveryError("link down")
        self.delivered.append(line)


class FileSink:
    """Local file stand-in for the cloud collection."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")
        self.up = True

    def deliver(self, line: str) -> None:
        if not self.up:
            raise DeliveryError("link down")
        self._fh.write(line + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()


@dataclass(frozen=True)
class PublisherState:
    connected: bool
    pending: int
    last_success: Optional[float]
    backoff: float
    dropped_total: int
    delivered_total: int


class CloudPublisher:
    """Queueing/retry layer in front of a delivery sink."""

    def __init__(self, sink: Sink, queue_bound: int = QUEUE_BOUND):
        self.sink = sink
        self.queue: deque[str] = deque()
        self.queue_bound = queue_bound
        self.connected = True
        self.last_success: Optional[float] = None
        self.backoff = BACKOFF_INITIAL_S
        self.next_retry_at: Optional[float] = None
        self.dropped_total = 0
        self.delivered_total = 0
        self._drops_this_outage = 0

    def state(self) -> PublisherState:
        return PublisherState(self.connected, len(self.queue),
                              self.last_success, self.backoff,
                              self.dropped_total, self.delivered_total)

    # -- record flow ---------------------------------------------------------

    def offer(self, line: str, now: float) -> None:
        """Publish one serialized record, or park it while disconnected."""
        if self.connected:
            try:
                self.sink.deliver(line)
                self.delivered_total += 1
                self.last_success = now
                return
            except DeliveryError:
                self._mark_disconnected(now)
        self._enqueue(line)

    def _enqueue(self, line: str) -> None:
        if len(self.queue) >= self.queue_bound:
            self.queue.popleft()
            self.dropped_total += 1
            self._drops_this_outage += 1
            if self._drops_this_outage == 1:
                logger.warning("publish queue full (%d); dropping oldest",
                               self.queue_bound)
        self.queue.append(line)

    def _mark_disconnected(self, now: float) -> None:
        if self.connected:
            logger.info("publisher link lost")
        self.connected = False
        self.next_retry_at = now + self.backoff
        self.backoff = min(self.backoff * BACKOFF_FACTOR, BACKOFF_CAP_S)

    # -- recovery ------------------------------------------------------------

    def on_network_down(self, now: float) -> None:
        self._mark_disconnected(now)

    def on_network_up(self, now: float) -> int:
        """Fault cleared: drain immediately.  Returns records delivered."""
        return self._try_drain(now)

    def tick(self, now: float) -> int:
        """Periodic retry while disconnected (capped exponential backoff)."""
        if self.connected or self.next_retry_at is None or now < self.next_retry_at:
            return 0
        return self._try_drain(now)

    def _try_drain(self, now: float) -> int:
        delivered = 0
        while self.queue:
            line = self.queue[0]
            try:
                self.sink.deliver(line)
            except DeliveryError:
                self._mark_disconnected(now)
                return delivered
            self.queue.popleft()
            delivered += 1
            self.delivered_total += 1
            self.last_success = now
        # full drain: the link is good again; a later failed offer will
        # flip it back if this was optimistic
        self.connected = True
        self.backoff = BACKOFF_INITIAL_S
        self.next_retry_at = None
        if self._drops_this_outage:
            logger.warning("outage dropped %d records total",
                           self._drops_this_outage)
        self._drops_this_outage = 0
        return delivered
