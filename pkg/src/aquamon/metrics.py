"""Reproduces the performance evaluation from run artifacts.

Inputs are the ground-truth trace (world state per tick plus fault
windows) and the persisted event-log segments.  Outputs: per-parameter
accuracy against interpolated truth, alert precision/recall against
ground-truth violation episodes, detection-latency percentiles, network
and power recovery times, lost-record counts, and actuator endurance.

Everything is pure batch computation: the same inputs always produce the
same report.
"""

from __future__ import annotations

import bisect
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domain import (Direction, EventRecord, ParameterKind, Quality,
                     RuleAction, ThresholdRule, default_rules, violates)
from .plant import PlantState

DEFAULT_POLL_PERIOD_S = 5.0

# acceptance bands for "accurate enough", per engineering unit
DEFAULT_TOLERANCES = {
    ParameterKind.AIR_TEMPERATURE: 0.5,
    ParameterKind.WATER_TEMPERATURE: 0.5,
    ParameterKind.HUMIDITY: 2.0,
    ParameterKind.TDS: 25.0,
    ParameterKind.PH: 0.3,
    ParameterKind.TURBIDITY: 10.0,
    ParameterKind.FOOD_DISTANCE: 0.1,
}


class NoSamples(Exception):
    """The log holds no Valid readings of the requested kind."""


class NoAlerts(Exception):
    """No true-positive alerts to take latencies from."""


@dataclass
class GroundTruthTrace:
    """Ordered (time, PlantState) samples plus scripted fault windows."""

    samples: list  # [(t, PlantState)], strictly increasing t
    fault_windows: list = field(default_factory=list)  # [(name, start, end)]

    def __post_init__(self):
        self._times = [t for t, _ in self.samples]

    @staticmethod
    def load(path) -> "GroundTruthTrace":
        samples = []
        windows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if "fault" in obj:
                    windows.append((obj["fault"], float(obj["start"]),
                                    float(obj["end"])))
                else:
                    samples.append((float(obj["t"]),
                                    PlantState.from_json_obj(obj["state"])))
        samples.sort(key=lambda s: s[0])
        return GroundTruthTrace(samples, windows)

    def value_at(self, kind: ParameterKind, t: float) -> float:
        """Linear interpolation of the true field value at time t."""
        times = self._times
        if not times or t < times[0] or t > times[-1]:
            raise ValueError(f"time {t} outside trace span")
        i = bisect.bisect_left(times, t)
        if i < len(times) and times[i] == t:
            return self.samples[i][1].value_of(kind)
        t0, s0 = self.samples[i - 1]
        t1, s1 = self.samples[i]
        w = (t - t0) / (t1 - t0)
        v0, v1 = s0.value_of(kind), s1.value_of(kind)
        return v0 + w * (v1 - v0)


@dataclass(frozen=True)
class Episode:
    """Maximal interval where the true value violates one rule."""

    kind: ParameterKind
    direction: Direction
    start: float
    end: float


def episodes(trace: GroundTruthTrace,
             rules: list[ThresholdRule]) -> list[Episode]:
    """Ground-truth violation episodes per alert rule, from the sampled trace."""
    out = []
    for rule in rules:
        if rule.action is not RuleAction.ALERT:
            continue
        current: Optional[tuple[Direction, float, float]] = None
        for t, state in trace.samples:
            direction = violates(rule, state.value_of(rule.kind))
            if direction is not None:
                if current is None:
                    current = (direction, t, t)
                elif current[0] is direction:
                    current = (direction, current[1], t)
                else:  # flipped sides without an in-band sample
                    out.append(Episode(rule.kind, current[0], current[1], current[2]))
                    current = (direction, t, t)
            elif current is not None:
                out.append(Episode(rule.kind, current[0], current[1], current[2]))
                current = None
        if current is not None:
            out.append(Episode(rule.kind, current[0], current[1], current[2]))
    out.sort(key=lambda e: e.start)
    return out


# --------------------------------------------------------------------------
# record access helpers
# --------------------------------------------------------------------------

def flatten(segments: list[tuple[int, list[EventRecord]]]) -> list[EventRecord]:
    records = []
    for _, recs in segments:
        records.extend(recs)
    return records


def logged_readings(records: list[EventRecord], kind: ParameterKind,
                    valid_only: bool = True):
    for record in records:
        if record.payload.type != "sensor_snapshot":
            continue
        for reading in record.payload.readings:
            if reading.kind is kind and \
                    (not valid_only or reading.quality is Quality.VALID):
                yield reading


def emitted_alerts(records: list[EventRecord]):
    """Alert emissions only; cooldown-suppressed duplicates excluded."""
    for record in records:
        if record.payload.type == "alert" and not record.payload.suppressed:
            yield record.payload.alert


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def accuracy(trace: GroundTruthTrace, records: list[EventRecord],
             kind: ParameterKind, tolerance: float) -> float:
    """Percent of logged Valid readings within tolerance of the truth."""
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    total = 0
    hits = 0
    for reading in logged_readings(records, kind):
        truth = trace.value_at(kind, reading.timestamp)
        total += 1
        if abs(reading.value - truth) <= tolerance:
            hits += 1
    if total == 0:
        raise NoSamples(f"no valid {kind.value} readings in the log")
    return 100.0 * hits / total


def _is_true_positive(alert, eps: list[Episode], poll_period: float) -> bool:
    for ep in eps:
        if ep.kind is alert.kind and ep.direction is alert.direction \
                and ep.start <= alert.timestamp <= ep.end + poll_period:
            return True
    return False


def alert_quality(trace: GroundTruthTrace, records: list[EventRecord],
                  rules: Optional[list[ThresholdRule]] = None,
                  poll_period: float = DEFAULT_POLL_PERIOD_S,
                  ) -> tuple[Optional[float], Optional[float]]:
    """(precision %, recall %) of emitted parameter alerts vs truth episodes.

    The low-food alert has no threshold episode semantics and is excluded.
    Either figure is None when its denominator is empty (vacuous case).
    """
    rules = rules if rules is not None else default_rules()
    eps = episodes(trace, rules)
    alerts = [a for a in emitted_alerts(records) if a.kind is not None]

    true_positives = [a for a in alerts
                      if _is_true_positive(a, eps, poll_period)]
    precision = 100.0 * len(true_positives) / len(alerts) if alerts else None

    recall = None
    if eps:
        hit = 0
        for ep in eps:
            if any(a.kind is ep.kind and a.direction is ep.direction
                   and ep.start <= a.timestamp <= ep.end + poll_period
                   for a in alerts):
                hit += 1
        recall = 100.0 * hit / len(eps)
    return precision, recall


def nearest_rank(values: list[float], percentile: float) -> float:
    """Value at rank ceil(p*n/100) of the sorted sample (1-indexed)."""
    if not values:
        raise ValueError("empty sample")
    ordered = sorted(values)
    rank = math.ceil(percentile * len(ordered) / 100.0)
    rank = max(1, min(rank, len(ordered)))
    return ordered[rank - 1]


def detection_latencies(trace: GroundTruthTrace, records: list[EventRecord],
                        rules: Optional[list[ThresholdRule]] = None,
                        poll_period: float = DEFAULT_POLL_PERIOD_S) -> list[float]:
    """First true-positive alert delay per episode, in seconds."""
    rules = rules if rules is not None else default_rules()
    eps = episodes(trace, rules)
    alerts = sorted((a for a in emitted_alerts(records) if a.kind is not None),
                    key=lambda a: a.timestamp)
    latencies = []
    for ep in eps:
        for alert in alerts:
            if alert.kind is ep.kind and alert.direction is ep.direction \
                    and ep.start <= alert.timestamp <= ep.end + poll_period:
                latencies.append(alert.timestamp - ep.start)
                break
    return latencies


def latency_percentiles(trace: GroundTruthTrace, records: list[EventRecord],
                        rules: Optional[list[ThresholdRule]] = None,
                        poll_period: float = DEFAULT_POLL_PERIOD_S,
                        ) -> tuple[float, float]:
    latencies = detection_latencies(trace, records, rules, poll_period)
    if not latencies:
        raise NoAlerts("no true-positive alerts in the log")
    return nearest_rank(latencies, 50), nearest_rank(latencies, 95)


@dataclass(frozen=True)
class RecoveryReport:
    network_recovery_s: list[float]
    power_recovery_s: list[float]
    records_lost: int


def recovery_times(segments: list[tuple[int, list[EventRecord]]]) -> RecoveryReport:
    """Fault-to-recovery intervals measured purely from the log.

    Network: link-down fault record to the first publisher-resumed note.
    Power: the power-loss marker closing a segment to the first record of
    the next segment.  Lost records are the sequence gaps.
    """
    records = flatten(segments)

    network = []
    down_at: Optional[float] = None
    for record in records:
        p = record.payload
        if p.type == "system_fault" and p.fault.value == "network_down":
            down_at = record.timestamp
        elif p.type == "recovery_note" and p.note == "publisher_resumed" \
                and down_at is not None:
            network.append(record.timestamp - down_at)
            down_at = None

    power = []
    for (_, recs), (_, next_recs) in zip(segments, segments[1:]):
        if not recs or not next_recs:
            continue
        last = recs[-1]
        if last.payload.type == "system_fault" \
                and last.payload.fault.value == "power_loss":
            power.append(next_recs[0].timestamp - last.timestamp)

    lost = 0
    prev_seq = None
    for record in records:
        if prev_seq is not None and record.sequence_number > prev_seq + 1:
            lost += record.sequence_number - prev_seq - 1
        prev_seq = record.sequence_number

    return RecoveryReport(network, power, lost)


@dataclass(frozen=True)
class EnduranceReport:
    feed_attempts: int
    feed_successes: int
    jam_count: int
    servo_success_pct: Optional[float]
    pump_commands: int
    pump_success_pct: Optional[float]
    total_dispensed_g: float


def endurance(records: list[EventRecord]) -> EnduranceReport:
    """Actuation reliability: servo cycles vs jams, pump acknowledgements.

    Low-food rejections never turned the servo, so they are not attempts.
    """
    attempts = successes = jams = 0
    dispensed = 0.0
    pump_commands = 0
    for record in records:
        p = record.payload
        if p.type == "feed_result":
            if p.reason in ("low_food", "no_reading"):
                continue
            attempts += 1
            if p.ok:
                successes += 1
                dispensed += p.dispensed_g
            if p.reason == "jam":
                jams += 1
        elif p.type == "command" and p.command.variant == "pump_set":
            pump_commands += 1
    servo_pct = 100.0 * successes / attempts if attempts else None
    # a pump command present in the log was acknowledged by the loop
    pump_pct = 100.0 if pump_commands else None
    return EnduranceReport(attempts, successes, jams, servo_pct,
                           pump_commands, pump_pct, dispensed)


# --------------------------------------------------------------------------
# the full report
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricsReport:
    accuracy_pct: dict            # kind value -> float | None
    alert_precision_pct: Optional[float]
    alert_recall_pct: Optional[float]
    latency_p50_s: Optional[float]
    latency_p95_s: Optional[float]
    network_recovery_s: list[float]
    power_recovery_s: list[float]
    records_lost: int
    servo_success_pct: Optional[float]
    pump_success_pct: Optional[float]
    jam_count: int
    feed_attempts: int
    total_dispensed_g: float

    def to_json_obj(self) -> dict:
        return {
            "accuracy_pct": self.accuracy_pct,
            "alert_precision_pct": self.alert_precision_pct,
            "alert_recall_pct": self.alert_recall_pct,
            "latency_p50_s": self.latency_p50_s,
            "latency_p95_s": self.latency_p95_s,
            "network_recovery_s": self.network_recovery_s,
            "power_recovery_s": self.power_recovery_s,
            "records_lost": self.records_lost,
            "servo_success_pct": self.servo_success_pct,
            "pump_success_pct": self.pump_success_pct,
            "jam_count": self.jam_count,
            "feed_attempts": self.feed_attempts,
            "total_dispensed_g": self.total_dispensed_g,
        }

    def to_table(self) -> str:
        def fmt(x, suffix=""):
            return "n/a" if x is None else f"{x:.1f}{suffix}"

        lines = []
        lines.append(f"{'Metric':<24} {'Value':>12}  Remarks")
        lines.append("-" * 60)
        order = ["ph", "tds", "turbidity", "water_temperature",
                 "air_temperature", "humidity", "food_distance"]
        for key in order:
            if key in self.accuracy_pct:
                label = ParameterKind(key).label + " accuracy"
                lines.append(f"{label:<24} {fmt(self.accuracy_pct[key]):>12}")
        lines.append(f"{'Alert precision':<24} {fmt(self.alert_precision_pct):>12}")
        lines.append(f"{'Alert recall':<24} {fmt(self.alert_recall_pct):>12}")
        lines.append(f"{'Latency p50':<24} {fmt(self.latency_p50_s, ' s'):>12}")
        lines.append(f"{'Latency p95':<24} {fmt(self.latency_p95_s, ' s'):>12}")
        net = ", ".join(f"{v:.1f}" for v in self.network_recovery_s) or "n/a"
        pwr = ", ".join(f"{v:.1f}" for v in self.power_recovery_s) or "n/a"
        lines.append(f"{'Network recovery (s)':<24} {net:>12}")
        lines.append(f"{'Power recovery (s)':<24} {pwr:>12}")
        lines.append(f"{'Records lost':<24} {self.records_lost:>12d}")
        lines.append(f"{'Servo success':<24} {fmt(self.servo_success_pct):>12}  "
                     f"{self.jam_count} jams / {self.feed_attempts} cycles")
        lines.append(f"{'Pump success':<24} {fmt(self.pump_success_pct):>12}")
        lines.append(f"{'Feed dispensed':<24} {self.total_dispensed_g:>10.1f} g")
        return "\n".join(lines)


def evaluate(trace: GroundTruthTrace,
             segments: list[tuple[int, list[EventRecord]]],
             rules: Optional[list[ThresholdRule]] = None,
             poll_period: float = DEFAULT_POLL_PERIOD_S,
             tolerances: Optional[dict] = None) -> MetricsReport:
    rules = rules if rules is not None else default_rules()
    tolerances = tolerances if tolerances is not None else DEFAULT_TOLERANCES
    records = flatten(segments)

    acc = {}
    for kind in ParameterKind:
        try:
            acc[kind.value] = accuracy(trace, records, kind, tolerances[kind])
        except NoSamples:
            acc[kind.value] = None

    precision, recall = alert_quality(trace, records, rules, poll_period)
    try:
        p50, p95 = latency_percentiles(trace, records, rules, poll_period)
    except NoAlerts:
        p50 = p95 = None

    recovery = recovery_times(segments)
    wear = endurance(records)

    return MetricsReport(
        accuracy_pct=acc,
        alert_precision_pct=precision,
        alert_recall_pct=recall,
        latency_p50_s=p50,
        latency_p95_s=p95,
        network_recovery_s=recovery.network_recovery_s,
        power_recovery_s=recovery.power_recovery_s,
        records_lost=recovery.records_lost,
        servo_success_pct=wear.servo_success_pct,
        pump_success_pct=wear.pump_success_pct,
        jam_count=wear.jam_count,
        feed_attempts=wear.feed_attempts,
        total_dispensed_g=wear.total_dispensed_g,
    )
