"""Shared vocabulary for the aquarium stack.

Parameter kinds, readings, threshold rules, actuator commands, alerts and
log records, together with their canonical JSON shapes.  Every type here is
an immutable value: instances can be handed between the control loop, the
HTTP handlers and the evaluator without copying or locking.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Optional, Union


class ParameterKind(Enum):
    """The seven monitored quantities, each tied to one physical unit."""

    AIR_TEMPERATURE = "air_temperature"
    HUMIDITY = "humidity"
    WATER_TEMPERATURE = "water_temperature"
    TDS = "tds"
    PH = "ph"
    TURBIDITY = "turbidity"
    FOOD_DISTANCE = "food_distance"

    @property
    def unit(self) -> str:
        return _UNITS[self]

    @property
    def physical_range(self) -> tuple[float, float]:
        """Hard sensor range; values outside are invalid measurements."""
        return _PHYSICAL_RANGES[self]

    @property
    def label(self) -> str:
        return _LABELS[self]


_UNITS = {
    ParameterKind.AIR_TEMPERATURE: "°C",
    ParameterKind.HUMIDITY: "%RH",
    ParameterKind.WATER_TEMPERATURE: "°C",
    ParameterKind.TDS: "ppm",
    ParameterKind.PH: "pH",
    ParameterKind.TURBIDITY: "NTU",
    ParameterKind.FOOD_DISTANCE: "cm",
}

_PHYSICAL_RANGES = {
    ParameterKind.AIR_TEMPERATURE: (-10.0, 60.0),
    ParameterKind.HUMIDITY: (0.0, 100.0),
    ParameterKind.WATER_TEMPERATURE: (-10.0, 60.0),
    ParameterKind.TDS: (0.0, 1000.0),
    ParameterKind.PH: (0.0, 14.0),
    ParameterKind.TURBIDITY: (0.0, 1000.0),
    ParameterKind.FOOD_DISTANCE: (0.0, 5.0),
}

_LABELS = {
    ParameterKind.AIR_TEMPERATURE: "Air Temp",
    ParameterKind.HUMIDITY: "Humidity",
    ParameterKind.WATER_TEMPERATURE: "Water Temp",
    ParameterKind.TDS: "TDS",
    ParameterKind.PH: "pH",
    ParameterKind.TURBIDITY: "Turbidity",
    ParameterKind.FOOD_DISTANCE: "Food Dist",
}


class Quality(Enum):
    VALID = "valid"
    SMOOTHING = "smoothing"  # window not yet full
    INVALID = "invalid"      # outside the physical range before clamping


class Direction(Enum):
    BELOW_LOWER = "below_lower"
    ABOVE_UPPER = "above_upper"
    LOW_FOOD = "low_food"


class RuleAction(Enum):
    ALERT = "alert"
    ALLOW_FEEDING = "allow_feeding"


class CommandSource(Enum):
    MANUAL = "manual"
    SCHEDULE = "schedule"


class FaultKind(Enum):
    NETWORK_DOWN = "network_down"
    NETWORK_UP = "network_up"
    POWER_LOSS = "power_loss"
    POWER_RESTORE = "power_restore"


# --------------------------------------------------------------------------
# Timestamps: floats (epoch seconds, UTC) internally, ISO-8601 Z on the wire.
# --------------------------------------------------------------------------

def iso_from_epoch(ts: float) -> str:
    dt = datetime.fromtimestamp(ts, timezone.utc)
    return dt.isoformat(timespec="microseconds").replace("+00:00", "Z")


def epoch_from_iso(text: str) -> float:
    # Python 3.10 fromisoformat does not accept a trailing Z
    return datetime.fromisoformat(text.replace("Z", "+00:00")).timestamp()


@dataclass(frozen=True)
class ParameterReading:
    """One calibrated, timestamped measurement with a quality flag."""

    kind: ParameterKind
    value: float
    timestamp: float
    quality: Quality

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "value": self.value,
            "timestamp": iso_from_epoch(self.timestamp),
            "quality": self.quality.value,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ParameterReading":
        return ParameterReading(
            kind=ParameterKind(obj["kind"]),
            value=float(obj["value"]),
            timestamp=epoch_from_iso(obj["timestamp"]),
            quality=Quality(obj["quality"]),
        )


@dataclass(frozen=True)
class RawSample:
    """Uncalibrated converter output: 12-bit counts on one channel."""

    channel: ParameterKind
    counts: int
    monotonic_time: float

    def __post_init__(self):
        if not 0 <= self.counts <= 4095:
            raise ValueError(f"counts out of 12-bit range: {self.counts}")

    def to_json_obj(self) -> dict:
        return {
            "channel": self.channel.value,
            "counts": self.counts,
            "monotonic_time": self.monotonic_time,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "RawSample":
        return RawSample(ParameterKind(obj["channel"]), int(obj["counts"]),
                         float(obj["monotonic_time"]))


@dataclass(frozen=True)
class ThresholdRule:
    """Safe band for one parameter plus the action taken on violation.

    Bounds are inclusive: a value sitting exactly on a bound is safe.
    """

    kind: ParameterKind
    lower: Optional[float]
    upper: Optional[float]
    action: RuleAction

    def __post_init__(self):
        if self.lower is None and self.upper is None:
            raise ValueError("rule needs at least one bound")
        if self.lower is not None and self.upper is not None and not self.lower < self.upper:
            raise ValueError("lower bound must be below upper bound")

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value,
            "lower": self.lower,
            "upper": self.upper,
            "action": self.action.value,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "ThresholdRule":
        return ThresholdRule(
            kind=ParameterKind(obj["kind"]),
            lower=None if obj.get("lower") is None else float(obj["lower"]),
            upper=None if obj.get("upper") is None else float(obj["upper"]),
            action=RuleAction(obj["action"]),
        )


def default_rules() -> list[ThresholdRule]:
    """The stock rule set: six alert bands plus the feeding-allowance rule."""
    return [
        ThresholdRule(ParameterKind.AIR_TEMPERATURE, 15.0, 30.0, RuleAction.ALERT),
        ThresholdRule(ParameterKind.HUMIDITY, 30.0, 80.0, RuleAction.ALERT),
        ThresholdRule(ParameterKind.WATER_TEMPERATURE, 24.0, 28.0, RuleAction.ALERT),
        ThresholdRule(ParameterKind.TDS, 180.0, 280.0, RuleAction.ALERT),
        ThresholdRule(ParameterKind.PH, 6.8, 8.2, RuleAction.ALERT),
        ThresholdRule(ParameterKind.TURBIDITY, None, 50.0, RuleAction.ALERT),
        ThresholdRule(ParameterKind.FOOD_DISTANCE, None, 5.0, RuleAction.ALLOW_FEEDING),
    ]


def violates(rule: ThresholdRule, value: float) -> Optional[Direction]:
    """Direction of a band violation, or None when the value is safe.

    At most one direction is possible since lower < upper.
    """
    if rule.lower is not None and value < rule.lower:
        return Direction.BELOW_LOWER
    if rule.upper is not None and value > rule.upper:
        return Direction.ABOVE_UPPER
    return None


# --------------------------------------------------------------------------
# Actuator commands
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class FeedCommand:
    portions: int
    source: CommandSource
    timestamp: float

    variant = "feed"

    def __post_init__(self):
        if self.portions < 1:
            raise ValueError("portions must be >= 1")

    def to_json_obj(self) -> dict:
        return {
            "variant": "feed",
            "portions": self.portions,
            "source": self.source.value,
            "timestamp": iso_from_epoch(self.timestamp),
        }


@dataclass(frozen=True)
class PumpSetCommand:
    on: bool
    source: CommandSource
    timestamp: float

    variant = "pump_set"

    def to_json_obj(self) -> dict:
        return {
            "variant": "pump_set",
            "on": self.on,
            "source": self.source.value,
            "timestamp": iso_from_epoch(self.timestamp),
        }


ActuatorCommand = Union[FeedCommand, PumpSetCommand]


def command_from_json_obj(obj: dict) -> ActuatorCommand:
    if obj["variant"] == "feed":
        return FeedCommand(int(obj["portions"]), CommandSource(obj["source"]),
                           epoch_from_iso(obj["timestamp"]))
    if obj["variant"] == "pump_set":
        return PumpSetCommand(bool(obj["on"]), CommandSource(obj["source"]),
                              epoch_from_iso(obj["timestamp"]))
    raise ValueError(f"unknown command variant {obj['variant']!r}")


# --------------------------------------------------------------------------
# Alerts
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AlertEvent:
    """An emitted notification.  kind is None for the low-food alert."""

    kind: Optional[ParameterKind]
    direction: Direction
    observed_value: float
    timestamp: float
    message: str

    @property
    def key(self) -> str:
        """Cooldown-gating key: one gate per parameter and direction."""
        if self.kind is None:
            return "low_food"
        return f"{self.kind.value}.{self.direction.value}"

    def to_json_obj(self) -> dict:
        return {
            "kind": self.kind.value if self.kind is not None else "low_food",
            "direction": self.direction.value,
            "observed_value": self.observed_value,
            "timestamp": iso_from_epoch(self.timestamp),
            "message": self.message,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "AlertEvent":
        kind = None if obj["kind"] == "low_food" else ParameterKind(obj["kind"])
        return AlertEvent(
            kind=kind,
            direction=Direction(obj["direction"]),
            observed_value=float(obj["observed_value"]),
            timestamp=epoch_from_iso(obj["timestamp"]),
            message=obj["message"],
        )


# --------------------------------------------------------------------------
# Event-log payloads and records
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SensorSnapshot:
    readings: tuple[ParameterReading, ...]

    type = "sensor_snapshot"

    def to_json_obj(self) -> dict:
        return {"type": self.type,
                "readings": [r.to_json_obj() for r in self.readings]}


@dataclass(frozen=True)
class CommandEvent:
    command: ActuatorCommand

    type = "command"

    def to_json_obj(self) -> dict:
        return {"type": self.type, "command": self.command.to_json_obj()}


@dataclass(frozen=True)
class AlertRecordPayload:
    alert: AlertEvent
    suppressed: bool = False  # True when the cooldown gate swallowed it

    type = "alert"

    def to_json_obj(self) -> dict:
        return {"type": self.type, "alert": self.alert.to_json_obj(),
                "suppressed": self.suppressed}


@dataclass(frozen=True)
class SystemFaultPayload:
    fault: FaultKind

    type = "system_fault"

    def to_json_obj(self) -> dict:
        return {"type": self.type, "fault": self.fault.value}


@dataclass(frozen=True)
class FeedResultPayload:
    requested_portions: int
    dispensed_g: float
    ok: bool
    reason: str  # "ok" | "low_food" | "jam" | "no_reading"

    type = "feed_result"

    def to_json_obj(self) -> dict:
        return {"type": self.type,
                "requested_portions": self.requested_portions,
                "dispensed_g": self.dispensed_g,
                "ok": self.ok,
                "reason": self.reason}


@dataclass(frozen=True)
class RecoveryNotePayload:
    note: str
    data: dict = field(default_factory=dict)

    type = "recovery_note"

    def to_json_obj(self) -> dict:
        return {"type": self.type, "note": self.note, "data": self.data}


EventPayload = Union[SensorSnapshot, CommandEvent, AlertRecordPayload,
                     SystemFaultPayload, FeedResultPayload, RecoveryNotePayload]


def payload_from_json_obj(obj: dict) -> EventPayload:
    t = obj["type"]
    if t == "sensor_snapshot":
        return SensorSnapshot(tuple(ParameterReading.from_json_obj(r)
                                    for r in obj["readings"]))
    if t == "command":
        return CommandEvent(command_from_json_obj(obj["command"]))
    if t == "alert":
        return AlertRecordPayload(AlertEvent.from_json_obj(obj["alert"]),
                                  bool(obj["suppressed"]))
    if t == "system_fault":
        return SystemFaultPayload(FaultKind(obj["fault"]))
    if t == "feed_result":
        return FeedResultPayload(int(obj["requested_portions"]),
                                 float(obj["dispensed_g"]),
                                 bool(obj["ok"]), obj["reason"])
    if t == "recovery_note":
        return RecoveryNotePayload(obj["note"], obj.get("data", {}))
    raise ValueError(f"unknown payload type {t!r}")


@dataclass(frozen=True)
class EventRecord:
    """One append-only log entry with a run-wide sequence number."""

    sequence_number: int
    timestamp: float
    payload: EventPayload

    def to_json_obj(self) -> dict:
        return {
            "sequence_number": self.sequence_number,
            "timestamp": iso_from_epoch(self.timestamp),
            "payload": self.payload.to_json_obj(),
        }

    def to_json_line(self) -> str:
        return json.dumps(self.to_json_obj(), separators=(",", ":"))

    @staticmethod
    def from_json_obj(obj: dict) -> "EventRecord":
        return EventRecord(
            sequence_number=int(obj["sequence_number"]),
            timestamp=epoch_from_iso(obj["timestamp"]),
            payload=payload_from_json_obj(obj["payload"]),
        )

    @staticmethod
    def from_json_line(line: str) -> "EventRecord":
        return EventRecord.from_json_obj(json.loads(line))
