"""Threshold evaluation, cooldown-gated alerting, feeding and pump control.

The engine is driven once per poll period with the freshly conditioned
readings.  Only readings flagged Valid are checked against the rule set;
each violation passes the per-key cooldown gate, and both emissions and
suppressions are logged.  Feeding is gated on the food-distance reading:
a measured gap at or past the hopper bottom rejects the command and raises
the low-food alert instead of turning the servo.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Optional

from .domain import (AlertEvent, AlertRecordPayload, CommandSource, Direction,
                     FeedCommand, FeedResultPayload, ParameterKind,
                     ParameterReading, PumpSetCommand, Quality,
                     RecoveryNotePayload, RuleAction, SensorSnapshot,
                     ThresholdRule, default_rules, violates)
from .plant import FOOD_GAP_DEPTH_CM

logger = logging.getLogger(__name__)

DEFAULT_COOLDOWN_S = 600.0
DEFAULT_POLL_PERIOD_S = 5.0
PORTION_MASS_G = 0.5


class FeederJam(Exception):
    """The servo stalled mid-rotation; nothing was dispensed."""


@dataclass
class AlertGate:
    """Per-key cooldown: emit only when the key is fresh or the cooldown
    has fully elapsed (boundary inclusive)."""

    cooldown: float = DEFAULT_COOLDOWN_S
    last_emission: dict = field(default_factory=dict)

    def check(self, key: str, now: float) -> bool:
        last = self.last_emission.get(key)
        if last is not None and now - last < self.cooldown:
            return False
        self.last_emission[key] = now
        return True

    def seed(self, key: str, when: float) -> None:
        """Restore a known emission time (log rehydration after reboot)."""
        current = self.last_emission.get(key)
        if current is None or when > current:
            self.last_emission[key] = when


@dataclass
class FeederState:
    portion_mass_g: float = PORTION_MASS_G
    total_dispensed_g: float = 0.0
    jam_flag: bool = False

    def to_json_obj(self) -> dict:
        return {"portion_mass_g": self.portion_mass_g,
                "total_dispensed_g": self.total_dispensed_g,
                "jam_flag": self.jam_flag}


@dataclass
class PumpState:
    on: bool = True  # relay defaults to the on-state
    last_toggle: Optional[float] = None

    def to_json_obj(self) -> dict:
        return {"on": self.on,
                "last_toggle": None if self.last_toggle is None
                else self.last_toggle}


class ServoFeeder:
    """Servo actuator abstraction with a configurable jam chance."""

    def __init__(self, portion_mass_g: float = PORTION_MASS_G,
                 jam_probability: float = 0.0, seed: int = 0):
        self.portion_mass_g = portion_mass_g
        self.jam_probability = jam_probability
        self.cycles = 0
        self._rng = random.Random(f"{seed}:servo")

    def dispense(self, portions: int) -> float:
        self.cycles += 1
        if self.jam_probability > 0 and self._rng.random() < self.jam_probability:
            raise FeederJam(f"jam on cycle {self.cycles}")
        return portions * self.portion_mass_g


class FeedSchedule:
    """Daily feed slots; fires once per slot crossing between two polls."""

    def __init__(self, times: list[str]):
        seen = set()
        self.slots = []
        for text in times:
            hh, mm = text.split(":")
            seconds = int(hh) * 3600 + int(mm) * 60
            if seconds in seen:
                raise ValueError(f"duplicate schedule slot {text}")
            seen.add(seconds)
            self.slots.append(seconds)
        self.slots.sort()

    @staticmethod
    def _day_start(ts: float) -> float:
        dt = datetime.fromtimestamp(ts, timezone.utc)
        midnight = dt.replace(hour=0, minute=0, second=0, microsecond=0)
        return midnight.timestamp()

    def crossings(self, prev: Optional[float], now: float) -> list[float]:
        """Slot instants s with prev < s <= now."""
        if prev is None or not self.slots or now <= prev:
            return []
        out = []
        day = self._day_start(prev)
        while day <= now:
            for slot in self.slots:
                instant = day + slot
                if prev < instant <= now:
                    out.append(instant)
            day += 86400.0
        return out


@dataclass
class PollOutcome:
    alerts: list[AlertEvent]
    records: list  # payloads in log order for this cycle


class ControlEngine:
    """Single-owner control state: rules, gates, feeder, pump, schedule."""

    def __init__(self,
                 rules: Optional[list[ThresholdRule]] = None,
                 cooldown_s: float = DEFAULT_COOLDOWN_S,
                 schedule: Optional[FeedSchedule] = None,
                 feeder: Optional[ServoFeeder] = None,
                 hysteresis: float = 0.0):
        self.rules = {r.kind: r for r in (rules if rules is not None
                                          else default_rules())}
        self.gate = AlertGate(cooldown=cooldown_s)
        self.schedule = schedule or FeedSchedule([])
        self.servo = feeder or ServoFeeder()
        self.feeder = FeederState(portion_mass_g=self.servo.portion_mass_g)
        self.pump = PumpState()
        self.hysteresis = hysteresis
        self._violating: dict[str, bool] = {}
        self._prev_schedule_check: Optional[float] = None

    # -- poll cycle ---------------------------------------------------------

    def poll_cycle(self, readings: dict, now: float) -> PollOutcome:
        """Evaluate one snapshot of fresh readings against the rule set.

        Returns the emitted alerts plus every payload to log this cycle:
        the sensor snapshot, alert emissions, gate suppressions, and
        back-in-band recovery notes.
        """
        ordered = [readings[k] for k in ParameterKind if k in readings]
        records: list = [SensorSnapshot(tuple(ordered))]
        alerts: list[AlertEvent] = []

        for reading in ordered:
            rule = self.rules.get(reading.kind)
            if rule is None or rule.action is not RuleAction.ALERT:
                continue
            if reading.quality is not Quality.VALID:
                continue
            direction = violates(rule, reading.value)
            key = f"{reading.kind.value}.{direction.value}" if direction else None
            if direction is not None:
                alert = AlertEvent(
                    kind=reading.kind,
                    direction=direction,
                    observed_value=reading.value,
                    timestamp=now,
                    message=_describe(rule, reading, direction),
                )
                if self.gate.check(key, now):
                    alerts.append(alert)
                    records.append(AlertRecordPayload(alert, suppressed=False))
                else:
                    records.append(AlertRecordPayload(alert, suppressed=True))
                self._violating[key] = True
            else:
                records.extend(self._recovery_notes(reading, rule, now))
        return PollOutcome(alerts, records)

    def _recovery_notes(self, reading: ParameterReading, rule: ThresholdRule,
                        now: float) -> list:
        """Back-in-band notes; requires re-entry past the hysteresis band."""
        notes = []
        for direction in (Direction.BELOW_LOWER, Direction.ABOVE_UPPER):
            key = f"{reading.kind.value}.{direction.value}"
            if not self._violating.get(key):
                continue
            if direction is Direction.BELOW_LOWER and rule.lower is not None:
                recovered = reading.value >= rule.lower + self.hysteresis
            elif direction is Direction.ABOVE_UPPER and rule.upper is not None:
                recovered = reading.value <= rule.upper - self.hysteresis
            else:
                recovered = True
            if recovered:
                self._violating[key] = False
                notes.append(RecoveryNotePayload(
                    "back_in_band",
                    {"kind": reading.kind.value,
                     "direction": direction.value,
                     "value": reading.value}))
        return notes

    # -- feeding ------------------------------------------------------------

    def request_feed(self, cmd: FeedCommand,
                     food_reading: Optional[ParameterReading],
                     now: float) -> tuple[FeedResultPayload, Optional[AlertRecordPayload]]:
        """Dispense if the measured food gap shows food present (< 5 cm).

        An empty hopper rejects the command and routes a low-food alert
        through the gate; a servo jam aborts with the jam flag latched.
        """
        if food_reading is None:
            return FeedResultPayload(cmd.portions, 0.0, False, "no_reading"), None

        if food_reading.value >= FOOD_GAP_DEPTH_CM:
            alert = AlertEvent(
                kind=None,
                direction=Direction.LOW_FOOD,
                observed_value=food_reading.value,
                timestamp=now,
                message=f"food gap {food_reading.value:.2f} cm: hopper empty",
            )
            suppressed = not self.gate.check(alert.key, now)
            return (FeedResultPayload(cmd.portions, 0.0, False, "low_food"),
                    AlertRecordPayload(alert, suppressed=suppressed))

        try:
            grams = self.servo.dispense(cmd.portions)
        except FeederJam as exc:
            logger.warning("feeder jam: %s", exc)
            self.feeder.jam_flag = True
            return FeedResultPayload(cmd.portions, 0.0, False, "jam"), None

        self.feeder.jam_flag = False
        self.feeder.total_dispensed_g += grams
        return FeedResultPayload(cmd.portions, grams, True, "ok"), None

    # -- pump ---------------------------------------------------------------

    def set_pump(self, cmd: PumpSetCommand, now: float) -> PumpState:
        self.pump.on = cmd.on
        self.pump.last_toggle = now
        return self.pump

    # -- schedule -----------------------------------------------------------

    def scheduled_feeds(self, now: float) -> list[FeedCommand]:
        """Feed commands for every slot crossed since the previous check.

        The first check after startup (or reboot) establishes the baseline
        without firing, so slots missed while off stay missed.
        """
        crossings = self.schedule.crossings(self._prev_schedule_check, now)
        self._prev_schedule_check = now
        return [FeedCommand(1, CommandSource.SCHEDULE, now) for _ in crossings]


def _describe(rule: ThresholdRule, reading: ParameterReading,
              direction: Direction) -> str:
    bound = rule.lower if direction is Direction.BELOW_LOWER else rule.upper
    rel = "below" if direction is Direction.BELOW_LOWER else "above"
    return (f"{reading.kind.label} {reading.value:.2f} {reading.kind.unit} "
            f"{rel} {bound:g} {reading.kind.unit}")
