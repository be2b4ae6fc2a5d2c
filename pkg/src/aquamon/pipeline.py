"""Edge-layer signal conditioning.

Raw converter counts go through three steps: a two-point linear calibration
to engineering units, a physical-range validation, and a five-sample moving
average.  Values that fail validation are reported but never enter the
smoothing window.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .domain import ParameterKind, ParameterReading, Quality, RawSample

WINDOW_SIZE = 5


class CurveMismatch(Exception):
    """Sample channel does not match the calibration curve's kind."""


class DegeneratePoints(Exception):
    """Both calibration points share the same counts value."""


@dataclass(frozen=True)
class CalibrationCurve:
    """Line through two calibration points (counts -> engineering units).

    Evaluated in the two-anchor interpolation form, which reproduces both
    calibration points exactly in floating point.
    """

    kind: ParameterKind
    counts1: float
    value1: float
    counts2: float
    value2: float

    @property
    def slope(self) -> float:
        return (self.value2 - self.value1) / (self.counts2 - self.counts1)

    @property
    def intercept(self) -> float:
        return self.value1 - self.slope * self.counts1

    def calibrate(self, counts: float) -> float:
        span = self.counts2 - self.counts1
        return self.value1 * ((self.counts2 - counts) / span) \
            + self.value2 * ((counts - self.counts1) / span)

    def inverse(self, value: float) -> float:
        """Engineering units back to (unquantized) counts."""
        span = self.value2 - self.value1
        return self.counts1 * ((self.value2 - value) / span) \
            + self.counts2 * ((value - self.value1) / span)


def fit_curve(kind: ParameterKind, p1: tuple[float, float],
              p2: tuple[float, float]) -> CalibrationCurve:
    """Exact two-point line through p1 and p2, each (counts, value)."""
    if p1[0] == p2[0]:
        raise DegeneratePoints(f"calibration points share counts={p1[0]}")
    return CalibrationCurve(kind, p1[0], p1[1], p2[0], p2[1])


def default_curve(kind: ParameterKind) -> CalibrationCurve:
    """Full 12-bit scale mapped onto the kind's physical range."""
    lo, hi = kind.physical_range
    return CalibrationCurve(kind, 0.0, lo, 4095.0, hi)


def default_curves() -> dict[ParameterKind, CalibrationCurve]:
    return {k: default_curve(k) for k in ParameterKind}


def calibrate(sample: RawSample, curve: CalibrationCurve) -> float:
    """Counts to engineering units; unclamped, validation happens downstream."""
    if sample.channel is not curve.kind:
        raise CurveMismatch(
            f"sample channel {sample.channel.value} vs curve {curve.kind.value}")
    return curve.calibrate(sample.counts)


def validate(kind: ParameterKind, value: float) -> Quality:
    lo, hi = kind.physical_range
    if value < lo or value > hi:
        return Quality.INVALID
    return Quality.VALID


@dataclass
class SmoothingWindow:
    """Last <= 5 accepted values for one parameter."""

    kind: ParameterKind
    capacity: int = WINDOW_SIZE
    buffer: deque = field(default_factory=lambda: deque(maxlen=WINDOW_SIZE))

    def __post_init__(self):
        if self.buffer.maxlen != self.capacity:
            self.buffer = deque(self.buffer, maxlen=self.capacity)

    def update(self, value: float) -> tuple[float, Quality]:
        """Append a value (evicting the oldest when full) and return the mean.

        Quality is SMOOTHING until the window fills.
        """
        self.buffer.append(value)
        mean = sum(self.buffer) / len(self.buffer)
        quality = Quality.VALID if len(self.buffer) >= self.capacity else Quality.SMOOTHING
        return mean, quality

    def reset(self) -> None:
        self.buffer.clear()


def load_calibration(path) -> dict[ParameterKind, CalibrationCurve]:
    """Per-deployment two-point calibrations from a plain text file.

    One line per parameter: ``kind counts1 value1 counts2 value2``.
    Kinds not listed keep their default full-scale curve.
    """
    curves = default_curves()
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 5:
                raise ValueError(f"{path}:{lineno}: expected "
                                 f"'kind c1 v1 c2 v2', got {raw.rstrip()!r}")
            kind = ParameterKind(parts[0])
            c1, v1, c2, v2 = (float(p) for p in parts[1:])
            curves[kind] = fit_curve(kind, (c1, v1), (c2, v2))
    return curves


class ProcessingChannel:
    """calibrate -> validate -> smooth for one parameter kind."""

    def __init__(self, curve: CalibrationCurve,
                 window: Optional[SmoothingWindow] = None):
        self.curve = curve
        self.window = window or SmoothingWindow(curve.kind)

    def process(self, sample: RawSample,
                timestamp: Optional[float] = None) -> ParameterReading:
        """Run one sample through the chain.

        timestamp overrides the reading's instant (the runtime passes the
        clock-corrected time); defaults to the sample's monotonic time.
        """
        ts = sample.monotonic_time if timestamp is None else timestamp
        raw_value = calibrate(sample, self.curve)
        if validate(self.curve.kind, raw_value) is Quality.INVALID:
            # invalid samples carry the raw calibrated value and leave the
            # window untouched, so one spike cannot shift later means
            return ParameterReading(self.curve.kind, raw_value, ts, Quality.INVALID)
        mean, quality = self.window.update(raw_value)
        return ParameterReading(self.curve.kind, mean, ts, quality)

    def reset(self) -> None:
        self.window.reset()
