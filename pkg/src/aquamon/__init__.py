"""Hardware-free smart-aquarium stack.

Tank plant simulation, edge sensing/calibration/control, a local telemetry
service, and an evaluator that reproduces the performance metrics from run
artifacts.
"""

__version__ = "0.1.0"

from .domain import (AlertEvent, Direction, EventRecord, ParameterKind,
                     ParameterReading, Quality, RawSample, RuleAction,
                     ThresholdRule, default_rules, violates)

__all__ = [
    "AlertEvent", "Direction", "EventRecord", "ParameterKind",
    "ParameterReading", "Quality", "RawSample", "RuleAction",
    "ThresholdRule", "default_rules", "violates", "__version__",
]
