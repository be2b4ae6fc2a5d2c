"""Run and controller configuration.

One JSON file carries the operator-tunable knobs (rule set, cooldown, poll
period, feed schedule, noise, simulator constants); every value defaults to
the stock behaviour so an absent file is fine.  CLI flags and AQUA_*
environment variables override file values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .domain import ParameterKind, ThresholdRule, default_rules
from .plant import NoiseModel, SimParams

# run timestamps start here: 2025-01-01T00:00:00Z
DEFAULT_EPOCH = 1735689600.0


@dataclass(frozen=True)
class ControllerConfig:
    poll_period_s: float = 5.0
    cooldown_s: float = 600.0
    feed_schedule: tuple = ("08:00", "20:00")
    hysteresis: float = 0.0
    rules: tuple = tuple(default_rules())
    jam_probability: float = 0.01
    flush_every: int = 7          # records buffered between log flushes
    publisher_queue: int = 1024
    start_epoch: float = DEFAULT_EPOCH
    noise_sigmas: Optional[dict] = None   # kind value -> sigma; None = defaults
    dropout_probability: float = 0.005
    sim: SimParams = SimParams()
    initial_food_depth: float = 4.5

    def noise_model(self, seed: int) -> NoiseModel:
        base = NoiseModel.default(seed)
        if self.noise_sigmas is None and self.dropout_probability == base.dropout_probability:
            return base
        sigmas = dict(base.sigmas)
        for key, value in (self.noise_sigmas or {}).items():
            sigmas[ParameterKind(key)] = float(value)
        return NoiseModel(sigmas, self.dropout_probability, seed)


def load_controller_config(path) -> ControllerConfig:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    cfg = ControllerConfig()
    overrides = {}
    if "poll_period_s" in obj:
        overrides["poll_period_s"] = float(obj["poll_period_s"])
    if "cooldown_s" in obj:
        overrides["cooldown_s"] = float(obj["cooldown_s"])
    if "feed_schedule" in obj:
        overrides["feed_schedule"] = tuple(obj["feed_schedule"])
    if "hysteresis" in obj:
        overrides["hysteresis"] = float(obj["hysteresis"])
    if "rules" in obj:
        overrides["rules"] = tuple(ThresholdRule.from_json_obj(r)
                                   for r in obj["rules"])
    if "jam_probability" in obj:
        overrides["jam_probability"] = float(obj["jam_probability"])
    if "flush_every" in obj:
        overrides["flush_every"] = int(obj["flush_every"])
    if "publisher_queue" in obj:
        overrides["publisher_queue"] = int(obj["publisher_queue"])
    if "start_epoch" in obj:
        overrides["start_epoch"] = float(obj["start_epoch"])
    if "noise_sigmas" in obj:
        overrides["noise_sigmas"] = dict(obj["noise_sigmas"])
    if "dropout_probability" in obj:
        overrides["dropout_probability"] = float(obj["dropout_probability"])
    if "initial_food_depth" in obj:
        overrides["initial_food_depth"] = float(obj["initial_food_depth"])
    if "sim" in obj:
        overrides["sim"] = replace(SimParams(), **obj["sim"])
    return replace(cfg, **overrides)


@dataclass(frozen=True)
class RunConfig:
    """Everything one `aquamon run` needs."""

    scenario: Optional[str] = None      # path, or the bundled name
    duration_s: float = 72 * 3600.0
    speedup: float = 3600.0
    port: int = 80
    log_dir: str = "./logs"
    calibration: Optional[str] = None
    config: Optional[str] = None        # controller config file (rules etc.)
    seed: int = 0
    run_id: Optional[str] = None
    serve: bool = True

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError("duration must be positive")
        if self.speedup < 1:
            raise ValueError("speedup must be >= 1")

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        name = "idle"
        if self.scenario:
            name = Path(self.scenario).stem
        return f"run-{name}-s{self.seed}"
