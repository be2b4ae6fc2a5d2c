import random
import time

import pytest

from aquamon.config import ControllerConfig, RunConfig
from aquamon.domain import ParameterKind, ParameterReading, Quality
from aquamon.eventlog import read_run
from aquamon.metrics import GroundTruthTrace, flatten
from aquamon.plant import Perturbation, PerturbationKind
from aquamon.runtime import AquariumRuntime

EPOCH = 1735689600.0  # 2025-01-01T00:00:00Z


def reading(kind=ParameterKind.WATER_TEMPERATURE, value=26.0, ts=EPOCH,
            quality=Quality.VALID):
    return ParameterReading(kind, value, ts, quality)


def fuzz_script(seed: int, duration: float) -> list:
    """Random but non-degenerate scenario: a few excursions of each flavour
    plus at least one network outage and one power cycle."""
    rng = random.Random(f"fuzz:{seed}")
    script = []
    power_windows = []

    def free(start, dur):
        return all(start + dur <= s or start >= e for s, e in power_windows)

    for _ in range(rng.randint(3, 7)):
        kind = rng.choice([PerturbationKind.HEATER, PerturbationKind.VINEGAR,
                           PerturbationKind.SOIL, PerturbationKind.REFILL])
        start = rng.uniform(1800, duration - 7200)
        if kind is PerturbationKind.HEATER:
            script.append(Perturbation(kind, start, rng.uniform(0.3, 1.0),
                                       rng.uniform(300, 1500)))
        elif kind is PerturbationKind.VINEGAR:
            script.append(Perturbation(kind, start, rng.uniform(0.8, 2.5),
                                       rng.uniform(60, 180)))
        elif kind is PerturbationKind.SOIL:
            script.append(Perturbation(kind, start, rng.uniform(45, 120),
                                       rng.uniform(60, 600)))
        else:
            script.append(Perturbation(kind, start))

    for _ in range(rng.randint(1, 3)):
        start = rng.uniform(3600, duration - 3600)
        script.append(Perturbation(PerturbationKind.NETWORK_OUTAGE, start,
                                   0.0, rng.uniform(10, 120)))
    for _ in range(rng.randint(1, 2)):
        start = rng.uniform(3600, duration - 3600)
        dur = rng.uniform(15, 90)
        if free(start, dur):
            script.append(Perturbation(PerturbationKind.POWER_CYCLE, start,
                                       0.0, dur))
            power_windows.append((start, start + dur))
    script.sort(key=lambda p: p.start)
    return script


class RunArtifacts:
    def __init__(self, runtime, log_dir, wall_s):
        self.runtime = runtime
        self.log_dir = log_dir
        self.wall_s = wall_s
        self.run_id = runtime.run_id
        self.trace = GroundTruthTrace.load(runtime.trace_path)
        self.segments = read_run(log_dir, runtime.run_id)
        self.records = flatten(self.segments)


def execute_run(log_dir, scenario="standard-72h", duration_s=72 * 3600.0,
                seed=0, script=None, controller_cfg=None) -> RunArtifacts:
    cfg = RunConfig(scenario=scenario, duration_s=duration_s, speedup=1e9,
                    log_dir=str(log_dir), seed=seed, serve=False)
    runtime = AquariumRuntime(cfg, controller_cfg or ControllerConfig(),
                              script=script)
    started = time.perf_counter()
    runtime.run()
    return RunArtifacts(runtime, log_dir, time.perf_counter() - started)


@pytest.fixture(scope="session")
def standard_run(tmp_path_factory) -> RunArtifacts:
    """The full 72 h standard scenario, shared by the acceptance tests."""
    log_dir = tmp_path_factory.mktemp("standard-72h")
    return execute_run(log_dir)
