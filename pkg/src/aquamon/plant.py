"""Ground-truth physics of the simulated tank.

Each chemistry field relaxes first-order toward its ambient set-point with
a configurable time constant; fish load adds slow constant drifts (+TDS,
+turbidity, -pH); scripted perturbations add piecewise-constant forcing.
The step update uses the exact closed form of the ODE, so a step is
independent of how it is subdivided.

The simulator is also the (inverse) sensor model: ``sample`` maps a true
field value back through the calibration curve, adds Gaussian noise in
counts, and quantizes to the 12-bit scale.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterator, Optional

from .domain import ParameterKind, RawSample
from .pipeline import CalibrationCurve, default_curves


class HopperEmpty(Exception):
    """Dispense attempted with the food gap already at its 5 cm bottom."""


class ScriptOverlap(Exception):
    """Two power-cycle windows overlap; the scenario is not runnable."""


FOOD_GAP_DEPTH_CM = 5.0


@dataclass(frozen=True)
class PlantState:
    """True physical state of the tank at one instant of simulated time."""

    water_temp: float = 26.0
    air_temp: float = 24.0
    humidity: float = 60.0
    ph: float = 7.5
    tds: float = 230.0
    turbidity: float = 12.0
    food_depth: float = 4.5   # sensor-to-food distance; 0 full, 5 empty
    pump_on: bool = True
    sim_time: float = 0.0

    def value_of(self, kind: ParameterKind) -> float:
        return {
            ParameterKind.AIR_TEMPERATURE: self.air_temp,
            ParameterKind.HUMIDITY: self.humidity,
            ParameterKind.WATER_TEMPERATURE: self.water_temp,
            ParameterKind.TDS: self.tds,
            ParameterKind.PH: self.ph,
            ParameterKind.TURBIDITY: self.turbidity,
            ParameterKind.FOOD_DISTANCE: self.food_depth,
        }[kind]

    def to_json_obj(self) -> dict:
        return {
            "water_temp": self.water_temp,
            "air_temp": self.air_temp,
            "humidity": self.humidity,
            "ph": self.ph,
            "tds": self.tds,
            "turbidity": self.turbidity,
            "food_depth": self.food_depth,
            "pump_on": self.pump_on,
            "sim_time": self.sim_time,
        }

    @staticmethod
    def from_json_obj(obj: dict) -> "PlantState":
        return PlantState(**{k: obj[k] for k in (
            "water_temp", "air_temp", "humidity", "ph", "tds", "turbidity",
            "food_depth", "pump_on", "sim_time")})


class PerturbationKind(Enum):
    HEATER = "heater"            # magnitude: °C/min while active
    VINEGAR = "vinegar"          # magnitude: total pH drop over the window
    SOIL = "soil"                # magnitude: total NTU rise over the window
    REFILL = "refill"            # instantaneous hopper refill
    NETWORK_OUTAGE = "network_outage"
    POWER_CYCLE = "power_cycle"


@dataclass(frozen=True)
class Perturbation:
    kind: PerturbationKind
    start: float
    magnitude: float = 0.0
    duration: float = 0.0

    def __post_init__(self):
        if self.kind in (PerturbationKind.HEATER, PerturbationKind.VINEGAR,
                         PerturbationKind.SOIL):
            if self.duration <= 0:
                raise ValueError(f"{self.kind.value} needs a positive duration")
            if self.magnitude <= 0:
                raise ValueError(f"{self.kind.value} needs a positive magnitude")
        if self.kind in (PerturbationKind.NETWORK_OUTAGE, PerturbationKind.POWER_CYCLE):
            if self.duration <= 0:
                raise ValueError(f"{self.kind.value} needs a positive duration")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def active_at(self, t: float) -> bool:
        return self.start <= t < self.end


@dataclass(frozen=True)
class NoiseModel:
    """Per-kind Gaussian noise (engineering units) plus a dropout chance."""

    sigmas: dict
    dropout_probability: float = 0.005
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.dropout_probability < 1.0:
            raise ValueError("dropout_probability must be in [0, 1)")
        for kind, sigma in self.sigmas.items():
            if sigma < 0:
                raise ValueError(f"negative sigma for {kind}")

    @staticmethod
    def zero(seed: int = 0) -> "NoiseModel":
        return NoiseModel({k: 0.0 for k in ParameterKind},
                          dropout_probability=0.0, seed=seed)

    @staticmethod
    def default(seed: int = 0) -> "NoiseModel":
        # Sigmas are bounded above by the re-entry decay rate of each
        # alert band: after an excursion the field crawls back across its
        # bound at (eq - bound)/tau per second, and the smoothed reading
        # must not straddle the bound long enough for the cooldown gate to
        # reopen (that would alert outside the ground-truth episode).  TDS
        # has no scripted excursions, so it carries the large noise and
        # lands lowest in evaluator accuracy; temperature stays cleanest.
        return NoiseModel({
            ParameterKind.AIR_TEMPERATURE: 0.10,
            ParameterKind.HUMIDITY: 0.80,
            ParameterKind.WATER_TEMPERATURE: 0.05,
            ParameterKind.TDS: 20.0,
            ParameterKind.PH: 0.005,
            ParameterKind.TURBIDITY: 0.35,
            ParameterKind.FOOD_DISTANCE: 0.01,
        }, dropout_probability=0.005, seed=seed)


@dataclass(frozen=True)
class SimParams:
    """Tank dynamics: ambient set-points, time constants, fish-load drifts."""

    ambient_water_temp: float = 26.0
    ambient_air_temp: float = 24.0
    ambient_humidity: float = 60.0
    ambient_ph: float = 7.52
    ambient_tds: float = 218.0
    ambient_turbidity_pump_on: float = 11.25
    ambient_turbidity_pump_off: float = 19.5

    tau_water_temp: float = 1800.0      # 30 min
    tau_air_temp: float = 1800.0
    tau_humidity: float = 1800.0
    tau_ph: float = 7200.0              # 120 min
    tau_tds: float = 14400.0            # 240 min
    tau_turbidity_pump_on: float = 5400.0    # 90 min
    tau_turbidity_pump_off: float = 18000.0  # 300 min

    # fish metabolic load, per second
    drift_ph: float = -0.01 / 3600.0
    drift_tds: float = 3.0 / 3600.0
    drift_turbidity: float = 0.5 / 3600.0
    drift_food_depth: float = 0.01 / 3600.0  # gap deepens as fish graze

    depth_per_portion: float = 0.05     # cm of hopper depth per dispensed portion
    feed_turbidity_bump: float = 1.5    # NTU per portion (uneaten-feed cloud)

    def turbidity_ambient(self, pump_on: bool) -> float:
        return self.ambient_turbidity_pump_on if pump_on else self.ambient_turbidity_pump_off

    def turbidity_tau(self, pump_on: bool) -> float:
        return self.tau_turbidity_pump_on if pump_on else self.tau_turbidity_pump_off


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def _relax(x: float, target: float, tau: float, dt: float) -> float:
    """Exact solution of dx/dt = (target - x)/tau over dt."""
    return target + (x - target) * math.exp(-dt / tau)


def validate_script(script: list[Perturbation]) -> None:
    windows = sorted((p.start, p.end) for p in script
                     if p.kind is PerturbationKind.POWER_CYCLE)
    for (s1, e1), (s2, e2) in zip(windows, windows[1:]):
        if s2 < e1:
            raise ScriptOverlap(
                f"power-cycle windows [{s1}, {e1}) and [{s2}, {e2}) overlap")


class TankSimulator:
    """Deterministic tank plant: stepping, feeding, sampling, scenarios."""

    def __init__(self, params: SimParams = SimParams(),
                 noise: NoiseModel = NoiseModel.zero(),
                 curves: Optional[dict[ParameterKind, CalibrationCurve]] = None,
                 initial: Optional[PlantState] = None):
        self.params = params
        self.noise = noise
        self.curves = curves or default_curves()
        self.state = initial if initial is not None else PlantState()
        self._rng = random.Random(f"{noise.seed}:plant-noise")

    # -- equilibria ---------------------------------------------------------

    def equilibrium(self, kind: ParameterKind, pump_on: bool = True) -> float:
        """Fixed point of the relaxation + drift dynamics for one field."""
        p = self.params
        if kind is ParameterKind.WATER_TEMPERATURE:
            return p.ambient_water_temp
        if kind is ParameterKind.AIR_TEMPERATURE:
            return p.ambient_air_temp
        if kind is ParameterKind.HUMIDITY:
            return p.ambient_humidity
        if kind is ParameterKind.PH:
            return p.ambient_ph + p.drift_ph * p.tau_ph
        if kind is ParameterKind.TDS:
            return p.ambient_tds + p.drift_tds * p.tau_tds
        if kind is ParameterKind.TURBIDITY:
            return p.turbidity_ambient(pump_on) + p.drift_turbidity * p.turbidity_tau(pump_on)
        if kind is ParameterKind.FOOD_DISTANCE:
            return FOOD_GAP_DEPTH_CM  # only fixed point: empty (clamped)
        raise ValueError(kind)

    def equilibrium_state(self, pump_on: bool = True, sim_time: float = 0.0) -> PlantState:
        return PlantState(
            water_temp=self.equilibrium(ParameterKind.WATER_TEMPERATURE, pump_on),
            air_temp=self.equilibrium(ParameterKind.AIR_TEMPERATURE, pump_on),
            humidity=self.equilibrium(ParameterKind.HUMIDITY, pump_on),
            ph=self.equilibrium(ParameterKind.PH, pump_on),
            tds=self.equilibrium(ParameterKind.TDS, pump_on),
            turbidity=self.equilibrium(ParameterKind.TURBIDITY, pump_on),
            food_depth=FOOD_GAP_DEPTH_CM,
            pump_on=pump_on,
            sim_time=sim_time,
        )

    # -- dynamics -----------------------------------------------------------

    def step(self, state: PlantState, dt: float,
             active: list[Perturbation]) -> PlantState:
        """Advance dt seconds with a constant set of active perturbations.

        Forcing is folded into a shifted relaxation target, which keeps the
        update exact for piecewise-constant forcing.
        """
        if dt <= 0:
            raise ValueError("dt must be positive")
        p = self.params

        heat_rate = sum(pt.magnitude / 60.0 for pt in active
                        if pt.kind is PerturbationKind.HEATER)
        ph_rate = sum(-pt.magnitude / pt.duration for pt in active
                      if pt.kind is PerturbationKind.VINEGAR)
        turb_rate = sum(pt.magnitude / pt.duration for pt in active
                        if pt.kind is PerturbationKind.SOIL)

        water_eq = self.equilibrium(ParameterKind.WATER_TEMPERATURE) \
            + heat_rate * p.tau_water_temp
        ph_eq = self.equilibrium(ParameterKind.PH) + ph_rate * p.tau_ph
        turb_tau = p.turbidity_tau(state.pump_on)
        turb_eq = self.equilibrium(ParameterKind.TURBIDITY, state.pump_on) \
            + turb_rate * turb_tau

        water = _relax(state.water_temp, water_eq, p.tau_water_temp, dt)
        air = _relax(state.air_temp,
                     self.equilibrium(ParameterKind.AIR_TEMPERATURE),
                     p.tau_air_temp, dt)
        hum = _relax(state.humidity,
                     self.equilibrium(ParameterKind.HUMIDITY),
                     p.tau_humidity, dt)
        ph = _relax(state.ph, ph_eq, p.tau_ph, dt)
        tds = _relax(state.tds, self.equilibrium(ParameterKind.TDS), p.tau_tds, dt)
        turb = _relax(state.turbidity, turb_eq, turb_tau, dt)
        food = state.food_depth + p.drift_food_depth * dt

        return replace(
            state,
            water_temp=_clamp(water, *ParameterKind.WATER_TEMPERATURE.physical_range),
            air_temp=_clamp(air, *ParameterKind.AIR_TEMPERATURE.physical_range),
            humidity=_clamp(hum, *ParameterKind.HUMIDITY.physical_range),
            ph=_clamp(ph, *ParameterKind.PH.physical_range),
            tds=_clamp(tds, *ParameterKind.TDS.physical_range),
            turbidity=_clamp(turb, *ParameterKind.TURBIDITY.physical_range),
            food_depth=_clamp(food, 0.0, FOOD_GAP_DEPTH_CM),
            sim_time=state.sim_time + dt,
        )

    def advance(self, state: PlantState, dt: float,
                script: list[Perturbation]) -> PlantState:
        """Step across [t, t+dt), splitting at perturbation boundaries."""
        t0, t1 = state.sim_time, state.sim_time + dt
        cuts = {t0, t1}
        for pt in script:
            for edge in (pt.start, pt.end):
                if t0 < edge < t1:
                    cuts.add(edge)
        times = sorted(cuts)
        for a, b in zip(times, times[1:]):
            active = [pt for pt in script if pt.active_at(a)
                      and pt.kind in (PerturbationKind.HEATER,
                                      PerturbationKind.VINEGAR,
                                      PerturbationKind.SOIL)]
            state = self.step(state, b - a, active)
        return state

    # -- actuator effects ---------------------------------------------------

    def consume_feed(self, state: PlantState, portions: int) -> PlantState:
        """Dispense from the hopper: gap deepens, uneaten feed clouds the water."""
        if portions < 1:
            raise ValueError("portions must be >= 1")
        if state.food_depth >= FOOD_GAP_DEPTH_CM:
            raise HopperEmpty("food gap already at bottom")
        p = self.params
        return replace(
            state,
            food_depth=_clamp(state.food_depth + p.depth_per_portion * portions,
                              0.0, FOOD_GAP_DEPTH_CM),
            turbidity=_clamp(state.turbidity + p.feed_turbidity_bump * portions,
                             *ParameterKind.TURBIDITY.physical_range),
        )

    def refill(self, state: PlantState) -> PlantState:
        return replace(state, food_depth=0.0)

    def set_pump(self, state: PlantState, on: bool) -> PlantState:
        return replace(state, pump_on=on)

    # -- sensing ------------------------------------------------------------

    def sample(self, state: PlantState, kind: ParameterKind) -> Optional[RawSample]:
        """Inverse-calibrated, noisy, quantized converter read; None on dropout."""
        if self.noise.dropout_probability > 0 and \
                self._rng.random() < self.noise.dropout_probability:
            return None
        curve = self.curves[kind]
        counts_f = curve.inverse(state.value_of(kind))
        sigma = self.noise.sigmas.get(kind, 0.0)
        if sigma > 0:
            counts_f += self._rng.gauss(0.0, sigma / abs(curve.slope))
        counts = int(round(counts_f))
        counts = 0 if counts < 0 else 4095 if counts > 4095 else counts
        return RawSample(kind, counts, state.sim_time)

    # -- scenario replay ----------------------------------------------------

    def run_scenario(self, script: list[Perturbation], duration: float,
                     dt: float = 5.0,
                     initial: Optional[PlantState] = None,
                     ) -> Iterator[tuple[float, PlantState, list]]:
        """Tick-by-tick world evolution with exact fault transition events.

        Yields (sim_time, state, fault_events) per tick, where each fault
        event is (kind, edge, exact_time) with edge "down" or "up".  Pacing
        against the wall clock is the runtime's job, not the world's.
        """
        if duration <= 0:
            raise ValueError("duration must be positive")
        validate_script(script)
        state = initial if initial is not None else self.state
        refills = sorted((p.start for p in script
                          if p.kind is PerturbationKind.REFILL))
        t = state.sim_time
        end = t + duration
        while t < end - 1e-9:
            t_next = min(t + dt, end)
            step_dt = t_next - t
            state = self.advance(state, step_dt, script)
            for r in refills:
                if t < r <= t_next:
                    state = self.refill(state)
            events = fault_transitions(script, t, t_next)
            t = t_next
            yield t, state, events

    def fault_windows(self, script: list[Perturbation]) -> list[tuple[str, float, float]]:
        out = []
        for pt in script:
            if pt.kind is PerturbationKind.NETWORK_OUTAGE:
                out.append(("network", pt.start, pt.end))
            elif pt.kind is PerturbationKind.POWER_CYCLE:
                out.append(("power", pt.start, pt.end))
        return sorted(out, key=lambda w: w[1])


def fault_transitions(script: list[Perturbation], t0: float,
                      t1: float) -> list[tuple[str, str, float]]:
    """Fault edges in (t0, t1]: ("network"|"power", "down"|"up", exact time)."""
    events = []
    for pt in script:
        if pt.kind is PerturbationKind.NETWORK_OUTAGE:
            name = "network"
        elif pt.kind is PerturbationKind.POWER_CYCLE:
            name = "power"
        else:
            continue
        if t0 < pt.start <= t1:
            events.append((name, "down", pt.start))
        if t0 < pt.end <= t1:
            events.append((name, "up", pt.end))
    events.sort(key=lambda e: (e[2], e[1] == "down"))
    return events


def powered_at(script: list[Perturbation], t: float) -> bool:
    return not any(p.kind is PerturbationKind.POWER_CYCLE and p.active_at(t)
                   for p in script)


def network_up_at(script: list[Perturbation], t: float) -> bool:
    return not any(p.kind is PerturbationKind.NETWORK_OUTAGE and p.active_at(t)
                   for p in script)
