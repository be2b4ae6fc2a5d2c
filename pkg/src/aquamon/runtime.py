"""Orchestrates the whole stack on one simulated clock.

A single logical loop advances the tank world, polls the sensor pipeline,
runs the control engine, appends to the event log and feeds the publisher.
All periods (5 s poll, 600 s cooldown, schedule slots) are in simulated
time; the wall clock only paces the loop (sim seconds / speedup), so
accelerated runs preserve every temporal invariant and identical seeds
give byte-identical logs.

External commands arrive on a queue from any thread and are applied at
loop boundaries; the loop sleeps on the queue, so acknowledgements stay
prompt even at speedup 1.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from .config import ControllerConfig, RunConfig
from .control import ControlEngine, FeedSchedule, ServoFeeder
from .domain import (CommandEvent, CommandSource, EventRecord, FaultKind,
                     FeedCommand, ParameterKind, ParameterReading,
                     PumpSetCommand, Quality, RecoveryNotePayload,
                     SystemFaultPayload, iso_from_epoch)
from .eventlog import ClockModel, LogWriter
from .pipeline import CalibrationCurve, ProcessingChannel, load_calibration
from .plant import (HopperEmpty, Perturbation, PerturbationKind, TankSimulator,
                    fault_transitions, network_up_at)
from .publisher import CloudPublisher, FileSink, Sink
from .scenario import load_script, standard_script, STANDARD_72H

logger = logging.getLogger(__name__)

COMMAND_ACK_TIMEOUT_S = 2.0


@dataclass
class CommandTicket:
    command: object
    done: threading.Event
    result: Optional[dict] = None


class AquariumRuntime:
    """One run: world, edge stack, log, publisher, and the tick loop."""

    def __init__(self, run_cfg: RunConfig,
                 controller_cfg: Optional[ControllerConfig] = None,
                 sink: Optional[Sink] = None,
                 script: Optional[list[Perturbation]] = None):
        self.run_cfg = run_cfg
        self.cfg = controller_cfg or ControllerConfig()
        self.run_id = run_cfg.resolved_run_id()
        self.log_dir = Path(run_cfg.log_dir)

        if script is not None:
            self.script = script
        elif run_cfg.scenario in (None, STANDARD_72H):
            self.script = standard_script() if run_cfg.scenario else []
        else:
            self.script = load_script(run_cfg.scenario)

        noise = self.cfg.noise_model(run_cfg.seed)
        curves = load_calibration(run_cfg.calibration) if run_cfg.calibration \
            else None
        self.sim = TankSimulator(self.cfg.sim, noise, curves=curves)
        self.curves: dict[ParameterKind, CalibrationCurve] = self.sim.curves
        self.world = replace(self.sim.equilibrium_state(pump_on=True),
                             food_depth=self.cfg.initial_food_depth)

        self.clock = ClockModel()
        self.log = LogWriter(self.log_dir, self.run_id, self.clock,
                             flush_every=self.cfg.flush_every)
        self.log.on_persist = self._on_persist
        self.all_records: list[EventRecord] = []

        self.sink = sink if sink is not None else FileSink(
            self.log_dir / f"{self.run_id}.publisher.ndjson")
        self.publisher = CloudPublisher(self.sink,
                                        queue_bound=self.cfg.publisher_queue)

        self.servo = ServoFeeder(jam_probability=self.cfg.jam_probability,
                                 seed=run_cfg.seed)
        self.engine = self._new_engine()
        self.channels = {k: ProcessingChannel(self.curves[k])
                         for k in ParameterKind}
        self.latest_readings: dict[ParameterKind, ParameterReading] = {}

        self.powered = True
        self.sim_t = 0.0
        self.cycle = 0
        self._snapshot_lock = threading.Lock()
        self._snapshot: Optional[dict] = None
        self.commands: "queue.Queue[CommandTicket]" = queue.Queue()
        self._stop = threading.Event()
        self._running = False
        self._wall_started: Optional[float] = None
        self.tick_compute_s: list[float] = []

        self._trace_fh = open(self.trace_path, "w", encoding="utf-8")
        self._write_trace_header()

    # -- paths ---------------------------------------------------------------

    @property
    def trace_path(self) -> Path:
        return self.log_dir / f"{self.run_id}.trace.ndjson"

    # -- construction helpers -------------------------------------------------

    def _new_engine(self) -> ControlEngine:
        return ControlEngine(
            rules=list(self.cfg.rules),
            cooldown_s=self.cfg.cooldown_s,
            schedule=FeedSchedule(list(self.cfg.feed_schedule)),
            feeder=self.servo,
            hysteresis=self.cfg.hysteresis,
        )

    def _on_persist(self, record: EventRecord) -> None:
        self.all_records.append(record)

    def _write_trace_header(self) -> None:
        for name, start, end in self.sim.fault_windows(self.script):
            row = {"fault": name,
                   "start": self.cfg.start_epoch + start,
                   "end": self.cfg.start_epoch + end}
            self._trace_fh.write(json.dumps(row, separators=(",", ":")) + "\n")

    def _write_trace_row(self) -> None:
        row = {"t": self.clock.corrected(self.sim_t),
               "state": self.world.to_json_obj()}
        self._trace_fh.write(json.dumps(row, separators=(",", ":")) + "\n")

    # -- time ----------------------------------------------------------------

    @property
    def now(self) -> float:
        """Corrected wall time of the current simulated instant."""
        return self.clock.corrected(self.sim_t)

    # -- main loop -------------------------------------------------------------

    def run(self) -> None:
        """Drive the scenario to completion (blocking)."""
        self._running = True
        self._wall_started = time.monotonic()
        self.clock.sync(self.cfg.start_epoch, 0.0)
        self._write_trace_row()  # initial ground truth at t=0
        dt = self.cfg.poll_period_s
        end = self.run_cfg.duration_s
        try:
            while not self._stop.is_set() and self.sim_t < end - 1e-9:
                t_next = min(self.sim_t + dt, end)
                self._pace_until(t_next)
                started = time.perf_counter()
                self._tick(t_next)
                self.tick_compute_s.append(time.perf_counter() - started)
        finally:
            self._shutdown()

    def stop(self) -> None:
        self._stop.set()

    def _pace_until(self, t_next: float) -> None:
        """Sleep toward the wall deadline for t_next, serving commands."""
        deadline = self._wall_started + t_next / self.run_cfg.speedup
        while not self._stop.is_set():
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return
            try:
                ticket = self.commands.get(timeout=min(remaining, 0.05))
            except queue.Empty:
                continue
            self._execute_ticket(ticket)

    def _shutdown(self) -> None:
        self._running = False
        self._drain_tickets_unavailable()
        if not self.log.closed:
            self.log.close()
        self._trace_fh.close()
        if hasattr(self.sink, "close"):
            self.sink.close()

    def _drain_tickets_unavailable(self) -> None:
        while True:
            try:
                ticket = self.commands.get_nowait()
            except queue.Empty:
                return
            ticket.result = {"error": "control_unavailable"}
            ticket.done.set()

    # -- one tick ---------------------------------------------------------------

    def _tick(self, t_next: float) -> None:
        t_prev = self.sim_t
        self.world = self.sim.advance(self.world, t_next - t_prev, self.script)
        for p in self.script:
            if p.kind is PerturbationKind.REFILL and t_prev < p.start <= t_next:
                self.world = self.sim.refill(self.world)
        self.sim_t = t_next
        # device-side pump relay drives the physical pump
        if self.powered:
            self.world = self.sim.set_pump(self.world, self.engine.pump.on)

        for name, edge, exact in fault_transitions(self.script, t_prev, t_next):
            self._handle_fault(name, edge, exact)

        self._write_trace_row()

        if not self.powered:
            return

        now = self.now
        fresh = self._sample_all(now)
        outcome = self.engine.poll_cycle(fresh, now)
        payloads = list(outcome.records)

        for cmd in self.engine.scheduled_feeds(now):
            payloads.extend(self._apply_feed(cmd, now))

        for payload in payloads:
            self._append_and_publish(payload, now)

        self.publisher.tick(now)
        self.cycle += 1
        self._refresh_snapshot(now)

        # commands that arrived while this tick was computing
        while True:
            try:
                ticket = self.commands.get_nowait()
            except queue.Empty:
                break
            self._execute_ticket(ticket)

    def _sample_all(self, now: float) -> dict:
        fresh = {}
        for kind in ParameterKind:
            raw = self.sim.sample(self.world, kind)
            if raw is None:
                continue  # dropout: keep the previous reading as latest
            reading = self.channels[kind].process(raw, timestamp=now)
            fresh[kind] = reading
            self.latest_readings[kind] = reading
        return fresh

    # -- faults -------------------------------------------------------------------

    def _handle_fault(self, name: str, edge: str, exact: float) -> None:
        ts = self.clock.corrected(exact)
        if name == "network":
            if not self.powered:
                return  # device off: nobody observes the link
            if edge == "down":
                self.publisher.on_network_down(ts)
                if hasattr(self.sink, "up"):
                    self.sink.up = False
                rec = self.log.append(SystemFaultPayload(FaultKind.NETWORK_DOWN),
                                      timestamp=ts)
                self.publisher.offer(rec.to_json_line(), ts)
            else:
                if hasattr(self.sink, "up"):
                    self.sink.up = True
                rec = self.log.append(SystemFaultPayload(FaultKind.NETWORK_UP),
                                      timestamp=ts)
                self.publisher.offer(rec.to_json_line(), ts)
                now = self.now
                delivered = self.publisher.on_network_up(now)
                note = RecoveryNotePayload(
                    "publisher_resumed",
                    {"delivered": delivered,
                     "dropped": self.publisher.dropped_total})
                rec = self.log.append(note, timestamp=now)
                self.publisher.offer(rec.to_json_line(), now)
        elif name == "power":
            if edge == "down":
                self._power_down(ts)
            else:
                self._power_up(exact, ts)

    def _power_down(self, ts: float) -> None:
        if not self.powered:
            return
        lost = self.log.power_loss(ts)
        logger.info("power lost at %s (%d buffered records gone)",
                    iso_from_epoch(ts), lost)
        # RAM contents die with the device, and the relay drops the pump
        dropped = len(self.publisher.queue)
        self.publisher.queue.clear()
        self.publisher.dropped_total += dropped
        self.world = self.sim.set_pump(self.world, False)
        self.powered = False

    def _power_up(self, exact_monotonic: float, ts: float) -> None:
        self.powered = True
        self.clock.sync(self.cfg.start_epoch + exact_monotonic, exact_monotonic)
        self.log.start_new_segment()
        rec = self.log.append(SystemFaultPayload(FaultKind.POWER_RESTORE),
                              timestamp=ts)
        # reboot: fresh control state, warm-up smoothing again
        self.engine = self._new_engine()
        for channel in self.channels.values():
            channel.reset()
        self.latest_readings.clear()
        self.world = self.sim.set_pump(self.world, True)  # relay default
        self.publisher.connected = network_up_at(self.script, exact_monotonic)
        if hasattr(self.sink, "up"):
            self.sink.up = self.publisher.connected
        self._rehydrate_from_log()
        lost = self._lost_records()
        note = self.log.append(
            RecoveryNotePayload("post_power_recovery", {"records_lost": lost}),
            timestamp=ts)
        self.publisher.offer(rec.to_json_line(), ts)
        self.publisher.offer(note.to_json_line(), ts)
        logger.info("power restored at %s", iso_from_epoch(ts))

    def _rehydrate_from_log(self) -> None:
        """Reseed cooldown gates and feeder totals from the durable log.

        all_records mirrors exactly what reached disk, so this is the same
        information a reboot would recover by re-reading its segments.
        """
        total = 0.0
        jams = 0
        for record in self.all_records:
            payload = record.payload
            if payload.type == "alert" and not payload.suppressed:
                self.engine.gate.seed(payload.alert.key, record.timestamp)
            elif payload.type == "feed_result":
                if payload.ok:
                    total += payload.dispensed_g
                if payload.reason == "jam":
                    jams += 1
        self.engine.feeder.total_dispensed_g = total
        self.engine.feeder.jam_flag = False

    def _lost_records(self) -> int:
        lost = 0
        prev_seq = None
        for record in self.all_records:
            if prev_seq is not None and record.sequence_number > prev_seq + 1:
                lost += record.sequence_number - prev_seq - 1
            prev_seq = record.sequence_number
        return lost

    # -- record plumbing ------------------------------------------------------------

    def _append_and_publish(self, payload, now: float) -> None:
        rec = self.log.append(payload, timestamp=now)
        self.publisher.offer(rec.to_json_line(), now)

    # -- commands ----------------------------------------------------------------------

    def submit_feed(self, portions: int,
                    timeout: float = COMMAND_ACK_TIMEOUT_S) -> dict:
        if portions < 1:
            return {"error": "invalid_portions"}
        cmd = FeedCommand(portions, CommandSource.MANUAL, self.now)
        return self._submit(cmd, timeout)

    def submit_pump(self, on: bool,
                    timeout: float = COMMAND_ACK_TIMEOUT_S) -> dict:
        cmd = PumpSetCommand(bool(on), CommandSource.MANUAL, self.now)
        return self._submit(cmd, timeout)

    def _submit(self, cmd, timeout: float) -> dict:
        if not self._running:
            return {"error": "control_unavailable"}
        ticket = CommandTicket(cmd, threading.Event())
        self.commands.put(ticket)
        if not ticket.done.wait(timeout):
            return {"error": "timeout"}
        return ticket.result

    def _execute_ticket(self, ticket: CommandTicket) -> None:
        try:
            ticket.result = self._execute_command(ticket.command)
        except Exception as exc:  # defensive: a command must never kill the loop
            logger.exception("command failed")
            ticket.result = {"error": f"internal: {exc}"}
        finally:
            ticket.done.set()

    def _execute_command(self, cmd) -> dict:
        if not self.powered:
            return {"error": "control_unavailable"}
        now = self.now
        if isinstance(cmd, FeedCommand):
            stamped = FeedCommand(cmd.portions, cmd.source, now)
            payloads = self._apply_feed(stamped, now)
            for payload in payloads:
                self._append_and_publish(payload, now)
            result = next(p for p in payloads if p.type == "feed_result")
            self._refresh_snapshot(now)
            return {"accepted": result.ok,
                    "dispensed_g": result.dispensed_g,
                    "reason": result.reason,
                    "feeder": self.engine.feeder.to_json_obj()}
        if isinstance(cmd, PumpSetCommand):
            stamped = PumpSetCommand(cmd.on, cmd.source, now)
            state = self.engine.set_pump(stamped, now)
            self.world = self.sim.set_pump(self.world, state.on)
            self._append_and_publish(CommandEvent(stamped), now)
            self._refresh_snapshot(now)
            return {"on": state.on,
                    "last_toggle": iso_from_epoch(state.last_toggle)}
        return {"error": f"unknown command {cmd!r}"}

    def _apply_feed(self, cmd: FeedCommand, now: float) -> list:
        """Run one feed command: gate on the measured gap, turn the servo,
        apply the hopper/turbidity effect to the world."""
        payloads: list = [CommandEvent(cmd)]
        food = self.latest_readings.get(ParameterKind.FOOD_DISTANCE)
        if food is not None and food.quality is not Quality.VALID:
            food = None
        result, alert_rec = self.engine.request_feed(cmd, food, now)
        if result.ok:
            try:
                self.world = self.sim.consume_feed(self.world, cmd.portions)
            except HopperEmpty:
                # measurement said food present but the gap is truly empty:
                # the servo turned over nothing, take the grams back
                self.engine.feeder.total_dispensed_g -= result.dispensed_g
                result, alert_rec = self.engine.request_feed(
                    FeedCommand(cmd.portions, cmd.source, now),
                    ParameterReading(ParameterKind.FOOD_DISTANCE, 5.0, now,
                                     Quality.VALID),
                    now)
        payloads.append(result)
        if alert_rec is not None:
            payloads.append(alert_rec)
        return payloads

    # -- service backend -------------------------------------------------------------

    def _refresh_snapshot(self, now: float) -> None:
        from .service import build_snapshot  # local import to avoid a cycle
        snap = build_snapshot(
            cycle=self.cycle,
            server_time=now,
            readings=dict(self.latest_readings),
            rules=self.engine.rules,
            pump=self.engine.pump,
            feeder=self.engine.feeder,
        )
        with self._snapshot_lock:
            self._snapshot = snap

    def snapshot(self) -> Optional[dict]:
        with self._snapshot_lock:
            return self._snapshot

    def events_page(self, since: Optional[float], cursor: Optional[int],
                    limit: int) -> dict:
        snapshot = self.all_records[:]  # the loop thread may be appending
        if cursor is not None:
            records = [r for r in snapshot if r.sequence_number > cursor]
        elif since is not None:
            records = [r for r in snapshot if r.timestamp >= since]
        else:
            records = snapshot
        page = records[:limit]
        more = len(records) > limit
        return {
            "events": [r.to_json_obj() for r in page],
            "next_cursor": page[-1].sequence_number if more else None,
        }

    def health(self) -> dict:
        uptime = 0.0 if self._wall_started is None \
            else time.monotonic() - self._wall_started
        return {"status": "ok" if self._running else "stopped",
                "uptime_s": round(uptime, 3),
                "clock_synced": self.clock.synced}
