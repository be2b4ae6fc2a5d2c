import threading

import pytest

from aquamon.config import ControllerConfig, RunConfig
from aquamon.domain import FaultKind, ParameterKind, Quality
from aquamon.eventlog import read_run
from aquamon.metrics import flatten
from aquamon.plant import Perturbation, PerturbationKind
from aquamon.publisher import MemorySink
from aquamon.runtime import AquariumRuntime
from conftest import EPOCH, execute_run


def make_runtime(tmp_path, duration=600.0, script=None, seed=0,
                 controller=None, sink=None):
    cfg = RunConfig(scenario=None, duration_s=duration, speedup=1e9,
                    log_dir=str(tmp_path), seed=seed, serve=False)
    return AquariumRuntime(cfg, controller or ControllerConfig(),
                           sink=sink, script=script or [])


class TestQuietRun:
    def test_one_snapshot_record_per_cycle(self, tmp_path):
        rt = make_runtime(tmp_path, duration=300.0)
        rt.run()
        assert rt.cycle == 60
        snapshots = [r for r in rt.all_records
                     if r.payload.type == "sensor_snapshot"]
        assert len(snapshots) == 60

    def test_no_alerts_at_equilibrium(self, tmp_path):
        rt = make_runtime(tmp_path, duration=1800.0)
        rt.run()
        assert [r for r in rt.all_records if r.payload.type == "alert"] == []

    def test_snapshot_cell_populated(self, tmp_path):
        rt = make_runtime(tmp_path, duration=60.0)
        assert rt.snapshot() is None  # service starting
        rt.run()
        snap = rt.snapshot()
        assert snap["poll_cycle"] == 12
        assert set(snap["readings"]) <= {k.value for k in ParameterKind}
        assert all(s == "ok" for s in snap["statuses"].values())

    def test_readings_warm_up_then_valid(self, tmp_path):
        rt = make_runtime(tmp_path, duration=60.0)
        rt.run()
        first = rt.all_records[0].payload.readings
        assert all(r.quality is Quality.SMOOTHING for r in first)
        last = rt.all_records[-1].payload.readings
        assert all(r.quality is Quality.VALID for r in last)

    def test_trace_rows_cover_every_tick(self, tmp_path):
        rt = make_runtime(tmp_path, duration=300.0)
        rt.run()
        rows = rt.trace_path.read_text().strip().splitlines()
        assert len(rows) == 61  # t=0 plus 60 ticks


def wait_for_valid_readings(rt):
    """Block until smoothing warm-up is over (food reading usable)."""
    while True:
        snap = rt.snapshot()
        if snap is not None:
            food = snap["readings"].get("food_distance")
            if food is not None and food["quality"] == "valid":
                return


class TestCommands:
    def test_feed_command_acknowledged(self, tmp_path):
        # real-time loop so commands interleave with ticks
        cfg = RunConfig(scenario=None, duration_s=60.0, speedup=60.0,
                        log_dir=str(tmp_path), seed=0, serve=False)
        rt = AquariumRuntime(cfg, ControllerConfig(), script=[])
        thread = threading.Thread(target=rt.run, daemon=True)
        thread.start()
        try:
            wait_for_valid_readings(rt)
            result = rt.submit_feed(1, timeout=5.0)
            assert result["accepted"] is True
            assert result["dispensed_g"] == 0.5
            result2 = rt.submit_feed(2, timeout=5.0)
            assert result2["dispensed_g"] == 1.0
            assert result2["feeder"]["total_dispensed_g"] == 1.5
        finally:
            rt.stop()
            thread.join(timeout=10)
        results = [r for r in rt.all_records
                   if r.payload.type == "feed_result"]
        assert [r.payload.ok for r in results] == [True, True]
        # world consumed the feed: 3 portions of hopper depth
        assert rt.world.food_depth == pytest.approx(
            4.5 + 3 * 0.05, abs=0.01)

    def test_pump_toggle_reaches_world(self, tmp_path):
        cfg = RunConfig(scenario=None, duration_s=40.0, speedup=40.0,
                        log_dir=str(tmp_path), seed=0, serve=False)
        rt = AquariumRuntime(cfg, ControllerConfig(), script=[])
        thread = threading.Thread(target=rt.run, daemon=True)
        thread.start()
        try:
            while rt.snapshot() is None:
                pass
            result = rt.submit_pump(False, timeout=5.0)
            assert result["on"] is False
            assert rt.world.pump_on is False
            result = rt.submit_pump(True, timeout=5.0)
            assert result["on"] is True
        finally:
            rt.stop()
            thread.join(timeout=10)
        commands = [r for r in rt.all_records if r.payload.type == "command"]
        assert [c.payload.command.on for c in commands] == [False, True]

    def test_invalid_portions_rejected(self, tmp_path):
        rt = make_runtime(tmp_path)
        assert rt.submit_feed(0) == {"error": "invalid_portions"}

    def test_unavailable_when_stopped(self, tmp_path):
        rt = make_runtime(tmp_path)
        assert rt.submit_feed(1) == {"error": "control_unavailable"}
        rt.run()
        assert rt.submit_pump(False) == {"error": "control_unavailable"}

    def test_low_food_rejection_via_command(self, tmp_path):
        controller = ControllerConfig(initial_food_depth=5.0)
        cfg = RunConfig(scenario=None, duration_s=60.0, speedup=60.0,
                        log_dir=str(tmp_path), seed=0, serve=False)
        rt = AquariumRuntime(cfg, controller, script=[])
        thread = threading.Thread(target=rt.run, daemon=True)
        thread.start()
        try:
            wait_for_valid_readings(rt)
            result = rt.submit_feed(1, timeout=5.0)
            assert result["accepted"] is False
            assert result["reason"] == "low_food"
        finally:
            rt.stop()
            thread.join(timeout=10)
        alerts = [r for r in rt.all_records if r.payload.type == "alert"]
        assert any(r.payload.alert.key == "low_food" for r in alerts)


class TestScheduledFeeding:
    def test_two_slots_fire_in_a_day(self, tmp_path):
        controller = ControllerConfig(feed_schedule=("08:00", "20:00"))
        rt = make_runtime(tmp_path, duration=86400.0, controller=controller)
        rt.run()
        feeds = [r for r in rt.all_records if r.payload.type == "command"
                 and r.payload.command.variant == "feed"]
        assert len(feeds) == 2
        assert [r.timestamp - EPOCH for r in feeds] == [8 * 3600.0, 20 * 3600.0]
        results = [r for r in rt.all_records
                   if r.payload.type == "feed_result"]
        assert all(r.payload.ok for r in results)
        assert rt.engine.feeder.total_dispensed_g == 1.0


class TestNetworkOutage:
    def test_fault_records_and_publisher_recovery(self, tmp_path):
        script = [Perturbation(PerturbationKind.NETWORK_OUTAGE, 102.0, 0, 26.0)]
        sink = MemorySink()
        rt = make_runtime(tmp_path, duration=300.0, script=script, sink=sink)
        rt.run()
        faults = [r for r in rt.all_records if r.payload.type == "system_fault"]
        assert [f.payload.fault for f in faults] == [FaultKind.NETWORK_DOWN,
                                                     FaultKind.NETWORK_UP]
        assert faults[0].timestamp == EPOCH + 102.0  # exact fault edge
        assert faults[1].timestamp == EPOCH + 128.0
        notes = [r for r in rt.all_records
                 if r.payload.type == "recovery_note"
                 and r.payload.note == "publisher_resumed"]
        assert len(notes) == 1
        # resumed at the first poll after the link came back
        assert notes[0].timestamp == EPOCH + 130.0
        # nothing lost: queued lines were drained in order
        assert rt.publisher.dropped_total == 0
        assert len(sink.delivered) == len(rt.all_records)


class TestPowerCycle:
    def script(self):
        return [Perturbation(PerturbationKind.POWER_CYCLE, 123.0, 0, 27.0)]

    def test_segment_rollover(self, tmp_path):
        rt = make_runtime(tmp_path, duration=600.0, script=self.script())
        rt.run()
        segments = read_run(tmp_path, rt.run_id)
        assert len(segments) == 2
        first, second = segments[0][1], segments[1][1]
        assert first[-1].payload.type == "system_fault"
        assert first[-1].payload.fault is FaultKind.POWER_LOSS
        assert first[-1].timestamp == EPOCH + 123.0
        assert second[0].payload.fault is FaultKind.POWER_RESTORE
        assert second[0].timestamp == EPOCH + 150.0

    def test_no_sensor_records_while_off(self, tmp_path):
        rt = make_runtime(tmp_path, duration=600.0, script=self.script())
        rt.run()
        for record in rt.all_records:
            if record.payload.type == "sensor_snapshot":
                assert not (EPOCH + 123.0 < record.timestamp < EPOCH + 150.0)

    def test_smoothing_restarts_after_reboot(self, tmp_path):
        rt = make_runtime(tmp_path, duration=600.0, script=self.script())
        rt.run()
        after = [r for r in rt.all_records
                 if r.payload.type == "sensor_snapshot"
                 and r.timestamp >= EPOCH + 150.0]
        assert all(x.quality is Quality.SMOOTHING
                   for x in after[0].payload.readings)

    def test_cooldown_survives_reboot(self, tmp_path):
        # hold water temperature hot from t=0; power-cycle mid-cooldown
        controller = ControllerConfig(
            sim=ControllerConfig().sim.__class__(ambient_water_temp=29.5))
        script = [Perturbation(PerturbationKind.POWER_CYCLE, 400.0, 0, 27.0)]
        rt = make_runtime(tmp_path, duration=1200.0, script=script,
                          controller=controller)
        rt.run()
        emitted = [r.timestamp for r in rt.all_records
                   if r.payload.type == "alert" and not r.payload.suppressed
                   and r.payload.alert.key == "water_temperature.above_upper"]
        assert len(emitted) >= 2
        gaps = [b - a for a, b in zip(emitted, emitted[1:])]
        assert min(gaps) >= 600.0  # the reboot must not forget the gate

    def test_feeder_totals_rehydrated(self, tmp_path):
        controller = ControllerConfig(feed_schedule=("00:01",))
        script = [Perturbation(PerturbationKind.POWER_CYCLE, 123.0, 0, 27.0)]
        rt = make_runtime(tmp_path, duration=600.0, script=script,
                          controller=controller)
        rt.run()
        assert rt.engine.feeder.total_dispensed_g == 0.5  # fed at 00:01, reboot kept it

    def test_lost_records_reported(self, tmp_path):
        rt = make_runtime(tmp_path, duration=600.0, script=self.script())
        rt.run()
        notes = [r for r in rt.all_records
                 if r.payload.type == "recovery_note"
                 and r.payload.note == "post_power_recovery"]
        assert len(notes) == 1
        gap = notes[0].payload.data["records_lost"]
        segments = read_run(tmp_path, rt.run_id)
        records = flatten(segments)
        seqs = [r.sequence_number for r in records]
        holes = sum(b - a - 1 for a, b in zip(seqs, seqs[1:]) if b > a + 1)
        assert gap == holes


class TestSegmentInvariants:
    def test_timestamps_non_decreasing_within_segments(self, tmp_path):
        from conftest import fuzz_script
        script = fuzz_script(13, 6 * 3600.0)
        run = execute_run(tmp_path, scenario=None, duration_s=6 * 3600.0,
                          seed=13, script=script)
        assert len(run.segments) >= 2  # the fuzz includes a power cycle
        for index, records in run.segments:
            stamps = [r.timestamp for r in records]
            assert stamps == sorted(stamps), f"segment {index} went backward"
            seqs = [r.sequence_number for r in records]
            assert all(b > a for a, b in zip(seqs, seqs[1:]))


class TestPacing:
    def test_wall_clock_tracks_speedup(self, tmp_path):
        import time
        cfg = RunConfig(scenario=None, duration_s=10.0, speedup=5.0,
                        log_dir=str(tmp_path), seed=0, serve=False)
        rt = AquariumRuntime(cfg, ControllerConfig(), script=[])
        started = time.monotonic()
        rt.run()
        elapsed = time.monotonic() - started
        assert 1.6 <= elapsed <= 3.5  # 10 sim seconds at 5x is ~2 s wall


class TestDeterminism:
    def test_identical_seed_identical_bytes(self, tmp_path):
        from conftest import fuzz_script
        script = fuzz_script(7, 4 * 3600.0)
        dirs = [tmp_path / "a", tmp_path / "b"]
        for d in dirs:
            execute_run(d, scenario=None, duration_s=4 * 3600.0, seed=5,
                        script=script)
        files_a = sorted(p.name for p in dirs[0].iterdir())
        files_b = sorted(p.name for p in dirs[1].iterdir())
        assert files_a == files_b
        for name in files_a:
            assert (dirs[0] / name).read_bytes() == \
                (dirs[1] / name).read_bytes(), name

    def test_different_seed_differs(self, tmp_path):
        a = execute_run(tmp_path / "a", scenario=None, duration_s=1800.0,
                        seed=1, script=[])
        b = execute_run(tmp_path / "b", scenario=None, duration_s=1800.0,
                        seed=2, script=[])
        va = [r.payload.readings[0].value for r in a.records
              if r.payload.type == "sensor_snapshot"]
        vb = [r.payload.readings[0].value for r in b.records
              if r.payload.type == "sensor_snapshot"]
        assert va != vb
