import json

import pytest
from hypothesis import given, strategies as st

from aquamon.domain import (AlertEvent, AlertRecordPayload, CommandEvent,
                            CommandSource, Direction, EventRecord, FaultKind,
                            FeedCommand, FeedResultPayload, ParameterKind,
                            ParameterReading, PumpSetCommand, Quality,
                            RawSample, RecoveryNotePayload, RuleAction,
                            SensorSnapshot, SystemFaultPayload, ThresholdRule,
                            default_rules, epoch_from_iso, iso_from_epoch,
                            violates)

EPOCH = 1735689600.0


class TestParameterKind:
    def test_exactly_seven_kinds(self):
        assert len(ParameterKind) == 7

    def test_units(self):
        assert ParameterKind.TDS.unit == "ppm"
        assert ParameterKind.PH.unit == "pH"
        assert ParameterKind.TURBIDITY.unit == "NTU"
        assert ParameterKind.HUMIDITY.unit == "%RH"

    @pytest.mark.parametrize("kind,expected", [
        (ParameterKind.TDS, (0.0, 1000.0)),
        (ParameterKind.PH, (0.0, 14.0)),
        (ParameterKind.TURBIDITY, (0.0, 1000.0)),
        (ParameterKind.FOOD_DISTANCE, (0.0, 5.0)),
        (ParameterKind.WATER_TEMPERATURE, (-10.0, 60.0)),
        (ParameterKind.HUMIDITY, (0.0, 100.0)),
    ])
    def test_physical_ranges(self, kind, expected):
        assert kind.physical_range == expected


class TestDefaultRules:
    def test_seven_rules(self):
        rules = default_rules()
        assert len(rules) == 7
        assert {r.kind for r in rules} == set(ParameterKind)

    def test_water_temperature_band(self):
        rule = next(r for r in default_rules()
                    if r.kind is ParameterKind.WATER_TEMPERATURE)
        assert (rule.lower, rule.upper, rule.action) == \
            (24.0, 28.0, RuleAction.ALERT)

    def test_turbidity_upper_only(self):
        rule = next(r for r in default_rules()
                    if r.kind is ParameterKind.TURBIDITY)
        assert rule.lower is None
        assert rule.upper == 50.0
        assert rule.action is RuleAction.ALERT

    def test_food_distance_allows_feeding(self):
        rule = next(r for r in default_rules()
                    if r.kind is ParameterKind.FOOD_DISTANCE)
        assert rule.upper == 5.0
        assert rule.action is RuleAction.ALLOW_FEEDING

    def test_full_table(self):
        bands = {r.kind: (r.lower, r.upper) for r in default_rules()}
        assert bands[ParameterKind.AIR_TEMPERATURE] == (15.0, 30.0)
        assert bands[ParameterKind.HUMIDITY] == (30.0, 80.0)
        assert bands[ParameterKind.TDS] == (180.0, 280.0)
        assert bands[ParameterKind.PH] == (6.8, 8.2)

    def test_deterministic(self):
        assert default_rules() == default_rules()

    def test_round_trips_through_serialization(self):
        rules = default_rules()
        again = [ThresholdRule.from_json_obj(json.loads(
            json.dumps(r.to_json_obj()))) for r in rules]
        assert again == rules


class TestViolates:
    def setup_method(self):
        self.rules = {r.kind: r for r in default_rules()}

    def test_boundary_is_safe(self):
        assert violates(self.rules[ParameterKind.WATER_TEMPERATURE], 28.0) is None

    def test_ph_below(self):
        assert violates(self.rules[ParameterKind.PH], 6.5) is Direction.BELOW_LOWER

    def test_turbidity_boundary(self):
        assert violates(self.rules[ParameterKind.TURBIDITY], 50.0) is None

    def test_above_upper(self):
        assert violates(self.rules[ParameterKind.TDS], 280.5) is Direction.ABOVE_UPPER

    @given(st.floats(min_value=-1e6, max_value=1e6,
                     allow_nan=False, allow_infinity=False))
    def test_at_most_one_direction(self, value):
        for rule in default_rules():
            assert violates(rule, value) in \
                (None, Direction.BELOW_LOWER, Direction.ABOVE_UPPER)

    @given(st.floats(min_value=-100, max_value=23.999, allow_nan=False),
           st.floats(min_value=-100, max_value=23.999, allow_nan=False))
    def test_monotone_below(self, v1, v2):
        rule = self.rules[ParameterKind.WATER_TEMPERATURE]
        lo, hi = sorted((v1, v2))
        assert violates(rule, lo) is Direction.BELOW_LOWER
        assert violates(rule, hi) is Direction.BELOW_LOWER

    def test_rule_needs_a_bound(self):
        with pytest.raises(ValueError):
            ThresholdRule(ParameterKind.PH, None, None, RuleAction.ALERT)

    def test_rule_bounds_ordered(self):
        with pytest.raises(ValueError):
            ThresholdRule(ParameterKind.PH, 8.0, 6.0, RuleAction.ALERT)


class TestTimestamps:
    def test_iso_round_trip(self):
        assert epoch_from_iso(iso_from_epoch(EPOCH + 5.25)) == EPOCH + 5.25

    def test_utc_zulu_format(self):
        assert iso_from_epoch(EPOCH) == "2025-01-01T00:00:00.000000Z"


class TestRawSample:
    def test_counts_range_enforced(self):
        with pytest.raises(ValueError):
            RawSample(ParameterKind.PH, 4096, 0.0)
        with pytest.raises(ValueError):
            RawSample(ParameterKind.PH, -1, 0.0)


class TestSerialization:
    def test_reading_round_trip(self):
        r = ParameterReading(ParameterKind.PH, 7.02, EPOCH + 10, Quality.VALID)
        assert ParameterReading.from_json_obj(r.to_json_obj()) == r

    def test_alert_key_low_food(self):
        alert = AlertEvent(None, Direction.LOW_FOOD, 5.0, EPOCH, "empty")
        assert alert.key == "low_food"
        assert AlertEvent.from_json_obj(alert.to_json_obj()) == alert

    def test_alert_key_parameter(self):
        alert = AlertEvent(ParameterKind.PH, Direction.BELOW_LOWER, 6.5,
                           EPOCH, "low")
        assert alert.key == "ph.below_lower"

    @pytest.mark.parametrize("payload", [
        SensorSnapshot((ParameterReading(ParameterKind.TDS, 230.0, EPOCH,
                                         Quality.VALID),)),
        CommandEvent(FeedCommand(2, CommandSource.MANUAL, EPOCH)),
        CommandEvent(PumpSetCommand(False, CommandSource.MANUAL, EPOCH)),
        AlertRecordPayload(AlertEvent(ParameterKind.TURBIDITY,
                                      Direction.ABOVE_UPPER, 80.0, EPOCH,
                                      "cloudy"), suppressed=True),
        SystemFaultPayload(FaultKind.POWER_LOSS),
        FeedResultPayload(1, 0.5, True, "ok"),
        RecoveryNotePayload("back_in_band", {"kind": "ph"}),
    ])
    def test_record_round_trip(self, payload):
        record = EventRecord(3, EPOCH + 42.5, payload)
        line = record.to_json_line()
        assert EventRecord.from_json_line(line) == record

    def test_line_is_single_line_json(self):
        record = EventRecord(1, EPOCH, SystemFaultPayload(FaultKind.NETWORK_UP))
        line = record.to_json_line()
        assert "\n" not in line
        obj = json.loads(line)
        assert obj["sequence_number"] == 1
        assert obj["payload"]["type"] == "system_fault"

    @given(st.integers(min_value=1, max_value=10**9),
           st.floats(min_value=EPOCH, max_value=EPOCH + 10**7),
           st.sampled_from(list(ParameterKind)),
           st.floats(allow_nan=False, allow_infinity=False,
                     min_value=-1e6, max_value=1e6),
           st.sampled_from(list(Quality)))
    def test_snapshot_round_trip_property(self, seq, ts, kind, value, quality):
        ts = round(ts, 6)  # ISO form carries microseconds
        record = EventRecord(seq, ts, SensorSnapshot(
            (ParameterReading(kind, value, ts, quality),)))
        assert EventRecord.from_json_line(record.to_json_line()) == record

    def test_feed_command_validates_portions(self):
        with pytest.raises(ValueError):
            FeedCommand(0, CommandSource.MANUAL, EPOCH)
