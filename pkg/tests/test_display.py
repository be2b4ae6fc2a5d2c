import io

from aquamon.display import (PAGE_ORDER, WIDTH, format_page, page_index,
                             render_frame)
from aquamon.domain import ParameterKind, iso_from_epoch
from conftest import EPOCH


class TestPaging:
    def test_cycles_every_three_seconds_in_fixed_order(self):
        seen = [page_index(EPOCH + i * 3.0) for i in range(len(PAGE_ORDER) * 2)]
        base = seen[0]
        expected = [(base + i) % len(PAGE_ORDER)
                    for i in range(len(PAGE_ORDER) * 2)]
        assert seen == expected

    def test_stable_within_a_page(self):
        assert page_index(EPOCH + 0.1) == page_index(EPOCH + 2.9)
        assert page_index(EPOCH + 2.9) != page_index(EPOCH + 3.1)


class TestFormat:
    def test_ph_line(self):
        _, line2 = format_page(ParameterKind.PH, 7.02)
        assert line2.rstrip() == "pH: 7.02"
        assert len(line2) <= WIDTH

    def test_all_pages_fit_sixteen_columns(self):
        for kind in PAGE_ORDER:
            line1, line2 = format_page(kind, 1234.5678)
            assert len(line1) == WIDTH
            assert len(line2) == WIDTH

    def test_alert_marks_title(self):
        line1, _ = format_page(ParameterKind.TURBIDITY, 80.0, status="alert")
        assert line1.startswith("!")

    def test_missing_value(self):
        _, line2 = format_page(ParameterKind.TDS, None)
        assert "--" in line2


class TestRenderFrame:
    def snapshot(self, t, value=26.0):
        kind = PAGE_ORDER[page_index(t)]
        return {
            "server_time": iso_from_epoch(t),
            "readings": {kind.value: {"value": value}},
            "statuses": {kind.value: "ok"},
        }

    def test_uses_server_clock_page(self):
        t = EPOCH + 12.0  # page 4 of the cycle
        frame = render_frame(self.snapshot(t))
        kind = PAGE_ORDER[page_index(t)]
        assert kind.label.split()[0].lower() in frame[0].lower() or \
            frame[0].strip().startswith(kind.label[:4])

    def test_handles_absent_reading(self):
        t = EPOCH
        snap = {"server_time": iso_from_epoch(t), "readings": {},
                "statuses": {}}
        _, line2 = render_frame(snap)
        assert "--" in line2
