"""16x2 character display emulation.

Renders one parameter page at a time in the fixed kind order, cycling
every 3 simulated seconds; the page index is a pure function of the
server's clock so accelerated runs cycle proportionally faster.
"""

from __future__ import annotations

import json
import time
import urllib.error
import urllib.request

from .domain import ParameterKind, epoch_from_iso

PAGE_PERIOD_S = 3.0
WIDTH = 16

PAGE_ORDER = [
    ParameterKind.AIR_TEMPERATURE,
    ParameterKind.HUMIDITY,
    ParameterKind.WATER_TEMPERATURE,
    ParameterKind.TDS,
    ParameterKind.PH,
    ParameterKind.TURBIDITY,
    ParameterKind.FOOD_DISTANCE,
]

_PREFIX = {
    ParameterKind.AIR_TEMPERATURE: ("Air Temp", "Air", "C"),
    ParameterKind.HUMIDITY: ("Humidity", "Hum", "%"),
    ParameterKind.WATER_TEMPERATURE: ("Water Temp", "Wtr", "C"),
    ParameterKind.TDS: ("TDS", "TDS", "ppm"),
    ParameterKind.PH: ("pH Level", "pH", ""),
    ParameterKind.TURBIDITY: ("Turbidity", "Turb", "NTU"),
    ParameterKind.FOOD_DISTANCE: ("Food Level", "Food", "cm"),
}


def page_index(server_time_s: float, period: float = PAGE_PERIOD_S) -> int:
    """Which page a display synced to the service clock shows."""
    return int(server_time_s // period) % len(PAGE_ORDER)


def format_page(kind: ParameterKind, value, status: str = "ok") -> tuple[str, str]:
    """One 16x2 frame: title line and value line, both clipped to 16 chars."""
    title, prefix, unit = _PREFIX[kind]
    if status == "alert":
        title = f"!{title}"
    if value is None:
        body = f"{prefix}: --"
    else:
        body = f"{prefix}: {value:.2f}"
        if unit:
            body = f"{body} {unit}"
    return title[:WIDTH].ljust(WIDTH), body[:WIDTH].ljust(WIDTH)


def render_frame(snapshot: dict) -> tuple[str, str]:
    """Frame for the page selected by the snapshot's server time."""
    t = epoch_from_iso(snapshot["server_time"])
    kind = PAGE_ORDER[page_index(t)]
    reading = snapshot["readings"].get(kind.value)
    status = snapshot["statuses"].get(kind.value, "ok")
    value = None if reading is None else reading["value"]
    return format_page(kind, value, status)


def run_display(base_url: str, frames: int = 0, wall_interval: float = 0.5,
                out=None) -> None:
    """Poll the service and print frames until interrupted.

    frames > 0 limits the number of frames (useful for scripting); the
    wall interval caps the redraw rate regardless of speedup.
    """
    import sys
    out = out or sys.stdout
    drawn = 0
    while frames <= 0 or drawn < frames:
        try:
            with urllib.request.urlopen(f"{base_url}/api/readings",
                                        timeout=5) as resp:
                snapshot = json.loads(resp.read().decode("utf-8"))
            line1, line2 = render_frame(snapshot)
            out.write(f"+{'-' * WIDTH}+\n|{line1}|\n|{line2}|\n")
            out.flush()
        except (urllib.error.URLError, OSError, json.JSONDecodeError) as exc:
            out.write(f"[display] service unreachable ({exc}); retrying\n")
            out.flush()
        drawn += 1
        if frames <= 0 or drawn < frames:
            time.sleep(wall_interval)
