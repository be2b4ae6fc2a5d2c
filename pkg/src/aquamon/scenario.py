"""Scenario script files: declarative perturbation schedules for the tank.

Format, one perturbation per line::

    # type       start    magnitude  duration
    heater       8h       0.6        25m
    network_outage 30h2s  0          26s

Times accept bare seconds or concatenated h/m/s parts ("30h2s").  Magnitude
units depend on the type: heater °C/min, vinegar total pH drop, soil total
NTU rise; refill/network_outage/power_cycle ignore it.
"""

from __future__ import annotations

import re
from importlib import resources

from .plant import Perturbation, PerturbationKind, validate_script

_TIME_PART = re.compile(r"(\d+(?:\.\d+)?)([hms])")


def parse_time(text: str) -> float:
    """'26', '26s', '5m', '30h2s' -> seconds."""
    text = text.strip()
    if re.fullmatch(r"\d+(?:\.\d+)?", text):
        return float(text)
    parts = _TIME_PART.findall(text)
    if not parts or "".join(f"{n}{u}" for n, u in parts) != text:
        raise ValueError(f"bad time value {text!r}")
    scale = {"h": 3600.0, "m": 60.0, "s": 1.0}
    return sum(float(n) * scale[u] for n, u in parts)


def parse_script(text: str, name: str = "<script>") -> list[Perturbation]:
    script = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(
                f"{name}:{lineno}: expected 'type start magnitude duration', "
                f"got {raw.rstrip()!r}")
        try:
            kind = PerturbationKind(parts[0])
        except ValueError:
            raise ValueError(f"{name}:{lineno}: unknown perturbation type "
                             f"{parts[0]!r}") from None
        script.append(Perturbation(
            kind=kind,
            start=parse_time(parts[1]),
            magnitude=float(parts[2]),
            duration=parse_time(parts[3]),
        ))
    script.sort(key=lambda p: p.start)
    validate_script(script)
    return script


def load_script(path) -> list[Perturbation]:
    with open(path, encoding="utf-8") as fh:
        return parse_script(fh.read(), name=str(path))


STANDARD_72H = "standard-72h"
STANDARD_72H_DURATION = 72 * 3600.0


def standard_script() -> list[Perturbation]:
    """The shipped 72 h experiment: heater/vinegar/soil excursions plus one
    network outage and one power cycle."""
    text = resources.files("aquamon").joinpath(
        f"scenarios/{STANDARD_72H}.txt").read_text(encoding="utf-8")
    return parse_script(text, name=STANDARD_72H)
