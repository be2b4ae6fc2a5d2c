"""Operator entry points: run, eval, display, serve.

Exit codes: 0 success, 1 usage error, 2 runtime error.  Flags may also be
set through AQUA_PORT, AQUA_LOG_DIR, AQUA_CONFIG, AQUA_SCENARIO and
AQUA_SPEEDUP environment variables (flags win).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .config import ControllerConfig, RunConfig, load_controller_config
from .display import run_display
from .eventlog import read_run
from .metrics import GroundTruthTrace, evaluate
from .runtime import AquariumRuntime
from .scenario import STANDARD_72H, parse_time
from .service import DEFAULT_PORT, TelemetryService

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


def _env(name: str, fallback):
    return os.environ.get(f"AQUA_{name}", fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aquamon",
        description="Simulated smart-aquarium stack: run scenarios, serve "
                    "telemetry, evaluate logs, emulate the local display.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a scenario with the full stack")
    _add_run_flags(run_p)
    run_p.add_argument("--duration", default="72h",
                       help="simulated run length (default 72h)")
    run_p.add_argument("--scenario", default=_env("SCENARIO", STANDARD_72H),
                       help=f"scenario file, or '{STANDARD_72H}' (default)")
    run_p.add_argument("--no-serve", action="store_true",
                       help="skip the HTTP service (headless run)")

    serve_p = sub.add_parser("serve", help="serve a quiet tank indefinitely")
    _add_run_flags(serve_p)

    eval_p = sub.add_parser("eval", help="evaluate run artifacts")
    eval_p.add_argument("trace", help="ground-truth trace file (*.trace.ndjson)")
    eval_p.add_argument("log", help="segment file or the log directory")
    eval_p.add_argument("--report", help="write the JSON report here "
                        "(default: <run-id>.report.json beside the log)")

    disp_p = sub.add_parser("display", help="16x2 local display emulation")
    disp_p.add_argument("address", nargs="?",
                        default=f"http://127.0.0.1:{_env('PORT', DEFAULT_PORT)}")
    disp_p.add_argument("--frames", type=int, default=0,
                        help="stop after N frames (0 = run forever)")
    disp_p.add_argument("--interval", type=float, default=0.5,
                        help="wall seconds between redraws")
    return parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--speedup", type=float,
                   default=float(_env("SPEEDUP", 3600.0)),
                   help="simulated seconds per wall second (default 3600)")
    p.add_argument("--port", type=int, default=int(_env("PORT", DEFAULT_PORT)))
    p.add_argument("--log-dir", default=_env("LOG_DIR", "./logs"))
    p.add_argument("--config", default=_env("CONFIG", None),
                   help="controller config JSON (rules, cooldown, schedule)")
    p.add_argument("--calibration", default=None,
                   help="two-point calibration file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--run-id", default=None)
    p.add_argument("--static-dir", default=None,
                   help="dashboard assets to serve at / "
                        "(default: ./frontend/dist when present)")


def _controller_config(args) -> ControllerConfig:
    if args.config:
        return load_controller_config(args.config)
    return ControllerConfig()


def _static_dir(args):
    if args.static_dir:
        return args.static_dir
    candidate = Path("frontend/dist")
    return candidate if candidate.is_dir() else None


def cmd_run(args, duration_s: float, scenario) -> int:
    try:
        run_cfg = RunConfig(
            scenario=scenario,
            duration_s=duration_s,
            speedup=args.speedup,
            port=args.port,
            log_dir=args.log_dir,
            calibration=args.calibration,
            config=args.config,
            seed=args.seed,
            run_id=args.run_id,
            serve=not getattr(args, "no_serve", False),
        )
        runtime = AquariumRuntime(run_cfg, _controller_config(args))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    service = None
    if run_cfg.serve:
        try:
            service = TelemetryService(runtime, port=run_cfg.port,
                                       static_dir=_static_dir(args))
        except OSError as exc:
            print(f"error: cannot bind port {run_cfg.port}: {exc}",
                  file=sys.stderr)
            return EXIT_RUNTIME
        service.start()
        print(f"telemetry: http://127.0.0.1:{service.port}/api/readings")

    print(f"run {runtime.run_id}: {duration_s / 3600:.2f} h simulated at "
          f"speedup {run_cfg.speedup:g}, logs in {run_cfg.log_dir}")
    try:
        runtime.run()
    except KeyboardInterrupt:
        runtime.stop()
        print("interrupted; segment closed cleanly")
    except Exception as exc:
        logger.exception("run failed")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if service is not None:
            service.stop()
    print(f"done: {runtime.cycle} poll cycles, "
          f"{len(runtime.all_records)} records persisted")
    return EXIT_OK


def cmd_eval(args) -> int:
    trace_path = Path(args.trace)
    log_path = Path(args.log)
    if not trace_path.is_file():
        print(f"error: no trace file at {trace_path}", file=sys.stderr)
        return EXIT_RUNTIME

    run_id = trace_path.name.removesuffix(".trace.ndjson")
    log_dir = log_path if log_path.is_dir() else log_path.parent
    if not log_path.exists():
        print(f"error: no log at {log_path}", file=sys.stderr)
        return EXIT_RUNTIME

    corrupt = []
    try:
        trace = GroundTruthTrace.load(trace_path)
        segments = read_run(log_dir, run_id, on_corrupt=corrupt.append)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: unreadable artifacts: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if not segments or not any(recs for _, recs in segments):
        print(f"error: no records for run {run_id} in {log_dir}",
              file=sys.stderr)
        return EXIT_RUNTIME

    report = evaluate(trace, segments)
    print(report.to_table())
    for item in corrupt:
        print(f"warning: skipped corrupt record in {item.path} at byte "
              f"{item.byte_offset}", file=sys.stderr)

    report_path = Path(args.report) if args.report \
        else log_dir / f"{run_id}.report.json"
    report_path.write_text(json.dumps(report.to_json_obj(), indent=2) + "\n",
                           encoding="utf-8")
    print(f"\nreport written to {report_path}")
    return EXIT_OK


def cmd_display(args) -> int:
    try:
        run_display(args.address.rstrip("/"), frames=args.frames,
                    wall_interval=args.interval)
    except KeyboardInterrupt:
        pass
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    if args.command == "run":
        try:
            duration = parse_time(args.duration)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        scenario = args.scenario
        if scenario not in (None, STANDARD_72H) and not Path(scenario).is_file():
            print(f"error: scenario file not found: {scenario}", file=sys.stderr)
            return EXIT_RUNTIME
        return cmd_run(args, duration, scenario)
    if args.command == "serve":
        return cmd_run(args, duration_s=365 * 86400.0, scenario=None)
    if args.command == "eval":
        return cmd_eval(args)
    if args.command == "display":
        return cmd_display(args)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
