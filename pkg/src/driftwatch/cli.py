"""Command-line entry points: run fleet simulations and serve the API."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import DriftwatchError
from .sim import STRATEGIES, SimConfig, run


def _load_sim_config(path: str | None) -> SimConfig:
    if path is None:
        return SimConfig()
    raw = json.loads(Path(path).read_text())
    return SimConfig.from_dict(raw)


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load_sim_config(args.config)
    report = run(config, args.strategy)
    payload = report.to_dict()
    payload["report_hash"] = report.report_hash()
    out = Path(args.out)
    out.write_text(json.dumps(payload, indent=1))
    summary = [
        f"strategy={report.strategy}",
        f"events={sum(w.n_events for w in report.windows)}",
        f"accuracy_all={report.accuracy_all:.4f}",
        f"accuracy_drifted={report.accuracy_drifted:.4f}",
    ]
    print("  ".join(summary))
    print(f"{'window':>6} {'events':>7} {'acc_all':>8} {'acc_drift':>9} {'rate':>6} {'versions':>8}")
    for w in report.windows:
        print(
            f"{w.window_id:>6} {w.n_events:>7} {w.accuracy_all():>8.4f} "
            f"{w.accuracy_drifted():>9.4f} {w.drift_rate():>6.3f} {w.version_count:>8}"
        )
    print(f"report written to {out}")
    return 0


def cmd_make_config(args: argparse.Namespace) -> int:
    Path(args.out).write_text(json.dumps(SimConfig().to_dict(), indent=1))
    print(f"default config written to {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    # imported here so `simulate` works without the service stack
    from .httpapi import ApiServer
    from .service import MonitorService, ServiceConfig, schedule_weather_provider
    from .sim import DEFAULT_LOCATIONS
    from .toymodel import default_task, train_clean
    from .weather import WeatherSchedule

    from .rca import Thresholds

    raw = {}
    if args.config is not None:
        raw = json.loads(Path(args.config).read_text())
    service_config = ServiceConfig(
        schema=tuple(raw.get("schema", ("device_id", "location", "weather"))),
        log_path=Path(raw["log_path"]) if raw.get("log_path") else None,
        thresholds=Thresholds(**raw.get("thresholds", {})),
        mode=raw.get("mode", "autopilot"),
        window_seconds=float(raw.get("window_seconds", 86400.0)),
        pool_capacity=raw.get("pool_capacity", 4),
        min_adapt_batch=int(raw.get("min_adapt_batch", 32)),
    )
    task = default_task(seed=int(raw.get("task_seed", 0)))
    model = train_clean(task, seed=int(raw.get("model_seed", 7)))
    schedule = WeatherSchedule.generate(
        raw.get("locations", list(DEFAULT_LOCATIONS)),
        int(raw.get("n_days", 111)),
        int(raw.get("seed", 0)),
    )
    service = MonitorService(
        service_config, model, weather_provider=schedule_weather_provider(schedule)
    )
    server = ApiServer(service, host=args.host, port=args.port)
    server.start()
    print(f"monitor service listening on {server.url}")
    try:
        server._thread.join()
    except KeyboardInterrupt:
        server.stop()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="driftwatch")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a fleet simulation")
    sim.add_argument("--config", help="JSON SimConfig file (defaults used if omitted)")
    sim.add_argument("--strategy", choices=STRATEGIES, required=True)
    sim.add_argument("--out", required=True, help="where to write the JSON report")
    sim.set_defaults(fn=cmd_simulate)

    mk = sub.add_parser("make-config", help="write the default simulation config")
    mk.add_argument("--out", required=True)
    mk.set_defaults(fn=cmd_make_config)

    srv = sub.add_parser("serve", help="start the monitor service HTTP API")
    srv.add_argument("--config", help="JSON service config file")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8077)
    srv.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DriftwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
