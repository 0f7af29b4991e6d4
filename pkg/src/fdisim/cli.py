"""Command-line interface.

Subcommands:
  run               execute one scenario and write traces + metrics
  bench             Monte Carlo over consecutive seeds, aggregate report
  latency-report    per-component / end-to-end delay statistics CSV
  calibrate-attack  bisect the largest stealthy ramp rate for the scenario

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .attack import CalibrationError, calibrate_stealth_rate
from .config import ConfigError, load_config
from .estimator import MonitorConfig
from .reports import latency_report, monte_carlo, report_to_json
from .runner import resolve_attack, run_scenario
from .traces import emit_traces


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdisim",
        description="UAV false-data-injection simulation and benchmarking")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario and write traces")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
    p_run.add_argument("--out", required=True, help="output directory")

    p_bench = sub.add_parser("bench", help="Monte Carlo benchmark")
    p_bench.add_argument("--config", required=True)
    p_bench.add_argument("--runs", type=int, required=True)
    p_bench.add_argument("--attack", choices=["off"], default=None,
                         help="force the attack off (control runs)")
    p_bench.add_argument("--jobs", type=int, default=1,
                         help="parallel worker processes")
    p_bench.add_argument("--out", required=True, help="output directory")

    p_lat = sub.add_parser("latency-report",
                           help="latency statistics CSV (milliseconds)")
    p_lat.add_argument("--config", required=True)
    p_lat.add_argument("--samples", type=int, required=True)
    p_lat.add_argument("--out", default=None,
                       help="write CSV here instead of stdout")

    p_cal = sub.add_parser("calibrate-attack",
                           help="find the largest stealthy ramp rate")
    p_cal.add_argument("--config", required=True)
    p_cal.add_argument("--margin", type=float, default=None,
                       help="override attack.margin")
    p_cal.add_argument("--iters", type=int, default=None,
                       help="override attack.iters")
    return parser


def _cmd_run(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    cfg, calibration = resolve_attack(cfg)
    if calibration is not None:
        print(f"calibrated ramp rate: {calibration.ramp_rate:.6g} m/s"
              + (" (r_max, still stealthy)" if calibration.hit_r_max else ""))
    trace, metrics = run_scenario(cfg)
    emit_traces(trace, metrics, cfg.raw, args.out)
    print(json.dumps(metrics.to_dict(), indent=2))
    print(f"traces written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    cfg = load_config(args.config)
    report = monte_carlo(cfg, args.runs, attack_off=args.attack == "off",
                         jobs=max(1, args.jobs))
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "bench_report.json")
    with open(path, "w") as fh:
        fh.write(report_to_json(report))
    for key in ("detection_rate", "false_alarm_rate", "time_to_detect_s",
                "max_deviation_m"):
        print(f"{key}: {report[key]}")
    print(f"report written to {path}")
    return 0


def _cmd_latency(args) -> int:
    cfg = load_config(args.config)
    csv_text = latency_report(cfg.gnss_budget, args.samples, seed=cfg.seed)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(csv_text)
        print(f"latency report written to {args.out}")
    else:
        sys.stdout.write(csv_text)
    return 0


def _cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    margin = cfg.attack_margin if args.margin is None else args.margin
    iters = cfg.attack_iters if args.iters is None else args.iters
    gamma_on = MonitorConfig(cfg.monitor_alpha).gamma
    result = calibrate_stealth_rate(cfg, gamma_on, margin, iters)
    print(json.dumps({
        "ramp_rate_mps": result.ramp_rate,
        "hit_r_max": result.hit_r_max,
        "max_q_at_rate": result.max_q_at_rate,
        "max_q_null": result.max_q_null,
        "budget": result.budget,
        "evaluations": result.evaluations,
    }, indent=2))
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "bench": _cmd_bench,
        "latency-report": _cmd_latency,
        "calibrate-attack": _cmd_calibrate,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failure boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
