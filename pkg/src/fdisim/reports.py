"""Monte Carlo benchmarking and the latency report.

monte_carlo runs a scenario over consecutive seeds and aggregates detection,
false-alarm, and deviation statistics; given the same config and run count
the report is byte-identical across invocations.  latency_report reproduces
the per-component / end-to-end delay statistics table in milliseconds.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .attack import MODE_MEACONING
from .config import ScenarioConfig, parse_config
from .latency import LatencyBudget, latency_stats
from .runner import resolve_attack, run_scenario
from .streams import RngStreams, GNSS_LATENCY


def _run_one(raw_tree: dict, seed: int) -> dict:
    cfg = parse_config(raw_tree).with_seed(seed)
    _, metrics = run_scenario(cfg)
    return metrics.to_dict()


def _dist(values: list[float]) -> dict | None:
    if not values:
        return None
    q1, med, q3 = np.percentile(np.asarray(values, dtype=float), [25, 50, 75])
    return {"median": float(med), "iqr": [float(q1), float(q3)],
            "min": float(min(values)), "max": float(max(values))}


def monte_carlo(cfg: ScenarioConfig, n_runs: int, attack_off: bool = False,
                jobs: int = 1) -> dict:
    """Run seeds seed..seed+n-1 independently and aggregate a report.

    An 'auto' ramp rate is calibrated once, on the base seed, and reused for
    every run.  Individual run failures are recorded in the report rather
    than aborting the batch.  Aggregation is in seed order regardless of
    completion order, so the report is deterministic for (config, n_runs).
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    if attack_off:
        cfg = cfg.with_overrides(attack={"mode": "off"})
    calibrated = None
    if cfg.attack.mode == MODE_MEACONING and cfg.attack_auto:
        cfg, calibration = resolve_attack(cfg)
        calibrated = calibration.ramp_rate

    seeds = [cfg.seed + i for i in range(n_runs)]
    results: list[dict | None] = [None] * n_runs
    failures: list[dict] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_one, cfg.raw, s) for s in seeds]
            for i, fut in enumerate(futures):
                try:
                    results[i] = fut.result()
                except Exception as exc:  # noqa: BLE001 - recorded, not fatal
                    failures.append({"seed": seeds[i], "error": str(exc)})
    else:
        for i, s in enumerate(seeds):
            try:
                results[i] = _run_one(cfg.raw, s)
            except Exception as exc:  # noqa: BLE001
                failures.append({"seed": seeds[i], "error": str(exc)})

    ok = [(s, r) for s, r in zip(seeds, results) if r is not None]
    attack_on = cfg.attack.mode == MODE_MEACONING
    detected = [r for _, r in ok if r["time_to_detect_s"] is not None]
    false_alarms = sum(1 for _, r in ok if r["offboard_false_alarm"])

    report = {
        "n_runs": n_runs,
        "seed_base": cfg.seed,
        "attack_mode": cfg.attack.mode,
        "calibrated_ramp_rate_mps": calibrated,
        "completed_runs": len(ok),
        "failures": failures,
        "detection_rate": (len(detected) / len(ok)) if attack_on and ok else None,
        "time_to_detect_s": _dist([r["time_to_detect_s"] for r in detected]),
        "false_alarm_count": false_alarms,
        "false_alarm_rate": (false_alarms / len(ok)) if ok else None,
        "max_deviation_m": _dist([r["max_deviation_m"] for _, r in ok]),
        "post_mitigation_error_m": _dist(
            [r["post_mitigation_error_m"] for r in detected]),
        "onboard_flags_total": sum(r["onboard_flags"] for _, r in ok),
        "per_run": [dict(seed=s, **r) for s, r in ok],
    }
    return report


def report_to_json(report: dict) -> str:
    return json.dumps(report, indent=2) + "\n"


LATENCY_HEADER = "component,mean_ms,std_ms,q1_ms,median_ms,q3_ms"


def latency_report(budget: LatencyBudget, n_samples: int, seed: int = 0) -> str:
    """CSV with one row per latency component plus an end_to_end row (ms).

    end_to_end sums the same per-component draws and adds the deterministic
    pad, mirroring how delivery delays are composed during a run.
    """
    if n_samples < 100:
        raise ValueError("need at least 100 samples")
    rng = RngStreams(seed).get(GNSS_LATENCY)
    rows = [LATENCY_HEADER]
    total = np.full(n_samples, budget.pad)
    for comp in budget.components:
        draws = np.maximum(0.0, comp.mean
                           + comp.std * rng.standard_normal(n_samples))
        total += draws
        s = latency_stats(draws)
        rows.append(f"{comp.name},{s.mean * 1e3!r},{s.std * 1e3!r},"
                    f"{s.q1 * 1e3!r},{s.median * 1e3!r},{s.q3 * 1e3!r}")
    s = latency_stats(total)
    rows.append(f"end_to_end,{s.mean * 1e3!r},{s.std * 1e3!r},"
                f"{s.q1 * 1e3!r},{s.median * 1e3!r},{s.q3 * 1e3!r}")
    return "\n".join(rows) + "\n"
