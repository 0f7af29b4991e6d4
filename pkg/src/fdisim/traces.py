"""Run traces: fixed-schema CSV emission and metrics recomputation.

Floats are serialized with repr (shortest round-trip), so re-running a seed
reproduces byte-identical files and every metric can be recomputed exactly
from the CSVs alone (see metrics_from_dir, used to cross-check metrics.json).
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

TRUTH_HEADER = ["t", "px", "py", "pz", "vx", "vy", "vz", "prx", "pry", "prz"]
GNSS_HEADER = ["stamp", "deliver", "zx", "zy", "zz", "provenance"]
RESIDUAL_HEADER = ["t", "sensor_id", "nu_x", "nu_y", "nu_z", "q", "gamma",
                   "flagged", "mode"]
DETECTOR_HEADER = ["t_window_end", "q_off", "dof", "gamma_off", "exceed", "flag"]
TRACK_HEADER = ["t", "px", "py", "pz", "cov_trace", "n_detections_used"]


def _r(x: float) -> str:
    return repr(float(x))


@dataclass
class Trace:
    """Row streams accumulated by one run (time-ordered within each)."""

    truth: list = field(default_factory=list)      # rows per TRUTH_HEADER
    gnss: list = field(default_factory=list)       # rows per GNSS_HEADER
    residuals: list = field(default_factory=list)  # ResidualRecord
    decisions: list = field(default_factory=list)  # OffboardDecision
    tracks: list = field(default_factory=list)     # rows per TRACK_HEADER


@dataclass
class RunMetrics:
    max_deviation: float
    time_to_detect: float | None
    onboard_flags: int
    offboard_false_alarm: bool
    post_mitigation_error: float
    rms_track_error: float | None

    def to_dict(self) -> dict:
        return {
            "max_deviation_m": self.max_deviation,
            "time_to_detect_s": self.time_to_detect,
            "onboard_flags": self.onboard_flags,
            "offboard_false_alarm": self.offboard_false_alarm,
            "post_mitigation_error_m": self.post_mitigation_error,
            "rms_track_error_m": self.rms_track_error,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunMetrics":
        return cls(
            max_deviation=d["max_deviation_m"],
            time_to_detect=d["time_to_detect_s"],
            onboard_flags=d["onboard_flags"],
            offboard_false_alarm=d["offboard_false_alarm"],
            post_mitigation_error=d["post_mitigation_error_m"],
            rms_track_error=d["rms_track_error_m"],
        )


def _write_csv(path: str, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def emit_traces(trace: Trace, metrics: RunMetrics, resolved_config: dict,
                out_dir: str) -> None:
    """Write truth/gnss/residuals/detector/track CSVs plus metrics.json and
    the fully-resolved scenario (resolved_config.json) into out_dir."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        _write_csv(os.path.join(out_dir, "truth.csv"), TRUTH_HEADER,
                   ([_r(v) for v in row] for row in trace.truth))
        _write_csv(os.path.join(out_dir, "gnss.csv"), GNSS_HEADER,
                   ([_r(row[0]), _r(row[1]), _r(row[2]), _r(row[3]),
                     _r(row[4]), row[5]] for row in trace.gnss))
        _write_csv(os.path.join(out_dir, "residuals.csv"), RESIDUAL_HEADER,
                   ([_r(rec.t), str(rec.sensor_id), _r(rec.nu[0]),
                     _r(rec.nu[1]), _r(rec.nu[2]), _r(rec.q), _r(rec.gamma),
                     str(int(rec.flagged)), rec.mode]
                    for rec in trace.residuals))
        _write_csv(os.path.join(out_dir, "detector.csv"), DETECTOR_HEADER,
                   ([_r(d.t), _r(d.q_off), str(d.dof), _r(d.gamma_off),
                     str(int(d.exceed)), str(int(d.flag))]
                    for d in trace.decisions))
        _write_csv(os.path.join(out_dir, "track.csv"), TRACK_HEADER,
                   ([_r(v) for v in row[:5]] + [str(int(row[5]))]
                    for row in trace.tracks))
        with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
            json.dump(metrics.to_dict(), fh, indent=2)
            fh.write("\n")
        with open(os.path.join(out_dir, "resolved_config.json"), "w") as fh:
            json.dump(resolved_config, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"failed writing traces to {out_dir}: {exc}") from exc


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def metrics_from_dir(out_dir: str) -> RunMetrics:
    """Recompute RunMetrics from the emitted CSVs and resolved config only.

    Exists so the numbers in metrics.json are auditable: nothing here shares
    state with the run loop.
    """
    with open(os.path.join(out_dir, "resolved_config.json")) as fh:
        cfg = json.load(fh)
    duration = float(cfg["duration_s"])
    attack_on = cfg["attack"]["mode"] != "off"
    t_on = float(cfg["attack"]["t_on_s"])

    truth = _read_csv(os.path.join(out_dir, "truth.csv"))
    max_dev = 0.0
    post_err = 0.0
    pos_by_t: dict[str, tuple[float, float, float]] = {}
    for row in truth:
        dev = math.sqrt((float(row["px"]) - float(row["prx"])) ** 2
                        + (float(row["py"]) - float(row["pry"])) ** 2
                        + (float(row["pz"]) - float(row["prz"])) ** 2)
        max_dev = max(max_dev, dev)
        if float(row["t"]) >= duration - 10.0:
            post_err = max(post_err, dev)
        pos_by_t[row["t"]] = (float(row["px"]), float(row["py"]),
                              float(row["pz"]))

    residuals = _read_csv(os.path.join(out_dir, "residuals.csv"))
    onboard_flags = sum(int(r["flagged"]) for r in residuals)

    decisions = _read_csv(os.path.join(out_dir, "detector.csv"))
    flag_time = None
    for row in decisions:
        if int(row["flag"]):
            flag_time = float(row["t_window_end"])
            break
    false_alarm = flag_time is not None and (not attack_on or flag_time < t_on)
    ttd = None
    if attack_on and flag_time is not None and flag_time >= t_on:
        ttd = flag_time - t_on

    tracks = _read_csv(os.path.join(out_dir, "track.csv"))
    rms = None
    if tracks:
        sq = 0.0
        for row in tracks:
            tp = pos_by_t[row["t"]]
            sq += ((float(row["px"]) - tp[0]) ** 2
                   + (float(row["py"]) - tp[1]) ** 2
                   + (float(row["pz"]) - tp[2]) ** 2)
        rms = math.sqrt(sq / len(tracks))

    return RunMetrics(max_deviation=max_dev, time_to_detect=ttd,
                      onboard_flags=onboard_flags,
                      offboard_false_alarm=false_alarm,
                      post_mitigation_error=post_err, rms_track_error=rms)
