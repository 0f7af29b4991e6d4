"""End-to-end scenario execution: the single-threaded event loop.

Per base step: sample due sensors against the true state, compute the control
command from the *estimated* state, step the plant, advance the estimator.
Measurement deliveries (stochastically delayed, possibly out of order) fuse
into the onboard filter via rewind-and-replay and feed the offboard detector;
detector windows fire on their own grid, and a confirmed detection latches
the mitigation mode when enabled.  Offboard telemetry (received GNSS values
and commanded inputs) is assumed uncompromised and timely.
"""

from __future__ import annotations

import math

import numpy as np

from . import streams as st
from .attack import MODE_MEACONING, CalibrationResult, MeaconingInjector, \
    calibrate_stealth_rate
from .cameras import BearingDetection, detect, pf_init, pf_step, publish_track
from .config import ConfigError, ScenarioConfig
from .estimator import KalmanEstimator, MonitorConfig
from .events import (DETECTOR_TICK, DYNAMICS_TICK, MEASUREMENT_DELIVERY,
                     EventQueue, SimEvent)
from .gnss import GNSS_SENSOR_ID, TRACK_SENSOR_ID, emulate_gnss
from .lifting import WindowedParityDetector
from .mission import controller_cmd, reference_at
from .plant import VehicleState, step_dynamics
from .traces import RunMetrics, Trace


def _steps_per_period(rate_hz: float, dt: float, what: str) -> int:
    steps = (1.0 / rate_hz) / dt
    rounded = round(steps)
    if rounded < 1 or abs(steps - rounded) > 1e-9:
        raise ConfigError(f"{what} rate {rate_hz} Hz is not an integer "
                          f"multiple of the base step {dt} s")
    return rounded


def resolve_attack(cfg: ScenarioConfig) -> tuple[ScenarioConfig, CalibrationResult | None]:
    """Materialize ramp_rate_mps = 'auto' through stealth calibration."""
    if not cfg.attack_auto:
        return cfg, None
    gamma_on = MonitorConfig(cfg.monitor_alpha).gamma
    result = calibrate_stealth_rate(cfg, gamma_on, cfg.attack_margin,
                                    cfg.attack_iters)
    return cfg.with_overrides(
        attack={"ramp_rate_mps": result.ramp_rate}), result


def run_scenario(cfg: ScenarioConfig,
                 seed_override: int | None = None) -> tuple[Trace, RunMetrics]:
    """Execute one scenario deterministically; returns (trace, metrics)."""
    if seed_override is not None:
        cfg = cfg.with_seed(seed_override)
    if cfg.attack_auto:
        raise ConfigError("attack.ramp_rate_mps is 'auto'; resolve it with "
                          "resolve_attack() or the calibrate-attack command")

    rngs = st.RngStreams(cfg.seed)
    model = cfg.dynamics_model()
    dt = cfg.dt
    n_steps = int(round(cfg.duration / dt))
    gnss_steps = _steps_per_period(cfg.gnss.rate, dt, "gnss")
    cam_steps = _steps_per_period(cfg.camera_rate, dt, "camera") \
        if cfg.cameras else 0

    state = VehicleState(0.0, cfg.initial_position.copy(),
                         cfg.initial_velocity.copy())
    x0 = state.as_vector()
    P0 = np.diag([0.25, 0.25, 0.25, 0.04, 0.04, 0.04])
    estimator = KalmanEstimator(model, MonitorConfig(cfg.monitor_alpha),
                                x0, P0, buffer_len=cfg.buffer_steps,
                                gnss_r_inflation=cfg.gnss_r_inflation)

    injector = None
    if cfg.attack.mode == MODE_MEACONING:
        injector = MeaconingInjector(cfg.attack, cfg.plan)

    detector = None
    if cfg.detector_enabled:
        detector = WindowedParityDetector(model, cfg.detector)

    cams = {c.id: c for c in cfg.cameras}
    particles = None
    if cams:
        center = cfg.plan.positions[0]
        particles = pf_init(center - cfg.init_box_half_extent,
                            center + cfg.init_box_half_extent,
                            cfg.num_particles, rngs.get(st.TRACKER),
                            velocity_std=cfg.init_velocity_std)
    tracker_model = cfg.tracker_model() if cams else None

    u_log = np.zeros((max(n_steps, 1), 3))
    trace = Trace()
    queue = EventQueue()
    seqs = {GNSS_SENSOR_ID: 0, TRACK_SENSOR_ID: 0}
    pf_divergences = 0
    track_sq_err = 0.0

    if n_steps > 0:
        queue.push(SimEvent(0.0, DYNAMICS_TICK, 0, 0))
    if detector is not None:
        t_w = cfg.detector.window_steps * dt
        w_idx = 0
        while t_w <= cfg.duration + 1e-12:
            queue.push(SimEvent(t_w, DETECTOR_TICK, 0, w_idx))
            w_idx += 1
            t_w = (cfg.detector.window_steps
                   + (w_idx * cfg.detector.slide_steps)) * dt

    def log_truth(t: float, p_ref: np.ndarray) -> None:
        trace.truth.append((t, float(state.p[0]), float(state.p[1]),
                            float(state.p[2]), float(state.v[0]),
                            float(state.v[1]), float(state.v[2]),
                            float(p_ref[0]), float(p_ref[1]), float(p_ref[2])))

    def handle_tick(k: int) -> None:
        nonlocal state, particles, pf_divergences, track_sq_err
        t = k * dt
        p_ref, v_ref = reference_at(t, cfg.plan)
        log_truth(t, p_ref)
        if injector is not None:
            injector.observe_truth(state.p)

        if k % gnss_steps == 0:
            seqs[GNSS_SENSOR_ID] += 1
            m = emulate_gnss(state, cfg.gnss, cfg.gnss_budget,
                             seqs[GNSS_SENSOR_ID], rngs.get(st.GNSS_NOISE),
                             rngs.get(st.GNSS_LATENCY), injector)
            trace.gnss.append((m.stamp, m.deliver_time, float(m.value[0]),
                               float(m.value[1]), float(m.value[2]),
                               m.provenance))
            if m.deliver_time <= cfg.duration:
                queue.push(SimEvent(m.deliver_time, MEASUREMENT_DELIVERY,
                                    m.sensor_id, m.seq, payload=m))

        if cams and k % cam_steps == 0:
            detections: list[BearingDetection] = []
            for cam_id in sorted(cams):
                d = detect(cams[cam_id], state.p, rngs.get(st.CAMERA, cam_id),
                           stamp=t)
                if d is not None:
                    detections.append(d)
            particles, est_track, diverged = pf_step(
                particles, detections, cams, tracker_model,
                rngs.get(st.TRACKER), stamp=t)
            pf_divergences += int(diverged)
            seqs[TRACK_SENSOR_ID] += 1
            m = publish_track(est_track, cfg.camera_budget,
                              seqs[TRACK_SENSOR_ID],
                              rngs.get(st.CAMERA_LATENCY),
                              inflation=cfg.cov_inflation,
                              floor_std=cfg.cov_floor_std)
            trace.tracks.append((t, float(m.value[0]), float(m.value[1]),
                                 float(m.value[2]),
                                 float(np.trace(est_track.p_cov)),
                                 est_track.n_detections_used))
            track_sq_err += ((float(m.value[0]) - float(state.p[0])) ** 2
                             + (float(m.value[1]) - float(state.p[1])) ** 2
                             + (float(m.value[2]) - float(state.p[2])) ** 2)
            if m.deliver_time <= cfg.duration:
                queue.push(SimEvent(m.deliver_time, MEASUREMENT_DELIVERY,
                                    m.sensor_id, m.seq, payload=m))

        cmd = controller_cmd(estimator.x[:3], estimator.x[3:], p_ref, v_ref,
                             cfg.kp, cfg.kd, cfg.a_max)
        u_log[k] = cmd.u
        state = step_dynamics(state, cmd.u, model, rngs.get(st.DYNAMICS), k)
        estimator.predict(cmd.u)
        if k + 1 < n_steps:
            queue.push(SimEvent((k + 1) * dt, DYNAMICS_TICK, 0, k + 1))

    def handle_delivery(ev: SimEvent) -> None:
        m = ev.payload
        if detector is not None:
            detector.add_measurement(m.stamp, m.value, m.cov, cfg.gnss.H,
                                     m.sensor_id, m.seq)
        record = estimator.fuse(m)
        if record is not None:
            trace.residuals.append(record)

    def handle_detector_tick(ev: SimEvent) -> None:
        decision = detector.evaluate(ev.deliver_time, u_log)
        if decision is not None:
            trace.decisions.append(decision)
            if decision.flag and cfg.mitigation:
                estimator.reconfigure(True)

    while (ev := queue.pop()) is not None:
        if ev.event_class == DYNAMICS_TICK:
            handle_tick(ev.seq)
        elif ev.event_class == MEASUREMENT_DELIVERY:
            handle_delivery(ev)
        elif ev.event_class == DETECTOR_TICK:
            handle_detector_tick(ev)

    if n_steps > 0:
        t_final = n_steps * dt
        log_truth(t_final, reference_at(t_final, cfg.plan)[0])

    metrics = _compute_metrics(cfg, trace, detector, track_sq_err)
    return trace, metrics


def _compute_metrics(cfg: ScenarioConfig, trace: Trace, detector,
                     track_sq_err: float) -> RunMetrics:
    # Mirrors traces.metrics_from_dir arithmetic so metrics.json matches a
    # recomputation from the CSVs exactly.
    max_dev = 0.0
    post_err = 0.0
    for row in trace.truth:
        dev = math.sqrt((row[1] - row[7]) ** 2 + (row[2] - row[8]) ** 2
                        + (row[3] - row[9]) ** 2)
        max_dev = max(max_dev, dev)
        if row[0] >= cfg.duration - 10.0:
            post_err = max(post_err, dev)

    onboard_flags = sum(1 for r in trace.residuals if r.flagged)

    attack_on = cfg.attack.mode == MODE_MEACONING
    flag_time = detector.flag_time if detector is not None else None
    false_alarm = flag_time is not None and (not attack_on
                                             or flag_time < cfg.attack.t_on)
    ttd = None
    if attack_on and flag_time is not None and flag_time >= cfg.attack.t_on:
        ttd = flag_time - cfg.attack.t_on

    rms = None
    if trace.tracks:
        rms = math.sqrt(track_sq_err / len(trace.tracks))

    return RunMetrics(max_deviation=max_dev, time_to_detect=ttd,
                      onboard_flags=onboard_flags,
                      offboard_false_alarm=false_alarm,
                      post_mitigation_error=post_err, rms_track_error=rms)
