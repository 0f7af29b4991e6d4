"""GNSS replay (meaconing) attack emulation.

The spoofer substitutes the victim's GNSS values with a position that tracks
the victim's *reference* trajectory plus a linearly growing offset.  The
onset is anchored at the victim's believed course, so there is no jump the
onboard monitor could gate on, and the vehicle is pushed off course in the
direction opposite the offset while its estimator sees a consistent world.

`calibrate_stealth_rate` finds, by bisection over full closed-loop runs, the
largest drift rate whose onboard residuals stay below a margin under the
detection threshold on the calibration seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gnss import Measurement, mark_spoofed
from .mission import WaypointPlan, reference_at

MODE_OFF = "off"
MODE_MEACONING = "meaconing"


@dataclass(frozen=True)
class AttackSpec:
    mode: str = MODE_OFF
    t_on: float = 0.0            # onset time, s
    direction: np.ndarray = None  # unit 3-vector
    ramp_rate: float = 0.0       # m/s drift of spoofed position vs reference
    r_max: float = 0.5           # calibration bracket upper bound, m/s

    def __post_init__(self):
        d = np.array([1.0, 0.0, 0.0]) if self.direction is None \
            else np.asarray(self.direction, dtype=float)
        if self.mode not in (MODE_OFF, MODE_MEACONING):
            raise ValueError(f"unknown attack mode {self.mode!r}")
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ValueError("attack direction must be a unit vector")
        if self.ramp_rate < 0:
            raise ValueError("ramp_rate must be >= 0")
        if self.t_on < 0:
            raise ValueError("t_on must be >= 0")
        object.__setattr__(self, "direction", d)


@dataclass
class SpooferState:
    """Set once, at the first injected sample after onset."""

    anchor: np.ndarray | None = None   # victim true position at t_on
    active: bool = False


def spoofer_position(t: float, spec: AttackSpec, sp: SpooferState,
                     plan: WaypointPlan) -> np.ndarray:
    """Broadcast position at time t: reference trajectory plus ramp offset."""
    if t < spec.t_on or not sp.active:
        raise ValueError("spoofer queried before onset")
    p_ref, _ = reference_at(t, plan)
    return p_ref + (t - spec.t_on) * spec.ramp_rate * spec.direction


def apply_meaconing(m: Measurement, spec: AttackSpec, sp: SpooferState,
                    plan: WaypointPlan, noise: np.ndarray,
                    true_position: np.ndarray) -> Measurement:
    """Replace a GNSS value with the spoofer broadcast (plus receiver noise).

    Measurements before onset, or with the attack off, pass through
    unchanged.  Stamps, delivery times, seq, and covariance are never
    altered; the replayed signal retains the receiver-level noise draw.
    """
    if spec.mode == MODE_OFF or m.stamp < spec.t_on:
        return m
    if not sp.active:
        sp.active = True
        sp.anchor = np.asarray(true_position, dtype=float).copy()
    return mark_spoofed(m, spoofer_position(m.stamp, spec, sp, plan) + noise)


class MeaconingInjector:
    """Stateful injection hook handed to the GNSS emulator."""

    def __init__(self, spec: AttackSpec, plan: WaypointPlan):
        self.spec = spec
        self.plan = plan
        self.state = SpooferState()
        self._true_position = np.zeros(3)

    def observe_truth(self, p: np.ndarray) -> None:
        self._true_position = p

    def __call__(self, m: Measurement, noise: np.ndarray) -> Measurement:
        return apply_meaconing(m, self.spec, self.state, self.plan, noise,
                               self._true_position)


class CalibrationError(RuntimeError):
    """The monitor rejects even a null attack at the requested margin."""


@dataclass(frozen=True)
class CalibrationResult:
    ramp_rate: float
    hit_r_max: bool            # True when even r_max stays stealthy
    max_q_at_rate: float
    max_q_null: float
    budget: float              # (1 - margin) * gamma_on
    evaluations: int = field(default=0)


def calibrate_stealth_rate(cfg, gamma_on: float, margin: float,
                           iters: int = 16, r_max: float | None = None) -> CalibrationResult:
    """Bisect for the largest ramp rate the onboard monitor tolerates.

    Each probe runs a full closed-loop simulation on the scenario seed with
    mitigation and the offboard detector disabled, and measures the maximum
    residual energy over the attack interval.  Monotonicity of that maximum
    in the ramp rate is assumed inside the bracket and checked at both
    endpoints.
    """
    from .config import ScenarioConfig  # noqa: F401  (type of cfg)
    from .runner import run_scenario

    if not 0 < margin < 1:
        raise ValueError("margin must be in (0, 1)")
    if iters < 1:
        raise ValueError("iters must be >= 1")
    budget = (1.0 - margin) * gamma_on
    r_hi = cfg.attack.r_max if r_max is None else float(r_max)
    if r_hi <= 0:
        raise ValueError("r_max must be positive")

    evaluations = 0

    def max_attack_q(rate: float) -> float:
        nonlocal evaluations
        evaluations += 1
        probe = cfg.for_calibration(rate)
        trace, _ = run_scenario(probe)
        qs = [r.q for r in trace.residuals
              if r.sensor_id == 1 and r.t >= probe.attack.t_on]
        if not qs:
            raise CalibrationError("no GNSS fusions in the attack interval")
        return max(qs)

    q_null = max_attack_q(0.0)
    if q_null > budget:
        raise CalibrationError(
            f"monitor misconfigured for this margin: null-attack max residual "
            f"{q_null:.3f} already exceeds (1-margin)*gamma = {budget:.3f}")
    q_hi = max_attack_q(r_hi)
    if q_hi <= budget:
        return CalibrationResult(r_hi, True, q_hi, q_null, budget, evaluations)

    lo, hi = 0.0, r_hi
    q_lo = q_null
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        q_mid = max_attack_q(mid)
        if q_mid <= budget:
            lo, q_lo = mid, q_mid
        else:
            hi = mid
    return CalibrationResult(lo, False, q_lo, q_null, budget, evaluations)
