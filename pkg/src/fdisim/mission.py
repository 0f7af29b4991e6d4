"""Waypoint mission reference and the position/velocity tracking controller.

The reference is piecewise-linear between timed waypoints; the controller is
a saturated PD law acting on the *estimated* state, so corrupted estimates
steer the real vehicle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class WaypointPlan:
    """Ordered (position, arrival time) waypoints, optionally looped."""

    positions: np.ndarray   # (n, 3) m
    times: np.ndarray       # (n,) s, strictly increasing
    loop: bool = False

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        t = np.asarray(self.times, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 2:
            raise ValueError("need at least 2 waypoints of dimension 3")
        if t.shape != (pos.shape[0],):
            raise ValueError("times must match waypoint count")
        if not np.all(np.diff(t) > 0):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "times", t)


def reference_at(t: float, plan: WaypointPlan) -> tuple[np.ndarray, np.ndarray]:
    """Reference position and velocity at time t.

    Linear interpolation between bracketing waypoints; the reference velocity
    is the segment's constant velocity.  Before the first waypoint the first
    position is held (zero velocity); after the last, the last is held, or
    time wraps when the plan loops.
    """
    times, pos = plan.times, plan.positions
    t0, t_end = times[0], times[-1]
    if plan.loop and t > t_end:
        period = t_end - t0
        t = t0 + (t - t0) % period
    if t <= t0:
        return pos[0].copy(), np.zeros(3)
    if t >= t_end:
        return pos[-1].copy(), np.zeros(3)
    i = int(np.searchsorted(times, t, side="right")) - 1
    seg_dt = times[i + 1] - times[i]
    v = (pos[i + 1] - pos[i]) / seg_dt
    return pos[i] + v * (t - times[i]), v


@dataclass(frozen=True)
class ControlCommand:
    """Commanded acceleration, saturated componentwise at a_max."""

    u: np.ndarray
    a_max: float


def controller_cmd(est_p: np.ndarray, est_v: np.ndarray,
                   p_ref: np.ndarray, v_ref: np.ndarray,
                   kp: float, kd: float, a_max: float) -> ControlCommand:
    """Saturated PD acceleration command from estimated state and reference."""
    u = kp * (p_ref - est_p) + kd * (v_ref - est_v)
    return ControlCommand(u=np.clip(u, -a_max, a_max), a_max=a_max)
