"""Onboard Kalman filter with delayed-measurement fusion and chi-squared monitor.

Measurements arrive after their sample stamps (sensor latency), possibly out
of order.  Fusion rewinds to the buffered snapshot at the stamp's grid step,
applies the Joseph-form update there, and replays buffered inputs and any
later-stamped measurements forward, so the final estimate is independent of
delivery order.

The monitor compares each fusion's residual energy q = nu^T S^-1 nu against
a chi-squared threshold; it observes and flags but never rejects.  After an
offboard detection the estimator latches into a mode that additionally fuses
external position measurements alongside GNSS.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq
from scipy.special import gammainc

from .gnss import GNSS_SENSOR_ID, Measurement, TRACK_SENSOR_ID
from .plant import DynamicsModel, SimulationError

MODE_GNSS_ONLY = "gnss_only"
MODE_GNSS_PLUS_EXTERNAL = "gnss_plus_external"


def chi2_threshold(dof: int, alpha: float) -> float:
    """(1 - alpha) quantile of chi-squared with `dof` degrees of freedom.

    Bracketed root-find on the regularized incomplete gamma function;
    |CDF(gamma) - (1 - alpha)| <= 1e-10.
    """
    if dof < 1:
        raise ValueError("dof must be >= 1")
    if not 0 < alpha < 1:
        raise ValueError("alpha must be in (0, 1)")
    target = 1.0 - alpha

    def cdf_err(g: float) -> float:
        return gammainc(dof / 2.0, g / 2.0) - target

    hi = float(dof)
    while cdf_err(hi) < 0:
        hi *= 2.0
    gamma = brentq(cdf_err, 0.0, hi, xtol=1e-13, rtol=8.9e-16)
    assert abs(cdf_err(gamma)) <= 1e-10
    return float(gamma)


@dataclass(frozen=True)
class MonitorConfig:
    alpha: float
    m: int = 3

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must be in (0, 1)")

    @property
    def gamma(self) -> float:
        return chi2_threshold(self.m, self.alpha)


@dataclass(frozen=True)
class ResidualRecord:
    t: float                 # measurement stamp, s
    sensor_id: int
    nu: np.ndarray           # (3,) innovation
    S: np.ndarray            # (3, 3) innovation covariance
    q: float                 # residual energy
    gamma: float
    flagged: bool
    mode: str


def innovation_stat(x_prior: np.ndarray, P_prior: np.ndarray, z: Measurement,
                    R: np.ndarray, gamma: float, mode: str = MODE_GNSS_ONLY) -> ResidualRecord:
    """Residual record of a position measurement against a prior (no update)."""
    nu = z.value - x_prior[:3]
    S = P_prior[:3, :3] + R
    q = float(nu @ np.linalg.solve(S, nu))
    return ResidualRecord(t=z.stamp, sensor_id=z.sensor_id, nu=nu, S=S, q=q,
                          gamma=gamma, flagged=q > gamma, mode=mode)


@dataclass
class _Snapshot:
    # Prior (before same-step measurements) and posterior at one grid step.
    x_prior: np.ndarray
    P_prior: np.ndarray
    x_post: np.ndarray
    P_post: np.ndarray
    u: np.ndarray | None = None              # input applied from this step on
    measurements: list = None                # fused, canonical (sensor_id, seq)

    def __post_init__(self):
        if self.measurements is None:
            self.measurements = []


class KalmanEstimator:
    """Kalman filter over a rewindable ring buffer of per-step snapshots."""

    def __init__(self, model: DynamicsModel, monitor: MonitorConfig,
                 x0: np.ndarray, P0: np.ndarray, buffer_len: int = 64,
                 gnss_r_inflation: float = 1.0):
        from .kernels import kf_predict, kf_update_pos
        self._predict_kernel = kf_predict
        self._update_kernel = kf_update_pos
        self.model = model
        self.monitor = monitor
        self.gamma = monitor.gamma
        self.buffer_len = int(buffer_len)
        if self.buffer_len < 2:
            raise ValueError("buffer length must be >= 2")
        self.gnss_r_inflation = float(gnss_r_inflation)
        self.mode = MODE_GNSS_ONLY
        self._reconfigured = False
        self.k = 0
        self.k_oldest = 0
        x0 = np.asarray(x0, dtype=float)
        P0 = np.asarray(P0, dtype=float)
        self._buf: deque[_Snapshot] = deque(
            [_Snapshot(x0.copy(), P0.copy(), x0.copy(), P0.copy())])
        self.dropped_measurements = 0
        self._steps_since_pd_check = 0

    # -- state access -----------------------------------------------------

    @property
    def t(self) -> float:
        return self.k * self.model.dt

    @property
    def x(self) -> np.ndarray:
        return self._buf[-1].x_post

    @property
    def P(self) -> np.ndarray:
        return self._buf[-1].P_post

    def _snap(self, k: int) -> _Snapshot:
        return self._buf[k - self.k_oldest]

    # -- time and measurement updates --------------------------------------

    def predict(self, u: np.ndarray) -> None:
        """Advance one base step with known input u, appending a snapshot."""
        last = self._buf[-1]
        last.u = np.asarray(u, dtype=float).copy()
        x_new, P_new = self._predict_kernel(
            last.x_post, last.P_post, self.model.A,
            self.model.B @ last.u, self.model.Q)
        self._buf.append(_Snapshot(x_new, P_new, x_new.copy(), P_new.copy()))
        self.k += 1
        if len(self._buf) > self.buffer_len:
            self._buf.popleft()
            self.k_oldest += 1
        self._steps_since_pd_check += 1
        if self._steps_since_pd_check >= 100:
            self._steps_since_pd_check = 0
            if np.linalg.eigvalsh(self.P).min() <= 0:
                raise SimulationError(
                    f"covariance lost positive definiteness at step {self.k}")

    def _effective_R(self, m: Measurement) -> np.ndarray:
        if (m.sensor_id == GNSS_SENSOR_ID and self._reconfigured
                and self.gnss_r_inflation != 1.0):
            return m.cov * self.gnss_r_inflation
        return m.cov

    def fuse(self, m: Measurement) -> ResidualRecord | None:
        """Fuse a delivered measurement with rewind-and-replay.

        Returns the residual record for this measurement (computed against
        the prior at its stamp's grid step, in canonical fusion order), or
        None when the measurement is dropped or gated out by mode.
        """
        if m.sensor_id == TRACK_SENSOR_ID and self.mode != MODE_GNSS_PLUS_EXTERNAL:
            return None
        k_z = int(round(m.stamp / self.model.dt))
        if k_z < self.k_oldest:
            self.dropped_measurements += 1
            return None
        if k_z > self.k:
            raise ValueError("measurement stamped in the estimator's future")

        snap = self._snap(k_z)
        snap.measurements.append(m)
        snap.measurements.sort(key=lambda mm: (mm.sensor_id, mm.seq))

        record = None
        x, P = snap.x_prior.copy(), snap.P_prior.copy()
        for mm in snap.measurements:
            x, P, rec = self._apply(x, P, mm)
            if mm is m:
                record = rec
        snap.x_post, snap.P_post = x, P

        for k in range(k_z + 1, self.k + 1):
            prev = self._snap(k - 1)
            s = self._snap(k)
            x, P = self._predict_kernel(
                prev.x_post, prev.P_post, self.model.A,
                self.model.B @ prev.u, self.model.Q)
            s.x_prior, s.P_prior = x.copy(), P.copy()
            for mm in s.measurements:
                x, P, _ = self._apply(x, P, mm)
            s.x_post, s.P_post = x, P
        return record

    def _apply(self, x, P, m: Measurement):
        R = self._effective_R(m)
        x_post, P_post, nu, S, q = self._update_kernel(x, P, m.value, R)
        rec = ResidualRecord(t=m.stamp, sensor_id=m.sensor_id, nu=nu, S=S,
                             q=q, gamma=self.gamma, flagged=q > self.gamma,
                             mode=self.mode)
        return x_post, P_post, rec

    def reconfigure(self, offboard_flag: bool) -> None:
        """Latch into GNSS+external fusion on the first raised flag."""
        if offboard_flag and not self._reconfigured:
            self._reconfigured = True
            self.mode = MODE_GNSS_PLUS_EXTERNAL
