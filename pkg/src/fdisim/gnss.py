"""Emulated GNSS position sensor with delivery latency and an attack hook.

Measurements carry both their sample stamp and their (later) delivery time;
the receiver always reports its nominal covariance, whether or not the value
was replaced by a spoofer.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .latency import LatencyBudget, sample_latency
from .plant import VehicleState

GENUINE = "genuine"
SPOOFED = "spoofed"

GNSS_SENSOR_ID = 1
TRACK_SENSOR_ID = 2


@dataclass(frozen=True)
class GnssConfig:
    rate: float                  # Hz
    R: np.ndarray                # (3, 3) measurement noise covariance, m^2
    bias: np.ndarray             # (3,) constant offset, m
    H: np.ndarray                # (3, 6) observation matrix selecting position

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("gnss rate must be > 0")
        R = np.asarray(self.R, dtype=float)
        if not np.allclose(R, R.T) or np.linalg.eigvalsh(R).min() <= 0:
            raise ValueError("gnss R must be symmetric positive definite")


def position_observation() -> np.ndarray:
    return np.hstack([np.eye(3), np.zeros((3, 3))])


def default_gnss_config(rate: float = 10.0,
                        r_diag=(0.25, 0.25, 0.64),
                        bias=(0.0, 0.0, 0.0)) -> GnssConfig:
    return GnssConfig(rate=rate, R=np.diag(r_diag),
                      bias=np.asarray(bias, dtype=float),
                      H=position_observation())


@dataclass(frozen=True)
class Measurement:
    """Timestamped sensor sample with delayed delivery and provenance."""

    sensor_id: int
    seq: int
    stamp: float          # sample time, s
    deliver_time: float   # arrival time, s (>= stamp)
    value: np.ndarray     # (3,) m
    cov: np.ndarray       # (3, 3) m^2
    provenance: str = GENUINE

    def __post_init__(self):
        if self.deliver_time < self.stamp:
            raise ValueError("deliver_time must be >= stamp")


# An injector maps (measurement, noise draw kept by the receiver) -> measurement.
Injector = Callable[[Measurement, np.ndarray], Measurement]


def emulate_gnss(true_state: VehicleState, cfg: GnssConfig,
                 budget: LatencyBudget, seq: int,
                 noise_rng: np.random.Generator,
                 latency_rng: np.random.Generator,
                 injector: Injector | None = None) -> Measurement:
    """Sample one GNSS measurement of the true state at its current time.

    value = H x + bias + n with n ~ N(0, R); the injector may then replace
    the value (keeping the same receiver noise realization) and mark the
    measurement spoofed.  The reported covariance stays R either way.
    """
    x = true_state.as_vector()
    L = np.linalg.cholesky(cfg.R)
    n = L @ noise_rng.standard_normal(3)
    value = cfg.H @ x + cfg.bias + n
    m = Measurement(
        sensor_id=GNSS_SENSOR_ID,
        seq=seq,
        stamp=true_state.t,
        deliver_time=true_state.t + sample_latency(budget, latency_rng),
        value=value,
        cov=cfg.R.copy(),
        provenance=GENUINE,
    )
    if injector is not None:
        m = injector(m, n)
    return m


def mark_spoofed(m: Measurement, value: np.ndarray) -> Measurement:
    """Replace the value of a measurement, keeping stamps, cov, and seq."""
    return replace(m, value=np.asarray(value, dtype=float), provenance=SPOOFED)
