"""UAV plant: discrete per-axis double-integrator with ZOH discretization.

State is x = [px, py, pz, vx, vy, vz].  The position update includes the
exact 0.5*u*dt^2 term, so a constant commanded acceleration reproduces
closed-form ballistic motion to machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class SimulationError(RuntimeError):
    """Fatal numerical failure inside a run (carries step context)."""


@dataclass(frozen=True)
class DynamicsModel:
    """Discrete-time linear plant x' = A x + B u + w, w ~ N(0, Q)."""

    dt: float
    A: np.ndarray            # (6, 6) state transition
    B: np.ndarray            # (6, 3) input matrix
    Q: np.ndarray            # (6, 6) per-step process noise covariance
    noise_gain: np.ndarray = field(repr=False, default=None)  # (6, 3): w = noise_gain @ N(0, I3)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not np.allclose(self.Q, self.Q.T):
            raise ValueError("Q must be symmetric")
        if np.linalg.eigvalsh(self.Q).min() < -1e-12:
            raise ValueError("Q must be positive semidefinite")
        if self.noise_gain is None:
            object.__setattr__(self, "noise_gain", _psd_factor(self.Q))


def _psd_factor(Q: np.ndarray) -> np.ndarray:
    """Low-rank factor G with G @ G.T == Q (eigendecomposition, fixed order)."""
    w, V = np.linalg.eigh(Q)
    w = np.clip(w, 0.0, None)
    keep = w > (w.max() * 1e-14 if w.max() > 0 else 0.0)
    if not keep.any():
        return np.zeros((Q.shape[0], 1))
    return V[:, keep] * np.sqrt(w[keep])


def double_integrator(dt: float, accel_noise_std: float) -> DynamicsModel:
    """Per-axis double integrator driven by white disturbance acceleration.

    The disturbance is modeled as a constant random acceleration over each
    step with standard deviation `accel_noise_std` (m/s^2), which gives the
    exact ZOH process-noise covariance rank-3 structure.
    """
    I3 = np.eye(3)
    A = np.block([[I3, dt * I3], [np.zeros((3, 3)), I3]])
    B = np.vstack([0.5 * dt * dt * I3, dt * I3])
    G = B * accel_noise_std           # w = G @ a, a ~ N(0, I3)
    Q = G @ G.T
    return DynamicsModel(dt=dt, A=A, B=B, Q=Q, noise_gain=G)


@dataclass
class VehicleState:
    """True kinematic state of the vehicle."""

    t: float
    p: np.ndarray  # (3,) position, m
    v: np.ndarray  # (3,) velocity, m/s

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.v])


def step_dynamics(state: VehicleState, u: np.ndarray, model: DynamicsModel,
                  rng: np.random.Generator, step_index: int = 0) -> VehicleState:
    """Advance the true state one step: x' = A x + B u + w, w ~ N(0, Q)."""
    x = state.as_vector()
    if model.noise_gain.shape[1] > 0 and model.Q.any():
        w = model.noise_gain @ rng.standard_normal(model.noise_gain.shape[1])
    else:
        w = np.zeros(6)
    x_next = model.A @ x + model.B @ u + w
    if not np.all(np.isfinite(x_next)):
        raise SimulationError(f"non-finite vehicle state at step {step_index}")
    return VehicleState(t=state.t + model.dt, p=x_next[:3], v=x_next[3:])


__all__ = [
    "DynamicsModel",
    "VehicleState",
    "SimulationError",
    "double_integrator",
    "step_dynamics",
]
