"""Pure-NumPy implementations of the hot per-step kernels.

Semantics are identical to the compiled versions in _native; either backend
may be active (see fdisim.kernels).  All randomness is drawn by the caller
and passed in, so backend choice never changes a run's random stream.
"""

from __future__ import annotations

import numpy as np


def kf_predict(x: np.ndarray, P: np.ndarray, A: np.ndarray,
               Bu: np.ndarray, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Kalman time update: x' = A x + Bu, P' = sym(A P A^T + Q)."""
    x_new = A @ x + Bu
    P_new = A @ P @ A.T + Q
    P_new = 0.5 * (P_new + P_new.T)
    return x_new, P_new


def kf_update_pos(x: np.ndarray, P: np.ndarray, z: np.ndarray,
                  R: np.ndarray):
    """Joseph-form measurement update for a position observation H = [I3 0].

    Returns (x_post, P_post, nu, S, q) where nu is the innovation, S its
    covariance, and q = nu^T S^-1 nu the residual energy.
    """
    n = x.shape[0]
    nu = z - x[:3]
    S = P[:3, :3] + R
    S_inv = np.linalg.inv(S)
    q = float(nu @ S_inv @ nu)
    K = P[:, :3] @ S_inv                      # (n, 3)
    x_post = x + K @ nu
    IKH = np.eye(n)
    IKH[:, :3] -= K
    P_post = IKH @ P @ IKH.T + K @ R @ K.T
    P_post = 0.5 * (P_post + P_post.T)
    return x_post, P_post, nu, S, q


def propagate_cv(particles: np.ndarray, dt: float, accel: np.ndarray) -> None:
    """In-place constant-velocity propagation with disturbance acceleration.

    particles is (N, 6) [p, v]; accel is a pre-drawn (N, 3) disturbance held
    constant over the step (exact ZOH: p += v dt + a dt^2/2, v += a dt).
    """
    particles[:, :3] += particles[:, 3:] * dt + 0.5 * dt * dt * accel
    particles[:, 3:] += accel * dt


def bearing_log_weights(logw: np.ndarray, positions: np.ndarray,
                        cam_pos: np.ndarray, bearing: np.ndarray,
                        inv_two_sigma2: float) -> None:
    """Accumulate, in place, the bearing log-likelihood of each particle.

    logw[i] -= theta_i^2 * inv_two_sigma2, where theta_i is the angle between
    the camera->particle ray and the detected bearing.  Particles closer than
    1e-12 to the camera contribute nothing (undefined ray).
    """
    d = positions - cam_pos
    r = np.linalg.norm(d, axis=1)
    ok = r > 1e-12
    cosang = np.zeros(len(d))
    cosang[ok] = (d[ok] @ bearing) / r[ok]
    np.clip(cosang, -1.0, 1.0, out=cosang)
    theta = np.arccos(cosang)
    logw[ok] -= theta[ok] ** 2 * inv_two_sigma2


def systematic_resample(weights: np.ndarray, u0: float) -> np.ndarray:
    """Systematic resampling: one uniform draw u0 in [0, 1), N even strata."""
    n = weights.shape[0]
    positions = (np.arange(n) + u0) / n
    cumsum = np.cumsum(weights)
    idx = np.searchsorted(cumsum, positions, side="right")
    return np.minimum(idx, n - 1).astype(np.int64)


def weighted_mean_cov(positions: np.ndarray,
                      weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Weighted mean and covariance of particle positions (weights sum to 1)."""
    mean = weights @ positions
    d = positions - mean
    cov = (d * weights[:, None]).T @ d
    return mean, 0.5 * (cov + cov.T)
