"""Distributed camera network: bearing detections fused by a particle filter.

Each fixed camera produces a unit bearing toward the true vehicle, perturbed
by a small random rotation and subject to misses.  A single particle filter
(constant-velocity prediction, bearing likelihood, systematic resampling)
turns the per-tick detections into external position measurements published
with their own latency budget.  The cameras observe the *true* vehicle, so
these measurements are unaffected by GNSS spoofing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gnss import GENUINE, Measurement, TRACK_SENSOR_ID
from .kernels import (bearing_log_weights, propagate_cv, systematic_resample,
                      weighted_mean_cov)
from .latency import LatencyBudget, sample_latency
from .plant import DynamicsModel

COV_INFLATION = 2.0        # published covariance = inflation * PF covariance
COV_FLOOR_STD = 0.1        # per-axis floor on published std, m


@dataclass(frozen=True)
class CameraModel:
    id: int
    position: np.ndarray          # (3,) m
    bearing_noise: float          # sigma_b, radians
    rate: float                   # Hz
    p_miss: float
    latency: LatencyBudget | None = None
    fov: float | None = None      # half-angle gate, radians
    boresight: np.ndarray | None = None

    def __post_init__(self):
        if not 0 <= self.p_miss < 1:
            raise ValueError("p_miss must be in [0, 1)")
        if self.bearing_noise <= 0:
            raise ValueError("bearing noise must be > 0")
        if self.rate <= 0:
            raise ValueError("camera rate must be > 0")
        if self.fov is not None and self.boresight is None:
            raise ValueError("fov gate requires a boresight direction")
        object.__setattr__(self, "position",
                           np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class BearingDetection:
    camera_id: int
    stamp: float
    bearing: np.ndarray           # unit 3-vector, camera -> target


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # np.cross has high call overhead for single 3-vectors.
    return np.array([a[1] * b[2] - a[2] * b[1],
                     a[2] * b[0] - a[0] * b[2],
                     a[0] * b[1] - a[1] * b[0]])


def _orthonormal_basis(b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # Deterministic pair of unit vectors orthogonal to b.
    helper = np.zeros(3)
    helper[int(np.argmin(np.abs(b)))] = 1.0
    e1 = _cross(b, helper)
    e1 /= np.linalg.norm(e1)
    e2 = _cross(b, e1)
    return e1, e2


def detect(cam: CameraModel, true_p: np.ndarray,
           rng: np.random.Generator, stamp: float = 0.0) -> BearingDetection | None:
    """One detection attempt: None on a miss, else a perturbed unit bearing.

    The perturbation rotates the true bearing about a uniformly random
    perpendicular axis by an angle drawn from N(0, sigma_b^2).
    """
    d = np.asarray(true_p, dtype=float) - cam.position
    r = np.linalg.norm(d)
    if r < 1e-9:
        return None
    b = d / r
    if cam.fov is not None:
        bs = cam.boresight / np.linalg.norm(cam.boresight)
        if math.acos(min(1.0, max(-1.0, float(b @ bs)))) > cam.fov:
            return None
    if rng.random() < cam.p_miss:
        return None
    phi = rng.uniform(0.0, 2.0 * math.pi)
    angle = cam.bearing_noise * rng.standard_normal()
    e1, e2 = _orthonormal_basis(b)
    axis = math.cos(phi) * e1 + math.sin(phi) * e2
    perturbed = b * math.cos(angle) + _cross(axis, b) * math.sin(angle)
    perturbed /= np.linalg.norm(perturbed)
    return BearingDetection(camera_id=cam.id, stamp=stamp, bearing=perturbed)


@dataclass
class ParticleSet:
    particles: np.ndarray     # (N, 6) [position, velocity]
    weights: np.ndarray       # (N,), nonnegative, sums to 1

    @property
    def n(self) -> int:
        return self.particles.shape[0]

    @property
    def ess(self) -> float:
        return 1.0 / float(self.weights @ self.weights)


@dataclass(frozen=True)
class TrackEstimate:
    stamp: float
    p_mean: np.ndarray        # (3,)
    p_cov: np.ndarray         # (3, 3)
    n_detections_used: int


def pf_init(box_min: np.ndarray, box_max: np.ndarray, n: int,
            rng: np.random.Generator, velocity_std: float = 1.0) -> ParticleSet:
    """Uniform positions in an axis-aligned box, Gaussian velocities."""
    box_min = np.asarray(box_min, dtype=float)
    box_max = np.asarray(box_max, dtype=float)
    if np.any(box_max < box_min):
        raise ValueError("degenerate init box")
    pos = rng.uniform(box_min, box_max, size=(n, 3))
    vel = velocity_std * rng.standard_normal((n, 3))
    particles = np.hstack([pos, vel])
    return ParticleSet(particles=particles, weights=np.full(n, 1.0 / n))


def _jitter_accel_std(model: DynamicsModel) -> float:
    # Recover the per-axis disturbance-acceleration std of a double-integrator
    # model (noise_gain = B * sigma, whose velocity rows are dt * sigma).
    if not model.Q.any():
        return 0.0
    return float(model.noise_gain[3, 0] / model.dt)


def pf_step(ps: ParticleSet, detections: list[BearingDetection],
            cams: dict[int, CameraModel], model: DynamicsModel,
            rng: np.random.Generator,
            stamp: float = 0.0) -> tuple[ParticleSet, TrackEstimate, bool]:
    """One tracker tick: propagate, weight, resample if needed, estimate.

    Weights are multiplied by exp(-theta^2 / (2 sigma_b^2)) per detection
    (log-domain accumulation), where theta is the angle between a particle's
    predicted bearing and the detected one.  Systematic resampling triggers
    when the effective sample size drops below N/2.  Returns the updated set,
    the weighted position estimate, and a divergence flag (weights underflow
    re-initialized to uniform).
    """
    n = ps.n
    sigma_j = _jitter_accel_std(model)
    if sigma_j > 0.0:
        accel = sigma_j * rng.standard_normal((n, 3))
    else:
        accel = np.zeros((n, 3))
    propagate_cv(ps.particles, model.dt, accel)

    diverged = False
    if detections:
        with np.errstate(divide="ignore"):
            logw = np.log(ps.weights)
        positions = np.ascontiguousarray(ps.particles[:, :3])
        for det in detections:
            cam = cams[det.camera_id]
            inv2s2 = 1.0 / (2.0 * cam.bearing_noise ** 2)
            bearing_log_weights(logw, positions, cam.position,
                                det.bearing, inv2s2)
        finite = np.isfinite(logw)
        if not finite.any():
            ps.weights = np.full(n, 1.0 / n)
            diverged = True
        else:
            logw -= logw[finite].max()
            w = np.exp(logw)          # exp(-inf) -> 0 for starved particles
            total = w.sum()
            if total <= 0.0 or not np.isfinite(total):
                ps.weights = np.full(n, 1.0 / n)
                diverged = True
            else:
                ps.weights = w / total

    if ps.ess < n / 2.0:
        u0 = rng.random()
        idx = systematic_resample(ps.weights, u0)
        ps.particles = np.ascontiguousarray(ps.particles[idx])
        ps.weights = np.full(n, 1.0 / n)

    mean, cov = weighted_mean_cov(
        np.ascontiguousarray(ps.particles[:, :3]), ps.weights)
    est = TrackEstimate(stamp=stamp, p_mean=mean, p_cov=cov,
                        n_detections_used=len(detections))
    return ps, est, diverged


def floor_covariance(cov: np.ndarray, floor_std: float) -> np.ndarray:
    """Raise covariance eigenvalues to at least floor_std^2."""
    w, V = np.linalg.eigh(cov)
    w = np.maximum(w, floor_std ** 2)
    return (V * w) @ V.T


def publish_track(est: TrackEstimate, budget: LatencyBudget, seq: int,
                  latency_rng: np.random.Generator,
                  inflation: float = COV_INFLATION,
                  floor_std: float = COV_FLOOR_STD) -> Measurement:
    """Package a track estimate as an external position measurement.

    The published covariance is the PF covariance inflated (collapsed
    particle clouds understate error) and floored per axis; the camera
    network is assumed secure, so provenance is always genuine.
    """
    cov = floor_covariance(inflation * est.p_cov, floor_std)
    return Measurement(
        sensor_id=TRACK_SENSOR_ID,
        seq=seq,
        stamp=est.stamp,
        deliver_time=est.stamp + sample_latency(budget, latency_rng),
        value=est.p_mean.copy(),
        cov=cov,
        provenance=GENUINE,
    )
