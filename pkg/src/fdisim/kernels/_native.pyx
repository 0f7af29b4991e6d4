# Compiled twins of fdisim.kernels.pure (same call signatures and semantics).
# All randomness is drawn by the caller; these are deterministic numerics.

import numpy as np

cimport numpy as cnp
from libc.math cimport acos, sqrt

cnp.import_array()


def kf_predict(cnp.ndarray[cnp.float64_t, ndim=1] x,
               cnp.ndarray[cnp.float64_t, ndim=2] P,
               cnp.ndarray[cnp.float64_t, ndim=2] A,
               cnp.ndarray[cnp.float64_t, ndim=1] Bu,
               cnp.ndarray[cnp.float64_t, ndim=2] Q):
    """Kalman time update: x' = A x + Bu, P' = sym(A P A^T + Q)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_new = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] AP = np.empty((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P_new = np.empty((n, n))
    cdef Py_ssize_t i, j, k
    cdef double acc
    for i in range(n):
        acc = Bu[i]
        for k in range(n):
            acc += A[i, k] * x[k]
        x_new[i] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += A[i, k] * P[k, j]
            AP[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = Q[i, j]
            for k in range(n):
                acc += AP[i, k] * A[j, k]
            P_new[i, j] = acc
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.5 * (P_new[i, j] + P_new[j, i])
            P_new[i, j] = acc
            P_new[j, i] = acc
    return x_new, P_new


def kf_update_pos(cnp.ndarray[cnp.float64_t, ndim=1] x,
                  cnp.ndarray[cnp.float64_t, ndim=2] P,
                  cnp.ndarray[cnp.float64_t, ndim=1] z,
                  cnp.ndarray[cnp.float64_t, ndim=2] R):
    """Joseph-form update for H = [I3 0]; returns (x', P', nu, S, q)."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] nu = np.empty(3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] S = np.empty((3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] S_inv = np.empty((3, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] K = np.empty((n, 3))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_post = np.empty(n)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] IKH = np.zeros((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] T = np.empty((n, n))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] P_post = np.empty((n, n))
    cdef Py_ssize_t i, j, k
    cdef double det, q, acc

    for i in range(3):
        nu[i] = z[i] - x[i]
        for j in range(3):
            S[i, j] = P[i, j] + R[i, j]

    det = (S[0, 0] * (S[1, 1] * S[2, 2] - S[1, 2] * S[2, 1])
           - S[0, 1] * (S[1, 0] * S[2, 2] - S[1, 2] * S[2, 0])
           + S[0, 2] * (S[1, 0] * S[2, 1] - S[1, 1] * S[2, 0]))
    if det == 0.0:
        raise np.linalg.LinAlgError("innovation covariance is singular")
    S_inv[0, 0] = (S[1, 1] * S[2, 2] - S[1, 2] * S[2, 1]) / det
    S_inv[0, 1] = (S[0, 2] * S[2, 1] - S[0, 1] * S[2, 2]) / det
    S_inv[0, 2] = (S[0, 1] * S[1, 2] - S[0, 2] * S[1, 1]) / det
    S_inv[1, 0] = (S[1, 2] * S[2, 0] - S[1, 0] * S[2, 2]) / det
    S_inv[1, 1] = (S[0, 0] * S[2, 2] - S[0, 2] * S[2, 0]) / det
    S_inv[1, 2] = (S[0, 2] * S[1, 0] - S[0, 0] * S[1, 2]) / det
    S_inv[2, 0] = (S[1, 0] * S[2, 1] - S[1, 1] * S[2, 0]) / det
    S_inv[2, 1] = (S[0, 1] * S[2, 0] - S[0, 0] * S[2, 1]) / det
    S_inv[2, 2] = (S[0, 0] * S[1, 1] - S[0, 1] * S[1, 0]) / det

    q = 0.0
    for i in range(3):
        for j in range(3):
            q += nu[i] * S_inv[i, j] * nu[j]

    for i in range(n):
        for j in range(3):
            acc = 0.0
            for k in range(3):
                acc += P[i, k] * S_inv[k, j]
            K[i, j] = acc

    for i in range(n):
        acc = x[i]
        for k in range(3):
            acc += K[i, k] * nu[k]
        x_post[i] = acc

    for i in range(n):
        IKH[i, i] = 1.0
        for j in range(3):
            IKH[i, j] -= K[i, j]

    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += IKH[i, k] * P[k, j]
            T[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(n):
                acc += T[i, k] * IKH[j, k]
            # + K R K^T
            P_post[i, j] = acc
    for i in range(n):
        for j in range(n):
            acc = 0.0
            for k in range(3):
                acc += (K[i, 0] * R[0, k] + K[i, 1] * R[1, k]
                        + K[i, 2] * R[2, k]) * K[j, k]
            P_post[i, j] += acc
    for i in range(n):
        for j in range(i + 1, n):
            acc = 0.5 * (P_post[i, j] + P_post[j, i])
            P_post[i, j] = acc
            P_post[j, i] = acc
    return x_post, P_post, nu, S, q


def propagate_cv(cnp.ndarray[cnp.float64_t, ndim=2] particles,
                 double dt,
                 cnp.ndarray[cnp.float64_t, ndim=2] accel):
    """In-place CV propagation: p += v dt + a dt^2/2, v += a dt."""
    cdef Py_ssize_t n = particles.shape[0]
    cdef double half_dt2 = 0.5 * dt * dt
    cdef Py_ssize_t i, j
    for i in range(n):
        for j in range(3):
            particles[i, j] += particles[i, j + 3] * dt + half_dt2 * accel[i, j]
            particles[i, j + 3] += accel[i, j] * dt


def bearing_log_weights(cnp.ndarray[cnp.float64_t, ndim=1] logw,
                        cnp.ndarray[cnp.float64_t, ndim=2] positions,
                        cnp.ndarray[cnp.float64_t, ndim=1] cam_pos,
                        cnp.ndarray[cnp.float64_t, ndim=1] bearing,
                        double inv_two_sigma2):
    """In place: logw[i] -= angle(camera->particle, bearing)^2 * inv_two_sigma2."""
    cdef Py_ssize_t n = positions.shape[0]
    cdef double dx, dy, dz, r, c, theta
    cdef double bx = bearing[0], by = bearing[1], bz = bearing[2]
    cdef double cx = cam_pos[0], cy = cam_pos[1], cz = cam_pos[2]
    cdef Py_ssize_t i
    for i in range(n):
        dx = positions[i, 0] - cx
        dy = positions[i, 1] - cy
        dz = positions[i, 2] - cz
        r = sqrt(dx * dx + dy * dy + dz * dz)
        if r <= 1e-12:
            continue
        c = (dx * bx + dy * by + dz * bz) / r
        if c > 1.0:
            c = 1.0
        elif c < -1.0:
            c = -1.0
        theta = acos(c)
        logw[i] -= theta * theta * inv_two_sigma2


def systematic_resample(cnp.ndarray[cnp.float64_t, ndim=1] weights, double u0):
    """Systematic resampling with one uniform draw and N even strata."""
    cdef Py_ssize_t n = weights.shape[0]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.empty(n, dtype=np.int64)
    cdef double cum = weights[0]
    cdef double pos
    cdef Py_ssize_t i, j = 0
    for i in range(n):
        pos = (i + u0) / n
        while cum <= pos and j < n - 1:
            j += 1
            cum += weights[j]
        idx[i] = j
    return idx


def weighted_mean_cov(cnp.ndarray[cnp.float64_t, ndim=2] positions,
                      cnp.ndarray[cnp.float64_t, ndim=1] weights):
    """Weighted mean and covariance of (N, 3) positions (weights sum to 1)."""
    cdef Py_ssize_t n = positions.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mean = np.zeros(3)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cov = np.zeros((3, 3))
    cdef double w, d0, d1, d2
    cdef Py_ssize_t i
    for i in range(n):
        w = weights[i]
        mean[0] += w * positions[i, 0]
        mean[1] += w * positions[i, 1]
        mean[2] += w * positions[i, 2]
    for i in range(n):
        w = weights[i]
        d0 = positions[i, 0] - mean[0]
        d1 = positions[i, 1] - mean[1]
        d2 = positions[i, 2] - mean[2]
        cov[0, 0] += w * d0 * d0
        cov[0, 1] += w * d0 * d1
        cov[0, 2] += w * d0 * d2
        cov[1, 1] += w * d1 * d1
        cov[1, 2] += w * d1 * d2
        cov[2, 2] += w * d2 * d2
    cov[1, 0] = cov[0, 1]
    cov[2, 0] = cov[0, 2]
    cov[2, 1] = cov[1, 2]
    return mean, cov
