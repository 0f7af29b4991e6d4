import math

import numpy as np
import pytest

from fdisim.estimator import (MODE_GNSS_ONLY, MODE_GNSS_PLUS_EXTERNAL,
                              KalmanEstimator, MonitorConfig, ResidualRecord,
                              chi2_threshold, innovation_stat)
from fdisim.gnss import GNSS_SENSOR_ID, TRACK_SENSOR_ID, Measurement
from fdisim.kernels import kf_predict
from fdisim.plant import double_integrator


def _chi2_cdf_by_quadrature(x: float, dof: int) -> float:
    # Independent oracle: composite Simpson integration of the chi-squared
    # density (no incomplete-gamma routines involved).
    n = 20000
    t = np.linspace(1e-12, x, n + 1)
    pdf = (t ** (dof / 2.0 - 1.0) * np.exp(-t / 2.0)
           / (2.0 ** (dof / 2.0) * math.gamma(dof / 2.0)))
    h = t[1] - t[0]
    return float(h / 3.0 * (pdf[0] + pdf[-1] + 4 * pdf[1:-1:2].sum()
                            + 2 * pdf[2:-1:2].sum()))


class TestChi2Threshold:
    def test_dof3_alpha_001_matches_quadrature_oracle(self):
        g = chi2_threshold(3, 0.01)
        assert g == pytest.approx(11.345, abs=1e-3)
        assert _chi2_cdf_by_quadrature(g, 3) == pytest.approx(0.99, abs=1e-6)

    def test_dof1_one_sigma_two_sided(self):
        # alpha = 2(1 - Phi(1)) makes the threshold z^2 with z = 1.
        alpha = 1.0 - math.erf(1.0 / math.sqrt(2.0))
        assert chi2_threshold(1, alpha) == pytest.approx(1.0, abs=1e-9)

    def test_dof2_median_is_2_ln_2(self):
        assert chi2_threshold(2, 0.5) == pytest.approx(2 * math.log(2), abs=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            chi2_threshold(0, 0.01)
        with pytest.raises(ValueError):
            chi2_threshold(3, 1.5)


def _estimator(dt=0.01, sigma_a=0.0, alpha=0.01, buffer_len=64, x0=None,
               P0=None):
    model = double_integrator(dt, sigma_a)
    x0 = np.zeros(6) if x0 is None else x0
    P0 = np.eye(6) if P0 is None else P0
    return KalmanEstimator(model, MonitorConfig(alpha), x0, P0,
                           buffer_len=buffer_len), model


def _gnss(stamp, value, seq, deliver=None, cov=None):
    return Measurement(sensor_id=GNSS_SENSOR_ID, seq=seq, stamp=stamp,
                       deliver_time=stamp if deliver is None else deliver,
                       value=np.asarray(value, float),
                       cov=np.eye(3) if cov is None else cov)


class TestPredict:
    def test_origin_fixed_point(self):
        est, model = _estimator()
        P_expect = model.A @ np.eye(6) @ model.A.T
        est.predict(np.zeros(3))
        assert np.allclose(est.x, 0)
        assert np.allclose(est.P, P_expect)

    def test_scalar_riccati_one_step(self):
        # A = 1, Q = 1, P = 1 -> prior variance 2 (kernel is generic in n).
        x, P = kf_predict(np.array([0.0]), np.array([[1.0]]),
                          np.array([[1.0]]), np.array([0.0]),
                          np.array([[1.0]]))
        assert P[0, 0] == pytest.approx(2.0)

    def test_hundred_predicts_match_matrix_power_oracle(self):
        est, model = _estimator()
        for _ in range(100):
            est.predict(np.zeros(3))
        A100 = np.linalg.matrix_power(model.A, 100)
        assert np.allclose(est.P, A100 @ np.eye(6) @ A100.T, atol=1e-9)

    def test_covariance_stays_positive_definite(self):
        est, _ = _estimator(sigma_a=0.1)
        rng = np.random.default_rng(0)
        for k in range(250):
            est.predict(rng.standard_normal(3))
            if k % 10 == 0:
                est.fuse(_gnss(est.t, rng.standard_normal(3), seq=k))
        assert np.linalg.eigvalsh(est.P).min() > 0


class TestInnovation:
    def test_perfect_agreement_zero_energy(self):
        est, _ = _estimator()
        rec = innovation_stat(est.x, est.P, _gnss(0.0, [0, 0, 0], 1),
                              np.eye(3), gamma=11.3)
        assert rec.q == 0.0 and not rec.flagged

    def test_scalar_energy_arithmetic(self):
        # nu = 2, S = 4 per the first axis; other axes contribute nothing.
        big = 1e12
        rec = innovation_stat(np.zeros(6), np.zeros((6, 6)),
                              _gnss(0.0, [2.0, 0, 0], 1),
                              np.diag([4.0, big, big]), gamma=11.3)
        assert rec.q == pytest.approx(1.0, abs=1e-9)

    def test_flag_iff_energy_exceeds_gamma(self):
        rec = ResidualRecord(t=0, sensor_id=1, nu=np.zeros(3), S=np.eye(3),
                             q=12.0, gamma=11.3, flagged=12.0 > 11.3,
                             mode=MODE_GNSS_ONLY)
        assert rec.flagged


class TestFuse:
    def test_uninformative_measurement_changes_nothing(self):
        est, _ = _estimator()
        est.predict(np.zeros(3))
        x_before, P_before = est.x.copy(), est.P.copy()
        est.fuse(_gnss(0.01, [5.0, -3.0, 2.0], 1, cov=1e12 * np.eye(3)))
        assert np.allclose(est.x, x_before, atol=1e-6)
        assert np.allclose(est.P, P_before, rtol=1e-6)

    def test_scalar_update_oracle(self):
        # Prior variance 2, R = 1 -> gain 2/3, posterior 2/3 per axis.
        est, _ = _estimator(P0=np.diag([2.0, 2.0, 2.0, 1, 1, 1]))
        est.fuse(_gnss(0.0, [1.0, 0, 0], 1))
        assert np.allclose(np.diag(est.P)[:3], 2.0 / 3.0, atol=1e-12)
        assert est.x[0] == pytest.approx(2.0 / 3.0)

    def test_residual_records_report_stamp_and_mode(self):
        est, _ = _estimator()
        est.predict(np.zeros(3))
        rec = est.fuse(_gnss(0.01, [1.0, 0, 0], 1, deliver=0.05))
        assert rec.t == 0.01
        assert rec.sensor_id == GNSS_SENSOR_ID
        assert rec.mode == MODE_GNSS_ONLY

    def test_too_old_measurement_dropped_and_counted(self):
        est, _ = _estimator(buffer_len=5)
        for _ in range(20):
            est.predict(np.zeros(3))
        x_before = est.x.copy()
        rec = est.fuse(_gnss(0.01, [9.0, 9, 9], 1, deliver=0.2))
        assert rec is None
        assert est.dropped_measurements == 1
        assert np.allclose(est.x, x_before)

    def test_future_stamp_rejected(self):
        est, _ = _estimator()
        with pytest.raises(ValueError):
            est.fuse(_gnss(1.0, [0, 0, 0], 1))


class TestOutOfSequence:
    def _batch_oracle(self, model, x0, P0, inputs, measurements):
        # Textbook forward filter fusing measurements in stamp order;
        # written independently of the estimator internals.
        x, P = x0.copy(), P0.copy()
        H = np.hstack([np.eye(3), np.zeros((3, 3))])
        by_step: dict[int, list] = {}
        for m in measurements:
            by_step.setdefault(int(round(m.stamp / model.dt)), []).append(m)
        for k, u in enumerate(inputs):
            for m in sorted(by_step.get(k, []), key=lambda mm: (mm.sensor_id, mm.seq)):
                S = H @ P @ H.T + m.cov
                K = P @ H.T @ np.linalg.inv(S)
                x = x + K @ (m.value - H @ x)
                IKH = np.eye(6) - K @ H
                P = IKH @ P @ IKH.T + K @ m.cov @ K.T
                P = 0.5 * (P + P.T)
            x = model.A @ x + model.B @ u
            P = model.A @ P @ model.A.T + model.Q
            P = 0.5 * (P + P.T)
        for m in sorted(by_step.get(len(inputs), []),
                        key=lambda mm: (mm.sensor_id, mm.seq)):
            S = H @ P @ H.T + m.cov
            K = P @ H.T @ np.linalg.inv(S)
            x = x + K @ (m.value - H @ x)
            IKH = np.eye(6) - K @ H
            P = IKH @ P @ IKH.T + K @ m.cov @ K.T
            P = 0.5 * (P + P.T)
        return x, P

    def test_two_orders_identical(self):
        m1 = _gnss(0.02, [1.0, 0.5, -0.2], 1, deliver=0.10)
        m2 = _gnss(0.05, [0.8, 0.4, 0.1], 2, deliver=0.08)
        finals = []
        for order in ([m2, m1], [m1, m2]):
            est, _ = _estimator(sigma_a=0.1)
            rng = np.random.default_rng(42)
            inputs = rng.standard_normal((10, 3))
            for u in inputs:
                est.predict(u)
            for m in order:
                est.fuse(m)
            finals.append((est.x.copy(), est.P.copy()))
        assert np.allclose(finals[0][0], finals[1][0], atol=1e-12)
        assert np.allclose(finals[0][1], finals[1][1], atol=1e-12)

    @pytest.mark.parametrize("trial", range(5))
    def test_random_delivery_schedules_match_batch_filter(self, trial):
        rng = np.random.default_rng(100 + trial)
        dt = 0.01
        model = double_integrator(dt, 0.05)
        x0 = rng.standard_normal(6)
        P0 = np.diag(rng.uniform(0.5, 2.0, 6))
        n_steps = 30
        inputs = rng.standard_normal((n_steps, 3))

        measurements = []
        for i in range(12):
            k = int(rng.integers(0, n_steps + 1))
            sensor = int(rng.integers(1, 3))
            measurements.append(Measurement(
                sensor_id=sensor, seq=i, stamp=k * dt,
                deliver_time=k * dt + float(rng.uniform(0, 0.2)),
                value=rng.standard_normal(3),
                cov=np.diag(rng.uniform(0.2, 1.0, 3))))

        est = KalmanEstimator(model, MonitorConfig(0.01), x0, P0,
                              buffer_len=64)
        est.mode = MODE_GNSS_PLUS_EXTERNAL  # accept sensor-2 measurements
        # Interleave deliveries with prediction per delivery times.
        schedule = sorted(measurements,
                          key=lambda m: (m.deliver_time, m.sensor_id, m.seq))
        step = 0
        for m in schedule:
            while step < n_steps and (step + 1) * dt <= m.deliver_time:
                est.predict(inputs[step])
                step += 1
            est.fuse(m)
        while step < n_steps:
            est.predict(inputs[step])
            step += 1

        x_ref, P_ref = self._batch_oracle(model, x0, P0, inputs, measurements)
        assert np.allclose(est.x, x_ref, atol=1e-9)
        assert np.allclose(est.P, P_ref, atol=1e-9)


class TestReconfigure:
    def test_mode_latches(self):
        est, _ = _estimator()
        assert est.mode == MODE_GNSS_ONLY
        est.reconfigure(False)
        assert est.mode == MODE_GNSS_ONLY
        est.reconfigure(True)
        assert est.mode == MODE_GNSS_PLUS_EXTERNAL
        est.reconfigure(False)
        assert est.mode == MODE_GNSS_PLUS_EXTERNAL

    def test_external_gated_by_mode(self):
        est, _ = _estimator()
        est.predict(np.zeros(3))
        track = Measurement(sensor_id=TRACK_SENSOR_ID, seq=1, stamp=0.01,
                            deliver_time=0.01, value=np.ones(3),
                            cov=0.01 * np.eye(3))
        assert est.fuse(track) is None          # gnss_only: ignored
        est.reconfigure(True)
        rec = est.fuse(track)
        assert rec is not None and rec.sensor_id == TRACK_SENSOR_ID
