import numpy as np
import pytest

import fdisim
from fdisim.attack import (AttackSpec, CalibrationError, SpooferState,
                           apply_meaconing, calibrate_stealth_rate,
                           spoofer_position)
from fdisim.estimator import chi2_threshold
from fdisim.gnss import GENUINE, SPOOFED, Measurement
from fdisim.mission import WaypointPlan, reference_at


@pytest.fixture
def plan():
    return WaypointPlan(np.array([[0.0, 0, 0], [20.0, 0, 0]]),
                        np.array([0.0, 20.0]))


def _meas(stamp, value=(1.0, 0.0, 0.0)):
    return Measurement(sensor_id=1, seq=3, stamp=stamp, deliver_time=stamp + 0.1,
                       value=np.asarray(value, float), cov=np.eye(3))


def test_spoofer_anchored_at_reference_at_onset(plan):
    spec = AttackSpec(mode="meaconing", t_on=5.0, ramp_rate=0.1)
    sp = SpooferState(active=True)
    p_ref, _ = reference_at(5.0, plan)
    assert np.allclose(spoofer_position(5.0, spec, sp, plan), p_ref)


def test_zero_ramp_tracks_reference(plan):
    spec = AttackSpec(mode="meaconing", t_on=5.0, ramp_rate=0.0)
    sp = SpooferState(active=True)
    for t in (5.0, 9.0, 14.0):
        assert np.allclose(spoofer_position(t, spec, sp, plan),
                           reference_at(t, plan)[0])


def test_linear_ramp_arithmetic(plan):
    spec = AttackSpec(mode="meaconing", t_on=5.0,
                      direction=np.array([1.0, 0, 0]), ramp_rate=0.1)
    sp = SpooferState(active=True)
    offset = spoofer_position(35.0, spec, sp, plan) - reference_at(35.0, plan)[0]
    assert np.allclose(offset, [3.0, 0, 0])


def test_meaconing_off_is_identity(plan):
    spec = AttackSpec(mode="off")
    m = _meas(1.0)
    out = apply_meaconing(m, spec, SpooferState(), plan, np.zeros(3),
                          np.zeros(3))
    assert out is m


def test_meaconing_pre_onset_unchanged(plan):
    spec = AttackSpec(mode="meaconing", t_on=5.0, ramp_rate=0.1)
    out = apply_meaconing(_meas(4.9), spec, SpooferState(), plan, np.zeros(3),
                          np.zeros(3))
    assert out.provenance == GENUINE
    assert np.allclose(out.value, [1, 0, 0])


def test_meaconing_noiseless_substitution_and_field_preservation(plan):
    spec = AttackSpec(mode="meaconing", t_on=5.0, ramp_rate=0.1)
    sp = SpooferState()
    m = _meas(8.0)
    out = apply_meaconing(m, spec, sp, plan, np.zeros(3),
                          np.array([7.7, 0.1, -0.2]))
    assert out.provenance == SPOOFED
    assert np.allclose(out.value, spoofer_position(8.0, spec, sp, plan))
    # value and provenance only; everything else preserved
    assert out.stamp == m.stamp and out.deliver_time == m.deliver_time
    assert out.seq == m.seq and np.allclose(out.cov, m.cov)
    # anchor recorded once, at first injection
    assert np.allclose(sp.anchor, [7.7, 0.1, -0.2])


def test_onset_continuity_without_noise(plan):
    # At onset the spoofed value differs from the reference only by the
    # receiver noise (zero here): no jump an innovation gate could see.
    spec = AttackSpec(mode="meaconing", t_on=5.0, ramp_rate=0.5)
    out = apply_meaconing(_meas(5.0), spec, SpooferState(), plan,
                          np.zeros(3), np.zeros(3))
    assert np.allclose(out.value, reference_at(5.0, plan)[0])


def test_spec_validation():
    with pytest.raises(ValueError):
        AttackSpec(mode="meaconing", direction=np.array([1.0, 1.0, 0.0]))
    with pytest.raises(ValueError):
        AttackSpec(mode="meaconing", ramp_rate=-0.1)
    with pytest.raises(ValueError):
        AttackSpec(mode="what")


class TestCalibration:
    def _cfg(self, **kw):
        base = dict(duration_s=16.0, seed=7,
                    attack={"mode": "meaconing", "t_on_s": 8.0,
                            "ramp_rate_mps": 0.0, "r_max_mps": 0.3},
                    cameras={"positions_m": []},
                    detector={"enabled": False})
        base.update(kw)
        return fdisim.default_config(**base)

    def test_infeasible_margin_fails(self):
        cfg = self._cfg()
        gamma = chi2_threshold(3, 1e-7)
        with pytest.raises(CalibrationError):
            calibrate_stealth_rate(cfg, gamma, margin=0.999, iters=4)

    def test_null_attack_matches_nominal_statistics(self):
        # Same seed: a ramp-0 attack replays the reference trajectory while
        # the nominal run measures the true one; their residual statistics
        # agree to within the closed-loop tracking error, and the probe
        # itself is deterministic.
        cfg = self._cfg()
        null_a = self._probe_max_q(cfg.for_calibration(0.0))
        null_b = self._probe_max_q(cfg.for_calibration(0.0))
        assert null_a == null_b
        nominal = self._probe_max_q(cfg.with_overrides(attack={"mode": "off"}))
        assert abs(np.sqrt(null_a) - np.sqrt(nominal)) < 0.6

    @staticmethod
    def _probe_max_q(cfg):
        trace, _ = fdisim.run_scenario(cfg)
        return max(r.q for r in trace.residuals if r.t >= 8.0)

    def test_bisection_result_verified_by_resimulation(self):
        # Independent oracle: re-simulate at the returned rate (stealthy)
        # and at twice the rate (margin-violating or flagged).
        cfg = self._cfg()
        gamma = chi2_threshold(3, 1e-7)
        res = calibrate_stealth_rate(cfg, gamma, margin=0.1, iters=10)
        budget = 0.9 * gamma
        assert res.ramp_rate > 0
        q_at = self._probe_max_q(cfg.for_calibration(res.ramp_rate))
        assert q_at <= budget
        if not res.hit_r_max:
            q_double = self._probe_max_q(cfg.for_calibration(2 * res.ramp_rate))
            assert q_double > budget

    def test_tight_gate_short_window(self):
        # Same verification against the 99% three-axis gate; the attack
        # window is kept short so the null run fits under 0.9*gamma
        # (seed picked accordingly: the null maximum must clear the margin).
        cfg = self._cfg(duration_s=12.0, seed=5,
                        attack={"mode": "meaconing", "t_on_s": 8.0,
                                "ramp_rate_mps": 0.0, "r_max_mps": 0.3},
                        monitor={"alpha": 0.01})
        gamma = chi2_threshold(3, 0.01)
        assert gamma == pytest.approx(11.345, abs=1e-3)
        res = calibrate_stealth_rate(cfg, gamma, margin=0.1, iters=8)
        q_at = self._probe_max_q(cfg.for_calibration(res.ramp_rate))
        assert q_at <= 0.9 * gamma

    def test_r_max_stealthy_returns_r_max_with_warning(self):
        cfg = self._cfg(attack={"mode": "meaconing", "t_on_s": 8.0,
                                "ramp_rate_mps": 0.0, "r_max_mps": 1e-4})
        gamma = chi2_threshold(3, 1e-7)
        res = calibrate_stealth_rate(cfg, gamma, margin=0.1, iters=4)
        assert res.hit_r_max
        assert res.ramp_rate == pytest.approx(1e-4)
