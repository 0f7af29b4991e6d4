import numpy as np
import pytest

from fdisim.plant import (DynamicsModel, SimulationError, VehicleState,
                          double_integrator, step_dynamics)


def _state(p, v, t=0.0):
    return VehicleState(t=t, p=np.asarray(p, dtype=float),
                        v=np.asarray(v, dtype=float))


def test_equilibrium_no_input_no_noise():
    model = double_integrator(0.01, accel_noise_std=0.0)
    s = step_dynamics(_state([1, 2, 3], [0, 0, 0]), np.zeros(3), model,
                      np.random.default_rng(0))
    assert np.allclose(s.p, [1, 2, 3])
    assert np.allclose(s.v, 0)


def test_pure_velocity_integration():
    model = double_integrator(0.01, accel_noise_std=0.0)
    s = step_dynamics(_state([0, 0, 0], [1, 0, 0]), np.zeros(3), model,
                      np.random.default_rng(0))
    assert np.allclose(s.p, [0.01, 0, 0])
    assert np.allclose(s.v, [1, 0, 0])


def test_single_step_includes_half_u_dt_squared():
    model = double_integrator(0.01, accel_noise_std=0.0)
    s = step_dynamics(_state([0, 0, 0], [0, 0, 0]), np.array([1.0, 0, 0]),
                      model, np.random.default_rng(0))
    assert np.allclose(s.v, [0.01, 0, 0])
    assert np.allclose(s.p, [0.00005, 0, 0])


def test_constant_acceleration_matches_ballistic_closed_form():
    # Oracle: p(t) = p0 + v0 t + a t^2 / 2, v(t) = v0 + a t, exact under ZOH.
    dt, n = 0.01, 1000
    model = double_integrator(dt, accel_noise_std=0.0)
    u = np.array([0.7, -0.3, 1.1])
    s = _state([1.0, 2.0, 3.0], [0.5, 0.0, -0.2])
    for _ in range(n):
        s = step_dynamics(s, u, model, np.random.default_rng(0))
    t = n * dt
    p_expect = np.array([1.0, 2.0, 3.0]) + np.array([0.5, 0.0, -0.2]) * t + 0.5 * u * t * t
    v_expect = np.array([0.5, 0.0, -0.2]) + u * t
    assert np.allclose(s.p, p_expect, atol=1e-9)
    assert np.allclose(s.v, v_expect, atol=1e-9)
    assert s.t == pytest.approx(t)


def test_process_noise_covariance_matches_model():
    dt, sigma = 0.1, 0.8
    model = double_integrator(dt, accel_noise_std=sigma)
    assert np.allclose(model.noise_gain @ model.noise_gain.T, model.Q)
    rng = np.random.default_rng(7)
    samples = np.array([
        step_dynamics(_state([0, 0, 0], [0, 0, 0]), np.zeros(3), model, rng).as_vector()
        for _ in range(20000)
    ])
    emp = np.cov(samples.T, bias=True)
    assert np.linalg.norm(emp - model.Q) / np.linalg.norm(model.Q) < 0.05


def test_double_integrator_block_structure():
    dt = 0.02
    model = double_integrator(dt, 0.1)
    assert np.allclose(model.A[:3, :3], np.eye(3))
    assert np.allclose(model.A[:3, 3:], dt * np.eye(3))
    assert np.allclose(model.A[3:, 3:], np.eye(3))
    assert np.allclose(model.B[:3], 0.5 * dt * dt * np.eye(3))
    assert np.allclose(model.B[3:], dt * np.eye(3))
    assert np.all(np.linalg.eigvalsh(model.Q) >= -1e-15)


def test_nonfinite_state_raises_with_step_index():
    model = double_integrator(0.01, 0.0)
    bad = _state([np.inf, 0, 0], [0, 0, 0])
    with pytest.raises(SimulationError, match="step 42"):
        step_dynamics(bad, np.zeros(3), model, np.random.default_rng(0),
                      step_index=42)


def test_model_validation():
    with pytest.raises(ValueError):
        DynamicsModel(dt=-0.01, A=np.eye(6), B=np.zeros((6, 3)), Q=np.eye(6))
    bad_q = np.eye(6)
    bad_q[0, 1] = 0.5  # asymmetric
    with pytest.raises(ValueError):
        DynamicsModel(dt=0.01, A=np.eye(6), B=np.zeros((6, 3)), Q=bad_q)
