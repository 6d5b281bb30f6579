import math

import numpy as np
import pytest

import vhcplan as vp
from vhcplan.mech import MechanicalSystem


def test_pvtol_matrices(pvtol):
    q = np.array([0.3, -0.7, 1.1])
    assert np.array_equal(pvtol.mass_matrix(q), np.eye(3))
    assert np.array_equal(pvtol.coriolis(q, np.ones(3)), np.zeros((3, 3)))
    assert np.array_equal(pvtol.gravity(q), np.array([0.0, 1.0, 0.0]))
    B = pvtol.input_map(q)
    assert B.shape == (3, 2)
    assert np.allclose(B[:, 0], [-math.sin(1.1), math.cos(1.1), 0.0])
    assert np.allclose(B[:, 1], [0.0, 0.0, 1.0])


def test_annihilator_unit_norm_and_orthogonal(pvtol):
    rng = np.random.default_rng(7)
    for _ in range(25):
        q = rng.uniform(-3.0, 3.0, 3)
        w = vp.left_annihilator(pvtol, q)
        assert abs(np.linalg.norm(w) - 1.0) < 1e-14
        assert np.abs(w @ pvtol.input_map(q)).max() < 1e-14


def test_annihilator_matches_generic_null_space(pvtol):
    # Strip the closed-form annihilator and recompute through the SVD route.
    generic = MechanicalSystem(n=3, mass_matrix=pvtol.mass_matrix,
                               coriolis=pvtol.coriolis, gravity=pvtol.gravity,
                               input_map=pvtol.input_map, name="pvtol-generic")
    rng = np.random.default_rng(3)
    prev = None
    for _ in range(20):
        q = rng.uniform(-2.0, 2.0, 3)
        w_closed = vp.left_annihilator(pvtol, q)
        w_generic = vp.left_annihilator(generic, q, prev=w_closed)
        assert np.abs(w_closed - w_generic).max() < 1e-12
        prev = w_generic


def test_eval_accel_matches_hand_formula(pvtol):
    rng = np.random.default_rng(11)
    for _ in range(10):
        q = rng.uniform(-2.0, 2.0, 3)
        qd = rng.uniform(-2.0, 2.0, 3)
        u = rng.uniform(-3.0, 3.0, 2)
        qdd = vp.eval_accel(pvtol, vp.PhaseState(q, qd), u)
        expected = pvtol.input_map(q) @ u - np.array([0.0, 1.0, 0.0])
        assert np.abs(qdd - expected).max() < 1e-14


def test_eval_accel_rejects_non_spd_mass():
    bad = MechanicalSystem(
        n=2,
        mass_matrix=lambda q: np.array([[1.0, 0.0], [0.0, -1.0]]),
        coriolis=lambda q, qd: np.zeros((2, 2)),
        gravity=lambda q: np.zeros(2),
        input_map=lambda q: np.array([[1.0], [0.0]]),
        name="bad",
    )
    with pytest.raises(vp.ModelInvariantError):
        vp.eval_accel(bad, vp.PhaseState(np.zeros(2), np.zeros(2)), np.zeros(1))


def test_inverse_input_round_trip(pvtol):
    rng = np.random.default_rng(5)
    for _ in range(10):
        q = rng.uniform(-2.0, 2.0, 3)
        qd = rng.uniform(-1.0, 1.0, 3)
        u = rng.uniform(-2.0, 2.0, 2)
        qdd = vp.eval_accel(pvtol, vp.PhaseState(q, qd), u)
        u_rec, residual = vp.inverse_input(pvtol, q, qd, qdd)
        assert np.abs(u_rec - u).max() < 1e-12
        assert residual < 1e-13


def test_inverse_input_residual_is_unactuated_component(pvtol):
    q = np.array([0.0, 0.0, 0.5])
    qd = np.zeros(3)
    # Force the acceleration off the actuated subspace by a known amount.
    w = vp.left_annihilator(pvtol, q)
    qdd = vp.eval_accel(pvtol, vp.PhaseState(q, qd), np.array([1.0, 0.2])) + 0.3 * w
    _, residual = vp.inverse_input(pvtol, q, qd, qdd)
    assert abs(residual - 0.3) < 1e-12


def test_phase_state_validation():
    with pytest.raises(vp.ModelInvariantError):
        vp.PhaseState(np.array([1.0, np.nan]), np.zeros(2))
    with pytest.raises(vp.ModelInvariantError):
        vp.PhaseState(np.zeros(3), np.zeros(2))
    with pytest.raises(vp.ModelInvariantError):
        vp.PhaseState(np.zeros((2, 2)), np.zeros((2, 2)))


def test_reference_initial_conditions_and_rest_points():
    q, qd, u = vp.tic_toc_reference(0.0)
    assert np.abs(q - [0.0, 0.0, 0.5 * math.pi]).max() < 1e-15
    assert np.abs(qd - [1.0, 0.0, -2.0]).max() < 1e-15
    assert np.abs(u).max() < 1e-15
    for t in (-0.5 * math.pi, 0.5 * math.pi):
        _, qd, _ = vp.tic_toc_reference(t)
        assert np.abs(qd).max() < 1e-15


def test_reference_thrust_profile():
    # u1 = sin(t) sqrt(4 sin^2 t + 1) along the maneuver.
    for t in np.linspace(0.0, 2.0 * math.pi, 50):
        _, _, u = vp.tic_toc_reference(float(t))
        s = math.sin(t)
        assert abs(u[0] - s * math.sqrt(4.0 * s * s + 1.0)) < 1e-13


def test_reference_satisfies_dynamics(pvtol):
    # qddot from the closed form must equal B(q) u - G at every sample.
    for t in np.linspace(-math.pi, math.pi, 200):
        q, _, u = vp.tic_toc_reference(float(t))
        qdd = vp.tic_toc_acceleration(float(t))
        rhs = pvtol.input_map(q) @ u - pvtol.gravity(q)
        assert np.abs(qdd - rhs).max() < 1e-12


def test_reference_acceleration_is_velocity_derivative():
    h = 1e-6
    for t in np.linspace(-2.0, 2.0, 25):
        _, qd_p, _ = vp.tic_toc_reference(float(t) + h)
        _, qd_m, _ = vp.tic_toc_reference(float(t) - h)
        fd = (qd_p - qd_m) / (2.0 * h)
        assert np.abs(fd - vp.tic_toc_acceleration(float(t))).max() < 1e-8
