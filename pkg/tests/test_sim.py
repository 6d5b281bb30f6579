import math

import numpy as np
import pytest

import vhcplan as vp


def test_orbit_error_at_perturbed_start(tictoc_chart):
    err = vp.orbit_error(tictoc_chart, np.array([0.1, -0.5, 0.0]), np.zeros(3))
    expected = math.sqrt(0.495 ** 2 + (0.5 * math.pi - math.atan(0.2)) ** 2 + 0.81)
    assert abs(err - expected) < 1e-12


def test_closed_loop_converges(sim_result):
    res = sim_result
    norms = np.linalg.norm(res.rho, axis=1)
    assert norms[-1] < 1e-3
    assert np.all(np.isfinite(res.q)) and np.all(np.isfinite(res.u))
    assert np.all(np.isfinite(res.rho))
    # Monotone decay per period.
    steps_per_period = int(round(2.0 * math.pi / res.dt))
    assert norms[steps_per_period] < 0.1 * norms[0]
    assert norms[2 * steps_per_period] < 0.1 * norms[steps_per_period]


def test_simulation_shapes_and_metadata(sim_result):
    res = sim_result
    n = int(round(res.metadata["horizon"] / res.dt)) + 1
    assert res.t.shape == (n,)
    assert res.q.shape == (n, 3) and res.qdot.shape == (n, 3)
    assert res.u.shape == (n, 2) and res.rho.shape == (n, 5)
    assert res.metadata["stage_feedback"] is True
    assert res.metadata["open_loop"] is False
    assert res.t[1] - res.t[0] == res.dt


def test_simulation_is_deterministic(pvtol, tictoc_chart, tictoc_gains):
    q0 = np.array([0.1, -0.5, 0.0])
    a = vp.run_closed_loop(pvtol, tictoc_chart, tictoc_gains, q0, np.zeros(3),
                           horizon=2.0 * math.pi)
    b = vp.run_closed_loop(pvtol, tictoc_chart, tictoc_gains, q0, np.zeros(3),
                           horizon=2.0 * math.pi)
    assert np.array_equal(a.q, b.q)
    assert np.array_equal(a.u, b.u)
    assert np.array_equal(a.rho, b.rho)


def test_open_loop_does_not_converge(pvtol, tictoc_chart, tictoc_gains):
    res = vp.run_closed_loop(pvtol, tictoc_chart, tictoc_gains,
                             np.array([0.1, -0.5, 0.0]), np.zeros(3),
                             open_loop=True)
    assert np.linalg.norm(res.rho[-1]) > 1.0
    assert res.metadata["open_loop"] is True


def test_zero_order_hold_still_converges(pvtol, tictoc_chart, tictoc_gains):
    res = vp.run_closed_loop(pvtol, tictoc_chart, tictoc_gains,
                             np.array([0.1, -0.5, 0.0]), np.zeros(3),
                             stage_feedback=False)
    assert np.linalg.norm(res.rho[-1]) < 1e-1


def test_divergence_guard(pvtol, tictoc_chart, tictoc_ltv):
    destabilizing = vp.GainSchedule(
        taus=tictoc_ltv.taus,
        K=np.tile(np.full((2, 5), 50.0), (tictoc_ltv.taus.size, 1, 1)),
        P=np.tile(np.eye(5), (tictoc_ltv.taus.size, 1, 1)),
        sweeps=1, fixed_point_gap=0.0)
    with pytest.raises(vp.ConvergenceError):
        vp.run_closed_loop(pvtol, tictoc_chart, destabilizing,
                           np.array([0.1, -0.5, 0.0]), np.zeros(3))


def test_family_closed_loop(pvtol, family_pack):
    gains = vp.periodic_lqr(family_pack["ltv"], max_sweeps=300)
    _, eig = vp.monodromy(family_pack["ltv"], gains)
    assert np.abs(eig).max() < 1.0
    traj, chart = family_pack["traj"], family_pack["chart"]
    q0, qd0 = traj.state_at(0.1)
    q0 = q0 + np.array([0.01, -0.01, 0.0])
    res = vp.run_closed_loop(pvtol, chart, gains, q0, qd0, dt=0.002,
                             horizon=18.0 * traj.period)
    start = np.linalg.norm(res.rho[0])
    end = np.linalg.norm(res.rho[-1])
    assert end < 0.2 * start
