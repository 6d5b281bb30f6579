import math

import numpy as np
import pytest

import vhcplan as vp


def test_tictoc_coefficient_ratios(pvtol):
    # The tic-toc constraint reduces to theta thetaddot - thetadot^2 + 1 = 0,
    # i.e. alpha/gamma = theta and beta/gamma = -1.
    vhc = vp.tic_toc_vhc()
    for th in np.linspace(-1.5, 1.5, 121):
        a, b, g = vp.reduced_coefficients(pvtol, vhc, float(th))
        assert abs(a / g - th) < 1e-12
        assert abs(b / g + 1.0) < 1e-12


def test_tictoc_alpha_slope(pvtol, tictoc_model):
    h = 1e-6
    slope = (float(tictoc_model.alpha(h)) - float(tictoc_model.alpha(-h))) / (2.0 * h)
    assert abs(float(tictoc_model.alpha(0.0))) < 1e-15
    assert abs(slope - 1.0) < 1e-9


def test_reduced_coefficients_domain_guard(pvtol):
    vhc = vp.tic_toc_vhc(domain=(-1.0, 1.0))
    with pytest.raises(vp.DomainError):
        vp.reduced_coefficients(pvtol, vhc, 1.5)


def test_reduce_uses_vhc_domain_by_default(pvtol):
    vhc = vp.tic_toc_vhc(domain=(-1.2, 0.9))
    model = vp.reduce(pvtol, vhc)
    assert model.interval == (-1.2, 0.9)
    with pytest.raises(vp.DomainError):
        vp.reduce(pvtol, vhc, (0.0, math.inf))


def test_model_sample_matches_scalar_calls(pvtol, tictoc_model):
    thetas = np.linspace(-1.0, 1.0, 11)
    alphas, betas, gammas = tictoc_model.sample(thetas)
    for i, th in enumerate(thetas):
        assert abs(alphas[i] - float(tictoc_model.alpha(float(th)))) < 1e-14
        assert abs(betas[i] - float(tictoc_model.beta(float(th)))) < 1e-14
        assert abs(gammas[i] - float(tictoc_model.gamma(float(th)))) < 1e-14


def test_existence_check_tictoc(tictoc_report):
    rep = tictoc_report
    assert rep.overall
    assert all(rep.flags.values())
    assert abs(rep.theta_s) < 1e-12
    assert abs(rep.v_s - 1.0) < 1e-9
    assert abs(rep.beta_s / rep.alpha_slope + 1.0) < 1e-8
    assert rep.sign == 1
    assert rep.zeros == (rep.theta_s,)


def test_existence_check_json_round_trip(tictoc_report):
    d = tictoc_report.to_json_dict()
    assert d["overall"] is True
    assert set(d["flags"]) == {"unique_zero", "slope_positive",
                               "gamma_positive_on_interval", "ratio_below_minus_half"}
    assert abs(d["theta_s"]) < 1e-12


def test_family_closed_form_matches_generic_reduction(pvtol):
    # The family model's explicit coefficients must agree with projecting the
    # dynamics through the generic annihilator route.
    psi_s, k1, k2, k3 = 0.25 * math.pi, 1.0, 2.0, -1.0
    closed = vp.family_reduced(psi_s, k1, k2, k3, (-0.3, 0.3))
    generic = vp.reduce(pvtol, closed.vhc, (-0.3, 0.3))
    for th in np.linspace(-0.29, 0.29, 31):
        assert abs(float(closed.alpha(th)) - float(generic.alpha(float(th)))) < 1e-12
        assert abs(float(closed.beta(th)) - float(generic.beta(float(th)))) < 1e-12
        assert abs(float(closed.gamma(th)) - float(generic.gamma(float(th)))) < 1e-12


def test_family_example_passes_with_known_crossing_speed():
    model = vp.family_reduced(0.25 * math.pi, 1.0, 2.0, -1.0, (-0.3, 0.3))
    rep = vp.check_theorem1(model)
    assert rep.overall
    # v_s = (-gamma/beta)^(1/2) = (sin(pi/4)/cos(0) / 1)^(1/2) = 2^(-1/4)
    assert abs(rep.v_s - 2.0 ** -0.25) < 1e-9


def test_family_wrong_curvature_fails_ratio_flag():
    model = vp.family_reduced(0.25 * math.pi, 1.0, 2.0, 1.0, (-0.3, 0.3))
    rep = vp.check_theorem1(model)
    assert not rep.overall
    assert not rep.flags["ratio_below_minus_half"]
    assert rep.flags["slope_positive"]


def test_existence_check_retries_flipped_annihilator_sign():
    # Raw coefficients have alpha' < 0 and gamma < 0; the flipped global sign
    # must be tried and accepted.
    model = vp.family_reduced(-0.5 * math.pi, -1.0, 1.0, 0.4, (-0.3, 0.3))
    rep = vp.check_theorem1(model)
    assert rep.overall
    assert rep.sign == -1
    assert abs(rep.v_s - math.sqrt(1.0 / 0.4)) < 1e-9
    assert abs(rep.alpha_slope - 0.6) < 1e-9


def test_family_vhc_rejects_degenerate_direction():
    with pytest.raises(vp.DomainError):
        vp.family_vhc(np.array([0.0, 0.0, 0.5 * math.pi]), 0.0, 0.0, -1.0)


def test_family_vhc_geometry():
    q_s = np.array([0.0, 0.0, 0.5 * math.pi])
    vhc = vp.family_vhc(q_s, 0.25, 1.5, -0.25, domain=(-0.2, 0.2))
    assert np.abs(vhc.phi(0.0) - q_s).max() < 1e-15
    # dphi(0) = B(q_s) (k1, k2); psi_s = pi/2 makes that (-0.25, 0, 1.5).
    assert np.abs(vhc.dphi(0.0) - [-0.25, 0.0, 1.5]).max() < 1e-15
    # ddphi is constant along the annihilator direction.
    assert np.abs(vhc.ddphi(0.1) - vhc.ddphi(-0.1)).max() < 1e-15


def test_find_family_parameters_known_solution():
    params = vp.find_family_parameters(0.5 * math.pi)
    assert params is not None
    assert (params.k1, params.k2, params.k3) == (0.25, 1.5, -0.25)
    assert params.interval == (-0.2, 0.2)
    assert params.report.overall


def test_find_family_parameters_rejects_horizontal_thrust():
    with pytest.raises(vp.DomainError):
        vp.find_family_parameters(math.pi)


def test_momentum_scan_reference_orbit(pvtol, reference_orbit):
    passes = vp.theorem2_scan(pvtol, reference_orbit)
    times = sorted(p.time for p in passes)
    assert len(times) == 2
    assert abs(times[0]) < 1e-8
    assert abs(times[1] - math.pi) < 1e-8
    for p in passes:
        assert abs(p.speed - math.sqrt(5.0)) < 1e-12
        assert abs(p.gravity_distance - 1.0) < 1e-12
        assert p.annihilator_residual < 1e-10


def test_momentum_scan_excludes_rest_points(pvtol, reference_orbit):
    # The momentum also vanishes at t = +-pi/2, but those are rest points.
    passes = vp.theorem2_scan(pvtol, reference_orbit)
    for p in passes:
        assert min(abs(p.time - 0.5 * math.pi), abs(p.time + 0.5 * math.pi)) > 1.0
