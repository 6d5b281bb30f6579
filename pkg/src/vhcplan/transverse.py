"""Transverse coordinates around a periodic orbit and orbital stabilization.

A moving chart splits the phase space near the orbit into a scalar phase tau
on [-pi, pi) and five transverse coordinates rho that vanish exactly on the
orbit. Two charts ship:

  * the tic-toc chart: tau = atan2(x, xdot), rho = (constraint values,
    their velocities, radial deviation in the (x, xdot) plane), matching the
    reference maneuver whose (x, xdot) projection is the unit circle;
  * a family chart built from any constraint-family orbit, applying the same
    recipe in the scaled reduced phase plane (theta, thetadot) with
    constraint-error coordinates (x - phi1, z - phi2) and their rates.

Differentiating rho along the dynamics and dividing by taudot yields
drho/dtau = f(rho, tau, w) with input deviation w = u - u*(tau); finite
differences of f give the periodic pair A(tau), B(tau) used for the
controllability Gramian, the periodic LQR gain schedule and the monodromy
(period map) spectrum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline

from .errors import ConditionCheckError, ConvergenceError, OutsideTubeError
from .feasibility import candidate_dh, candidate_h
from .mech import MechanicalSystem, PhaseState, eval_accel, tic_toc_reference
from .singular_solver import PeriodicTrajectory
from .vhc import FamilyParameters

Array = np.ndarray

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Map an angle to [-pi, pi)."""
    r = math.fmod(a + math.pi, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    return r - math.pi


class PeriodicMatrixSpline:
    """Periodic cubic interpolation of array-valued samples on [-pi, pi)."""

    def __init__(self, taus: Array, values: Array):
        t_ext = np.append(taus, taus[0] + TWO_PI)
        v_ext = np.concatenate([values, values[:1]], axis=0)
        self._lo = float(taus[0])
        self._spline = CubicSpline(t_ext, v_ext, axis=0, bc_type="periodic")

    def __call__(self, tau: float):
        return self._spline(self._lo + (tau - self._lo) % TWO_PI)


@dataclass(frozen=True)
class TransverseCoords:
    tau: float
    rho: Array
    inside: bool


class TicTocChart:
    """Reference chart of the tic-toc orbit (unit circle in the (x, xdot) plane)."""

    # Constraint candidate whose zero set contains the orbit's configuration curve.
    h = staticmethod(candidate_h)
    dh = staticmethod(candidate_dh)

    def __init__(self, tube_radius: float = 1.0):
        self.tube_radius = float(tube_radius)

    def forward(self, q: Array, qd: Array):
        x, z, psi = q
        xd, zd, psid = qd
        tau = wrap_angle(math.atan2(x, xd))
        rho = np.array([
            z + 0.5 * x * x,
            psi - 0.5 * math.pi + math.atan(2.0 * x),
            x * xd + zd,
            psid + 2.0 * xd / (1.0 + 4.0 * x * x),
            math.hypot(x, xd) - 1.0,
        ])
        return tau, rho

    def jacobian(self, q: Array, qd: Array) -> Array:
        x = q[0]
        xd = qd[0]
        D = x * x + xd * xd
        if D == 0.0:
            raise OutsideTubeError("chart differential undefined at x = xdot = 0")
        s4 = 1.0 + 4.0 * x * x
        r = math.sqrt(D)
        J = np.zeros((6, 6))
        J[0, 0] = xd / D
        J[0, 3] = -x / D
        J[1, 0] = x
        J[1, 1] = 1.0
        J[2, 0] = 2.0 / s4
        J[2, 2] = 1.0
        J[3, 0] = xd
        J[3, 3] = x
        J[3, 4] = 1.0
        J[4, 0] = -16.0 * x * xd / (s4 * s4)
        J[4, 3] = 2.0 / s4
        J[4, 5] = 1.0
        J[5, 0] = x / r
        J[5, 3] = xd / r
        return J

    def reference(self, tau: float):
        q, qd, _ = tic_toc_reference(tau)
        return q, qd

    def reference_input(self, tau: float) -> Array:
        return tic_toc_reference(tau)[2]

    def invert_guess(self, tau: float, rho: Array):
        r = 1.0 + rho[4]
        x = r * math.sin(tau)
        xd = r * math.cos(tau)
        z = rho[0] - 0.5 * x * x
        psi = rho[1] + 0.5 * math.pi - math.atan(2.0 * x)
        zd = rho[2] - x * xd
        psid = rho[3] - 2.0 * xd / (1.0 + 4.0 * x * x)
        return np.array([x, z, psi]), np.array([xd, zd, psid])


class FamilyChart:
    """Same chart recipe applied to a constraint-family orbit.

    The reduced phase plane (theta, thetadot) is scaled by the orbit amplitude
    and angular rate so it is near-circular; theta is read off the thrust
    angle, theta_hat = (psi - psi_s)/k2, and the remaining coordinates are the
    constraint errors x - phi1(theta_hat), z - phi2(theta_hat) and their rates.
    """

    def __init__(self, traj: PeriodicTrajectory, params: FamilyParameters,
                 tube_radius: float = 1.0, n_grid: int = 8192):
        self.traj = traj
        self.vhc = traj.vhc
        self.psi_s = float(params.psi_s)
        self.k2 = float(params.k2)
        self.tube_radius = float(tube_radius)
        scalar = traj.scalar
        self.omega = TWO_PI / scalar.period
        ts = scalar.t0 + scalar.period * np.arange(n_grid + 1) / n_grid
        thetas = np.empty(n_grid + 1)
        dthetas = np.empty(n_grid + 1)
        for i, t in enumerate(ts):
            th, dth, _ = scalar.eval(float(t))
            thetas[i] = th
            dthetas[i] = dth
        self.theta_scale = float(np.max(np.abs(thetas)))
        p = thetas / self.theta_scale
        v = dthetas / (self.omega * self.theta_scale)
        tau_raw = np.unwrap(np.arctan2(p, v))
        if np.any(np.diff(tau_raw) <= 0.0):
            raise ConditionCheckError("phase is not monotone along the family orbit")
        if abs((tau_raw[-1] - tau_raw[0]) - TWO_PI) > 1e-6:
            raise ConditionCheckError("phase winding along the family orbit is not one turn")
        self._t_grid = ts
        self._tau_grid = tau_raw

    # -- reduced-plane helpers ------------------------------------------------

    def _pv(self, theta: float, dtheta: float):
        return theta / self.theta_scale, dtheta / (self.omega * self.theta_scale)

    def _time_of_phase(self, tau: float) -> float:
        y = self._tau_grid[0] + (tau - self._tau_grid[0]) % TWO_PI
        t = float(np.interp(y, self._tau_grid, self._t_grid))
        scalar = self.traj.scalar
        for _ in range(3):
            th, dth, ddth = scalar.eval(t)
            p, v = self._pv(th, dth)
            err = wrap_angle(math.atan2(p, v) - y)
            rate = (v * dth / self.theta_scale - p * ddth / (self.omega * self.theta_scale)) / (p * p + v * v)
            t -= err / rate
        return t

    def _orbit_radial(self, tau: float):
        """r*(tau) and dr*/dtau on the orbit."""
        t = self._time_of_phase(tau)
        th, dth, ddth = self.traj.scalar.eval(t)
        p, v = self._pv(th, dth)
        r = math.hypot(p, v)
        pdot = dth / self.theta_scale
        vdot = ddth / (self.omega * self.theta_scale)
        taudot = (v * pdot - p * vdot) / (r * r)
        rdot = (p * pdot + v * vdot) / r
        return r, rdot / taudot

    # -- chart interface ------------------------------------------------------

    def forward(self, q: Array, qd: Array):
        x, z, psi = q
        xd, zd, psid = qd
        th = (psi - self.psi_s) / self.k2
        dth = psid / self.k2
        p, v = self._pv(th, dth)
        tau = wrap_angle(math.atan2(p, v))
        phi = self.vhc.phi(th)
        dphi = self.vhc.dphi(th)
        r_star, _ = self._orbit_radial(tau)
        rho = np.array([
            x - phi[0],
            z - phi[1],
            xd - dphi[0] * dth,
            zd - dphi[1] * dth,
            math.hypot(p, v) - r_star,
        ])
        return tau, rho

    def jacobian(self, q: Array, qd: Array) -> Array:
        psi = q[2]
        psid = qd[2]
        th = (psi - self.psi_s) / self.k2
        dth = psid / self.k2
        p, v = self._pv(th, dth)
        D = p * p + v * v
        if D == 0.0:
            raise OutsideTubeError("chart differential undefined at the reduced-plane origin")
        r = math.sqrt(D)
        tau = wrap_angle(math.atan2(p, v))
        _, dr_star = self._orbit_radial(tau)
        dphi = self.vhc.dphi(th)
        ddphi = self.vhc.ddphi(th)
        cp = 1.0 / (self.k2 * self.theta_scale)                 # dp/dpsi
        cv = 1.0 / (self.k2 * self.omega * self.theta_scale)   # dv/dpsid
        J = np.zeros((6, 6))
        J[0, 2] = (v / D) * cp
        J[0, 5] = -(p / D) * cv
        J[1, 0] = 1.0
        J[1, 2] = -dphi[0] / self.k2
        J[2, 1] = 1.0
        J[2, 2] = -dphi[1] / self.k2
        J[3, 2] = -ddphi[0] * dth / self.k2
        J[3, 3] = 1.0
        J[3, 5] = -dphi[0] / self.k2
        J[4, 2] = -ddphi[1] * dth / self.k2
        J[4, 4] = 1.0
        J[4, 5] = -dphi[1] / self.k2
        J[5, 2] = (p / r) * cp - dr_star * (v / D) * cp
        J[5, 5] = (v / r) * cv + dr_star * (p / D) * cv
        return J

    def reference(self, tau: float):
        t = self._time_of_phase(tau)
        return self.traj.state_at(t)

    def reference_input(self, tau: float) -> Array:
        t = self._time_of_phase(tau)
        return self.traj.full_state_at(t)[3]

    def invert_guess(self, tau: float, rho: Array):
        r_star, _ = self._orbit_radial(tau)
        r = r_star + rho[4]
        p = r * math.sin(tau)
        v = r * math.cos(tau)
        th = self.theta_scale * p
        dth = self.omega * self.theta_scale * v
        psi = self.psi_s + self.k2 * th
        psid = self.k2 * dth
        phi = self.vhc.phi(th)
        dphi = self.vhc.dphi(th)
        x = rho[0] + phi[0]
        z = rho[1] + phi[1]
        xd = rho[2] + dphi[0] * dth
        zd = rho[3] + dphi[1] * dth
        return np.array([x, z, psi]), np.array([xd, zd, psid])


def to_transverse(chart, state: PhaseState) -> TransverseCoords:
    """Transverse coordinates of a phase-space point (outside-tube points are flagged)."""
    tau, rho = chart.forward(state.q, state.qdot)
    return TransverseCoords(tau=tau, rho=rho,
                            inside=bool(np.linalg.norm(rho) <= chart.tube_radius))


def chart_invert(chart, tau: float, rho: Array, tol: float = 1e-12,
                 max_iter: int = 50):
    """Phase-space point with the given chart coordinates (damped Newton).

    Seeded with the chart's closed-form inverse; iterates on the six defining
    equations until the forward-map residual is below `tol`.
    """
    rho = np.asarray(rho, dtype=float)
    if np.linalg.norm(rho) > chart.tube_radius:
        raise OutsideTubeError(f"requested rho leaves the chart tube (radius {chart.tube_radius})")
    tau = wrap_angle(float(tau))
    q, qd = chart.invert_guess(tau, rho)

    def residual(q, qd):
        tau_c, rho_c = chart.forward(q, qd)
        out = np.empty(6)
        out[0] = wrap_angle(tau_c - tau)
        out[1:] = rho_c - rho
        return out

    F = residual(q, qd)
    norm = float(np.max(np.abs(F)))
    for _ in range(max_iter):
        if norm < tol:
            return q, qd
        J = chart.jacobian(q, qd)
        step = np.linalg.solve(J, -F)
        lam = 1.0
        while lam >= 1.0 / 64.0:
            q_t = q + lam * step[:3]
            qd_t = qd + lam * step[3:]
            F_t = residual(q_t, qd_t)
            norm_t = float(np.max(np.abs(F_t)))
            if norm_t < norm:
                q, qd, F, norm = q_t, qd_t, F_t, norm_t
                break
            lam *= 0.5
        else:
            break
    if norm < tol:
        return q, qd
    raise OutsideTubeError(f"chart inversion stalled at residual {norm:.3e}; point outside tube")


@dataclass
class LtvModel:
    """Periodic linearization drho/dtau = A(tau) rho + B(tau) w on [-pi, pi)."""

    taus: Array
    A: Array
    B: Array
    chart: object
    f0_max: float
    period: float = TWO_PI
    _ab: PeriodicMatrixSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._ab = PeriodicMatrixSpline(self.taus, np.concatenate([self.A, self.B], axis=2))

    def a_of(self, tau: float) -> Array:
        return self._ab(tau)[:, :self.A.shape[2]]

    def b_of(self, tau: float) -> Array:
        return self._ab(tau)[:, self.A.shape[2]:]


def linearize(chart, sys: MechanicalSystem, traj: PeriodicTrajectory,
              n_grid: int = 512, rho_step: float = 1e-6,
              w_step: float = 1e-4) -> LtvModel:
    """Finite-difference periodic linearization of the transverse dynamics.

    Central differences with one Richardson step; the chart/trajectory pair is
    validated first (on-orbit states must map to rho ~ 0) and the on-orbit
    vector field f(0, tau, 0) must vanish to 1e-9 at every grid node.
    """
    for t in traj.t0 + traj.period * np.arange(8) / 8.0:
        q, qd = traj.state_at(float(t))
        _, rho = chart.forward(q, qd)
        if float(np.max(np.abs(rho))) > 1e-8:
            raise ConditionCheckError("chart does not vanish on the supplied trajectory")

    n_rho, n_w = 5, sys.n - 1

    def f(tau: float, rho: Array, w: Array) -> Array:
        q, qd = chart_invert(chart, tau, rho)
        u = chart.reference_input(tau) + w
        qdd = eval_accel(sys, PhaseState(q, qd), u)
        rates = chart.jacobian(q, qd) @ np.concatenate([qd, qdd])
        taudot = rates[0]
        if taudot <= 0.0:
            raise ConditionCheckError(f"phase rate is not positive at tau={tau}")
        return rates[1:] / taudot

    def column(tau, base_rho, base_w, which, j, h):
        def shift(delta):
            if which == "rho":
                e = base_rho.copy()
                e[j] += delta
                return f(tau, e, base_w)
            e = base_w.copy()
            e[j] += delta
            return f(tau, base_rho, e)
        d1 = (shift(h) - shift(-h)) / (2.0 * h)
        d2 = (shift(0.5 * h) - shift(-0.5 * h)) / h
        return (4.0 * d2 - d1) / 3.0

    taus = -math.pi + TWO_PI * np.arange(n_grid) / n_grid
    A = np.empty((n_grid, n_rho, n_rho))
    B = np.empty((n_grid, n_rho, n_w))
    zero_rho = np.zeros(n_rho)
    zero_w = np.zeros(n_w)
    f0_max = 0.0
    for i, tau in enumerate(taus):
        f0 = f(float(tau), zero_rho, zero_w)
        f0_max = max(f0_max, float(np.max(np.abs(f0))))
        for j in range(n_rho):
            A[i, :, j] = column(float(tau), zero_rho, zero_w, "rho", j, rho_step)
        for j in range(n_w):
            B[i, :, j] = column(float(tau), zero_rho, zero_w, "w", j, w_step)
    if f0_max > 1e-9:
        raise ConditionCheckError(f"on-orbit transverse field does not vanish: {f0_max:.3e}")
    return LtvModel(taus=taus, A=A, B=B, chart=chart, f0_max=f0_max)


def gramian(model: LtvModel, tol: float = 1e-10) -> Array:
    """Controllability Gramian over one period, anchored at phase 0.

    W = integral of Phi(0,s) B(s) B(s)^T Phi(0,s)^T ds over [0, 2 pi], with
    the inverse-transition factor propagated by Y' = -Y A(s).
    """
    n = model.A.shape[1]

    def rhs(s, y):
        Y = y[:n * n].reshape(n, n)
        YB = Y @ model.b_of(s)
        return np.concatenate([(-Y @ model.a_of(s)).ravel(), (YB @ YB.T).ravel()])

    y0 = np.concatenate([np.eye(n).ravel(), np.zeros(n * n)])
    sol = solve_ivp(rhs, (0.0, TWO_PI), y0, method="RK45", rtol=tol, atol=tol)
    if not sol.success:
        raise ConvergenceError(f"Gramian integration failed: {sol.message}")
    W = sol.y[n * n:, -1].reshape(n, n)
    return 0.5 * (W + W.T)


@dataclass
class GainSchedule:
    """Periodic feedback u = u*(tau) + K(tau) rho with K = -R^{-1} B^T P."""

    taus: Array
    K: Array
    P: Array
    sweeps: int
    fixed_point_gap: float
    _k_spline: PeriodicMatrixSpline = field(init=False, repr=False)

    def __post_init__(self):
        self._k_spline = PeriodicMatrixSpline(self.taus, self.K)

    def k_of(self, tau: float) -> Array:
        return self._k_spline(tau)


def periodic_lqr(model: LtvModel, Q: Array | None = None, R: Array | None = None,
                 fp_tol: float = 1e-8, max_sweeps: int = 50,
                 ode_tol: float = 1e-10) -> GainSchedule:
    """Periodic LQR via repeated backward Riccati sweeps to a period fixed point.

    Each sweep integrates P' = -(A^T P + P A - P B R^{-1} B^T P + Q) from 2 pi
    down to 0 starting at the previous sweep's initial value (first sweep: Q);
    convergence when max|P(0) - P(2 pi)| < fp_tol.
    """
    n = model.A.shape[1]
    m = model.B.shape[2]
    Q = np.eye(n) if Q is None else np.asarray(Q, dtype=float)
    R = np.eye(m) if R is None else np.asarray(R, dtype=float)
    Rinv = np.linalg.inv(R)

    def rhs(s, p):
        P = p.reshape(n, n)
        P = 0.5 * (P + P.T)
        A = model.a_of(s)
        B = model.b_of(s)
        dP = -(A.T @ P + P @ A - P @ B @ Rinv @ B.T @ P + Q)
        return dP.ravel()

    P_term = Q.copy()
    for sweep in range(1, max_sweeps + 1):
        sol = solve_ivp(rhs, (TWO_PI, 0.0), P_term.ravel(), method="RK45",
                        rtol=ode_tol, atol=ode_tol, dense_output=True)
        if not sol.success:
            raise ConvergenceError(f"Riccati sweep failed: {sol.message}")
        P0 = sol.y[:, -1].reshape(n, n)
        P0 = 0.5 * (P0 + P0.T)
        gap = float(np.max(np.abs(P0 - P_term)))
        if gap < fp_tol:
            P_samples = np.empty((model.taus.size, n, n))
            K_samples = np.empty((model.taus.size, m, n))
            for i, tau in enumerate(model.taus):
                s = tau % TWO_PI
                P = sol.sol(s).reshape(n, n)
                P = 0.5 * (P + P.T)
                P_samples[i] = P
                K_samples[i] = -Rinv @ model.B[i].T @ P
            return GainSchedule(taus=model.taus, K=K_samples, P=P_samples,
                                sweeps=sweep, fixed_point_gap=gap)
        P_term = P0
    raise ConvergenceError(f"periodic Riccati did not reach a fixed point in {max_sweeps} sweeps")


def monodromy(model: LtvModel, gains: GainSchedule | None = None,
              t0: float = 0.0, tol: float = 1e-10):
    """Period map of the (closed-loop) transverse linearization from phase t0.

    Returns (F, eigenvalues); gains=None gives the open-loop map.
    """
    n = model.A.shape[1]

    def rhs(s, y):
        Phi = y.reshape(n, n)
        A = model.a_of(s)
        if gains is not None:
            A = A + model.b_of(s) @ gains.k_of(s)
        return (A @ Phi).ravel()

    sol = solve_ivp(rhs, (t0, t0 + TWO_PI), np.eye(n).ravel(), method="RK45",
                    rtol=tol, atol=tol)
    if not sol.success:
        raise ConvergenceError(f"monodromy integration failed: {sol.message}")
    F = sol.y[:, -1].reshape(n, n)
    return F, np.linalg.eigvals(F)
