"""Boundary solutions of the singular reduced dynamics and their lift.

The reduced equation alpha(theta) theta'' + beta(theta) theta'^2 + gamma = 0
loses Lipschitz uniqueness where alpha vanishes: a one-parameter family of
solutions passes through (theta_s, v_s) with the forced crossing velocity
v_s = sqrt(-gamma/beta) and the forced crossing acceleration

    a_s = -(beta' v_s^2 + gamma') / (alpha' + 2 beta)   at theta_s.

Because the family's branches separate like |theta - theta_s|^kappa with
kappa = -2 beta/alpha' > 1, integrating away from the crossing amplifies any
seed error by 1/xi^kappa, while integrating from a boundary state toward the
crossing contracts onto the branch the boundary data selects. The solver
therefore integrates each side inward from its endpoint, stops a small
distance xi_cut before theta_s, and bridges the crossing with the series
above; endpoint conditions hold by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (BoundaryUnreachableError, ConditionCheckError,
                     ConvergenceError, DomainError)
from .mech import MechanicalSystem, inverse_input
from .numdiff import central_derivative
from .vhc import ParametricVhc, ReducedModel, SingularityReport

Array = np.ndarray


def singular_acceleration(model: ReducedModel, report: SingularityReport) -> float:
    """Forced acceleration at the singular crossing (global-sign invariant)."""
    if not report.overall:
        raise ConditionCheckError("singular acceleration requires a passing existence report")
    th = report.theta_s
    h = 1e-6 * (1.0 + abs(th))
    dbeta = central_derivative(lambda t: float(model.beta(t)), th, h)
    dgamma = central_derivative(lambda t: float(model.gamma(t)), th, h)
    dalpha = central_derivative(lambda t: float(model.alpha(t)), th, h)
    beta_s = float(model.beta(th))
    gamma_s = float(model.gamma(th))
    v2 = -gamma_s / beta_s
    denom = dalpha + 2.0 * beta_s
    if denom == 0.0:
        raise ConditionCheckError("degenerate crossing: alpha' + 2 beta vanishes")
    return -(dbeta * v2 + dgamma) / denom


def escape_singularity(model: ReducedModel, report: SingularityReport,
                       direction: int, h: float):
    """Second-order Taylor state (theta, theta') at t_s + direction*h.

    The crossing position, velocity and acceleration are forced, so the local
    expansion theta = theta_s +/- v_s h + a_s h^2 / 2 is branch-independent.
    """
    if direction not in (1, -1):
        raise DomainError("direction must be +1 or -1")
    if not 0.0 < h <= 1e-3:
        raise DomainError("escape step must satisfy 0 < h <= 1e-3")
    if not report.overall:
        raise ConditionCheckError("escape requires a passing existence report")
    v_s = report.v_s
    a_s = singular_acceleration(model, report)
    theta = report.theta_s + direction * v_s * h + 0.5 * a_s * h * h
    dtheta = v_s + direction * a_s * h
    return theta, dtheta


@dataclass
class ScalarSolution:
    """One boundary-to-boundary solution through the singular crossing (t_s = 0)."""

    model: ReducedModel
    report: SingularityReport
    t_s: float
    t1: float
    t2: float
    theta1: float
    dtheta1: float
    theta2: float
    dtheta2: float
    v_s: float
    a_s: float
    samples: Array  # columns t, theta, dtheta, ddtheta
    _eval: Callable[[float], tuple[float, float, float]] = field(repr=False)

    def eval(self, t: float):
        """(theta, theta', theta'') at time t in [t1, t2]."""
        return self._eval(t)


@dataclass
class PeriodicScalarSolution:
    """Mirror-concatenated periodic solution; crossings carry series data."""

    base: ScalarSolution
    t0: float
    period: float
    # (time, crossing velocity, crossing acceleration) per crossing in one period
    crossings: tuple
    samples: Array

    def eval(self, t: float):
        base = self.base
        tau = self.t0 + math.fmod(t - self.t0, self.period)
        if tau < self.t0:
            tau += self.period
        if tau <= base.t2:
            return base.eval(tau)
        th, dth, ddth = base.eval(2.0 * base.t2 - tau)
        return th, -dth, ddth


def _reduced_rhs(model: ReducedModel):
    def rhs(t, y):
        th, dth = y
        alpha = float(model.alpha(th))
        return [dth, -(float(model.beta(th)) * dth * dth + float(model.gamma(th))) / alpha]
    return rhs


def _series_offset(xi: float, v_s: float, a_s: float, inward: int) -> float:
    """Time to cover distance xi from the crossing along the series (inward=-1 left)."""
    # Solve v_s d + inward * a_s d^2 / 2 = xi for d > 0 (Newton from the linear guess).
    d = xi / v_s
    for _ in range(4):
        f = v_s * d + 0.5 * inward * a_s * d * d - xi
        fp = v_s + inward * a_s * d
        d -= f / fp
    return d


def solve_boundary(model: ReducedModel, report: SingularityReport,
                   theta1: float, dtheta1: float, theta2: float, dtheta2: float,
                   n_samples: int = 2001, xi_cut: float = 1e-6,
                   tol: float = 1e-10, t_max: float = 1e3) -> ScalarSolution:
    """Solution with theta(t1) = theta1, theta(t2) = theta2 crossing the singularity.

    Endpoint velocities dtheta1, dtheta2 >= 0 select the branch on each side;
    each side is integrated from its endpoint toward the crossing (RK45,
    rtol = atol = tol), stopped at |theta - theta_s| = xi_cut, and joined by
    the forced-velocity series. Time origin: the crossing happens at t = 0.
    """
    if not report.overall:
        raise ConditionCheckError("solve_boundary requires a passing existence report")
    if dtheta1 < 0.0 or dtheta2 < 0.0:
        raise DomainError("boundary velocities must be nonnegative")
    th_s = report.theta_s
    if not theta1 < th_s < theta2:
        raise DomainError("boundary positions must bracket the singular point")
    lo, hi = model.interval
    if theta1 < lo or theta2 > hi:
        raise DomainError("boundary positions must lie inside the model interval")
    if min(th_s - theta1, theta2 - th_s) < 10.0 * xi_cut:
        raise DomainError("boundary positions too close to the singular point")

    v_s = report.v_s
    a_s = singular_acceleration(model, report)
    rhs = _reduced_rhs(model)

    def cut_event(target):
        def event(t, y):
            return y[0] - target
        event.terminal = True
        event.direction = 0
        return event

    # Left side: forward in time from (theta1, dtheta1) up to theta_s - xi_cut.
    left = solve_ivp(rhs, (0.0, t_max), [theta1, dtheta1], method="RK45",
                     rtol=tol, atol=tol, dense_output=True,
                     events=[cut_event(th_s - xi_cut)])
    if not left.t_events[0].size:
        raise BoundaryUnreachableError(
            "left boundary state cannot reach the singular crossing",
            {"side": "left", "final_state": list(left.y[:, -1]), "time": float(left.t[-1])})
    T_left = float(left.t_events[0][0])
    dth_cut_left = float(left.y_events[0][0][1])

    # Right side: backward in time from (theta2, dtheta2) down to theta_s + xi_cut.
    right = solve_ivp(rhs, (0.0, -t_max), [theta2, dtheta2], method="RK45",
                      rtol=tol, atol=tol, dense_output=True,
                      events=[cut_event(th_s + xi_cut)])
    if not right.t_events[0].size:
        raise BoundaryUnreachableError(
            "right boundary state cannot reach the singular crossing",
            {"side": "right", "final_state": list(right.y[:, -1]), "time": float(right.t[-1])})
    T_right = -float(right.t_events[0][0])
    dth_cut_right = float(right.y_events[0][0][1])

    for side, dth_cut in (("left", dth_cut_left), ("right", dth_cut_right)):
        if abs(dth_cut - v_s) > 0.2 * v_s + 0.2:
            raise ConvergenceError(
                f"{side} sweep reached the cut with velocity {dth_cut:.6g}, "
                f"far from the forced crossing velocity {v_s:.6g}")

    dt_left = _series_offset(xi_cut, v_s, a_s, inward=-1)
    dt_right = _series_offset(xi_cut, v_s, a_s, inward=+1)
    t1 = -(T_left + dt_left)
    t2 = dt_right + T_right

    def quotient_accel(th: float, dth: float) -> float:
        return -(float(model.beta(th)) * dth * dth + float(model.gamma(th))) / float(model.alpha(th))

    # Quadratic through the crossing acceleration and the two safe edge values
    # avoids the 0/0 quotient inside the bridge window.
    edge_l = left.sol(T_left)
    edge_r = right.sol(-T_right)
    bridge_t = np.array([-dt_left, 0.0, dt_right])
    bridge_a = np.array([quotient_accel(edge_l[0], edge_l[1]), a_s,
                         quotient_accel(edge_r[0], edge_r[1])])
    bridge_poly = np.polyfit(bridge_t, bridge_a, 2)

    def evaluate(t: float):
        if t < t1 - 1e-9 or t > t2 + 1e-9:
            raise DomainError(f"t={t} outside solution window [{t1}, {t2}]")
        if t < -dt_left:
            th, dth = left.sol(min(t - t1, T_left))
            return float(th), float(dth), quotient_accel(float(th), float(dth))
        if t > dt_right:
            th, dth = right.sol(max(t - t2, -T_right))
            return float(th), float(dth), quotient_accel(float(th), float(dth))
        th = th_s + v_s * t + 0.5 * a_s * t * t
        dth = v_s + a_s * t
        return th, dth, float(np.polyval(bridge_poly, t))

    times = np.linspace(t1, t2, int(n_samples))
    if not np.any(np.abs(times) < 1e-12):
        times = np.sort(np.append(times, 0.0))
    samples = np.empty((times.size, 4))
    for i, t in enumerate(times):
        th, dth, ddth = evaluate(float(t))
        samples[i] = (t, th, dth, ddth)

    return ScalarSolution(
        model=model, report=report, t_s=0.0, t1=t1, t2=t2,
        theta1=theta1, dtheta1=dtheta1, theta2=theta2, dtheta2=dtheta2,
        v_s=v_s, a_s=a_s, samples=samples, _eval=evaluate,
    )


def make_periodic(sol: ScalarSolution) -> PeriodicScalarSolution:
    """Close the orbit by time reflection about t2: period 2 (t2 - t1).

    The reduced dynamics is reversible (even in theta'), so the mirrored half
    solves the same equation; rest endpoints make the junctions C^2.
    """
    if abs(sol.dtheta1) > 1e-8 or abs(sol.dtheta2) > 1e-8:
        raise ConditionCheckError("mirror concatenation requires rest endpoints (dtheta = 0)")
    period = 2.0 * (sol.t2 - sol.t1)
    base = sol.samples
    mirror_t = 2.0 * sol.t2 - base[:-1, 0][::-1]
    mirror = np.column_stack([mirror_t, base[:-1, 1][::-1],
                              -base[:-1, 2][::-1], base[:-1, 3][::-1]])
    keep = mirror[:, 0] < sol.t1 + period
    samples = np.vstack([base, mirror[keep]])
    crossings = ((sol.t_s, sol.v_s, sol.a_s),
                 (2.0 * sol.t2 - sol.t_s, -sol.v_s, sol.a_s))
    return PeriodicScalarSolution(base=sol, t0=sol.t1, period=period,
                                  crossings=crossings, samples=samples)


@dataclass
class PeriodicTrajectory:
    """Periodic motion of the full model riding a constraint curve."""

    t: Array
    q: Array
    qdot: Array
    qddot: Array
    u: Array
    residuals: Array
    t0: float
    period: float
    vhc: ParametricVhc
    scalar: PeriodicScalarSolution
    system: MechanicalSystem

    def state_at(self, t: float):
        """(q, qdot) at time t, exact to the scalar solution's accuracy."""
        th, dth, _ = self.scalar.eval(t)
        return self.vhc.phi(th), self.vhc.dphi(th) * dth

    def full_state_at(self, t: float):
        """(q, qdot, qddot, u) at time t."""
        th, dth, ddth = self.scalar.eval(t)
        q = self.vhc.phi(th)
        qd = self.vhc.dphi(th) * dth
        qdd = self.vhc.ddphi(th) * dth * dth + self.vhc.dphi(th) * ddth
        u, _ = inverse_input(self.system, q, qd, qdd)
        return q, qd, qdd, u


def lift(vhc: ParametricVhc, sol: PeriodicScalarSolution, sys: MechanicalSystem,
         n_samples: int = 4096) -> PeriodicTrajectory:
    """Map a periodic scalar solution through the constraint to a full trajectory.

    Inputs come from the actuated least-squares inverse; the unactuated force
    residual B_perp (M q'' + C q' + G) is recorded per sample and must stay
    below 1e-8 (it equals the reduced-equation residual).
    """
    times = sol.t0 + sol.period * np.arange(int(n_samples)) / int(n_samples)
    n = times.size
    q = np.empty((n, sys.n))
    qd = np.empty((n, sys.n))
    qdd = np.empty((n, sys.n))
    u = np.empty((n, sys.n - 1))
    res = np.empty(n)
    for i, t in enumerate(times):
        th, dth, ddth = sol.eval(float(t))
        q[i] = vhc.phi(th)
        qd[i] = vhc.dphi(th) * dth
        qdd[i] = vhc.ddphi(th) * dth * dth + vhc.dphi(th) * ddth
        u[i], res[i] = inverse_input(sys, q[i], qd[i], qdd[i])
    if float(np.max(res)) > 1e-8:
        raise ConvergenceError(f"lift residual {np.max(res):.3e} exceeds 1e-8")
    # Closure of the full state over one period (wrap back to the first sample).
    th, dth, _ = sol.eval(float(times[0] + sol.period))
    q_wrap = vhc.phi(th)
    qd_wrap = vhc.dphi(th) * dth
    gap = max(float(np.max(np.abs(q_wrap - q[0]))), float(np.max(np.abs(qd_wrap - qd[0]))))
    if gap > 1e-6:
        raise ConvergenceError(f"periodic closure gap {gap:.3e} exceeds 1e-6")
    return PeriodicTrajectory(t=times, q=q, qdot=qd, qddot=qdd, u=u, residuals=res,
                              t0=float(times[0]), period=sol.period,
                              vhc=vhc, scalar=sol, system=sys)
