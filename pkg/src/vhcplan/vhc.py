"""Virtual holonomic constraints and their reduced dynamics.

A constraint q = phi(theta) collapses the n-DOF model to one scalar degree of
freedom whose motion obeys

    alpha(theta) theta'' + beta(theta) theta'^2 + gamma(theta) = 0,

with coefficients obtained by projecting the dynamics onto the unactuated
direction B_perp. The module evaluates these coefficients, checks the
existence conditions for periodic solutions that cross a regularity-losing
point of the constraint (alpha = 0), builds the two-parameter-plus-curvature
constraint family anchored at an upright-thrust configuration, and scans
trajectories for points where no regular controlled-invariant constraint can
exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .mech import MechanicalSystem, left_annihilator, pvtol_model
from .numdiff import bisect, central_derivative

Array = np.ndarray


@dataclass(frozen=True)
class ParametricVhc:
    """Smooth curve theta -> phi(theta) in configuration space with two derivatives."""

    phi: Callable[[float], Array]
    dphi: Callable[[float], Array]
    ddphi: Callable[[float], Array]
    domain: tuple[float, float] = (-math.inf, math.inf)
    name: str = "vhc"


@dataclass(frozen=True)
class ReducedModel:
    """Scalar reduced dynamics alpha theta'' + beta theta'^2 + gamma = 0 on an interval."""

    alpha: Callable[[float], float]
    beta: Callable[[float], float]
    gamma: Callable[[float], float]
    interval: tuple[float, float]
    system: MechanicalSystem | None = None
    vhc: ParametricVhc | None = None
    vectorized: bool = False

    def sample(self, thetas: Array):
        """Coefficient arrays over a theta grid, annihilator-continuous for generic models."""
        thetas = np.asarray(thetas, dtype=float)
        if self.vectorized:
            return (np.asarray(self.alpha(thetas), dtype=float),
                    np.asarray(self.beta(thetas), dtype=float),
                    np.asarray(self.gamma(thetas), dtype=float))
        if self.system is not None and self.vhc is not None and self.system.annihilator is None:
            a = np.empty_like(thetas)
            b = np.empty_like(thetas)
            g = np.empty_like(thetas)
            prev = None
            for i, th in enumerate(thetas):
                a[i], b[i], g[i], prev = _coefficients(self.system, self.vhc, float(th), prev)
            return a, b, g
        a = np.array([self.alpha(float(th)) for th in thetas])
        b = np.array([self.beta(float(th)) for th in thetas])
        g = np.array([self.gamma(float(th)) for th in thetas])
        return a, b, g


@dataclass(frozen=True)
class SingularityReport:
    """Existence-condition check at the unique interior zero of alpha."""

    theta_s: float
    alpha_slope: float
    beta_s: float
    gamma_s: float
    v_s: float
    flags: dict
    overall: bool
    sign: int
    zeros: tuple

    def to_json_dict(self) -> dict:
        return {
            "theta_s": self.theta_s,
            "alpha_slope": self.alpha_slope,
            "beta_s": self.beta_s,
            "gamma_s": self.gamma_s,
            "v_s": self.v_s,
            "flags": dict(self.flags),
            "overall": self.overall,
        }


@dataclass(frozen=True)
class SingularPass:
    """Trajectory point where the unactuated momentum B_perp M qdot crosses zero."""

    time: float
    q: Array
    qdot: Array
    annihilator_residual: float
    speed: float
    gravity_distance: float


@dataclass(frozen=True)
class FamilyParameters:
    """Constraint-family parameters found admissible on a symmetric interval."""

    psi_s: float
    k1: float
    k2: float
    k3: float
    interval: tuple[float, float]
    report: SingularityReport

    def to_json_dict(self) -> dict:
        return {
            "psi_s": self.psi_s,
            "k1": self.k1,
            "k2": self.k2,
            "k3": self.k3,
            "interval": list(self.interval),
            "report": self.report.to_json_dict(),
        }


def _coefficients(sys: MechanicalSystem, vhc: ParametricVhc, theta: float, prev=None):
    q = vhc.phi(theta)
    dp = vhc.dphi(theta)
    ddp = vhc.ddphi(theta)
    w = left_annihilator(sys, q, prev)
    M = sys.mass_matrix(q)
    a = float(w @ (M @ dp))
    b = float(w @ (M @ ddp + sys.coriolis(q, dp) @ dp))
    g = float(w @ sys.gravity(q))
    return a, b, g, w


def reduced_coefficients(sys: MechanicalSystem, vhc: ParametricVhc, theta: float):
    """Coefficients (alpha, beta, gamma) of the reduced dynamics at one theta."""
    lo, hi = vhc.domain
    if not lo <= theta <= hi:
        raise DomainError(f"theta={theta} outside constraint domain {vhc.domain}")
    a, b, g, _ = _coefficients(sys, vhc, theta)
    return a, b, g


def reduce(sys: MechanicalSystem, vhc: ParametricVhc,
           interval: tuple[float, float] | None = None) -> ReducedModel:
    """Reduced model of `sys` under `vhc`, restricted to `interval` (default: vhc domain)."""
    if interval is None:
        interval = vhc.domain
    lo, hi = interval
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise DomainError("reduction interval must be finite with lo < hi")
    return ReducedModel(
        alpha=lambda th: _coefficients(sys, vhc, th)[0],
        beta=lambda th: _coefficients(sys, vhc, th)[1],
        gamma=lambda th: _coefficients(sys, vhc, th)[2],
        interval=(float(lo), float(hi)),
        system=sys,
        vhc=vhc,
    )


def tic_toc_vhc(domain: tuple[float, float] = (-2.0, 2.0)) -> ParametricVhc:
    """Constraint curve of the tic-toc motion: (theta, -theta^2/2, pi/2 - arctan 2 theta)."""

    def phi(th: float) -> Array:
        return np.array([th, -0.5 * th * th, 0.5 * np.pi - np.arctan(2.0 * th)])

    def dphi(th: float) -> Array:
        return np.array([1.0, -th, -2.0 / (1.0 + 4.0 * th * th)])

    def ddphi(th: float) -> Array:
        return np.array([0.0, -1.0, 16.0 * th / (1.0 + 4.0 * th * th) ** 2])

    return ParametricVhc(phi=phi, dphi=dphi, ddphi=ddphi, domain=domain, name="tictoc")


def family_vhc(q_s: Array, k1: float, k2: float, k3: float,
               domain: tuple[float, float] = (-math.inf, math.inf)) -> ParametricVhc:
    """Constraint family through q_s: actuated-direction line plus unactuated curvature.

    phi(theta) = q_s + B(q_s) (k1, k2) theta + (k3/2) B_perp(q_s)^T theta^2.
    """
    if k1 == 0.0 and k2 == 0.0:
        raise DomainError("degenerate family parameters: dphi(0) = 0")
    q_s = np.asarray(q_s, dtype=float)
    sys = pvtol_model()
    B_s = sys.input_map(q_s)
    w_s = left_annihilator(sys, q_s)
    lin = B_s @ np.array([k1, k2])

    def phi(th: float) -> Array:
        return q_s + lin * th + 0.5 * k3 * w_s * th * th

    def dphi(th: float) -> Array:
        return lin + k3 * w_s * th

    def ddphi(th: float) -> Array:
        return k3 * w_s + 0.0 * th

    return ParametricVhc(phi=phi, dphi=dphi, ddphi=ddphi, domain=domain, name="family")


def family_reduced(psi_s: float, k1: float, k2: float, k3: float,
                   interval: tuple[float, float]) -> ReducedModel:
    """Closed-form reduced model of the constraint family (vectorized evaluators).

    alpha = k1 sin(k2 th) + k3 th cos(k2 th), beta = k3 cos(k2 th),
    gamma = sin(psi_s + k2 th); these agree with the generic projection because
    the annihilator of the upright-thrust model has unit norm.
    """
    q_s = np.array([0.0, 0.0, float(psi_s)])
    vhc = family_vhc(q_s, k1, k2, k3, domain=interval)
    return ReducedModel(
        alpha=lambda th: k1 * np.sin(k2 * th) + k3 * th * np.cos(k2 * th),
        beta=lambda th: k3 * np.cos(k2 * th) + 0.0 * th,
        gamma=lambda th: np.sin(psi_s + k2 * th),
        interval=(float(interval[0]), float(interval[1])),
        system=pvtol_model(),
        vhc=vhc,
        vectorized=True,
    )


def _find_zeros(model: ReducedModel, thetas: Array, alphas: Array) -> list[float]:
    zeros: list[float] = []
    f = lambda th: float(model.alpha(th))
    for i in range(len(thetas) - 1):
        a0, a1 = alphas[i], alphas[i + 1]
        if a0 == 0.0:
            zeros.append(float(thetas[i]))
        elif a0 * a1 < 0.0:
            zeros.append(bisect(f, float(thetas[i]), float(thetas[i + 1]),
                                xtol=1e-13, fa=float(a0), fb=float(a1)))
    if alphas[-1] == 0.0:
        zeros.append(float(thetas[-1]))
    merged: list[float] = []
    for z in sorted(zeros):
        if not merged or z - merged[-1] > 1e-9:
            merged.append(z)
    return merged


def check_theorem1(model: ReducedModel, n_grid: int = 2048) -> SingularityReport:
    """Existence check for a periodic solution crossing the coefficient singularity.

    Requires, up to a global sign of (alpha, beta, gamma): a unique zero theta_s
    of alpha on the closed sampled interval, alpha'(theta_s) > 0, gamma > 0
    everywhere, and beta(theta_s)/alpha'(theta_s) < -1/2. Both global signs are
    tried; the report carries the passing orientation (or the slope-positive
    one when both fail).
    """
    lo, hi = model.interval
    thetas = np.linspace(lo, hi, n_grid)
    alphas, betas, gammas = model.sample(thetas)
    zeros = _find_zeros(model, thetas, alphas)
    unique = len(zeros) == 1

    if zeros:
        theta_s = zeros[0]
        h = 1e-6 * (1.0 + abs(theta_s))
        slope = central_derivative(lambda th: float(model.alpha(th)), theta_s, h)
        beta_s = float(model.beta(theta_s))
        gamma_s = float(model.gamma(theta_s))
    else:
        theta_s = math.nan
        slope = math.nan
        beta_s = math.nan
        gamma_s = math.nan

    # beta/alpha' is invariant under the global sign flip.
    ratio = beta_s / slope if zeros and slope != 0.0 else math.nan
    ratio_ok = bool(zeros) and math.isfinite(ratio) and ratio < -0.5

    best = None
    for sign in (1, -1):
        flags = {
            "unique_zero": unique,
            "slope_positive": bool(zeros) and math.isfinite(slope) and sign * slope > 0.0,
            "gamma_positive_on_interval": bool(np.all(sign * gammas > 0.0)),
            "ratio_below_minus_half": ratio_ok,
        }
        overall = all(flags.values())
        sb, sg = sign * beta_s, sign * gamma_s
        v_s = math.sqrt(-sg / sb) if zeros and sb < 0.0 < sg else math.nan
        report = SingularityReport(
            theta_s=theta_s, alpha_slope=sign * slope, beta_s=sb, gamma_s=sg,
            v_s=v_s, flags=flags, overall=overall, sign=sign, zeros=tuple(zeros),
        )
        if overall:
            return report
        if best is None or (flags["slope_positive"] and not best.flags["slope_positive"]):
            best = report
    return best


_FAMILY_K1 = tuple(0.25 * i for i in range(1, 9))           # 0.25 .. 2.0
_FAMILY_K2 = tuple(0.5 * i for i in range(1, 9))            # 0.5 .. 4.0
_FAMILY_K3 = tuple(-2.0 + 0.25 * i for i in range(8))       # -2.0 .. -0.25
_FAMILY_THETA_MAX = (0.2, 0.35, 0.5)


def _family_prefilter(psi_s: float, k1: float, k2: float, k3: float, tmax: float) -> bool:
    """Necessary closed-form conditions (both global signs) before the full grid check."""
    slope0 = k1 * k2 + k3
    if slope0 == 0.0:
        return False
    if k3 / slope0 >= -0.5:
        return False
    ends = np.linspace(-tmax, tmax, 65)
    gam = np.sin(psi_s + k2 * ends)
    for sign in (1.0, -1.0):
        if sign * slope0 > 0.0 and np.all(sign * gam > 0.0):
            return True
    return False


def find_family_parameters(psi_s: float) -> FamilyParameters | None:
    """Deterministic box search for admissible family parameters at thrust angle psi_s.

    Scans k1 in {0.25..2}, k2 in {0.5..4}, k3 in {-2..-0.25} (steps 0.25/0.5/0.25)
    and symmetric intervals (-theta_max, theta_max), theta_max in {0.2, 0.35, 0.5},
    returning the first tuple whose full existence check passes. Returns None when
    the box holds no admissible tuple.
    """
    if abs(math.sin(psi_s)) < 1e-9:
        raise DomainError("psi_s must avoid horizontal thrust: sin(psi_s) != 0 required")
    for k1 in _FAMILY_K1:
        for k2 in _FAMILY_K2:
            for k3 in _FAMILY_K3:
                for tmax in _FAMILY_THETA_MAX:
                    if not _family_prefilter(psi_s, k1, k2, k3, tmax):
                        continue
                    interval = (-tmax, tmax)
                    report = check_theorem1(family_reduced(psi_s, k1, k2, k3, interval))
                    if report.overall:
                        return FamilyParameters(psi_s, k1, k2, k3, interval, report)
    return None


def _gravity_distance(sys: MechanicalSystem, q: Array) -> float:
    """Distance of the gravity vector from the actuated force subspace Im B(q)."""
    B = np.asarray(sys.input_map(q), dtype=float)
    G = np.asarray(sys.gravity(q), dtype=float)
    coeff, *_ = np.linalg.lstsq(B, G, rcond=None)
    return float(np.linalg.norm(G - B @ coeff))


def theorem2_scan(sys: MechanicalSystem, traj, n_samples: int = 2048,
                  min_speed: float = 1e-8) -> list[SingularPass]:
    """Locate zero crossings of B_perp(q) M(q) qdot along a periodic trajectory.

    `traj` must expose `t0`, `period` and `state_at(t) -> (q, qdot, ...)`.
    Crossings are bisected to 1e-12 in time; points with speed below
    `min_speed` (rest points) are excluded.
    """
    n_samples = max(int(n_samples), 512)
    t0, period = float(traj.t0), float(traj.period)
    times = t0 + period * np.arange(n_samples) / n_samples

    def momentum(t: float, prev=None):
        state = traj.state_at(t)
        q, qdot = np.asarray(state[0], dtype=float), np.asarray(state[1], dtype=float)
        w = left_annihilator(sys, q, prev)
        return float(w @ (sys.mass_matrix(q) @ qdot)), w, q, qdot

    values = []
    w_prev = None
    for t in times:
        s, w_prev, _, _ = momentum(float(t), w_prev)
        values.append(s)
    values = np.asarray(values)

    roots: list[float] = []
    for i in range(n_samples):
        t_a = float(times[i])
        t_b = float(times[(i + 1) % n_samples]) if i + 1 < n_samples else t0 + period
        s_a, s_b = values[i], values[(i + 1) % n_samples]
        if s_a == 0.0:
            roots.append(t_a)
        elif s_a * s_b < 0.0:
            w_anchor = left_annihilator(sys, np.asarray(traj.state_at(t_a)[0], dtype=float))
            g = lambda t: momentum(t, w_anchor)[0]
            roots.append(bisect(g, t_a, t_b, xtol=1e-12, fa=float(s_a), fb=float(s_b)))

    merged: list[float] = []
    for r in sorted(roots):
        if not merged or r - merged[-1] > 1e-9:
            merged.append(r)
    if len(merged) >= 2 and (merged[0] + period) - merged[-1] <= 1e-9:
        merged.pop()

    passes = []
    for t_s in merged:
        s, _, q, qdot = momentum(t_s)
        speed = float(np.linalg.norm(qdot))
        if speed <= min_speed:
            continue
        passes.append(SingularPass(
            time=t_s, q=q, qdot=qdot, annihilator_residual=abs(s),
            speed=speed, gravity_distance=_gravity_distance(sys, q),
        ))
    return passes
