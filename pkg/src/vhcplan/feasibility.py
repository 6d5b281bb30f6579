"""Certificates that no regular controlled-invariant constraint exists.

At a trajectory point with nonzero velocity where the unactuated momentum
B_perp M qdot vanishes while gravity has a component outside Im B, any
constraint reproducing the motion would need a velocity-dependent or
discontinuous feedback, so no regular constraint curve can generate the
orbit. The module packages that argument as a checkable certificate and
provides the accessibility determinant (drift/control vector fields and
their iterated brackets) both in closed form for the thrust-vectored
vehicle and by nested finite-difference brackets for any degree-one model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mech import MechanicalSystem
from .vhc import SingularPass, theorem2_scan

Array = np.ndarray

RESIDUAL_TOL = 1e-10
SPEED_TOL = 1e-8
GRAVITY_TOL = 1e-8


def candidate_h(q: Array) -> Array:
    """Constraint candidate vanishing on the tic-toc motion: (z + x^2/2, psi - pi/2 + arctan 2x)."""
    x, z, psi = q
    return np.array([z + 0.5 * x * x, psi - 0.5 * np.pi + np.arctan(2.0 * x)])


def candidate_dh(q: Array) -> Array:
    """Jacobian of candidate_h; full rank everywhere."""
    x = q[0]
    return np.array([[x, 1.0, 0.0], [2.0 / (1.0 + 4.0 * x * x), 0.0, 1.0]])


def accessibility_det_closed_form(q: Array, qdot: Array) -> float:
    """Closed-form bracket determinant for the thrust-vectored vehicle.

    det [f, g1, g2, ad_f g1, ad_f g2, ad_f^2 g1]
        = 2 psid (-psid xd sin(psi) + psid zd cos(psi) + sin(psi)).
    """
    psi = q[2]
    xd, zd, psid = qdot
    return float(2.0 * psid * (-psid * xd * np.sin(psi) + psid * zd * np.cos(psi) + np.sin(psi)))


def _phase_fields(sys: MechanicalSystem):
    """Drift and control vector fields on (q, qdot) phase space."""
    n = sys.n

    def drift(x: Array) -> Array:
        q, qd = x[:n], x[n:]
        acc = -np.linalg.solve(sys.mass_matrix(q), sys.coriolis(q, qd) @ qd + sys.gravity(q))
        return np.concatenate([qd, acc])

    def control(i: int):
        def g(x: Array) -> Array:
            q = x[:n]
            col = np.linalg.solve(sys.mass_matrix(q), np.asarray(sys.input_map(q))[:, i])
            return np.concatenate([np.zeros(n), col])
        return g

    return drift, [control(i) for i in range(n - 1)]


def _directional(F, x: Array, v: Array, h: float) -> Array:
    return (F(x + h * v) - F(x - h * v)) / (2.0 * h)


def _bracket(F, G, h: float):
    """Lie bracket [F, G] = DG F - DF G via central differences."""
    def fg(x: Array) -> Array:
        return _directional(G, x, F(x), h) - _directional(F, x, G(x), h)
    return fg


def accessibility_det_numeric(sys: MechanicalSystem, q: Array, qdot: Array,
                              h: float = 1e-5) -> float:
    """Bracket determinant by nested central-difference Jacobian-vector products."""
    f, gs = _phase_fields(sys)
    g1, g2 = gs
    ad_f_g1 = _bracket(f, g1, h)
    ad_f_g2 = _bracket(f, g2, h)
    ad2_f_g1 = _bracket(f, ad_f_g1, h)
    x = np.concatenate([np.asarray(q, dtype=float), np.asarray(qdot, dtype=float)])
    cols = [f(x), g1(x), g2(x), ad_f_g1(x), ad_f_g2(x), ad2_f_g1(x)]
    return float(np.linalg.det(np.column_stack(cols)))


@dataclass(frozen=True)
class NoVhcCertificate:
    """Scan outcome over one period; verdict is conservative (all records must pass)."""

    verdict: bool
    passes: tuple[SingularPass, ...]
    message: str

    def to_json_dict(self) -> dict:
        return {
            "verdict": "no_regular_vhc" if self.verdict else "inconclusive",
            "message": self.message,
            "tolerances": {"annihilator_residual": RESIDUAL_TOL,
                           "speed": SPEED_TOL, "gravity_distance": GRAVITY_TOL},
            "singular_passes": [
                {
                    "time": p.time,
                    "q": list(p.q),
                    "qdot": list(p.qdot),
                    "annihilator_residual": p.annihilator_residual,
                    "speed": p.speed,
                    "gravity_distance": p.gravity_distance,
                    "hypotheses_ok": _hypotheses_ok(p),
                }
                for p in self.passes
            ],
        }


def _hypotheses_ok(p: SingularPass) -> bool:
    return (p.annihilator_residual <= RESIDUAL_TOL and p.speed > SPEED_TOL
            and p.gravity_distance > GRAVITY_TOL)


def certify_no_regular_vhc(sys: MechanicalSystem, traj,
                           n_samples: int = 2048) -> NoVhcCertificate:
    """Certify that no regular constraint reproduces `traj`.

    Positive verdict requires at least one singular pass and that every
    detected pass has vanishing unactuated momentum, nonzero speed, and
    gravity outside the actuated subspace.
    """
    passes = tuple(theorem2_scan(sys, traj, n_samples=n_samples))
    if not passes:
        return NoVhcCertificate(False, passes,
                                "no singular passes found; certificate inconclusive")
    if all(_hypotheses_ok(p) for p in passes):
        times = ", ".join(f"{p.time:.6f}" for p in passes)
        return NoVhcCertificate(True, passes,
                                f"nondegenerate singular passes at t = {times}")
    return NoVhcCertificate(False, passes,
                            "singular passes found but hypotheses fail; inconclusive")
