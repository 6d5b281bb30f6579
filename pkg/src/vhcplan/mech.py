"""Euler-Lagrange mechanics with underactuation degree one.

Models have the forced form M(q)q'' + C(q,q')q' + G(q) = B(q)u with n
configuration variables and n-1 independent inputs, so the annihilated
direction of B carries the single unactuated balance law. The planar
vertical-takeoff vehicle (thrust + torque in the vertical plane) ships as the
reference model together with its tic-toc reference motion, an oscillation
whose thrust axis sweeps through the vertical at the passes through the
origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import ModelInvariantError

Array = np.ndarray


@dataclass(frozen=True)
class MechanicalSystem:
    """Evaluators of a mechanical model; all callables are pure functions of q (and q')."""

    n: int
    mass_matrix: Callable[[Array], Array]
    coriolis: Callable[[Array, Array], Array]
    gravity: Callable[[Array], Array]
    input_map: Callable[[Array], Array]
    # Optional closed-form unit left annihilator of input_map; when present it
    # overrides the numeric null-space computation (exactness for reference models).
    annihilator: Callable[[Array], Array] | None = None
    name: str = "generic"


@dataclass(frozen=True)
class PhaseState:
    """Point (q, q') of the phase space."""

    q: Array
    qdot: Array

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        qdot = np.asarray(self.qdot, dtype=float)
        if q.shape != qdot.shape or q.ndim != 1:
            raise ModelInvariantError("q and qdot must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(qdot))):
            raise ModelInvariantError("phase state must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "qdot", qdot)


def eval_accel(sys: MechanicalSystem, state: PhaseState, u: Array) -> Array:
    """Solve M(q)q'' = B(q)u - C(q,q')q' - G(q) for the acceleration."""
    q, qdot = state.q, state.qdot
    u = np.asarray(u, dtype=float)
    if u.shape != (sys.n - 1,):
        raise ValueError(f"u must have shape ({sys.n - 1},)")
    M = np.asarray(sys.mass_matrix(q), dtype=float)
    try:
        cho = linalg.cho_factor(M)
    except linalg.LinAlgError as exc:
        raise ModelInvariantError("mass matrix is not symmetric positive definite") from exc
    rhs = sys.input_map(q) @ u - sys.coriolis(q, qdot) @ qdot - sys.gravity(q)
    return linalg.cho_solve(cho, rhs)


def inverse_input(sys: MechanicalSystem, q: Array, qdot: Array, qddot: Array):
    """Least-squares input for a prescribed acceleration.

    Returns (u, residual) where residual = |B_perp (M q'' + C q' + G)| measures
    the component of the required generalized force outside the actuated
    subspace (B_perp has unit norm, so the residual is scale-free).
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    qddot = np.asarray(qddot, dtype=float)
    force = sys.mass_matrix(q) @ qddot + sys.coriolis(q, qdot) @ qdot + sys.gravity(q)
    B = sys.input_map(q)
    u, *_ = np.linalg.lstsq(B, force, rcond=None)
    residual = float(abs(left_annihilator(sys, q) @ force))
    return u, residual


def left_annihilator(sys: MechanicalSystem, q: Array, prev: Array | None = None) -> Array:
    """Unit row vector B_perp(q) with B_perp(q) B(q) = 0.

    Closed-form annihilators attached to the model are used verbatim (after
    normalization). The numeric fallback orients the null-space vector so its
    first nonzero entry is positive, or so it aligns with `prev` when a
    previous sample is supplied (continuity along a sweep).
    """
    q = np.asarray(q, dtype=float)
    if sys.annihilator is not None:
        w = np.asarray(sys.annihilator(q), dtype=float)
        return w / np.linalg.norm(w)
    ns = linalg.null_space(np.asarray(sys.input_map(q), dtype=float).T)
    if ns.shape[1] != 1:
        raise ModelInvariantError("input map does not have a one-dimensional left null space")
    w = ns[:, 0]
    if prev is not None:
        if float(np.dot(w, prev)) < 0.0:
            w = -w
        return w
    for entry in w:
        if abs(entry) > 1e-12:
            if entry < 0.0:
                w = -w
            break
    return w


def pvtol_model() -> MechanicalSystem:
    """Planar thrust-vectored vehicle: x'' = -u1 sin(psi), z'' = u1 cos(psi) - 1, psi'' = u2."""
    eye = np.eye(3)
    zeros = np.zeros((3, 3))
    grav = np.array([0.0, 1.0, 0.0])

    def input_map(q: Array) -> Array:
        psi = q[2]
        return np.array([[-np.sin(psi), 0.0], [np.cos(psi), 0.0], [0.0, 1.0]])

    def annihilator(q: Array) -> Array:
        psi = q[2]
        return np.array([np.cos(psi), np.sin(psi), 0.0])

    return MechanicalSystem(
        n=3,
        mass_matrix=lambda q: eye,
        coriolis=lambda q, qdot: zeros,
        gravity=lambda q: grav,
        input_map=input_map,
        annihilator=annihilator,
        name="pvtol",
    )


def tic_toc_reference(t: float):
    """Reference state and input of the tic-toc oscillation at time t.

    Returns (q, qdot, u). The motion traces x = sin t, z = -sin^2(t)/2 while
    the thrust axis tilts by -arctan(2 sin t) about the vertical; both inputs
    vanish at the singular passes t = 0, pi where the thrust line meets the
    gravity direction.
    """
    st, ct = np.sin(t), np.cos(t)
    s2 = 1.0 + 4.0 * st * st
    q = np.array([st, -0.5 * st * st, 0.5 * np.pi - np.arctan(2.0 * st)])
    qdot = np.array([ct, -st * ct, -2.0 * ct / s2])
    u = np.array([st * np.sqrt(s2), (12.0 * st + 2.0 * np.sin(3.0 * t)) / (3.0 - 2.0 * np.cos(2.0 * t)) ** 2])
    return q, qdot, u


def tic_toc_acceleration(t: float) -> Array:
    """Analytic acceleration of the tic-toc reference (companion to tic_toc_reference)."""
    st = np.sin(t)
    u2 = (12.0 * st + 2.0 * np.sin(3.0 * t)) / (3.0 - 2.0 * np.cos(2.0 * t)) ** 2
    return np.array([-st, -np.cos(2.0 * t), u2])
