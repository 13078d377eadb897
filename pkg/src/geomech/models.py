"""Benchmark mechanical systems and their structure-preserving update maps.

Each step function advances one fixed timestep h and returns a new state; the
attitude/sphere updates move along the group or the sphere exactly, so the
geometric invariants (orthonormality, unit length, tangency) hold to rounding
for arbitrarily long runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import singledispatch

import numpy as np

from .errors import SingularConfiguration, StepTooLarge
from .geom import (
    E3,
    Rot2,
    Rot3,
    UnitVec3,
    _mat,
    solve_skew_so2,
    solve_skew_so3,
    vee3,
)

TANGENCY_TOL = 1e-10


# ---------------------------------------------------------------------------
# Mass-spring oscillator on the real line


@dataclass(frozen=True)
class MassSpringState:
    """Point mass on a linear spring; q is the displacement in meters."""

    q: float
    qdot: float
    m: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if not (self.m > 0.0):
            raise ValueError("mass must be positive")
        if self.kappa < 0.0:
            raise ValueError("spring constant must be nonnegative")


def mass_spring_step(s: MassSpringState, h: float) -> MassSpringState:
    """Midpoint variational step in velocity form.

    (1 + h^2 k/4m) q1 = h qdot0 + (1 - h^2 k/4m) q0, followed by the matching
    velocity update; the map has unit determinant.
    """
    a = h * h * s.kappa / (4.0 * s.m)
    q1 = (h * s.qdot + (1.0 - a) * s.q) / (1.0 + a)
    qdot1 = s.qdot - (h * s.kappa / (2.0 * s.m)) * (s.q + q1)
    return MassSpringState(q1, qdot1, s.m, s.kappa)


# ---------------------------------------------------------------------------
# Planar pendulum on SO(2)


@dataclass(frozen=True)
class PlanarPendState:
    """Rigid planar pendulum; R maps body to inertial axes, Omega in rad/s.

    The identity attitude is the hanging configuration.
    """

    R: Rot2
    omega: float
    m: float = 1.0
    l: float = 9.81
    g: float = 9.81

    def __post_init__(self):
        if not (self.m > 0.0 and self.l > 0.0):
            raise ValueError("mass and length must be positive")

    @property
    def theta(self) -> float:
        return self.R.angle


def planar_pend_step(s: PlanarPendState, h: float) -> PlanarPendState:
    """One group step R1 = R0 F0 with F0 from the antisymmetric-part solve.

    The scalar equation is 2 sin(dtheta) = 2 h Omega - (h^2 g/l) sin(theta);
    StepTooLarge propagates from the skew solve when the right side leaves
    [-2, 2].
    """
    r = s.R.m
    swing = r[1, 0]  # e2^T R e1 = sin(theta)
    c = 2.0 * h * s.omega - (h * h * s.g / s.l) * swing
    f = solve_skew_so2(c)
    r1 = r @ f.m
    omega1 = (
        s.omega
        - (h * s.g / (2.0 * s.l)) * swing
        - (h * s.g / (2.0 * s.l)) * r1[1, 0]
    )
    return PlanarPendState(Rot2(r1), omega1, s.m, s.l, s.g)


# ---------------------------------------------------------------------------
# Spherical pendulum on S^2


@dataclass(frozen=True)
class SphericalPendState:
    """Spherical pendulum; q points along the rod, omega is angular velocity.

    Gravity acts along +e3, so q = e3 is the hanging configuration. omega must
    be tangent (omega . q = 0); non-tangent input is rejected rather than
    projected.
    """

    q: UnitVec3
    omega: np.ndarray
    m: float = 1.0
    l: float = 9.81
    g: float = 9.81

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        object.__setattr__(self, "omega", omega)
        if not (self.m > 0.0 and self.l > 0.0):
            raise ValueError("mass and length must be positive")
        if abs(omega @ self.q.q) > TANGENCY_TOL:
            raise ValueError("omega is not tangent: |omega . q| exceeds 1e-10")


def spherical_pend_step(
    s: SphericalPendState, h: float, u: np.ndarray | None = None, ml2: float | None = None
) -> SphericalPendState:
    """Explicit sphere-preserving step, optionally with a control moment pair.

    u, when given, is the tuple (u_k, u_{k+1}) of moments entering the
    discrete Lagrange-d'Alembert equations; both must be orthogonal to the
    corresponding q so the update stays on the sphere. Used by the optimal
    control layer; plain simulation passes u = None.

    Raises
    ------
    StepTooLarge
        If the rotation vector magnitude reaches 1, i.e. h is too large for
        the current rate.
    """
    q = s.q.q
    w = s.omega
    grav = (h * h * s.g / (2.0 * s.l)) * np.cross(q, E3)
    b = h * w + grav
    if u is not None:
        if ml2 is None:
            ml2 = s.m * s.l * s.l
        b = b + (h * h / (2.0 * ml2)) * u[0]
    bb = float(b @ b)
    if bb > (1.0 - 1e-12) ** 2:
        raise StepTooLarge(f"|b| = {np.sqrt(bb):.6g} reaches the sphere chart edge")
    q1 = np.cross(b, q) + np.sqrt(1.0 - bb) * q
    w1 = (
        w
        + (h * s.g / (2.0 * s.l)) * np.cross(q, E3)
        + (h * s.g / (2.0 * s.l)) * np.cross(q1, E3)
    )
    if u is not None:
        w1 = w1 + (h / (2.0 * ml2)) * (u[0] + u[1])
    return SphericalPendState(UnitVec3(q1), w1, s.m, s.l, s.g)


# ---------------------------------------------------------------------------
# Rigid body in a gravitational field on SE(3)


@dataclass(frozen=True)
class DumbbellPotential:
    """Central gravity acting on two rigidly connected spheres.

    mu is the gravitational parameter of the attracting center at the origin;
    rho1/rho2 are the body-frame positions of the sphere centers.
    """

    mu: float
    m1: float
    m2: float
    rho1: np.ndarray
    rho2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rho1", np.asarray(self.rho1, dtype=float))
        object.__setattr__(self, "rho2", np.asarray(self.rho2, dtype=float))


def dumbbell_potential(pot: DumbbellPotential, R, x: np.ndarray):
    """Potential energy with its position gradient and body-frame moment.

    Accepts raw (possibly non-orthogonal) attitude matrices so the same
    routine serves the comparison integrators.

    Returns
    -------
    (U, dUdx, M) : float, ndarray (3,), ndarray (3,)
        M is vee(dU/dR^T R - R^T dU/dR), the moment entering the attitude
        dynamics.

    Raises
    ------
    SingularConfiguration
        If either sphere center comes within 1e-9 of the attracting center.
    """
    r = _mat(R)
    x = np.asarray(x, dtype=float)
    u = 0.0
    dudx = np.zeros(3)
    dudr = np.zeros((3, 3))
    for mi, rho in ((pot.m1, pot.rho1), (pot.m2, pot.rho2)):
        ri = x + r @ rho
        dist = float(np.linalg.norm(ri))
        if dist < 1e-9:
            raise SingularConfiguration("sphere center hit the attracting center")
        gi = pot.mu * mi * ri / dist**3  # dU/dr_i for U_i = -mu m_i / |r_i|
        u -= pot.mu * mi / dist
        dudx += gi
        dudr += np.outer(gi, rho)
    mhat = dudr.T @ r - r.T @ dudr
    return u, dudx, vee3(mhat)


@dataclass(frozen=True)
class RigidState:
    """Rigid body pose and velocity; Omega and J live in the body frame."""

    R: Rot3
    x: np.ndarray
    Omega: np.ndarray
    v: np.ndarray
    m: float
    J: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "Omega", np.asarray(self.Omega, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        j = np.asarray(self.J, dtype=float)
        object.__setattr__(self, "J", j)
        if not (self.m > 0.0):
            raise ValueError("mass must be positive")
        if np.linalg.norm(j - j.T) > 1e-12 * (1.0 + np.linalg.norm(j)):
            raise ValueError("inertia matrix must be symmetric")
        if np.any(np.linalg.eigvalsh(j) <= 0.0):
            raise ValueError("inertia matrix must be positive definite")

    @property
    def Jd(self) -> np.ndarray:
        """Nonstandard inertia 0.5 tr(J) I - J used by the group update."""
        return 0.5 * np.trace(self.J) * np.eye(3) - self.J


def rigid_body_step(s: RigidState, pot: DumbbellPotential, h: float) -> RigidState:
    """Lie group variational step on SE(3).

    Solves F Jd - Jd F^T = hat(h J Omega + h^2/2 M) for the attitude
    increment, then applies the trapezoidal momentum and velocity updates.
    """
    r = s.R.m
    jw = s.J @ s.Omega
    _, dudx, mom = dumbbell_potential(pot, r, s.x)
    a = h * jw + 0.5 * h * h * mom
    f = solve_skew_so3(a, s.Jd).m
    r1 = r @ f
    x1 = s.x + h * s.v - (h * h / (2.0 * s.m)) * dudx
    _, dudx1, mom1 = dumbbell_potential(pot, r1, x1)
    jw1 = f.T @ jw + 0.5 * h * f.T @ mom + 0.5 * h * mom1
    omega1 = np.linalg.solve(s.J, jw1)
    v1 = s.v - (h / (2.0 * s.m)) * dudx - (h / (2.0 * s.m)) * dudx1
    return RigidState(Rot3(r1), x1, omega1, v1, s.m, s.J)


def dumbbell_inertia(
    m1: float, m2: float, rho1: np.ndarray, rho2: np.ndarray, sphere_radius: float
) -> np.ndarray:
    """Body-frame inertia of two uniform spheres on a massless rod."""
    j = np.zeros((3, 3))
    for mi, rho in ((m1, np.asarray(rho1)), (m2, np.asarray(rho2))):
        j += 0.4 * mi * sphere_radius**2 * np.eye(3)
        j += mi * ((rho @ rho) * np.eye(3) - np.outer(rho, rho))
    return j


# ---------------------------------------------------------------------------
# Energy


@singledispatch
def energy(state, potential=None) -> float:
    """Total mechanical energy of a model state."""
    raise TypeError(f"no energy rule for {type(state).__name__}")


@energy.register
def _(state: MassSpringState, potential=None) -> float:
    return 0.5 * state.m * state.qdot**2 + 0.5 * state.kappa * state.q**2


@energy.register
def _(state: PlanarPendState, potential=None) -> float:
    # Lagrangian carries +m g l e2^T R e2, so the potential is its negative.
    upright = state.R.m[1, 1]
    return (
        0.5 * state.m * state.l**2 * state.omega**2
        - state.m * state.g * state.l * upright
    )


@energy.register
def _(state: SphericalPendState, potential=None) -> float:
    qdot = np.cross(state.omega, state.q.q)
    return (
        0.5 * state.m * state.l**2 * float(qdot @ qdot)
        - state.m * state.g * state.l * float(E3 @ state.q.q)
    )


@energy.register
def _(state: RigidState, potential: DumbbellPotential = None) -> float:
    if potential is None:
        raise ValueError("rigid body energy requires the potential")
    u, _, _ = dumbbell_potential(potential, state.R, state.x)
    return (
        0.5 * state.m * float(state.v @ state.v)
        + 0.5 * float(state.Omega @ (state.J @ state.Omega))
        + u
    )
