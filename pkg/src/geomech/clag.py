"""Discrete kinetic shaping for the pendulum on a cart.

The cart-pendulum Lagrangian is modified by a velocity shift along the
cart direction (kinetic shaping), producing a controlled Lagrangian whose
discrete Euler-Lagrange flow stabilizes the inverted pendulum angle. The
same trajectories arise from the unmodified Lagrangian driven by an
explicit feedback force, and both realizations conserve the discrete
controlled momentum; this module provides both steppers, the feedback law,
the momentum map, the matching conditions, and the linearized stability
threshold for the shaping gain.

Conventions: q = (theta, s) with theta = 0 the inverted equilibrium and
V(theta) = m g l cos(theta), so V has a maximum at the upright position.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import dmech
from .errors import DegenerateGain, NoBracket, NoConvergence

STEP_TOL_SCALE = 5e-14
INIT_TOL = 1e-11
RADIUS_GUARD = 1e-12


@dataclass(frozen=True)
class CartPendParams:
    """Pendulum-on-cart constants.

    pend_mass and cart_mass are the pendulum bob and cart masses, length is
    the pendulum length. Kinetic coefficients: alpha = m l^2 (pendulum
    inertia), beta(theta) = m l cos(theta) (coupling), gamma = M + m (total
    translating mass, constant as required by the simplified matching
    conditions).
    """

    pend_mass: float
    cart_mass: float
    length: float
    gravity: float = 9.81

    def __post_init__(self):
        if self.pend_mass <= 0 or self.length <= 0 or self.gravity <= 0:
            raise ValueError("pend_mass, length, gravity must be positive")
        if self.cart_mass < 0:
            raise ValueError("cart_mass must be nonnegative")

    @property
    def alpha(self) -> float:
        return self.pend_mass * self.length**2

    @property
    def gamma(self) -> float:
        return self.cart_mass + self.pend_mass

    @property
    def beta0(self) -> float:
        return self.pend_mass * self.length

    def beta(self, theta: float) -> float:
        return self.beta0 * np.cos(theta)

    def dbeta(self, theta: float) -> float:
        return -self.beta0 * np.sin(theta)

    def potential(self, theta: float) -> float:
        return self.pend_mass * self.gravity * self.length * np.cos(theta)

    def dpotential(self, theta: float) -> float:
        return -self.pend_mass * self.gravity * self.length * np.sin(theta)


@dataclass(frozen=True)
class ShapingGains:
    """Kinetic shaping gain kappa and the matched sigma.

    The velocity shift is tau(theta) = kappa * beta(theta); sigma must
    satisfy sigma * gamma * kappa = -1 for the shaped dynamics to match the
    forced open-loop dynamics on corresponding momentum levels. Use
    ShapingGains.matched to construct a consistent pair.
    """

    kappa: float
    sigma: float

    def __post_init__(self):
        if self.kappa == 0.0:
            raise DegenerateGain("kappa must be nonzero")

    @classmethod
    def matched(cls, params: CartPendParams, kappa: float) -> "ShapingGains":
        if kappa == 0.0:
            raise DegenerateGain("kappa must be nonzero")
        if 1.0 + params.gamma * kappa == 0.0:
            raise DegenerateGain("1 + gamma*kappa vanishes; momentum map undefined")
        return cls(kappa, -1.0 / (params.gamma * kappa))

    def tau(self, params: CartPendParams, theta: float) -> float:
        return self.kappa * params.beta(theta)

    def dtau(self, params: CartPendParams, theta: float) -> float:
        return self.kappa * params.dbeta(theta)


@dataclass(frozen=True)
class CartPendPair:
    """Two consecutive configurations (q_{k-1}, q_k) and the step size."""

    q_prev: np.ndarray
    q: np.ndarray
    h: float

    def __post_init__(self):
        for name in ("q_prev", "q"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (2,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite (theta, s) pair")
            object.__setattr__(self, name, v)
        if self.h <= 0:
            raise ValueError("h must be positive")

    def advanced(self, q_next: np.ndarray) -> "CartPendPair":
        return CartPendPair(self.q, q_next, self.h)


# ---------------------------------------------------------------------------
# Lagrangians and their analytic derivatives


def lagrangian(params: CartPendParams, q, qdot) -> float:
    """Cart-pendulum Lagrangian, kinetic minus potential."""
    theta = q[0]
    td, sd = qdot
    b = params.beta(theta)
    kinetic = 0.5 * (params.alpha * td * td + 2.0 * b * td * sd + params.gamma * sd * sd)
    return float(kinetic - params.potential(theta))


def controlled_lagrangian(params: CartPendParams, gains: ShapingGains, q, qdot) -> float:
    """Kinetically shaped Lagrangian.

    The cart velocity is shifted by tau(theta)*thetadot and a quadratic
    correction weighted by sigma*gamma is added.
    """
    theta = q[0]
    td, sd = qdot
    shift = gains.tau(params, theta) * td
    return lagrangian(params, q, (td, sd + shift)) + 0.5 * gains.sigma * params.gamma * shift * shift


def _plain_derivatives(params: CartPendParams, q, qdot):
    theta = q[0]
    td, sd = qdot
    b = params.beta(theta)
    db = params.dbeta(theta)
    dq = np.array([db * td * sd - params.dpotential(theta), 0.0])
    dqd = np.array([params.alpha * td + b * sd, b * td + params.gamma * sd])
    return dq, dqd


def _shaped_derivatives(params: CartPendParams, gains: ShapingGains, q, qdot):
    theta = q[0]
    td, sd = qdot
    b = params.beta(theta)
    db = params.dbeta(theta)
    t = gains.tau(params, theta)
    dt = gains.dtau(params, theta)
    vs = sd + t * td
    ps = b * td + params.gamma * vs
    dq = np.array(
        [
            db * td * vs
            - params.dpotential(theta)
            + ps * dt * td
            + gains.sigma * params.gamma * t * dt * td * td,
            0.0,
        ]
    )
    dqd = np.array(
        [
            params.alpha * td + b * vs + ps * t + gains.sigma * params.gamma * t * t * td,
            ps,
        ]
    )
    return dq, dqd


def discrete_lagrangians(
    params: CartPendParams, gains: ShapingGains, q0, q1, h: float
):
    """Midpoint-rule discrete Lagrangians (plain, shaped) for one step."""
    q0 = np.asarray(q0, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    mid = 0.5 * (q0 + q1)
    vel = (q1 - q0) / h
    return (
        h * lagrangian(params, mid, vel),
        h * controlled_lagrangian(params, gains, mid, vel),
    )


def _midpoint_slots(deriv):
    """Analytic D1/D2 of Ld(q0,q1) = h L((q0+q1)/2, (q1-q0)/h)."""

    def d1(q0, q1, h):
        dq, dqd = deriv(0.5 * (q0 + q1), (q1 - q0) / h)
        return 0.5 * h * dq - dqd

    def d2(q0, q1, h):
        dq, dqd = deriv(0.5 * (q0 + q1), (q1 - q0) / h)
        return 0.5 * h * dq + dqd

    return d1, d2


@lru_cache(maxsize=None)
def plain_discrete(params: CartPendParams) -> dmech.DiscreteLagrangian:
    """Discrete Lagrangian of the unmodified system with analytic slots."""

    def ld(q0, q1, h):
        return h * lagrangian(params, 0.5 * (q0 + q1), (q1 - q0) / h)

    d1, d2 = _midpoint_slots(lambda q, qd: _plain_derivatives(params, q, qd))
    return dmech.DiscreteLagrangian(2, ld, d1, d2)


@lru_cache(maxsize=None)
def shaped_discrete(
    params: CartPendParams, gains: ShapingGains
) -> dmech.DiscreteLagrangian:
    """Discrete Lagrangian of the shaped system with analytic slots."""

    def ld(q0, q1, h):
        return h * controlled_lagrangian(params, gains, 0.5 * (q0 + q1), (q1 - q0) / h)

    d1, d2 = _midpoint_slots(lambda q, qd: _shaped_derivatives(params, gains, q, qd))
    return dmech.DiscreteLagrangian(2, ld, d1, d2)


def shaping_forces(params: CartPendParams, gains: ShapingGains) -> dmech.DiscreteForce:
    """Discrete force pair realizing the shaping feedback on the cart.

    Each step pair contributes -gamma*tau(theta_mid)*dtheta/h when opening
    a step and the opposite when closing it; summed into the forced
    equation they reproduce the feedback u_k as a first difference.
    """

    def pull(q0, q1, h):
        mid = 0.5 * (q0[0] + q1[0])
        return np.array(
            [0.0, -params.gamma * gains.tau(params, mid) * (q1[0] - q0[0]) / h]
        )

    def push(q0, q1, h):
        return -pull(q0, q1, h)

    return dmech.DiscreteForce(fminus=pull, fplus=push)


# ---------------------------------------------------------------------------
# Steppers and derived quantities


def _step_tol(q) -> float:
    return STEP_TOL_SCALE * (1.0 + float(np.linalg.norm(q)))


def controlled_step(
    pair: CartPendPair, params: CartPendParams, gains: ShapingGains
) -> np.ndarray:
    """One step of the shaped discrete dynamics.

    Raises
    ------
    NoConvergence
        If the implicit update does not meet tolerance.
    """
    ld = shaped_discrete(params, gains)
    return dmech.del_step(ld, pair.q_prev, pair.q, pair.h, tol=_step_tol(pair.q))


def forced_step(
    pair: CartPendPair, params: CartPendParams, gains: ShapingGains
) -> np.ndarray:
    """One step of the open-loop dynamics driven by the shaping feedback."""
    ld = plain_discrete(params)
    forces = shaping_forces(params, gains)
    return dmech.del_step(
        ld, pair.q_prev, pair.q, pair.h, forces=forces, tol=_step_tol(pair.q)
    )


def control_input(
    params: CartPendParams, gains: ShapingGains, q_prev, q, q_next, h: float
) -> float:
    """Feedback force on the cart for the triple (q_{k-1}, q_k, q_{k+1})."""
    th_prev, th, th_next = q_prev[0], q[0], q_next[0]
    lead = (th_next - th) * gains.tau(params, 0.5 * (th + th_next))
    lag = (th - th_prev) * gains.tau(params, 0.5 * (th_prev + th))
    return float(-params.gamma * (lead - lag) / h)


def momentum(
    params: CartPendParams, gains: ShapingGains, q0, q1, h: float
) -> float:
    """Discrete controlled momentum of a configuration pair.

    Equals minus the s-slot derivative of the shaped discrete Lagrangian;
    constant along both the shaped and the forced trajectories.
    """
    dtheta = q1[0] - q0[0]
    ds = q1[1] - q0[1]
    bmid = params.beta(0.5 * (q0[0] + q1[0]))
    return float(
        ((1.0 + params.gamma * gains.kappa) * bmid * dtheta + params.gamma * ds) / h
    )


def matching_check(gains: ShapingGains, gamma: float, p: float):
    """Verify the matching conditions and map the momentum level.

    Returns (sigma_ok, mu) where sigma_ok states sigma*gamma*kappa = -1
    within roundoff and mu = p/(1+gamma*kappa) is the shaped-side momentum
    level equivalent to open-loop level p.

    Raises
    ------
    DegenerateGain
        If kappa = 0 or 1 + gamma*kappa = 0.
    """
    if gains.kappa == 0.0:
        raise DegenerateGain("kappa must be nonzero")
    denom = 1.0 + gamma * gains.kappa
    if denom == 0.0:
        raise DegenerateGain("1 + gamma*kappa vanishes; momentum map undefined")
    sigma_ok = abs(gains.sigma * gamma * gains.kappa + 1.0) <= 1e-12
    return sigma_ok, p / denom


def init_from_velocity(
    q0,
    qdot0,
    params: CartPendParams,
    gains: ShapingGains | None,
    h: float,
    forced: bool = False,
    tol: float = INIT_TOL,
    max_iter: int = 50,
) -> np.ndarray:
    """Solve for q1 so that (q0, q1) matches an initial velocity.

    The boundary condition equates the continuous momentum dL/dqdot(q0,
    qdot0) with the discrete momentum at the left endpoint. With gains and
    forced=False the shaped system's condition is solved; with forced=True
    the open-loop condition including the shaping force; with gains=None
    the plain unforced condition. The Newton iteration starts from
    q1 = q0 + h*qdot0 and returns it unchanged when it already satisfies
    the condition.

    Raises
    ------
    NoConvergence
        If the boundary residual does not meet tolerance.
    """
    q0 = np.asarray(q0, dtype=float)
    qdot0 = np.asarray(qdot0, dtype=float)
    if gains is None or forced:
        _, pcont = _plain_derivatives(params, q0, qdot0)
        ld = plain_discrete(params)
        force = shaping_forces(params, gains) if forced else None
    else:
        _, pcont = _shaped_derivatives(params, gains, q0, qdot0)
        ld = shaped_discrete(params, gains)
        force = None

    def residual(q1):
        r = pcont + ld.d1(q0, q1, h)
        if force is not None:
            r = r + force.fminus(q0, q1, h)
        return r

    q1 = q0 + h * qdot0
    r = residual(q1)
    for _ in range(max_iter):
        if np.linalg.norm(r) <= tol:
            return q1
        jac = np.empty((2, 2))
        for i in range(2):
            di = 1e-7 * (1.0 + abs(q1[i]))
            qp = q1.copy()
            qp[i] += di
            jac[:, i] = (residual(qp) - r) / di
        step = np.linalg.solve(jac, -r)
        damping = 1.0
        nr = np.linalg.norm(r)
        while damping >= 1e-12:
            trial = q1 + damping * step
            r_trial = residual(trial)
            if np.linalg.norm(r_trial) < nr or np.linalg.norm(r_trial) <= tol:
                q1, r = trial, r_trial
                break
            damping *= 0.5
        else:
            raise NoConvergence("velocity initialization stalled")
    if np.linalg.norm(r) <= tol:
        return q1
    raise NoConvergence("velocity initialization did not converge")


# ---------------------------------------------------------------------------
# Linearized stability of the inverted equilibrium


def linearized_theta_map(
    params: CartPendParams, gains: ShapingGains, h: float
) -> np.ndarray:
    """One-step matrix of the reduced linearized theta dynamics.

    Linearizing the shaped discrete flow about the inverted equilibrium and
    eliminating the cart through momentum conservation leaves the scalar
    recursion theta_{k+1} = b theta_k - theta_{k-1}; the returned companion
    matrix advances (theta_k, theta_{k-1}).
    """
    gamma = params.gamma
    kp1 = 1.0 + gamma * gains.kappa
    a_red = params.alpha - params.beta0**2 * kp1 / gamma
    w = -params.pend_mass * params.gravity * params.length
    if a_red == 0.0:
        raise DegenerateGain("reduced inertia vanishes at this gain")
    c = h * h * w / (4.0 * a_red)
    if 1.0 + c == 0.0:
        raise DegenerateGain("linearized update is singular at this step size")
    b = 2.0 * (1.0 - c) / (1.0 + c)
    return np.array([[b, -1.0], [1.0, 0.0]])


def spectral_radius(params: CartPendParams, kappa: float, h: float) -> float:
    """Spectral radius of the linearized reduced map at gain kappa."""
    gains = ShapingGains.matched(params, kappa)
    return float(np.max(np.abs(np.linalg.eigvals(linearized_theta_map(params, gains, h)))))


def critical_kappa(
    params: CartPendParams,
    h: float,
    kappa_max: float = 1e3,
    tol: float = 1e-6,
) -> float:
    """Smallest shaping gain stabilizing the linearized inverted equilibrium.

    Bisection on the spectral radius of the linearized reduced map; below
    the threshold the map is expansive, at and above it the radius is 1.

    Raises
    ------
    NoBracket
        If no stability transition is found for kappa in (0, kappa_max].
    """

    def expansive(kappa: float) -> bool:
        return spectral_radius(params, kappa, h) > 1.0 + RADIUS_GUARD

    lo = min(1e-6, 0.5 * kappa_max)
    if not expansive(lo):
        raise NoBracket("map is already non-expansive at vanishing gain")
    hi = min(1.0, kappa_max)
    while expansive(hi):
        if hi >= kappa_max:
            raise NoBracket(f"no stability transition for kappa up to {kappa_max}")
        hi = min(2.0 * hi, kappa_max)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if expansive(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
