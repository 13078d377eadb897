"""Indirect optimal control of a rigid body by neighboring-extremal shooting.

A first-order controlled variant of the group integrator gives compact
necessary conditions: controls are linear in the costates, and the costate
advances through the transpose-inverse of a step sensitivity matrix. The
two-point boundary value problem is solved by Newton iteration on the
initial costate with an Armijo backtracking line search.

Variation coordinates stack as z = [zeta; dx; dOmega; dv] with the attitude
variation zeta in the Lie algebra, so z is 12-dimensional. Costates pair
blockwise with z, which makes the pairing lam' z invariant when z moves
forward by A and lam backward by A'.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import IllConditioned, LineSearchStalled, MaxIterations
from .geom import Rot3, exp_so3, log_so3, solve_skew_so3
from .models import DumbbellPotential, RigidState, dumbbell_potential

SENS_FD_STEP = 1e-7
ROLLOUT_FD_STEP = 1e-3
SKEW_SOLVE_TOL = 1e-15
COND_LIMIT = 1e12
ARMIJO_SLOPE = 1e-4
MIN_BACKTRACK = 1e-12

ATT = slice(0, 3)
POS = slice(3, 6)
ANG = slice(6, 9)
LIN = slice(9, 12)


@dataclass(frozen=True)
class Multiplier12:
    """Costate with one 3-vector block per state constraint.

    lam1 pairs with position variations, lam2 with velocity, lam3 with
    attitude (Lie algebra coordinates), lam4 with angular velocity. The
    stacked 12-vector follows the variation order (attitude, position,
    angular velocity, velocity) so that lam' z is a valid pairing.
    """

    lam1: np.ndarray
    lam2: np.ndarray
    lam3: np.ndarray
    lam4: np.ndarray

    def __post_init__(self):
        for name in ("lam1", "lam2", "lam3", "lam4"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,):
                raise ValueError(f"{name} must be a 3-vector")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @classmethod
    def from_vector(cls, vec: np.ndarray) -> "Multiplier12":
        vec = np.asarray(vec, dtype=float).reshape(12)
        return cls(lam1=vec[POS], lam2=vec[LIN], lam3=vec[ATT], lam4=vec[ANG])

    def vector(self) -> np.ndarray:
        out = np.empty(12)
        out[ATT] = self.lam3
        out[POS] = self.lam1
        out[ANG] = self.lam4
        out[LIN] = self.lam2
        return out


@dataclass(frozen=True)
class OrbitTransferProblem:
    """Fixed-time exact state transfer for the controlled rigid body.

    The target state must be reached after n_steps steps of size h while
    minimizing sum_k (h/2)(uf' Wf uf + um' Wm um).
    """

    start: RigidState
    target: RigidState
    pot: DumbbellPotential
    n_steps: int
    h: float
    w_force: np.ndarray = field(default_factory=lambda: np.eye(3))
    w_moment: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        for name in ("w_force", "w_moment"):
            w = np.asarray(getattr(self, name), dtype=float)
            if w.shape != (3, 3) or not np.allclose(w, w.T):
                raise ValueError(f"{name} must be a symmetric 3x3 matrix")
            if np.any(np.linalg.eigvalsh(w) <= 0.0):
                raise ValueError(f"{name} must be positive definite")
            object.__setattr__(self, name, w)
        if self.start.m != self.target.m or not np.array_equal(
            self.start.J, self.target.J
        ):
            raise ValueError("start and target must describe the same body")
        if self.n_steps < 1:
            raise ValueError("n_steps must be positive")


def controlled_step(
    s: RigidState,
    pot: DumbbellPotential,
    u_f: np.ndarray,
    u_m: np.ndarray,
    h: float,
) -> RigidState:
    """First-order controlled step on SE(3).

    The relative rotation solves F Jd - Jd F' = hat(h J Omega); potential
    forces, moments, and controls all act at the arrival configuration.
    """
    jmat = s.J
    a = h * (jmat @ s.Omega)
    # The shooting residual is differenced through this solve, so its
    # truncation must sit at roundoff, not at the default tolerance.
    f = solve_skew_so3(a, s.Jd, tol=SKEW_SOLVE_TOL * (1.0 + np.linalg.norm(a)))
    r1 = Rot3(s.R.m @ f.m)
    x1 = s.x + h * s.v
    _, dudx1, m1 = dumbbell_potential(pot, r1.m, x1)
    omega1 = np.linalg.solve(jmat, f.m.T @ (jmat @ s.Omega) + h * (m1 + u_m))
    v1 = s.v + (h / s.m) * (-dudx1 + u_f)
    return RigidState(r1, x1, omega1, v1, s.m, s.J)


def optimal_controls(lam: Multiplier12, w_force: np.ndarray, w_moment: np.ndarray):
    """Controls for the step leaving a node with costate lam.

    Stationarity of the augmented cost in each control input gives
    u_f = -Wf^{-1} lam2 and u_m = -Wm^{-1} lam4.
    """
    u_f = -np.linalg.solve(np.asarray(w_force, dtype=float), lam.lam2)
    u_m = -np.linalg.solve(np.asarray(w_moment, dtype=float), lam.lam4)
    return u_f, u_m


def sensitivity_matrix(
    s: RigidState,
    pot: DumbbellPotential,
    h: float,
    u_f: np.ndarray | None = None,
    u_m: np.ndarray | None = None,
    fd_step: float = SENS_FD_STEP,
) -> np.ndarray:
    """Linearization of the one-step controlled flow at a state.

    Central differences in variation coordinates: attitude columns perturb
    the departure rotation multiplicatively through the exponential, and
    attitude rows are read back through the logarithm relative to the
    unperturbed arrival rotation. Controls enter the step additively, so
    the matrix does not depend on them; they are accepted to document the
    linearization point.
    """
    u_f = np.zeros(3) if u_f is None else u_f
    u_m = np.zeros(3) if u_m is None else u_m
    base = controlled_step(s, pot, u_f, u_m, h)
    amat = np.empty((12, 12))
    for j in range(12):
        sp = controlled_step(_perturbed(s, j, fd_step), pot, u_f, u_m, h)
        sm = controlled_step(_perturbed(s, j, -fd_step), pot, u_f, u_m, h)
        amat[:, j] = (_variation_from(base, sp) - _variation_from(base, sm)) / (
            2.0 * fd_step
        )
    return amat


def _perturbed(s: RigidState, j: int, eps: float) -> RigidState:
    parts = [np.zeros(3) for _ in range(4)]
    block, i = divmod(j, 3)
    parts[block][i] = eps
    zeta, dx, dw, dv = parts
    r = Rot3(s.R.m @ exp_so3(zeta).m) if block == 0 else s.R
    return RigidState(r, s.x + dx, s.Omega + dw, s.v + dv, s.m, s.J)


def _variation_from(base: RigidState, other: RigidState) -> np.ndarray:
    out = np.empty(12)
    out[ATT] = log_so3(base.R.m.T @ other.R.m)
    out[POS] = other.x - base.x
    out[ANG] = other.Omega - base.Omega
    out[LIN] = other.v - base.v
    return out


def multiplier_step(lam: Multiplier12, amat: np.ndarray) -> Multiplier12:
    """Advance the costate forward through one step: lam_next = A^{-T} lam.

    Algebraically identical to the backward relation lam = A' lam_next,
    available as multiplier_step_back for verification.

    Raises
    ------
    IllConditioned
        If the sensitivity matrix condition number exceeds 1e12.
    """
    if np.linalg.cond(amat) > COND_LIMIT:
        raise IllConditioned("step sensitivity condition number exceeds 1e12")
    return Multiplier12.from_vector(np.linalg.solve(amat.T, lam.vector()))


def multiplier_step_back(lam_next: Multiplier12, amat: np.ndarray) -> Multiplier12:
    """The literal backward costate relation: lam = A' lam_next."""
    return Multiplier12.from_vector(amat.T @ lam_next.vector())


def rollout(
    p: OrbitTransferProblem, lam0: np.ndarray, with_sensitivities: bool = False
):
    """Integrate state and costate forward from an initial costate.

    The costate at a node determines the controls over the step leaving it;
    the costate then advances through the sensitivity evaluated at the
    arrival state. Returns (states, multipliers, u_force, u_moment) and,
    when requested, the list of per-step sensitivity matrices.
    """
    lam = Multiplier12.from_vector(np.asarray(lam0, dtype=float))
    states = [p.start]
    lams = [lam]
    ufs = np.empty((p.n_steps, 3))
    ums = np.empty((p.n_steps, 3))
    amats = []
    s = p.start
    for k in range(p.n_steps):
        u_f, u_m = optimal_controls(lam, p.w_force, p.w_moment)
        ufs[k], ums[k] = u_f, u_m
        s = controlled_step(s, p.pot, u_f, u_m, p.h)
        # Differencing noise in A scales as state roundoff over the step
        # width; the costate chain amplifies it into the terminal residual,
        # so the chain uses a wider step than the standalone default.
        amat = sensitivity_matrix(s, p.pot, p.h, u_f, u_m, fd_step=ROLLOUT_FD_STEP)
        lam = multiplier_step(lam, amat)
        states.append(s)
        lams.append(lam)
        if with_sensitivities:
            amats.append(amat)
    out = (states, lams, ufs, ums)
    return out + (amats,) if with_sensitivities else out


def boundary_residual(p: OrbitTransferProblem, lam0: np.ndarray) -> np.ndarray:
    """Terminal constraint violation in variation coordinates."""
    states, _, _, _ = rollout(p, lam0)
    end = states[-1]
    out = np.empty(12)
    out[ATT] = log_so3(end.R.m.T @ p.target.R.m)
    out[POS] = p.target.x - end.x
    out[ANG] = p.target.Omega - end.Omega
    out[LIN] = p.target.v - end.v
    return out


def pairing_defect(amats: list, lam_end: np.ndarray, z0: np.ndarray) -> float:
    """Max relative drift of lam' z under coupled adjoint propagation.

    z moves forward through each A while lam moves backward through A', so
    the pairing is algebraically invariant; the returned defect is the
    accumulated floating-point error, relative to the pairing magnitude.
    """
    n = len(amats)
    zs = [np.asarray(z0, dtype=float).reshape(12)]
    for amat in amats:
        zs.append(amat @ zs[-1])
    lam = np.asarray(lam_end, dtype=float).reshape(12)
    pairing_end = float(lam @ zs[n])
    scale = max(abs(pairing_end), 1e-300)
    worst = 0.0
    for k in range(n - 1, -1, -1):
        lam = amats[k].T @ lam
        worst = max(worst, abs(float(lam @ zs[k]) - pairing_end) / scale)
    return worst


@dataclass
class ShootResult:
    lam0: np.ndarray
    states: list
    u_force: np.ndarray
    u_moment: np.ndarray
    residual_norms: list
    iterations: int


def _fd_jacobian(p: OrbitTransferProblem, lam0, r0, step_scale: float) -> np.ndarray:
    jac = np.empty((12, 12))
    for i in range(12):
        di = step_scale * (1.0 + abs(lam0[i]))
        lp = lam0.copy()
        lp[i] += di
        jac[:, i] = (boundary_residual(p, lp) - r0) / di
    return jac


def shoot(
    p: OrbitTransferProblem,
    lam0: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
    fd_step: float = 1e-6,
) -> ShootResult:
    """Solve the two-point boundary value problem by Newton-Armijo iteration.

    The initial costate (zero by default) is refined until the terminal
    residual norm falls below tol. Each iteration builds a forward
    finite-difference Jacobian of the residual, with per-component steps
    fd_step*(1+|lam0_i|), and backtracks along the Newton direction by
    halving until the Armijo sufficient-decrease test with slope 1e-4
    passes.

    Raises
    ------
    LineSearchStalled
        If backtracking reduces the step below 1e-12 without decrease.
    MaxIterations
        If the iteration budget is exhausted before convergence.
    """
    lam = np.zeros(12) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    r = boundary_residual(p, lam)
    norms = [float(np.linalg.norm(r))]
    while norms[-1] > tol:
        if len(norms) > max_iter:
            raise MaxIterations(
                f"residual {norms[-1]:.3e} after {max_iter} iterations"
            )
        jac = _fd_jacobian(p, lam, r, fd_step)
        direction = np.linalg.solve(jac, -r)
        t = 1.0
        while True:
            trial = lam + t * direction
            r_trial = boundary_residual(p, trial)
            if np.linalg.norm(r_trial) <= (1.0 - ARMIJO_SLOPE * t) * norms[-1]:
                break
            t *= 0.5
            if t < MIN_BACKTRACK:
                raise LineSearchStalled("backtracking step fell below 1e-12")
        lam = trial
        r = r_trial
        norms.append(float(np.linalg.norm(r)))
    states, _, ufs, ums = rollout(p, lam)
    return ShootResult(lam, states, ufs, ums, norms, len(norms) - 1)
