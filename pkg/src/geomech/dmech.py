"""Discrete-mechanics kernel for vector-space configurations.

A discrete Lagrangian Ld(q0, q1, h) approximates the action over one step.
Trajectories satisfy the discrete Euler-Lagrange equation

    D2 Ld(q_prev, q, h) + D1 Ld(q, q_next, h) = 0,

optionally augmented by left/right discrete forces. The two discrete Legendre
transforms convert configuration pairs to momenta.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NoConvergence

DEL_TOL_SCALE = 1e-12
FD_STEP = 1e-6

LdFn = Callable[[np.ndarray, np.ndarray, float], float]
SlotFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


def _fd_slot(ld: LdFn, slot: int, step: float) -> SlotFn:
    """Central-difference partial of Ld with respect to one slot."""

    def grad(q0: np.ndarray, q1: np.ndarray, h: float) -> np.ndarray:
        args = [np.array(q0, dtype=float), np.array(q1, dtype=float)]
        out = np.empty_like(args[slot])
        for i in range(out.size):
            di = step * (1.0 + abs(args[slot][i]))
            args[slot][i] += di
            above = ld(args[0], args[1], h)
            args[slot][i] -= 2.0 * di
            below = ld(args[0], args[1], h)
            args[slot][i] += di
            out[i] = (above - below) / (2.0 * di)
        return out

    return grad


@dataclass(frozen=True)
class DiscreteLagrangian:
    """One-step discrete Lagrangian with its slot derivatives.

    Missing derivatives are filled in with central finite differences of
    `ld`, so an analytic pair can always be cross-checked against the same
    object built from `ld` alone.
    """

    dim: int
    ld: LdFn
    d1: Optional[SlotFn] = None
    d2: Optional[SlotFn] = None
    fd_step: float = FD_STEP

    def __post_init__(self):
        if self.d1 is None:
            object.__setattr__(self, "d1", _fd_slot(self.ld, 0, self.fd_step))
        if self.d2 is None:
            object.__setattr__(self, "d2", _fd_slot(self.ld, 1, self.fd_step))


@dataclass(frozen=True)
class DiscreteForce:
    """Left/right discrete forces entering the forced DEL equation.

    fminus(q_k, q_{k+1}, h) acts in the slot-1 position of the step it opens;
    fplus(q_k, q_{k+1}, h) acts in the slot-2 position of the step it closes.
    """

    fminus: SlotFn
    fplus: SlotFn

    @classmethod
    def zero(cls, dim: int) -> "DiscreteForce":
        z = lambda q0, q1, h: np.zeros(dim)
        return cls(z, z)


def del_residual(
    ldisc: DiscreteLagrangian,
    q_prev: np.ndarray,
    q: np.ndarray,
    q_next: np.ndarray,
    h: float,
    forces: Optional[DiscreteForce] = None,
) -> np.ndarray:
    """Discrete Euler-Lagrange residual at the middle point of a triple."""
    r = ldisc.d2(q_prev, q, h) + ldisc.d1(q, q_next, h)
    if forces is not None:
        r = r + forces.fplus(q_prev, q, h) + forces.fminus(q, q_next, h)
    return r


def gradient_check(
    ldisc: DiscreteLagrangian,
    q0: np.ndarray,
    q1: np.ndarray,
    h: float,
    step: float = FD_STEP,
) -> float:
    """Max relative mismatch of d1/d2 against central differences of ld."""
    ref1 = _fd_slot(ldisc.ld, 0, step)(q0, q1, h)
    ref2 = _fd_slot(ldisc.ld, 1, step)(q0, q1, h)
    got1 = ldisc.d1(q0, q1, h)
    got2 = ldisc.d2(q0, q1, h)
    scale = 1.0 + max(np.max(np.abs(ref1)), np.max(np.abs(ref2)))
    return float(
        max(np.max(np.abs(got1 - ref1)), np.max(np.abs(got2 - ref2))) / scale
    )


def del_step(
    ldisc: DiscreteLagrangian,
    q_prev: np.ndarray,
    q: np.ndarray,
    h: float,
    forces: Optional[DiscreteForce] = None,
    tol: Optional[float] = None,
    max_iter: int = 50,
) -> np.ndarray:
    """Advance a configuration pair one step through the (forced) DEL equation.

    Damped Newton iteration with a finite-difference Jacobian; the initial
    guess is the linear extrapolation 2q - q_prev. The residual is checked
    before the first solve, so configurations already satisfying the equation
    return the guess unchanged.

    Raises
    ------
    NoConvergence
        If the residual norm is not within tolerance after `max_iter`
        iterations or the damping floor is reached.
    """
    q_prev = np.asarray(q_prev, dtype=float)
    q = np.asarray(q, dtype=float)
    if tol is None:
        tol = DEL_TOL_SCALE * (1.0 + float(np.linalg.norm(q)))
    base = ldisc.d2(q_prev, q, h)
    if forces is not None:
        base = base + forces.fplus(q_prev, q, h)

    def residual(qn: np.ndarray) -> np.ndarray:
        r = base + ldisc.d1(q, qn, h)
        if forces is not None:
            r = r + forces.fminus(q, qn, h)
        return r

    qn = 2.0 * q - q_prev
    r = residual(qn)
    for _ in range(max_iter):
        rnorm = float(np.linalg.norm(r))
        if rnorm <= tol:
            return qn
        jac = np.empty((ldisc.dim, ldisc.dim))
        for i in range(ldisc.dim):
            di = 1e-7 * (1.0 + abs(qn[i]))
            probe = qn.copy()
            probe[i] += di
            jac[:, i] = (residual(probe) - r) / di
        try:
            step = np.linalg.solve(jac, -r)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular DEL Jacobian: {exc}") from exc
        t = 1.0
        while t > 1e-12:
            r_new = residual(qn + t * step)
            if np.linalg.norm(r_new) < rnorm:
                break
            t *= 0.5
        else:
            raise NoConvergence("DEL Newton damping stalled")
        qn = qn + t * step
        r = r_new
    if float(np.linalg.norm(r)) <= tol:
        return qn
    raise NoConvergence(f"DEL Newton exceeded {max_iter} iterations")


def legendre_minus(
    ldisc: DiscreteLagrangian, q0: np.ndarray, q1: np.ndarray, h: float
) -> np.ndarray:
    """Momentum at the left end of a step: p0 = -D1 Ld(q0, q1, h)."""
    return -ldisc.d1(q0, q1, h)


def legendre_plus(
    ldisc: DiscreteLagrangian, q0: np.ndarray, q1: np.ndarray, h: float
) -> np.ndarray:
    """Momentum at the right end of a step: p1 = D2 Ld(q0, q1, h)."""
    return ldisc.d2(q0, q1, h)
