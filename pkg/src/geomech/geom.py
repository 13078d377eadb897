"""Rotation-group and sphere primitives shared by every integrator.

Conventions: rotations act on column vectors, hat maps R^3 onto 3x3
antisymmetric matrices with hat(x) y = x cross y, and the 2D hat map sends a
scalar c to [[0, -c], [c, 0]].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AngleNearPi, NoConvergence, StepTooLarge

ORTHO_TOL = 1e-12
UNIT_TOL = 1e-12
SKEW_SOLVE_TOL = 1e-13

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def _mat(r) -> np.ndarray:
    """Accept a rotation wrapper or a raw matrix."""
    if isinstance(r, (Rot2, Rot3)):
        return r.m
    return np.asarray(r, dtype=float)


@dataclass(frozen=True)
class Rot2:
    """Planar rotation: 2x2 orthonormal matrix with det +1."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (2, 2):
            raise ValueError(f"Rot2 expects a 2x2 matrix, got {m.shape}")
        object.__setattr__(self, "m", m)
        if ortho_error(m) > ORTHO_TOL or abs(np.linalg.det(m) - 1.0) > ORTHO_TOL:
            raise ValueError("matrix is not a rotation within tolerance")

    @classmethod
    def from_angle(cls, theta: float) -> "Rot2":
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]))

    @classmethod
    def identity(cls) -> "Rot2":
        return cls(np.eye(2))

    @property
    def angle(self) -> float:
        return float(np.arctan2(self.m[1, 0], self.m[0, 0]))

    def __matmul__(self, other: "Rot2") -> "Rot2":
        return Rot2(self.m @ other.m)


@dataclass(frozen=True)
class Rot3:
    """Spatial rotation: 3x3 orthonormal matrix with det +1."""

    m: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m, dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"Rot3 expects a 3x3 matrix, got {m.shape}")
        object.__setattr__(self, "m", m)
        if ortho_error(m) > ORTHO_TOL or abs(np.linalg.det(m) - 1.0) > ORTHO_TOL:
            raise ValueError("matrix is not a rotation within tolerance")

    @classmethod
    def identity(cls) -> "Rot3":
        return cls(np.eye(3))

    def __matmul__(self, other: "Rot3") -> "Rot3":
        return Rot3(self.m @ other.m)


@dataclass(frozen=True)
class UnitVec3:
    """Point on the unit two-sphere."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (3,):
            raise ValueError(f"UnitVec3 expects shape (3,), got {q.shape}")
        object.__setattr__(self, "q", q)
        if abs(q @ q - 1.0) > UNIT_TOL:
            raise ValueError("vector does not have unit length within tolerance")


@dataclass(frozen=True)
class Skew3:
    """Element of so(3) stored by its axis coordinates."""

    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if v.shape != (3,):
            raise ValueError(f"Skew3 expects shape (3,), got {v.shape}")
        object.__setattr__(self, "v", v)

    @property
    def matrix(self) -> np.ndarray:
        return hat3(self.v)


def hat2(c: float) -> np.ndarray:
    """Scalar to 2x2 antisymmetric matrix."""
    return np.array([[0.0, -c], [c, 0.0]])


def vee2(m: np.ndarray) -> float:
    """Inverse of hat2; reads the lower-left entry."""
    return float(m[1, 0])


def hat3(v: np.ndarray) -> np.ndarray:
    """Vector to 3x3 antisymmetric matrix, hat(v) y = v cross y."""
    v = np.asarray(v, dtype=float)
    return np.array(
        [
            [0.0, -v[2], v[1]],
            [v[2], 0.0, -v[0]],
            [-v[1], v[0], 0.0],
        ]
    )


def vee3(m: np.ndarray) -> np.ndarray:
    """Inverse of hat3 for antisymmetric input."""
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def ortho_error(r) -> float:
    """Frobenius distance of R^T R from the identity."""
    m = _mat(r)
    return float(np.linalg.norm(np.eye(m.shape[0]) - m.T @ m))


def _sinc(theta: float) -> float:
    # sin(t)/t, exact at zero
    return float(np.sinc(theta / np.pi))


def _cosc(theta: float) -> float:
    # (1 - cos t)/t^2 via the half-angle square, exact at zero
    half = float(np.sinc(theta / (2.0 * np.pi)))
    return 0.5 * half * half


def exp_so3(v: np.ndarray) -> Rot3:
    """Rodrigues exponential of hat(v).

    Uses sin(t)/t and (1-cos t)/t^2 in forms that stay exact as t -> 0.
    """
    v = np.asarray(v, dtype=float)
    theta = float(np.linalg.norm(v))
    k = hat3(v)
    m = np.eye(3) + _sinc(theta) * k + _cosc(theta) * (k @ k)
    return Rot3(m)


def log_so3(r) -> np.ndarray:
    """Principal logarithm of a rotation, returned as axis coordinates.

    Raises
    ------
    AngleNearPi
        If trace(R) <= -1 + 1e-9, where the principal branch degenerates.
    """
    m = _mat(r)
    tr = float(np.trace(m))
    if tr <= -1.0 + 1e-9:
        raise AngleNearPi(f"trace {tr:.12g} too close to -1 for a unique log")
    theta = float(np.arccos(np.clip((tr - 1.0) / 2.0, -1.0, 1.0)))
    if theta < 1e-7:
        factor = 0.5 + theta * theta / 12.0
    else:
        factor = theta / (2.0 * np.sin(theta))
    return factor * vee3(m - m.T)


def solve_skew_so2(c: float) -> Rot2:
    """Solve F - F^T = hat2(c) for a planar rotation F.

    The antisymmetric part of a rotation by angle t is hat2(2 sin t), so the
    solution is the rotation by asin(c/2).

    Raises
    ------
    StepTooLarge
        If |c/2| exceeds 1 - 1e-12 and no rotation can produce the requested
        antisymmetric part.
    """
    half = 0.5 * c
    if abs(half) > 1.0 - 1e-12:
        raise StepTooLarge(f"|c/2| = {abs(half):.6g} leaves asin's domain")
    return Rot2.from_angle(float(np.arcsin(half)))


def _skew_residual_terms(f: np.ndarray, jmat: np.ndarray):
    """G(f) and its Jacobian for the so(3) skew solve.

    With F = exp(hat(f)) and symmetric Jd, F Jd - Jd F^T is antisymmetric and
    vee(F Jd - Jd F^T) = sinc(t) J f + cosc(t) f x (J f), t = |f|,
    J = tr(Jd) I - Jd.
    """
    theta = float(np.linalg.norm(f))
    jf = jmat @ f
    fxjf = np.cross(f, jf)
    s = _sinc(theta)
    c2 = _cosc(theta)
    g = s * jf + c2 * fxjf
    if theta < 1e-5:
        a1 = -1.0 / 3.0 + theta * theta / 30.0  # d(sinc)/dt / t
        a2 = -1.0 / 12.0 + theta * theta / 180.0  # d(cosc)/dt / t
    else:
        st, ct = np.sin(theta), np.cos(theta)
        a1 = (theta * ct - st) / theta**3
        a2 = (theta * st - 2.0 * (1.0 - ct)) / theta**4
    jac = (
        s * jmat
        + c2 * (hat3(f) @ jmat - hat3(jf))
        + np.outer(jf, a1 * f)
        + np.outer(fxjf, a2 * f)
    )
    return g, jac


def solve_skew_so3(
    a: np.ndarray,
    jd: np.ndarray,
    tol: float = SKEW_SOLVE_TOL,
    max_iter: int = 50,
) -> Rot3:
    """Solve F Jd - Jd F^T = hat3(a) for F in SO(3).

    Parameters
    ----------
    a : ndarray, shape (3,)
        Axis coordinates of the prescribed antisymmetric part.
    jd : ndarray, shape (3, 3)
        Symmetric positive-definite nonstandard inertia matrix.
    tol : float
        Bound on the Frobenius norm of the matrix residual at the solution.

    Raises
    ------
    NoConvergence
        If damped Newton fails to meet `tol` within `max_iter` iterations.
    """
    a = np.asarray(a, dtype=float)
    jd = np.asarray(jd, dtype=float)
    if np.linalg.norm(jd - jd.T) > 1e-12 * (1.0 + np.linalg.norm(jd)):
        raise ValueError("jd must be symmetric")
    jmat = np.trace(jd) * np.eye(3) - jd
    f = a / np.trace(jd)
    # Frobenius norm of the matrix residual is sqrt(2) * |G(f) - a|.
    root2 = np.sqrt(2.0)
    for _ in range(max_iter):
        g, jac = _skew_residual_terms(f, jmat)
        res = g - a
        if root2 * np.linalg.norm(res) <= tol:
            return exp_so3(f)
        try:
            step = np.linalg.solve(jac, -res)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian in skew solve: {exc}") from exc
        # Damped update: halve until the residual norm decreases.
        t = 1.0
        base = np.linalg.norm(res)
        while t > 1e-12:
            g_new, _ = _skew_residual_terms(f + t * step, jmat)
            if np.linalg.norm(g_new - a) < base:
                break
            t *= 0.5
        else:
            raise NoConvergence("skew solve line search stalled")
        f = f + t * step
    raise NoConvergence(f"skew solve exceeded {max_iter} iterations")
