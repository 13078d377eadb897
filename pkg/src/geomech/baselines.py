"""Comparison integrators: embedded Runge-Kutta and quaternion attitude.

These are the non-structure-preserving references. The Runge-Kutta pair is
Dormand-Prince 5(4) with the standard elementary step controller and a
quartic dense-output interpolant; a fixed-step mode supports order checks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import StepUnderflow
from .geom import E3, hat3
from .models import DumbbellPotential, dumbbell_potential

# Dormand-Prince 5(4) tableau.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# Difference between the 5th- and 4th-order weights; h * E @ K estimates the
# local error.
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Quartic dense-output coefficients for the same pair.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

UNDERFLOW_FRACTION = 1e-14


@dataclass(frozen=True)
class OdeProblem:
    """First-order system ydot = f(t, y) over a time span."""

    f: Callable[[float, np.ndarray], np.ndarray]
    y0: np.ndarray
    t_span: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "y0", np.asarray(self.y0, dtype=float))


@dataclass
class RkResult:
    """Samples plus step statistics from one integration."""

    t: np.ndarray
    y: np.ndarray
    t_final: float
    y_final: np.ndarray
    n_accepted: int
    n_rejected: int
    n_fev: int


def _stages(f, t, y, h, k1):
    k = np.empty((7, y.size))
    k[0] = k1
    for i in range(1, 7):
        k[i] = f(t + _C[i] * h, y + h * (_A[i] @ k[:i]))
    y1 = y + h * (_B5 @ k)
    return y1, k


def _error_norm(k, h, y, y1, rtol, atol):
    scale = atol + rtol * np.maximum(np.abs(y), np.abs(y1))
    e = h * (_E @ k)
    return float(np.sqrt(np.mean((e / scale) ** 2)))


def _initial_step(f, t0, y0, f0, t1, rtol, atol):
    """Hairer's starting-step heuristic, clipped to the span."""
    span = abs(t1 - t0)
    scale = atol + rtol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = f(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    dm = max(d1, d2)
    h1 = (0.01 / dm) ** 0.2 if dm > 1e-15 else max(1e-6, h0 * 1e-3)
    return min(100 * h0, h1, span)


def rk45_integrate(
    prob: OdeProblem,
    rtol: float = 1e-6,
    atol: float = 1e-9,
    t_eval: Optional[Sequence[float]] = None,
    fixed_step: Optional[float] = None,
    max_steps: int = 10_000_000,
) -> RkResult:
    """Integrate with the embedded 5(4) pair.

    Parameters
    ----------
    t_eval : sequence of float, optional
        Ascending sample times inside the span; values are produced by the
        dense-output interpolant, so they do not constrain step placement.
    fixed_step : float, optional
        Disables the error controller and marches with this step (the final
        step is clipped to land on the endpoint).

    Raises
    ------
    StepUnderflow
        If the controller drives h below 1e-14 times the span.
    """
    t0, t1 = prob.t_span
    span = t1 - t0
    if span <= 0.0:
        raise ValueError("t_span must be increasing")
    samples = None
    if t_eval is not None:
        samples = np.asarray(t_eval, dtype=float)
        if samples.size and (np.any(np.diff(samples) < 0)):
            raise ValueError("t_eval must be ascending")
    out_t: list[float] = []
    out_y: list[np.ndarray] = []
    sample_idx = 0

    t, y = t0, prob.y0.copy()
    f0 = prob.f(t, y)
    n_fev = 1
    if fixed_step is not None:
        h = float(fixed_step)
    else:
        h = _initial_step(prob.f, t0, y, f0, t1, rtol, atol)
        n_fev += 1
    k1 = f0
    n_acc = n_rej = 0

    # Emit any samples that coincide with t0.
    if samples is not None:
        while sample_idx < samples.size and samples[sample_idx] <= t0:
            out_t.append(float(samples[sample_idx]))
            out_y.append(y.copy())
            sample_idx += 1

    for _ in range(max_steps):
        # Accumulated roundoff can leave a sub-resolution sliver before t1;
        # that is arrival, not a step to take.
        if t1 - t <= UNDERFLOW_FRACTION * span:
            t = t1
            break
        h = min(h, t1 - t)
        if h < UNDERFLOW_FRACTION * span:
            raise StepUnderflow(f"step {h:.3e} under {UNDERFLOW_FRACTION:.0e} of span")
        y1, k = _stages(prob.f, t, y, h, k1)
        n_fev += 6
        if fixed_step is None:
            err = _error_norm(k, h, y, y1, rtol, atol)
            if err > 1.0:
                n_rej += 1
                h *= max(0.2, 0.9 * err**-0.2)
                continue
            factor = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err**-0.2))
        else:
            factor = 1.0
        # Dense output over (t, t + h] before committing the step.
        if samples is not None and sample_idx < samples.size:
            q = k.T @ _P  # (dim, 4)
            while sample_idx < samples.size and samples[sample_idx] <= t + h + 1e-14 * span:
                sigma = (samples[sample_idx] - t) / h
                powers = np.array([sigma, sigma**2, sigma**3, sigma**4])
                out_t.append(float(samples[sample_idx]))
                out_y.append(y + h * (q @ powers))
                sample_idx += 1
        n_acc += 1
        t = t + h
        y = y1
        k1 = k[6]  # FSAL: stage 7 is f(t + h, y1)
        if fixed_step is None:
            h *= factor
    else:
        raise StepUnderflow("step budget exhausted before reaching the endpoint")

    return RkResult(
        t=np.array(out_t),
        y=np.array(out_y) if out_y else np.empty((0, y.size)),
        t_final=t,
        y_final=y,
        n_accepted=n_acc,
        n_rejected=n_rej,
        n_fev=n_fev,
    )


# ---------------------------------------------------------------------------
# Quaternion attitude kinematics (scalar-first, Hamilton product)


@dataclass(frozen=True)
class QuatAttitude:
    """Attitude quaternion; no normalization is enforced during integration."""

    p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product, scalar-first."""
    aw, av = a[0], a[1:]
    bw, bv = b[0], b[1:]
    return np.concatenate(
        ([aw * bw - av @ bv], aw * bv + bw * av + np.cross(av, bv))
    )


def quat_kinematics_rhs(p: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """pdot = 0.5 p (0, Omega) for body-frame angular velocity."""
    return 0.5 * quat_mul(p, np.concatenate(([0.0], omega)))


def quat_to_rot(p: np.ndarray) -> np.ndarray:
    """Rotation matrix from a quaternion, without normalizing.

    Applying the unit-quaternion formula to a drifting p makes R^T R =
    |p|^4 I, so the orthogonality error directly exposes the drift.
    """
    w, x, y, z = p
    return np.array(
        [
            [w * w + x * x - y * y - z * z, 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), w * w - x * x + y * y - z * z, 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), w * w - x * x - y * y + z * z],
        ]
    )


def rot_to_quat(r: np.ndarray) -> np.ndarray:
    """Unit quaternion of a rotation matrix (Shepperd's method, scalar-first)."""
    tr = np.trace(r)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2
        return np.array(
            [0.25 * s, (r[2, 1] - r[1, 2]) / s, (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s]
        )
    i = int(np.argmax(np.diag(r)))
    j, k = (i + 1) % 3, (i + 2) % 3
    s = np.sqrt(max(r[i, i] - r[j, j] - r[k, k] + 1.0, 0.0)) * 2
    q = np.empty(4)
    q[0] = (r[k, j] - r[j, k]) / s
    q[1 + i] = 0.25 * s
    q[1 + j] = (r[j, i] + r[i, j]) / s
    q[1 + k] = (r[k, i] + r[i, k]) / s
    return q


# ---------------------------------------------------------------------------
# Right-hand sides of the benchmark systems in first-order form


def mass_spring_ode(m: float, kappa: float):
    def f(t, y):
        return np.array([y[1], -(kappa / m) * y[0]])

    return f


def planar_ode(l: float, g: float):
    """State (theta, Omega) for the planar pendulum."""

    def f(t, y):
        return np.array([y[1], -(g / l) * np.sin(y[0])])

    return f


def spherical_ode(l: float, g: float):
    """State (q, omega) stacked as 6 components."""

    def f(t, y):
        q, w = y[:3], y[3:]
        return np.concatenate((np.cross(w, q), (g / l) * np.cross(q, E3)))

    return f


def rigid_ode(pot: DumbbellPotential, m: float, J: np.ndarray):
    """State (R row-major 9, x, Omega, v) stacked as 18 components."""
    jinv = np.linalg.inv(J)

    def f(t, y):
        r = y[:9].reshape(3, 3)
        x, w, v = y[9:12], y[12:15], y[15:18]
        _, dudx, mom = dumbbell_potential(pot, r, x)
        rdot = r @ hat3(w)
        wdot = jinv @ (mom - np.cross(w, J @ w))
        return np.concatenate((rdot.ravel(), v, wdot, -dudx / m))

    return f


def rigid_quat_ode(pot: DumbbellPotential, m: float, J: np.ndarray):
    """State (p quaternion, x, Omega, v) stacked as 13 components.

    The attitude entering the potential is quat_to_rot(p) without
    normalization, so quaternion drift contaminates the dynamics exactly as
    it would in a naive implementation.
    """
    jinv = np.linalg.inv(J)

    def f(t, y):
        p = y[:4]
        x, w, v = y[4:7], y[7:10], y[10:13]
        r = quat_to_rot(p)
        _, dudx, mom = dumbbell_potential(pot, r, x)
        pdot = quat_kinematics_rhs(p, w)
        wdot = jinv @ (mom - np.cross(w, J @ w))
        return np.concatenate((pdot, v, wdot, -dudx / m))

    return f


def drift_stats(series: Sequence[float], abscissa: Optional[Sequence[float]] = None):
    """Mean absolute deviation from the first sample and least-squares slope.

    The slope is per index unless an abscissa is supplied.
    """
    s = np.asarray(series, dtype=float)
    x = np.arange(s.size) if abscissa is None else np.asarray(abscissa, dtype=float)
    mean_dev = float(np.mean(np.abs(s - s[0])))
    if s.size < 2:
        return mean_dev, 0.0
    slope = float(np.polyfit(x, s, 1)[0])
    return mean_dev, slope
