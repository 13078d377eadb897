"""Direct optimal control of the spherical pendulum swing-up."""

import numpy as np
import pytest

from geomech.dmoc import (
    ControlSchedule,
    SwingUpOptions,
    SwingUpProblem,
    _batch_terminal,
    _rollout_fast,
    cost,
    forced_rollout,
    solve_swingup,
)
from geomech.errors import InfeasibleOrStalled
from geomech.geom import E1, E3, UnitVec3
from geomech.models import SphericalPendState, spherical_pend_step


def _swing_problem(n_steps=30, h=0.033):
    return SwingUpProblem(
        q0=np.array([0.0, 0.0, 1.0]),
        omega0=np.zeros(3),
        q_des=np.array([0.0, 0.0, -1.0]),
        omega_des=np.zeros(3),
        n_steps=n_steps,
        h=h,
    )


def test_problem_validation():
    with pytest.raises(ValueError):
        SwingUpProblem(2.0 * E3, np.zeros(3), E3, np.zeros(3), 10, 0.05)
    with pytest.raises(ValueError):
        SwingUpProblem(E3, 0.5 * E3, E1, np.zeros(3), 10, 0.05)
    with pytest.raises(ValueError):
        SwingUpProblem(E3, np.zeros(3), E1, np.zeros(3), 0, 0.05)
    with pytest.raises(ValueError):
        ControlSchedule(np.zeros((5, 2)))


def test_zero_schedule_matches_unforced_rollout():
    # With w = 0 every moment vanishes and the forced rollout reproduces the
    # plain simulation step bit for bit.
    p = SwingUpProblem(
        q0=np.array([0.5 * np.sqrt(3.0), 0.0, 0.5]),
        omega0=np.array([-0.05 * np.sqrt(3.0), 0.0, 0.15]),
        q_des=E1,
        omega_des=np.zeros(3),
        n_steps=50,
        h=0.05,
    )
    qs, oms = forced_rollout(p, np.zeros((51, 3)))
    s = SphericalPendState(UnitVec3(p.q0), p.omega0, p.m, p.l, p.g)
    for k in range(50):
        s = spherical_pend_step(s, p.h)
        assert np.array_equal(qs[k + 1], s.q.q)
        assert np.array_equal(oms[k + 1], s.omega)


def test_fast_rollout_identical_to_state_based_rollout():
    p = _swing_problem()
    rng = np.random.default_rng(12)
    w = 0.3 * p.m * p.l**2 * rng.standard_normal((31, 3))
    qs_a, om_a = forced_rollout(p, w)
    qs_b, om_b = _rollout_fast(p, w)
    assert np.array_equal(qs_a, qs_b)
    assert np.array_equal(om_a, om_b)


def test_moments_are_tangent_to_trajectory():
    p = _swing_problem(n_steps=10, h=0.05)
    rng = np.random.default_rng(13)
    w = 5.0 * rng.standard_normal((11, 3))
    qs, _ = forced_rollout(p, w)
    u = ControlSchedule(w).moments(qs)
    assert np.max(np.abs(np.einsum("ij,ij->i", u, qs))) < 1e-13 * np.max(np.abs(u))


def test_single_impulse_hand_solution():
    # Without gravity, one step driven by w0 = c e1 from the pole is an
    # explicit impulse-momentum calculation.
    m, l, h, c = 2.0, 3.0, 0.1, 0.7
    ml2 = m * l * l
    p = SwingUpProblem(E3, np.zeros(3), E1, np.zeros(3), 1, h, m=m, l=l, g=0.0)
    w = np.array([[c, 0.0, 0.0], [0.0, 0.0, 0.0]])
    qs, oms = forced_rollout(p, w)
    b2 = (h * h / (2.0 * ml2)) * c
    assert np.array_equal(qs[1], np.array([b2, 0.0, np.sqrt(1.0 - b2 * b2)]))
    assert np.array_equal(oms[1], np.array([0.0, (h / (2.0 * ml2)) * c, 0.0]))


def test_cost_values():
    p = _swing_problem(n_steps=1, h=1.0)
    assert cost(p, np.zeros((2, 3))) == 0.0
    # one active node with |q x w| = 1 contributes h/2
    flat = SwingUpProblem(E3, np.zeros(3), E1, np.zeros(3), 1, 1.0, g=0.0)
    w = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
    assert abs(cost(flat, w) - 0.5) < 1e-15


def test_effort_is_quadratic_in_the_moments():
    rng = np.random.default_rng(14)
    qs = rng.standard_normal((8, 3))
    qs /= np.linalg.norm(qs, axis=1)[:, None]
    w = rng.standard_normal((8, 3))
    u1 = ControlSchedule(w).moments(qs)
    u2 = ControlSchedule(2.0 * w).moments(qs)
    assert np.allclose(u2, 2.0 * u1, rtol=1e-14, atol=0.0)
    assert abs(np.sum(u2 * u2) - 4.0 * np.sum(u1 * u1)) < 1e-12 * np.sum(u1 * u1)


def test_zero_control_shortcut_at_identity_target():
    p = SwingUpProblem(E3, np.zeros(3), E3, np.zeros(3), 5, 0.05)
    sched, (qs, oms), report = solve_swingup(p)
    assert report.outer_iterations == 0
    assert report.cost == 0.0
    assert report.converged
    assert np.array_equal(sched.w, np.zeros((6, 3)))
    assert np.array_equal(qs[-1], E3)


def test_batched_probes_match_scalar_objective():
    # The solver evaluates finite-difference probes in one vectorized batch;
    # each row must agree with the scalar objective path to roundoff.
    p = _swing_problem(n_steps=6, h=0.1)
    rng = np.random.default_rng(15)
    lam = rng.standard_normal(6)
    rho = 25.0
    w0 = rng.standard_normal(21)

    def aug(wflat):
        w = wflat.reshape(7, 3)
        qs, oms = forced_rollout(p, w)
        u = np.cross(qs, w)
        j = 0.5 * p.h * float(np.sum(u * u))
        c = np.concatenate((qs[-1] - p.q_des, oms[-1] - p.omega_des))
        return j + float(lam @ c) + 0.5 * rho * float(c @ c)

    di = 1e-4
    probes = np.repeat(w0[None, :], 42, axis=0)
    rows = np.arange(21)
    probes[2 * rows, rows] += di
    probes[2 * rows + 1, rows] -= di
    jb, qn, on, ok = _batch_terminal(p, probes.reshape(42, 7, 3))
    assert np.all(ok)
    cb = np.concatenate((qn - p.q_des, on - p.omega_des), axis=1)
    fb = jb + cb @ lam + 0.5 * rho * np.einsum("ij,ij->i", cb, cb)
    g_batch = (fb[0::2] - fb[1::2]) / (2.0 * di)
    g_scalar = np.array(
        [(aug(probes[2 * i]) - aug(probes[2 * i + 1])) / (2.0 * di) for i in range(21)]
    )
    assert np.max(np.abs(g_batch - g_scalar)) < 1e-8 * (1.0 + np.max(np.abs(g_scalar)))


def test_small_transfer_reaches_a_local_optimum():
    # Modest tilt of the endpoint: the solve must converge, meet its
    # tolerances, and sit at a point where feasible perturbations do not
    # reduce the augmented objective.
    p = SwingUpProblem(
        q0=E3,
        omega0=np.zeros(3),
        q_des=np.array([np.sin(0.3), 0.0, np.cos(0.3)]),
        omega_des=np.zeros(3),
        n_steps=8,
        h=0.1,
    )
    opts = SwingUpOptions()
    sched, (qs, oms), report = solve_swingup(p, opts)
    assert report.converged
    assert report.constraint_q <= opts.tol_constraint
    assert report.constraint_omega <= opts.tol_constraint
    assert report.stationarity <= opts.tol_grad
    assert np.max(np.abs(qs[-1] - p.q_des)) <= 2e-6

    ml2 = p.m * p.l * p.l
    x_star = sched.w.ravel() / ml2
    lam = report.multipliers
    rho = 1e5

    def aug(x):
        w = ml2 * x.reshape(9, 3)
        qs2, oms2 = forced_rollout(p, w)
        u = np.cross(qs2, x.reshape(9, 3))
        j = 0.5 * p.h * float(np.sum(u * u))
        c = np.concatenate((qs2[-1] - p.q_des, oms2[-1] - p.omega_des))
        return j + float(lam @ c) + 0.5 * rho * float(c @ c)

    f0 = aug(x_star)
    di = 1e-6
    grad = np.empty(x_star.size)
    for i in range(x_star.size):
        xp = x_star.copy()
        xp[i] += di
        above = aug(xp)
        xp[i] -= 2.0 * di
        grad[i] = (above - aug(xp)) / (2.0 * di)
    rng = np.random.default_rng(16)
    gn2 = float(grad @ grad)
    for _ in range(20):
        d = rng.standard_normal(x_star.size)
        if gn2 > 0.0:
            d -= (grad @ d / gn2) * grad  # remove the residual-gradient line
        d *= 1e-3 / np.linalg.norm(d)
        assert aug(x_star + d) >= f0 - 1e-8


def test_budget_exhaustion_raises():
    p = _swing_problem(n_steps=10, h=0.05)
    with pytest.raises(InfeasibleOrStalled):
        solve_swingup(p, SwingUpOptions(max_outer=1, max_inner=3))
