"""Acceptance gate: one test and one printed verdict line per criterion.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict lines;
each test also asserts, so the suite fails loudly when a criterion slips.
"""

import math
import time
from pathlib import Path

import numpy as np

from geomech import clag, cli, dmoc, shooting
from geomech.baselines import (
    OdeProblem,
    drift_stats,
    planar_ode,
    rigid_ode,
    rigid_quat_ode,
    rk45_integrate,
    spherical_ode,
    quat_to_rot,
)
from geomech.config import parse_config
from geomech.geom import E3, Rot2, Rot3, UnitVec3, ortho_error
from geomech.models import (
    DumbbellPotential,
    MassSpringState,
    PlanarPendState,
    RigidState,
    SphericalPendState,
    dumbbell_inertia,
    energy,
    mass_spring_step,
    planar_pend_step,
    rigid_body_step,
    spherical_pend_step,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _verdict(num: int, ok: bool, detail: str) -> bool:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} ({detail})")
    return ok


def _spherical_run(n, h=0.05):
    s = SphericalPendState(
        UnitVec3(np.array([0.5 * math.sqrt(3.0), 0.0, 0.5])),
        np.array([-0.05 * math.sqrt(3.0), 0.0, 0.15]),
        1.0,
        9.81,
        9.81,
    )
    qs = np.empty((n + 1, 3))
    ws = np.empty((n + 1, 3))
    e = np.empty(n + 1)
    for k in range(n + 1):
        qs[k], ws[k], e[k] = s.q.q, s.omega, energy(s)
        if k < n:
            s = spherical_pend_step(s, h)
    return qs, ws, e


def test_criterion_1_oscillator_energy_at_roundoff():
    started = time.perf_counter()
    h = 0.035
    n = int(round(200.0 * math.pi / h))
    s = MassSpringState(math.sqrt(2.0), 0.0, 1.0, 1.0)
    e = np.empty(n + 1)
    for k in range(n + 1):
        e[k] = energy(s)
        if k < n:
            s = mass_spring_step(s, h)
    mean_dev, slope = drift_stats(e)
    wall = time.perf_counter() - started
    ok = mean_dev <= 1e-11 and abs(slope) <= 1e-15 and wall < 5.0
    assert _verdict(
        1, ok, f"mean dev {mean_dev:.2e}, slope {slope:.2e}/step, {wall:.2f}s"
    )


def test_criterion_2_pendulum_energy_bounded_without_drift():
    started = time.perf_counter()
    h, t_final = 0.03, 1000.0
    n = int(round(t_final / h))
    s = PlanarPendState(Rot2.from_angle(0.5 * math.pi), 0.0, 1.0, 9.81, 9.81)
    e = np.empty(n + 1)
    for k in range(n + 1):
        e[k] = energy(s)
        if k < n:
            s = planar_pend_step(s, h)
    mean_dev, slope = drift_stats(e)
    wall = time.perf_counter() - started
    exchange = 1.0 * 9.81 * 9.81  # peak potential-energy scale of the swing
    ok = (
        1e-3 <= mean_dev <= 1e-1
        and abs(slope) <= 1e-8 * exchange
        and wall < 10.0
    )
    assert _verdict(
        2, ok, f"mean dev {mean_dev:.2e} J, slope {slope:.2e} J/step, {wall:.2f}s"
    )


def test_criterion_3_sphere_constraint_and_energy_anchor():
    h, n = 0.05, 4000
    qs, ws, e = _spherical_run(n, h)
    unit_err = float(np.max(np.abs(np.sum(qs**2, axis=1) - 1.0)))
    spin_drift = float(np.max(np.abs(ws[:, 2] - ws[0, 2])))
    mgl = 1.0 * 9.81 * 9.81
    anchor = float(np.mean(np.abs(e - e[0]))) / mgl
    ratio = anchor / 1.5460e-4

    grid = np.arange(n + 1) * h
    prob = OdeProblem(
        spherical_ode(9.81, 9.81),
        np.concatenate((qs[0], ws[0])),
        (0.0, n * h),
    )
    res = rk45_integrate(prob, 1e-3, 1e-6, t_eval=grid)
    rk_unit = float(np.max(np.abs(np.sum(res.y[:, :3] ** 2, axis=1) - 1.0)))

    ok = (
        unit_err <= 1e-12
        and spin_drift <= 1e-11
        and 0.1 <= ratio <= 10.0
        and rk_unit >= 1e-3
    )
    assert _verdict(
        3,
        ok,
        f"unit {unit_err:.2e}, spin {spin_drift:.2e}, "
        f"energy anchor x{ratio:.2f}, baseline unit {rk_unit:.2e}",
    )


def test_criterion_4_attitude_stays_orthogonal_baselines_do_not():
    started = time.perf_counter()
    h, n = 0.05, 10000
    rho1 = np.array([0.5, 0.0, 0.0])
    pot = DumbbellPotential(1.0, 0.5, 0.5, rho1, -rho1)
    inertia = dumbbell_inertia(0.5, 0.5, rho1, -rho1, 0.3)
    omega0 = np.array([0.1, 0.45, 0.2])
    x0 = np.array([4.0, 0.0, 0.0])
    v0 = np.array([0.0, 0.5, 0.0])
    s = RigidState(Rot3.identity(), x0, omega0, v0, 1.0, inertia)
    ortho = np.empty(n + 1)
    e = np.empty(n + 1)
    for k in range(n + 1):
        ortho[k] = ortho_error(s.R.m)
        e[k] = energy(s, pot)
        if k < n:
            s = rigid_body_step(s, pot, h)
    ortho_mean = float(np.mean(ortho))
    _, slope = drift_stats(e)
    band = float(np.max(np.abs(e - e[0])))
    flat = abs(slope) * n <= 0.1 * band

    # Baseline structure error oscillates along the trajectory, so compare
    # whole-run statistics rather than the endpoint.
    grid = np.arange(n + 1) * h
    y0 = np.concatenate((np.eye(3).ravel(), x0, omega0, v0))
    res_r = rk45_integrate(
        OdeProblem(rigid_ode(pot, 1.0, inertia), y0, (0.0, n * h)),
        1e-3,
        1e-6,
        t_eval=grid,
    )
    o_rot = np.array([ortho_error(row[:9].reshape(3, 3)) for row in res_r.y])
    y0q = np.concatenate(([1.0, 0.0, 0.0, 0.0], x0, omega0, v0))
    res_q = rk45_integrate(
        OdeProblem(rigid_quat_ode(pot, 1.0, inertia), y0q, (0.0, n * h)),
        1e-3,
        1e-6,
        t_eval=grid,
    )
    o_quat = np.array([ortho_error(quat_to_rot(row[:4])) for row in res_q.y])
    wall = time.perf_counter() - started

    ok = (
        ortho_mean <= 1e-12
        and flat
        and o_rot.max() >= 1e-3
        and o_quat.max() >= 1e-3
        and float(np.mean(o_quat)) >= 0.5 * float(np.mean(o_rot))
        and wall < 60.0
    )
    assert _verdict(
        4,
        ok,
        f"mean ortho {ortho_mean:.2e}, slope*n/band "
        f"{abs(slope) * n / band:.2e}, baseline means "
        f"{np.mean(o_rot):.2e}/{np.mean(o_quat):.2e}, {wall:.1f}s",
    )


def test_criterion_5_halving_the_step_quarters_the_error():
    def oscillator_error(h, t_final=10.0):
        n = int(round(t_final / h))
        s = MassSpringState(math.sqrt(2.0), 0.0, 1.0, 1.0)
        for _ in range(n):
            s = mass_spring_step(s, h)
        return abs(s.q - math.sqrt(2.0) * math.cos(t_final)) + abs(
            s.qdot + math.sqrt(2.0) * math.sin(t_final)
        )

    ratio_ms = oscillator_error(0.05) / oscillator_error(0.025)

    ref = rk45_integrate(
        OdeProblem(planar_ode(9.81, 9.81), [0.5 * math.pi, 0.0], (0.0, 2.0)),
        1e-12,
        1e-14,
    ).y_final

    def pendulum_error(h, t_final=2.0):
        n = int(round(t_final / h))
        s = PlanarPendState(Rot2.from_angle(0.5 * math.pi), 0.0, 1.0, 9.81, 9.81)
        for _ in range(n):
            s = planar_pend_step(s, h)
        return abs(s.R.angle - ref[0]) + abs(s.omega - ref[1])

    ratio_pl = pendulum_error(0.02) / pendulum_error(0.01)
    ok = 3.4 <= ratio_ms <= 4.6 and 3.4 <= ratio_pl <= 4.6
    assert _verdict(5, ok, f"ratios {ratio_ms:.3f} and {ratio_pl:.3f}")


def test_criterion_6_map_is_area_preserving_and_symmetry_exact():
    h = 0.035
    a = mass_spring_step(MassSpringState(1.0, 0.0, 1.0, 1.0), h)
    b = mass_spring_step(MassSpringState(0.0, 1.0, 1.0, 1.0), h)
    det = a.q * b.qdot - b.q * a.qdot
    _, ws, _ = _spherical_run(2000)
    spin_drift = float(np.max(np.abs(ws[:, 2] - ws[0, 2])))
    ok = abs(det - 1.0) <= 1e-14 and spin_drift == 0.0
    assert _verdict(6, ok, f"|det-1| {abs(det - 1.0):.2e}, spin drift {spin_drift:.1e}")


def test_criterion_7_swing_up_meets_tolerances():
    started = time.perf_counter()
    p = dmoc.SwingUpProblem(
        q0=E3, omega0=np.zeros(3), q_des=-E3, omega_des=np.zeros(3),
        n_steps=30, h=0.033,
    )
    opts = dmoc.SwingUpOptions()
    _, _, report = dmoc.solve_swingup(p, opts)
    wall = time.perf_counter() - started

    trivial = dmoc.SwingUpProblem(
        q0=E3, omega0=np.zeros(3), q_des=E3, omega_des=np.zeros(3),
        n_steps=30, h=0.033,
    )
    t1 = time.perf_counter()
    _, _, trivial_report = dmoc.solve_swingup(trivial, opts)
    trivial_wall = time.perf_counter() - t1

    ok = (
        report.converged
        and report.constraint_q <= 1e-6
        and report.constraint_omega <= 1e-6
        and report.stationarity <= 1e-5
        and wall < 600.0
        and trivial_report.cost == 0.0
        and trivial_report.outer_iterations == 0
        and trivial_wall < 1.0
    )
    assert _verdict(
        7,
        ok,
        f"terminal {max(report.constraint_q, report.constraint_omega):.2e}, "
        f"stationarity {report.stationarity:.2e}, {wall:.1f}s, "
        f"idle target solved in {trivial_wall * 1e3:.0f}ms",
    )


def test_criterion_8_costate_shooting_converges_quadratically():
    cfg = parse_config((CONFIG_DIR / "orbit_transfer.cfg").read_text())
    p = cfg.params
    pot = DumbbellPotential(p["mu"], p["m1"], p["m2"], p["rho1"], p["rho2"])
    inertia = dumbbell_inertia(
        p["m1"], p["m2"], p["rho1"], p["rho2"], p["sphere_radius"]
    )
    mass = p["m1"] + p["m2"]
    from geomech.geom import exp_so3

    problem = shooting.OrbitTransferProblem(
        start=RigidState(Rot3.identity(), p["x0"], p["Omega0"], p["v0"], mass, inertia),
        target=RigidState(
            exp_so3(p["target_rotvec"]),
            p["target_x"],
            p["target_Omega"],
            p["target_v"],
            mass,
            inertia,
        ),
        pot=pot,
        n_steps=int(cfg.horizon),
        h=cfg.h,
    )
    res = shooting.shoot(problem, tol=p["tol"], max_iter=p["max_iter"])
    norms = res.residual_norms
    r1 = norms[1] / norms[0]
    r2 = norms[2] / norms[1]

    short = shooting.OrbitTransferProblem(
        problem.start, problem.target, pot, 10, cfg.h
    )
    rng = np.random.default_rng(41)
    _, _, _, _, amats = shooting.rollout(
        short, 0.01 * rng.standard_normal(12), with_sensitivities=True
    )
    defect = max(
        shooting.pairing_defect(
            amats,
            np.random.default_rng(seed).standard_normal(12),
            np.random.default_rng(seed + 100).standard_normal(12),
        )
        for seed in range(3)
    )
    ok = (
        norms[-1] < 1e-12
        and res.iterations <= 40
        and r2 < 0.1 * r1
        and defect < 1e-8
    )
    assert _verdict(
        8,
        ok,
        f"residual {norms[-1]:.2e} in {res.iterations} iters, "
        f"contraction {r1:.1e}->{r2:.1e}, pairing defect {defect:.1e}",
    )


def test_criterion_9_shaped_feedback_conserves_and_stabilizes():
    h = 0.05
    params = clag.CartPendParams(0.14, 0.44, 0.215)
    kappa = 2.0 * clag.critical_kappa(params, h)
    gains = clag.ShapingGains.matched(params, kappa)
    q0 = np.array([0.15, 0.0])
    q1 = clag.init_from_velocity(q0, np.array([0.0, 0.05]), params, gains, h)
    qs = np.empty((2001, 2))
    qs[0], qs[1] = q0, q1
    pair = clag.CartPendPair(q0, q1, h)
    for k in range(2, 2001):
        q_next = clag.controlled_step(pair, params, gains)
        qs[k] = q_next
        pair = pair.advanced(q_next)
    momenta = np.array(
        [clag.momentum(params, gains, qs[k], qs[k + 1], h) for k in range(2000)]
    )
    p_drift = float(np.max(np.abs(momenta - momenta[0])))
    theta = np.abs(qs[:, 0])
    bounded = theta.max() <= 1.05 * theta[:100].max()

    # same loop written as forced open-loop dynamics on the matched level
    gk = 1.0 + params.gamma * kappa
    p_level = 0.05
    mu_level = p_level / gk
    th0, th1 = 0.15, 0.149
    bmid = params.beta(0.5 * (th0 + th1))

    def seeded(level):
        ds = (h * level - gk * bmid * (th1 - th0)) / params.gamma
        return clag.CartPendPair(np.array([th0, 0.0]), np.array([th1, ds]), h)

    pair_f, pair_c = seeded(p_level), seeded(mu_level)
    worst = 0.0
    for k in range(500):
        qf = clag.forced_step(pair_f, params, gains)
        qc = clag.controlled_step(pair_c, params, gains)
        offset = (k + 2) * h * (p_level - mu_level) / params.gamma
        worst = max(worst, abs(qf[0] - qc[0]), abs(qf[1] - qc[1] - offset))
        pair_f, pair_c = pair_f.advanced(qf), pair_c.advanced(qc)

    ok = p_drift <= 1e-11 and bounded and worst < 1e-9
    assert _verdict(
        9,
        ok,
        f"momentum drift {p_drift:.2e}, tilt ratio "
        f"{theta.max() / theta[:100].max():.3f}, equivalence {worst:.1e}",
    )


def test_criterion_10_reruns_are_byte_identical(tmp_path):
    cfg_path = CONFIG_DIR / "planar.cfg"
    assert cli.main([str(cfg_path), "--out", str(tmp_path / "a")]) == 0
    assert cli.main([str(cfg_path), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    ok = a == b and len(a) > 0
    assert _verdict(10, ok, f"{len(a)} bytes, identical {a == b}")
