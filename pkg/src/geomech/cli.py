"""Command-line front end.

``geomech <config-path> [--out DIR] [--seed N] [--plot]`` parses a
line-oriented configuration, runs the requested experiment, writes CSV
files into the output directory, and prints a final ``key = value``
summary block on standard output.  Floats in the CSV files use a fixed
17-significant-digit scientific format, so two runs of the same
configuration produce byte-identical output.  Every error path exits
nonzero after printing a single machine-parseable line
``error: <Kind>: <reason>`` on standard error.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from . import clag as clag_mod
from . import dmoc as dmoc_mod
from . import shooting
from .baselines import (
    OdeProblem,
    drift_stats,
    mass_spring_ode,
    planar_ode,
    quat_to_rot,
    rigid_ode,
    rigid_quat_ode,
    rk45_integrate,
    spherical_ode,
)
from .config import ExperimentConfig, parse_config
from .errors import ConfigError, GeomechError
from .geom import Rot2, Rot3, UnitVec3, exp_so3, ortho_error
from .models import (
    DumbbellPotential,
    MassSpringState,
    PlanarPendState,
    RigidState,
    SphericalPendState,
    dumbbell_inertia,
    dumbbell_potential,
    energy,
    mass_spring_step,
    planar_pend_step,
    rigid_body_step,
    spherical_pend_step,
)

__all__ = ["RunSummary", "run", "main", "format_float", "write_csv"]


def format_float(value: float) -> str:
    """Fixed 17-significant-digit scientific notation."""
    return f"{float(value):.16e}"


def _cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        raise TypeError("boolean cells are not part of the output contract")
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format_float(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write one CSV file with a header row and formatted records."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


@dataclass
class RunSummary:
    """What a run reports once its CSV files are on disk.

    Optional fields stay ``None`` when an experiment has nothing to report
    for them; everything that is set must be finite.  ``extras`` holds
    experiment-specific values in insertion order.
    """

    experiment: str
    model: str
    integrator: str
    samples: int
    mean_energy_dev: Optional[float] = None
    energy_slope: Optional[float] = None
    mean_structure_error: Optional[float] = None
    iterations: Optional[int] = None
    wall_time_s: float = 0.0
    extras: dict = field(default_factory=dict)

    def lines(self) -> list[str]:
        out = [
            f"experiment = {self.experiment}",
            f"model = {self.model}",
            f"integrator = {self.integrator}",
            f"samples = {self.samples}",
        ]
        named = (
            ("mean_energy_dev", self.mean_energy_dev),
            ("energy_slope", self.energy_slope),
            ("mean_structure_error", self.mean_structure_error),
        )
        for key, value in named:
            if value is not None:
                out.append(f"{key} = {self._finite(key, value)}")
        for key, value in self.extras.items():
            if isinstance(value, (int, np.integer)):
                out.append(f"{key} = {int(value)}")
            elif isinstance(value, str):
                out.append(f"{key} = {value}")
            else:
                out.append(f"{key} = {self._finite(key, value)}")
        if self.iterations is not None:
            out.append(f"iterations = {int(self.iterations)}")
        out.append(f"wall_time_s = {format_float(self.wall_time_s)}")
        return out

    @staticmethod
    def _finite(key: str, value) -> str:
        value = float(value)
        if not np.isfinite(value):
            raise ValueError(f"summary value {key} is not finite")
        return format_float(value)


# ---------------------------------------------------------------------------
# simulate


def _simulate_columns(cfg: ExperimentConfig, n: int):
    """Produce (header, rows, energies, structure, extras) for one model."""
    h = cfg.h
    p = cfg.params
    t = np.arange(n + 1) * h
    model, integ = cfg.model, cfg.integrator

    if model == "mass_spring":
        m, kappa = p["mass"], p["stiffness"]
        if integ == "vi":
            s = MassSpringState(p["q0"], p["qdot0"], m, kappa)
            q = np.empty(n + 1)
            qd = np.empty(n + 1)
            for k in range(n + 1):
                q[k], qd[k] = s.q, s.qdot
                if k < n:
                    s = mass_spring_step(s, h)
        else:
            prob = OdeProblem(mass_spring_ode(m, kappa), [p["q0"], p["qdot0"]], (0.0, n * h))
            res = rk45_integrate(prob, p["rtol"], p["atol"], t_eval=t)
            q, qd = res.y[:, 0], res.y[:, 1]
        e = 0.5 * m * qd**2 + 0.5 * kappa * q**2
        rows = ((k, t[k], q[k], qd[k], e[k]) for k in range(n + 1))
        return ["k", "t", "q", "qdot", "energy"], rows, e, None, {}

    if model == "planar":
        m, l, g = p["mass"], p["length"], p["gravity"]
        if integ == "vi":
            s = PlanarPendState(Rot2.from_angle(p["theta0"]), p["omega0"], m, l, g)
            th = np.empty(n + 1)
            om = np.empty(n + 1)
            e = np.empty(n + 1)
            for k in range(n + 1):
                th[k], om[k], e[k] = s.R.angle, s.omega, energy(s)
                if k < n:
                    s = planar_pend_step(s, h)
        else:
            prob = OdeProblem(planar_ode(l, g), [p["theta0"], p["omega0"]], (0.0, n * h))
            res = rk45_integrate(prob, p["rtol"], p["atol"], t_eval=t)
            th, om = res.y[:, 0], res.y[:, 1]
            e = 0.5 * m * l**2 * om**2 - m * g * l * np.cos(th)
        rows = ((k, t[k], th[k], om[k], e[k]) for k in range(n + 1))
        return ["k", "t", "theta", "omega", "energy"], rows, e, None, {}

    if model == "spherical":
        m, l, g = p["mass"], p["length"], p["gravity"]
        if integ == "vi":
            s = SphericalPendState(UnitVec3(p["q0"]), p["omega0"], m, l, g)
            qs = np.empty((n + 1, 3))
            ws = np.empty((n + 1, 3))
            e = np.empty(n + 1)
            for k in range(n + 1):
                qs[k], ws[k], e[k] = s.q.q, s.omega, energy(s)
                if k < n:
                    s = spherical_pend_step(s, h)
        else:
            y0 = np.concatenate((p["q0"], p["omega0"]))
            prob = OdeProblem(spherical_ode(l, g), y0, (0.0, n * h))
            res = rk45_integrate(prob, p["rtol"], p["atol"], t_eval=t)
            qs, ws = res.y[:, :3], res.y[:, 3:]
            qdot = np.cross(ws, qs)
            e = 0.5 * m * l**2 * np.sum(qdot**2, axis=1) - m * g * l * qs[:, 2]
        unit = np.abs(np.sum(qs**2, axis=1) - 1.0)
        spin = ws[:, 2]
        header = ["k", "t", "q1", "q2", "q3", "w1", "w2", "w3", "energy", "unit_error", "spin"]
        rows = (
            (k, t[k], *qs[k], *ws[k], e[k], unit[k], spin[k]) for k in range(n + 1)
        )
        extras = {"spin_drift": float(np.max(np.abs(spin - spin[0])))}
        return header, rows, e, unit, extras

    # rigid_body
    pot = DumbbellPotential(p["mu"], p["m1"], p["m2"], p["rho1"], p["rho2"])
    inertia = dumbbell_inertia(p["m1"], p["m2"], p["rho1"], p["rho2"], p["sphere_radius"])
    mass = p["m1"] + p["m2"]
    if integ == "vi":
        s = RigidState(Rot3.identity(), p["x0"], p["Omega0"], p["v0"], mass, inertia)
        rs = np.empty((n + 1, 9))
        xs = np.empty((n + 1, 3))
        vs = np.empty((n + 1, 3))
        ws = np.empty((n + 1, 3))
        e = np.empty(n + 1)
        ortho = np.empty(n + 1)
        for k in range(n + 1):
            rs[k] = s.R.m.ravel()
            xs[k], vs[k], ws[k] = s.x, s.v, s.Omega
            e[k] = energy(s, pot)
            ortho[k] = ortho_error(s.R.m)
            if k < n:
                s = rigid_body_step(s, pot, h)
    else:
        if integ == "rk45":
            y0 = np.concatenate((np.eye(3).ravel(), p["x0"], p["Omega0"], p["v0"]))
            prob = OdeProblem(rigid_ode(pot, mass, inertia), y0, (0.0, n * h))
        else:
            y0 = np.concatenate(([1.0, 0.0, 0.0, 0.0], p["x0"], p["Omega0"], p["v0"]))
            prob = OdeProblem(rigid_quat_ode(pot, mass, inertia), y0, (0.0, n * h))
        res = rk45_integrate(prob, p["rtol"], p["atol"], t_eval=t)
        rs = np.empty((n + 1, 9))
        xs = np.empty((n + 1, 3))
        vs = np.empty((n + 1, 3))
        ws = np.empty((n + 1, 3))
        e = np.empty(n + 1)
        ortho = np.empty(n + 1)
        for k in range(n + 1):
            if integ == "rk45":
                r = res.y[k, :9].reshape(3, 3)
                xs[k], ws[k], vs[k] = res.y[k, 9:12], res.y[k, 12:15], res.y[k, 15:18]
            else:
                r = quat_to_rot(res.y[k, :4])
                xs[k], ws[k], vs[k] = res.y[k, 4:7], res.y[k, 7:10], res.y[k, 10:13]
            rs[k] = r.ravel()
            u, _, _ = dumbbell_potential(pot, r, xs[k])
            e[k] = 0.5 * mass * vs[k] @ vs[k] + 0.5 * ws[k] @ (inertia @ ws[k]) + u
            ortho[k] = ortho_error(r)
    header = (
        ["k", "t"]
        + [f"r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
        + ["x1", "x2", "x3", "v1", "v2", "v3", "w1", "w2", "w3", "energy", "ortho_error"]
    )
    rows = (
        (k, t[k], *rs[k], *xs[k], *vs[k], *ws[k], e[k], ortho[k]) for k in range(n + 1)
    )
    return header, rows, e, ortho, {}


def _run_simulate(cfg: ExperimentConfig, out: Path, plot: bool) -> RunSummary:
    n = max(1, int(round(cfg.horizon / cfg.h)))
    header, rows, energies, structure, extras = _simulate_columns(cfg, n)
    write_csv(out / "trajectory.csv", header, rows)
    mean_dev, slope = drift_stats(energies)
    summary = RunSummary(
        experiment="simulate",
        model=cfg.model,
        integrator=cfg.integrator,
        samples=n + 1,
        mean_energy_dev=mean_dev,
        energy_slope=slope,
        extras=extras,
    )
    if structure is not None:
        summary.mean_structure_error = float(np.mean(structure))
    if plot:
        from . import plots

        t = np.arange(n + 1) * cfg.h
        plots.simulate_figure(out / "energy.png", t, energies, structure)
    return summary


# ---------------------------------------------------------------------------
# dmoc


def _run_dmoc(cfg: ExperimentConfig, out: Path, plot: bool) -> RunSummary:
    p = cfg.params
    problem = dmoc_mod.SwingUpProblem(
        q0=p["q0"],
        omega0=p["omega0"],
        q_des=p["q_des"],
        omega_des=p["omega_des"],
        n_steps=int(cfg.horizon),
        h=cfg.h,
        m=p["mass"],
        l=p["length"],
        g=p["gravity"],
    )
    options = dmoc_mod.SwingUpOptions(
        tol_constraint=p["tol_constraint"],
        tol_grad=p["tol_grad"],
        max_outer=p["max_outer"],
        max_inner=p["max_inner"],
        rho0=p["rho0"],
        seed=cfg.seed,
    )
    schedule, (qs, oms), report = dmoc_mod.solve_swingup(problem, options)
    moments = schedule.moments(qs)
    n = problem.n_steps
    t = np.arange(n + 1) * cfg.h
    header = (
        ["k", "q1", "q2", "q3", "om1", "om2", "om3"]
        + ["w1", "w2", "w3", "u1", "u2", "u3"]
    )
    write_csv(
        out / "trajectory.csv",
        header,
        ((k, *qs[k], *oms[k], *schedule.w[k], *moments[k]) for k in range(n + 1)),
    )
    summary = RunSummary(
        experiment="dmoc",
        model=cfg.model,
        integrator=cfg.integrator,
        samples=n + 1,
        iterations=report.outer_iterations,
        extras={
            "cost": report.cost,
            "constraint_q": report.constraint_q,
            "constraint_omega": report.constraint_omega,
            "stationarity": report.stationarity,
            "inner_evaluations": report.inner_evaluations,
        },
    )
    if plot:
        from . import plots

        plots.dmoc_figures(out, t, qs, moments)
    return summary


# ---------------------------------------------------------------------------
# shoot


def _run_shoot(cfg: ExperimentConfig, out: Path, plot: bool) -> RunSummary:
    p = cfg.params
    pot = DumbbellPotential(p["mu"], p["m1"], p["m2"], p["rho1"], p["rho2"])
    inertia = dumbbell_inertia(p["m1"], p["m2"], p["rho1"], p["rho2"], p["sphere_radius"])
    mass = p["m1"] + p["m2"]
    start = RigidState(Rot3.identity(), p["x0"], p["Omega0"], p["v0"], mass, inertia)
    target = RigidState(
        exp_so3(p["target_rotvec"]),
        p["target_x"],
        p["target_Omega"],
        p["target_v"],
        mass,
        inertia,
    )
    problem = shooting.OrbitTransferProblem(
        start=start,
        target=target,
        pot=pot,
        n_steps=int(cfg.horizon),
        h=cfg.h,
        w_force=p["w_force"] * np.eye(3),
        w_moment=p["w_moment"] * np.eye(3),
    )
    result = shooting.shoot(
        problem, tol=p["tol"], max_iter=p["max_iter"], fd_step=p["fd_step"]
    )
    n = problem.n_steps
    t = np.arange(n + 1) * cfg.h
    write_csv(
        out / "convergence.csv",
        ["iteration", "residual"],
        ((i, r) for i, r in enumerate(result.residual_norms)),
    )
    header = (
        ["k", "t"]
        + [f"r{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
        + ["x1", "x2", "x3", "v1", "v2", "v3", "w1", "w2", "w3"]
    )
    write_csv(
        out / "trajectory.csv",
        header,
        (
            (k, t[k], *s.R.m.ravel(), *s.x, *s.v, *s.Omega)
            for k, s in enumerate(result.states)
        ),
    )
    write_csv(
        out / "controls.csv",
        ["k", "t", "f1", "f2", "f3", "m1", "m2", "m3"],
        (
            (k, t[k], *result.u_force[k], *result.u_moment[k])
            for k in range(n)
        ),
    )
    summary = RunSummary(
        experiment="shoot",
        model=cfg.model,
        integrator=cfg.integrator,
        samples=n + 1,
        iterations=result.iterations,
        extras={
            "initial_residual": result.residual_norms[0],
            "residual": result.residual_norms[-1],
        },
    )
    if plot:
        from . import plots

        plots.shoot_figures(out, result.residual_norms, t[:-1], result.u_force, result.u_moment)
    return summary


# ---------------------------------------------------------------------------
# clag


def _run_clag(cfg: ExperimentConfig, out: Path, plot: bool) -> RunSummary:
    p = cfg.params
    params = clag_mod.CartPendParams(
        pend_mass=p["pend_mass"],
        cart_mass=p["cart_mass"],
        length=p["length"],
        gravity=p["gravity"],
    )
    kappa_crit = clag_mod.critical_kappa(params, cfg.h)
    kappa = p["kappa"] if p["kappa"] is not None else p["kappa_factor"] * kappa_crit
    gains = clag_mod.ShapingGains.matched(params, kappa)
    n = int(cfg.horizon)
    q0 = np.array([p["theta0"], p["s0"]])
    qdot0 = np.array([p["thetadot0"], p["sdot0"]])
    q1 = clag_mod.init_from_velocity(q0, qdot0, params, gains, cfg.h)
    qs = np.empty((n + 1, 2))
    qs[0], qs[1] = q0, q1
    pair = clag_mod.CartPendPair(q0, q1, cfg.h)
    for k in range(2, n + 1):
        q_next = clag_mod.controlled_step(pair, params, gains)
        qs[k] = q_next
        pair = pair.advanced(q_next)
    momenta = np.array(
        [clag_mod.momentum(params, gains, qs[k], qs[k + 1], cfg.h) for k in range(n)]
    )
    controls = np.zeros(n)
    for k in range(1, n):
        controls[k] = clag_mod.control_input(
            params, gains, qs[k - 1], qs[k], qs[k + 1], cfg.h
        )
    write_csv(
        out / "trajectory.csv",
        ["k", "theta", "s", "p", "u"],
        ((k, qs[k, 0], qs[k, 1], momenta[k], controls[k]) for k in range(n)),
    )
    summary = RunSummary(
        experiment="clag",
        model=cfg.model,
        integrator=cfg.integrator,
        samples=n,
        extras={
            "kappa": kappa,
            "kappa_crit": kappa_crit,
            "momentum_drift": float(np.max(np.abs(momenta - momenta[0]))),
            "theta_max": float(np.max(np.abs(qs[:, 0]))),
            "s_final": float(qs[-1, 1]),
        },
    )
    if plot:
        from . import plots

        plots.clag_figure(out / "trajectory.png", qs[:n], momenta, controls)
    return summary


# ---------------------------------------------------------------------------
# Dispatch and entry point


_RUNNERS = {
    "simulate": _run_simulate,
    "dmoc": _run_dmoc,
    "shoot": _run_shoot,
    "clag": _run_clag,
}


def run(cfg: ExperimentConfig, out_dir: Optional[str] = None, plot: bool = False) -> RunSummary:
    """Execute one experiment, writing CSV files into the output directory.

    Deterministic for a fixed configuration and seed: the CSV bytes do not
    depend on wall time or platform dictionary order.
    """
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    started = time.perf_counter()
    summary = _RUNNERS[cfg.experiment](cfg, out, plot)
    summary.wall_time_s = time.perf_counter() - started
    return summary


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="geomech",
        description="Run a structure-preserving mechanics experiment from a config file.",
    )
    parser.add_argument("config", help="path to a key = value configuration file")
    parser.add_argument("--out", default=None, help="output directory (default: from config)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--plot", action="store_true", help="also render PNG figures")
    args = parser.parse_args(argv)

    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        print(f"error: ConfigFile: {exc}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    try:
        summary = run(cfg, out_dir=args.out, plot=args.plot)
    except GeomechError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - contract: one-line reason, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print("\n".join(summary.lines()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
