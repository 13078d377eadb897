"""Optional PNG rendering for CLI runs.

The CSV files are the contract; these figures are a convenience layer
behind the ``--plot`` flag.  The module forces the Agg backend so runs
never require a display.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["simulate_figure", "dmoc_figures", "shoot_figures", "clag_figure"]

_DPI = 130


def simulate_figure(path: Path, t, energies, structure=None) -> None:
    """Energy deviation over time, plus the structure error when tracked."""
    energies = np.asarray(energies)
    panels = 2 if structure is not None else 1
    fig, axes = plt.subplots(panels, 1, figsize=(7.0, 2.8 * panels), sharex=True)
    axes = np.atleast_1d(axes)
    axes[0].plot(t, energies - energies[0], lw=0.8)
    axes[0].set_ylabel("energy deviation")
    if structure is not None:
        floor = 1e-17
        axes[1].semilogy(t, np.maximum(np.asarray(structure), floor), lw=0.8)
        axes[1].set_ylabel("structure error")
    axes[-1].set_xlabel("t")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)


def dmoc_figures(out: Path, t, qs, moments) -> None:
    """Swing-up trajectory components and the applied control moments."""
    qs = np.asarray(qs)
    moments = np.asarray(moments)
    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    for i, label in enumerate(("q1", "q2", "q3")):
        ax.plot(t, qs[:, i], label=label, lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("direction components")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "trajectory.png", dpi=_DPI)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(7.0, 3.2))
    for i, label in enumerate(("u1", "u2", "u3")):
        ax.plot(t, moments[:, i], label=label, lw=1.0)
    ax.set_xlabel("t")
    ax.set_ylabel("control moment")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "controls.png", dpi=_DPI)
    plt.close(fig)


def shoot_figures(out: Path, residual_norms, t, u_force, u_moment) -> None:
    """Newton convergence history and the associated control schedules."""
    norms = np.maximum(np.asarray(residual_norms, dtype=float), 1e-17)
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    ax.semilogy(np.arange(norms.size), norms, marker="o", ms=3, lw=1.0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("boundary residual")
    fig.tight_layout()
    fig.savefig(out / "convergence.png", dpi=_DPI)
    plt.close(fig)

    u_force = np.asarray(u_force)
    u_moment = np.asarray(u_moment)
    fig, axes = plt.subplots(2, 1, figsize=(7.0, 5.2), sharex=True)
    for i in range(3):
        axes[0].plot(t, u_force[:, i], label=f"f{i + 1}", lw=1.0)
        axes[1].plot(t, u_moment[:, i], label=f"m{i + 1}", lw=1.0)
    axes[0].set_ylabel("control force")
    axes[1].set_ylabel("control moment")
    axes[1].set_xlabel("t")
    for ax in axes:
        ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "controls.png", dpi=_DPI)
    plt.close(fig)


def clag_figure(path: Path, qs, momenta, controls) -> None:
    """Cart-pendulum angle, cart position, conserved momentum, and feedback."""
    qs = np.asarray(qs)
    k = np.arange(qs.shape[0])
    fig, axes = plt.subplots(4, 1, figsize=(7.0, 8.0), sharex=True)
    axes[0].plot(k, qs[:, 0], lw=0.9)
    axes[0].set_ylabel("theta")
    axes[1].plot(k, qs[:, 1], lw=0.9)
    axes[1].set_ylabel("s")
    axes[2].plot(k, momenta, lw=0.9)
    axes[2].set_ylabel("p")
    axes[3].plot(k, controls, lw=0.9)
    axes[3].set_ylabel("u")
    axes[3].set_xlabel("k")
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
    plt.close(fig)
