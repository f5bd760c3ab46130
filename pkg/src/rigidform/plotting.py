"""Figure data files (gnuplot columns) and their matplotlib renderings."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from numpy.typing import NDArray  # noqa: E402

from .simulator import Trajectory  # noqa: E402

AGENT_COLORS = ("tab:red", "tab:green", "tab:blue", "black", "tab:purple", "tab:cyan")


@dataclass(frozen=True)
class FigureData:
    """One figure's columns: ``x`` shared, ``ys`` one column per series."""

    name: str
    xlabel: str
    ylabel: str
    x: NDArray[np.float64]
    ys: NDArray[np.float64]
    labels: tuple[str, ...]
    references: NDArray[np.float64] | None = None  # constant levels, dashed


def _color(i: int) -> str:
    return AGENT_COLORS[i % len(AGENT_COLORS)]


def figure_data(traj: Trajectory) -> list[FigureData]:
    """Time series shown for a run: speeds, distance errors and, when an
    estimator runs, its state against the true mismatches."""
    t = traj.times
    out = [
        FigureData(
            "speeds", "t [s]", "speed", t, traj.speeds,
            tuple(f"s[{i + 1}]" for i in range(traj.n)),
        ),
        FigureData(
            "errors", "t [s]", "squared-distance error", t, traj.e,
            tuple(f"e[{k + 1}]" for k in range(traj.e.shape[1])),
        ),
    ]
    if traj.mu_hat is not None:
        out.append(
            FigureData(
                "mu_hat", "t [s]", "mismatch estimate", t, traj.mu_hat,
                tuple(f"mu_hat[{k + 1}]" for k in range(traj.mu_hat.shape[1])),
                np.asarray(traj.controller.mu, dtype=float),
            )
        )
    return out


def write_dat(fig: FigureData, path: Path) -> None:
    header = " ".join(["t", *fig.labels])
    np.savetxt(path, np.column_stack([fig.x, fig.ys]), fmt="%.17g", header=header)


def write_paths_dat(traj: Trajectory, path: Path) -> None:
    """Positions as blocks per agent, separated by two blank lines (gnuplot ``index``)."""
    axes = "xyz"[: traj.m]
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(traj.n):
            fh.write(f"# agent {i + 1}: t {' '.join(axes)}\n")
            np.savetxt(fh, np.column_stack([traj.times, traj.p[:, i, :]]), fmt="%.17g")
            fh.write("\n\n")


def render(fig: FigureData, path: Path) -> None:
    f, ax = plt.subplots(figsize=(6.0, 3.6), layout="constrained")
    for j, lab in enumerate(fig.labels):
        ax.plot(fig.x, fig.ys[:, j], lw=1.2, label=lab)
    if fig.references is not None:
        for level in fig.references:
            ax.axhline(level, color="k", ls="--", lw=0.7)
    ax.set_xlabel(fig.xlabel)
    ax.set_ylabel(fig.ylabel)
    ax.grid(alpha=0.3)
    if len(fig.labels) <= 9:
        ax.legend(fontsize=7, ncol=3, frameon=False)
    f.savefig(path, dpi=120)
    plt.close(f)


def render_paths(traj: Trajectory, path: Path) -> None:
    """Agent paths with final positions marked and the final framework drawn."""
    final = traj.p[-1]
    if traj.m == 3:
        f = plt.figure(figsize=(5.5, 5.0), layout="constrained")
        ax = f.add_subplot(projection="3d")
    else:
        f, ax = plt.subplots(figsize=(5.5, 5.0), layout="constrained")
        ax.set_aspect("equal", adjustable="datalim")
    for i in range(traj.n):
        ax.plot(*traj.p[:, i, :].T, color=_color(i), lw=0.9, label=f"agent {i + 1}")
        ax.scatter(*final[i], color=_color(i), s=18)
    for t, h in traj.graph.edges:
        ax.plot(*np.vstack([final[t], final[h]]).T, color="0.4", lw=0.7)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if traj.m == 3:
        ax.set_zlabel("z")
    ax.legend(fontsize=7, frameon=False)
    f.savefig(path, dpi=120)
    plt.close(f)


def emit_figures(traj: Trajectory, out_dir: Path, render_png: bool = True) -> list[Path]:
    """Write every figure's data file (and PNG when asked); returns the paths."""
    out_dir = Path(out_dir)
    written = []
    for fig in figure_data(traj):
        dat = out_dir / f"fig_{fig.name}.dat"
        write_dat(fig, dat)
        written.append(dat)
        if render_png:
            png = dat.with_suffix(".png")
            render(fig, png)
            written.append(png)
    dat = out_dir / "fig_paths.dat"
    write_paths_dat(traj, dat)
    written.append(dat)
    if render_png:
        png = dat.with_suffix(".png")
        render_paths(traj, png)
        written.append(png)
    return written
