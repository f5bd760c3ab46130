"""Command-line front end: ``rigidform run | check | batch``.

Exit codes: 0 success, 1 configuration error, 2 divergence of the simulation.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import analysis
from .control import ESTIMATOR1, ESTIMATOR2, GRADIENT, HAMILTONIAN_FAMILY, MOTION
from .errors import ConfigError, IntegrationError, PreconditionError, RigidFormError
from .graph import is_inf_min_rigid
from .motion import check_assumption1, motion_membership
from .scenario import Scenario, load_scenario, resolve
from .simulator import Trajectory, detect_steady_state, simulate

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
SEED_ENV = "RSL_SEED"


# --- CSV ----------------------------------------------------------------------


def csv_header(traj: Trajectory) -> list[str]:
    axes = "xyz"[: traj.m]
    cols = ["t"]
    cols += [f"p[{i + 1}].{a}" for i in range(traj.n) for a in axes]
    cols += [f"v[{i + 1}].{a}" for i in range(traj.n) for a in axes]
    cols += [f"e[{k + 1}]" for k in range(traj.e.shape[1])]
    if traj.mu_hat is not None:
        cols += [f"mu_hat[{k + 1}]" for k in range(traj.mu_hat.shape[1])]
    cols += [f"s[{i + 1}]" for i in range(traj.n)]
    return cols


def csv_rows(traj: Trajectory) -> NDArray[np.float64]:
    N = len(traj)
    parts = [traj.times[:, None], traj.p.reshape(N, -1), traj.v.reshape(N, -1), traj.e]
    if traj.mu_hat is not None:
        parts.append(traj.mu_hat)
    parts.append(traj.speeds)
    return np.hstack(parts)


def write_csv(traj: Trajectory, path: Path) -> None:
    """Header row, then one row per sample with 17 significant digits."""
    np.savetxt(
        path, csv_rows(traj), fmt="%.17g", delimiter=",",
        header=",".join(csv_header(traj)), comments="",
    )


def read_csv(path: Path) -> tuple[list[str], NDArray[np.float64]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


# --- reports ------------------------------------------------------------------


def _fmt(x) -> str:
    a = np.atleast_1d(np.asarray(x, dtype=float))
    return " ".join(f"{v:.6g}" for v in a)


def lyapunov_choice(scn: Scenario) -> tuple[str | None, dict]:
    ctrl = scn.controller
    if ctrl.variant in (GRADIENT, HAMILTONIAN_FAMILY):
        return "energy", {}
    if ctrl.variant == ESTIMATOR1:
        return "estimator1", {"mu": ctrl.mu}
    if ctrl.variant == MOTION:
        return "motion", {"A_v": ctrl.A_v, "c1": ctrl.c1, "c2": ctrl.c2, "eps": 0.0}
    return None, {}


@dataclass
class RunResult:
    code: int
    out_dir: Path | None
    summary: list[str] = field(default_factory=list)
    trajectory: Trajectory | None = None
    message: str = ""


def summarize(scn: Scenario, traj: Trajectory, elapsed: float) -> list[str]:
    ctrl = scn.controller
    lines = [
        f"scenario: {scn.name}",
        f"variant: {ctrl.variant}",
        f"seed: {scn.sim.seed}",
        f"h: {scn.sim.h:g}",
        f"t_end: {traj.times[-1]:g}",
        f"samples: {len(traj)}",
        f"wall_time_s: {elapsed:.3f}",
    ]
    rep = is_inf_min_rigid(scn.graph, scn.shape.zstar, scn.shape.m)
    lines.append(f"rigidity: {rep.reason}")

    reached, t_ss = detect_steady_state(traj, scn.steady_window, scn.steady_tol)
    if reached:
        lines.append(f"steady_state: reached at t = {t_ss:.6g} (window {scn.steady_window:g} s, tol {scn.steady_tol:g})")
    else:
        lines.append(f"steady_state: not reached (window {scn.steady_window:g} s, tol {scn.steady_tol:g})")
    lines.append(f"final_speeds: {_fmt(traj.speeds[-1])}")
    lines.append(f"final_errors: {_fmt(traj.e[-1])}")
    lines.append(f"final_max_abs_error: {np.abs(traj.e[-1]).max():.6g}")
    d = np.linalg.norm(scn.graph.B.T @ traj.p[-1], axis=1)
    lines.append(f"final_distances: {_fmt(d)}")
    if traj.mu_hat is not None:
        lines.append(f"final_mu_hat: {_fmt(traj.mu_hat[-1])}")
        lines.append(f"mu: {_fmt(ctrl.mu)}")
        lines.append(f"final_max_abs_mu_hat_error: {np.abs(traj.mu_hat[-1] - ctrl.mu).max():.6g}")

    variant, params = lyapunov_choice(scn)
    if variant is None:
        lines.append("lyapunov: none for this controller")
    else:
        V = analysis.lyapunov_series(traj, variant, **params)
        verdict = "non-increasing" if analysis.is_non_increasing(V) else "increases somewhere"
        lines.append(f"lyapunov: {variant} V(0) = {V[0]:.6g}, V(end) = {V[-1]:.6g}, {verdict}")

    try:
        bm = analysis.fit_body_motion(traj.p[-1], traj.v[-1], traj.m)
    except PreconditionError as exc:
        lines.append(f"body_motion: {exc}")
    else:
        lines.append(f"body_motion_v_c: {_fmt(bm.v_c)}")
        lines.append(f"body_motion_omega: {_fmt(bm.omega)}")
        lines.append(f"body_motion_residual: {bm.residual:.3g}")
        if traj.m == 3 and np.linalg.norm(bm.v_c) > 1e-9 and np.linalg.norm(bm.omega) > 1e-9:
            lines.append(f"angle_v_c_omega_deg: {analysis.angle_between(bm.v_c, bm.omega):.6g}")
    return lines


def check_lines(scn: Scenario) -> list[str]:
    G, shape = scn.graph, scn.shape
    rep = is_inf_min_rigid(G, shape.zstar, shape.m)
    lines = [
        f"scenario: {scn.name}",
        f"agents: {G.n}, edges: {G.num_edges}, dimension: {shape.m}",
        f"rank R(z*): {rep.rank}, required: {rep.required}",
        f"rigidity: {rep.reason}",
    ]
    ctrl = scn.controller
    if ctrl.variant == ESTIMATOR2:
        hw = check_assumption1(G, shape)
        state = "satisfied" if hw.hurwitz else "violated"
        lines.append(f"estimator stability (F Hurwitz): {state}, max real eigenvalue {hw.max_real:.6g}")
    if ctrl.variant == MOTION and scn.motion is not None:
        if rep.ok:
            mem = motion_membership(G, shape, scn.motion.mu, scn.motion.mu_tilde)
            lines.append(f"motion residual (translations + rotations): {mem.rotational_residual:.3g}")
            lines.append(f"motion residual (distance rates): {mem.rigid_rate_residual:.3g}")
        else:
            lines.append("motion residuals: skipped, framework not rigid")
    return lines


# --- commands -----------------------------------------------------------------


def _env_seed() -> int | None:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def run_scenario(
    scn: Scenario, out_dir: Path, figures: bool | None = None
) -> RunResult:
    """Simulate ``scn`` and write trajectory.csv, summary.txt and figure files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    try:
        traj = simulate(scn.sim)
    except IntegrationError as exc:
        lines = [f"scenario: {scn.name}", f"seed: {scn.sim.seed}", f"status: diverged: {exc}"]
        (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
        return RunResult(EXIT_DIVERGED, out_dir, lines, None, str(exc))
    elapsed = time.perf_counter() - t0
    write_csv(traj, out_dir / "trajectory.csv")
    lines = summarize(scn, traj, elapsed)
    lines.insert(1, "status: ok")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    from .plotting import emit_figures

    emit_figures(traj, out_dir, render_png=scn.figures if figures is None else figures)
    return RunResult(EXIT_OK, out_dir, lines, traj)


def _default_out(scn: Scenario) -> Path:
    return scn.out_dir if scn.out_dir is not None else Path("out") / scn.name


def cmd_run(args: argparse.Namespace) -> int:
    try:
        scn = load_scenario(resolve(args.scenario))
        seed = args.seed if args.seed is not None else _env_seed()
        scn = scn.with_overrides(seed=seed, h=args.h, t_end=args.t_end)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else _default_out(scn)
    res = run_scenario(scn, out, figures=False if args.no_figures else None)
    print("\n".join(res.summary))
    if res.code == EXIT_DIVERGED:
        print(f"error: {res.message}", file=sys.stderr)
    return res.code


def cmd_check(args: argparse.Namespace) -> int:
    try:
        scn = load_scenario(resolve(args.scenario))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print("\n".join(check_lines(scn)))
    return EXIT_OK


def _batch_one(job: tuple[str, str, int | None, bool]) -> tuple[str, int, str]:
    path, out_root, seed, figures = job
    try:
        scn = load_scenario(path)
        scn = scn.with_overrides(seed=seed)
    except ConfigError as exc:
        return path, EXIT_CONFIG, str(exc)
    res = run_scenario(scn, Path(out_root) / scn.name, figures=figures)
    return path, res.code, res.message or "ok"


def cmd_batch(args: argparse.Namespace) -> int:
    root = Path(args.dir)
    if not root.is_dir():
        print(f"error: {root} is not a directory", file=sys.stderr)
        return EXIT_CONFIG
    try:
        seed = args.seed if args.seed is not None else _env_seed()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    files = sorted(str(p) for p in root.glob("*.toml"))
    if not files:
        print(f"error: no *.toml scenarios in {root}", file=sys.stderr)
        return EXIT_CONFIG
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    jobs = [(f, args.out, seed, not args.no_figures) for f in files]
    if args.jobs == 1:
        results = [_batch_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_batch_one, jobs))
    worst = EXIT_OK
    for path, code, msg in results:
        print(f"{Path(path).name}: exit {code}: {msg}")
        if code == EXIT_DIVERGED or (code == EXIT_CONFIG and worst == EXIT_OK):
            worst = code
    return worst


class _Parser(argparse.ArgumentParser):
    """Usage errors exit with the config-error code; 2 is reserved for divergence."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(
        prog="rigidform",
        description="Distance-based formation control of double-integrator agents.",
    )
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="simulate one scenario and write its outputs")
    r.add_argument("scenario", help="scenario file, or the name of a bundled scenario")
    r.add_argument("--out", help="output directory (default: [output] dir or out/<name>)")
    r.add_argument("--seed", type=int, help=f"random seed (overrides ${SEED_ENV} and the file)")
    r.add_argument("--h", type=float, help="integration step in seconds")
    r.add_argument("--t-end", dest="t_end", type=float, help="final time in seconds")
    r.add_argument("--no-figures", action="store_true", help="write data files but no PNGs")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("check", help="static checks: rigidity, estimator stability, motion parameters")
    c.add_argument("scenario")
    c.set_defaults(func=cmd_check)

    b = sub.add_parser("batch", help="run every *.toml in a directory")
    b.add_argument("dir")
    b.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    b.add_argument("--out", default="out", help="root of the per-scenario output directories")
    b.add_argument("--seed", type=int)
    b.add_argument("--no-figures", action="store_true")
    b.set_defaults(func=cmd_batch)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RigidFormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
