"""Fixed-step RK4 integration of the closed-loop formation dynamics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray

from .control import ControllerConfig, make_rhs
from .errors import DivergenceError, IntegrationError, InvalidInputError
from .graph import FormationGraph, ShapeSpec, distance_errors

DIVERGENCE_RADIUS = 1e6

Rhs = Callable[[float, NDArray[np.float64]], NDArray[np.float64]]


def rk4_step(rhs: Rhs, x: NDArray[np.float64], h: float, t: float = 0.0) -> NDArray[np.float64]:
    """One classical Runge-Kutta step of size ``h`` from ``(t, x)``."""
    if h <= 0:
        raise InvalidInputError("step must be positive")
    k1 = rhs(t, x)
    k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1)
    k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2)
    k4 = rhs(t + h, x + h * k3)
    out = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise IntegrationError("non-finite derivative", t)
    return out


@dataclass(frozen=True)
class InitialSpec:
    """How to build p(0), v(0).

    ``mode`` is ``"explicit"`` (use ``p``, ``v``), ``"box"`` (uniform in
    ``[box_min, box_min + box_size]^m``) or ``"perturbed"`` (reference placement
    of the desired shape, each agent moved to a uniform point of the ball of
    radius ``fraction`` times the shortest desired distance). Random velocities have a uniform direction and a speed uniform
    in ``[0, speed_cap)``.
    """

    mode: str = "explicit"
    p: NDArray[np.float64] | None = None
    v: NDArray[np.float64] | None = None
    box_size: float = 100.0
    box_min: float = 0.0
    fraction: float = 0.1
    speed_cap: float = 0.0

    def __post_init__(self):
        if self.mode not in ("explicit", "box", "perturbed"):
            raise InvalidInputError(f"unknown initial mode {self.mode!r}")
        if self.mode == "explicit" and self.p is None:
            raise InvalidInputError("explicit initial conditions need p")
        if self.speed_cap < 0 or self.box_size <= 0 or self.fraction < 0:
            raise InvalidInputError("box size, fraction and speed cap must be non-negative")


def random_velocities(rng: np.random.Generator, n: int, m: int, cap: float) -> NDArray[np.float64]:
    if cap == 0:
        return np.zeros((n, m))
    dirs = rng.normal(size=(n, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * rng.uniform(0.0, cap, size=(n, 1))


def random_ball(rng: np.random.Generator, n: int, m: int, radius: float) -> NDArray[np.float64]:
    """``n`` points uniform in the m-ball of the given radius."""
    if radius == 0:
        return np.zeros((n, m))
    dirs = rng.normal(size=(n, m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / m)


def initial_state(
    spec: InitialSpec, G: FormationGraph, shape: ShapeSpec, seed: int
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    n, m = G.n, shape.m
    rng = np.random.default_rng(seed)
    if spec.mode == "explicit":
        p = np.asarray(spec.p, dtype=float).reshape(n, m)
        v = np.zeros((n, m)) if spec.v is None else np.asarray(spec.v, dtype=float).reshape(n, m)
        return p.ravel().copy(), v.ravel().copy()
    if spec.mode == "box":
        p = spec.box_min + rng.uniform(0.0, spec.box_size, size=(n, m))
    else:
        if shape.positions is None:
            raise InvalidInputError("perturbed initial conditions need a reference placement")
        radius = spec.fraction * float(np.min(shape.d))
        p = shape.positions + random_ball(rng, n, m, radius)
    v = random_velocities(rng, n, m, spec.speed_cap)
    return p.ravel(), v.ravel()


@dataclass
class SimConfig:
    graph: FormationGraph
    shape: ShapeSpec
    controller: ControllerConfig
    initial: InitialSpec
    h: float = 1e-3
    t_end: float = 10.0
    record_every: int = 10
    seed: int = 0
    name: str = "simulation"

    def __post_init__(self):
        if self.h <= 0:
            raise InvalidInputError("step h must be positive")
        if self.t_end < self.h:
            raise InvalidInputError("t_end must be at least one step")
        if self.record_every < 1:
            raise InvalidInputError("record_every must be a positive integer")


@dataclass
class Trajectory:
    """Recorded samples; arrays are indexed by sample first."""

    graph: FormationGraph
    shape: ShapeSpec
    controller: ControllerConfig
    times: NDArray[np.float64]
    p: NDArray[np.float64]  # (N, n, m)
    v: NDArray[np.float64]  # (N, n, m)
    e: NDArray[np.float64]  # (N, |E|)
    mu_hat: NDArray[np.float64] | None = None  # (N, |E|)
    h: float = 1e-3
    meta: dict = field(default_factory=dict)

    @property
    def speeds(self) -> NDArray[np.float64]:
        return np.linalg.norm(self.v, axis=2)

    @property
    def n(self) -> int:
        return self.p.shape[1]

    @property
    def m(self) -> int:
        return self.p.shape[2]

    def __len__(self) -> int:
        return self.times.size

    def window(self, t_from: float) -> slice:
        return slice(int(np.searchsorted(self.times, t_from)), None)


def _errors_of(G: FormationGraph, shape: ShapeSpec, P: NDArray) -> NDArray:
    Z = P[:, G.tails] - P[:, G.heads]
    return np.einsum("nkj,nkj->nk", Z, Z) - shape.d**2


def simulate(cfg: SimConfig, x0: ArrayLike | None = None) -> Trajectory:
    """Integrate ``cfg`` with RK4 and record every ``record_every`` steps.

    ``x0`` overrides the initial state built from ``cfg.initial``.
    Raises ``DivergenceError`` when an agent leaves the ball of radius 1e6 and
    ``IntegrationError`` on non-finite states.
    """
    G, shape, ctrl = cfg.graph, cfg.shape, cfg.controller
    n, m, E = G.n, shape.m, G.num_edges
    nm = n * m
    f = make_rhs(G, shape, ctrl)
    if x0 is None:
        p0, v0 = initial_state(cfg.initial, G, shape, cfg.seed)
        parts = [p0, v0]
        if ctrl.has_estimator:
            mh0 = np.zeros(E) if ctrl.mu_hat0 is None else np.asarray(ctrl.mu_hat0, dtype=float)
            parts.append(mh0)
        x = np.concatenate(parts)
    else:
        x = np.array(x0, dtype=float)
    if x.shape != (f.state_size,):
        raise InvalidInputError(f"initial state has length {x.size}, expected {f.state_size}")

    steps = int(round(cfg.t_end / cfg.h))
    rec = cfg.record_every
    n_rec = steps // rec + 1 + (1 if steps % rec else 0)
    X = np.empty((n_rec, x.size))
    T = np.empty(n_rec)
    X[0], T[0] = x, 0.0
    j = 1
    h = cfg.h
    guard = DIVERGENCE_RADIUS
    for step in range(1, steps + 1):
        t = (step - 1) * h
        k1 = f(t, x)
        k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
        k4 = f(t + h, x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.isfinite(x).all():
            raise IntegrationError("non-finite state", step * h)
        if np.abs(x[:nm]).max() > guard / np.sqrt(m) and (
            np.linalg.norm(x[:nm].reshape(n, m), axis=1).max() > guard
        ):
            raise DivergenceError(f"agent left the ball of radius {guard:g}", step * h)
        if step % rec == 0 or step == steps:
            X[j], T[j] = x, step * h
            j += 1
    X, T = X[:j], T[:j]
    P = X[:, :nm].reshape(-1, n, m)
    V = X[:, nm : 2 * nm].reshape(-1, n, m)
    mu_hat = X[:, 2 * nm :] if ctrl.has_estimator else None
    return Trajectory(
        G, shape, ctrl, T, P, V, _errors_of(G, shape, P), mu_hat, h=h,
        meta={"name": cfg.name, "seed": cfg.seed},
    )


def monitored_scalars(traj: Trajectory) -> tuple[list[str], NDArray[np.float64]]:
    """Names and (N, k) samples of the scalars watched for steady state."""
    names = [f"s[{i + 1}]" for i in range(traj.n)]
    cols = [traj.speeds]
    names += [f"|e[{k + 1}]|" for k in range(traj.e.shape[1])]
    cols.append(np.abs(traj.e))
    if traj.mu_hat is not None:
        names += [f"mu_hat[{k + 1}]" for k in range(traj.mu_hat.shape[1])]
        cols.append(traj.mu_hat)
    return names, np.hstack(cols)


def window_variation(values: NDArray, scale_floor: float = 1.0) -> NDArray:
    """(max - min) / max(|mean|, scale_floor) per column."""
    spread = values.max(axis=0) - values.min(axis=0)
    return spread / np.maximum(np.abs(values.mean(axis=0)), scale_floor)


def detect_steady_state(
    traj: Trajectory, window: float, tol: float, scale_floor: float = 1.0
) -> tuple[bool, float | None]:
    """Earliest time after which every trailing window of length ``window`` is steady.

    A window is steady when every monitored scalar varies by less than ``tol``
    relative to ``max(|mean|, scale_floor)``; scalars near zero are therefore
    judged on an absolute scale.
    """
    t = traj.times
    if window <= 0 or window >= t[-1] - t[0]:
        raise InvalidInputError("window must be positive and shorter than the run")
    _, S = monitored_scalars(traj)
    dt = t[1] - t[0]
    w = int(round(window / dt)) + 1
    if w > len(t):
        raise InvalidInputError("window longer than the trajectory")
    views = sliding_window_view(S, w, axis=0)  # (N-w+1, k, w)
    spread = views.max(axis=2) - views.min(axis=2)
    scale = np.maximum(np.abs(views.mean(axis=2)), scale_floor)
    steady = np.all(spread / scale < tol, axis=1)
    if not steady[-1]:
        return False, None
    bad = np.flatnonzero(~steady)
    first = 0 if bad.size == 0 else bad[-1] + 1
    return True, float(t[first + w - 1])
