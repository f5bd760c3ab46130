"""Control laws and estimator dynamics for double-integrator formations.

Every law is a pure function of the swarm state. ``make_rhs`` packs one of
them into a flat ``f(t, x)`` for the integrator, with the state laid out as
``x = [p, v]`` or ``x = [p, v, mu_hat]`` for the estimator variants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError
from .graph import FormationGraph, ShapeSpec

GRADIENT = "gradient"
HAMILTONIAN_FAMILY = "hamiltonian_family"
MISMATCHED = "mismatched"
ESTIMATOR1 = "estimator1"
ESTIMATOR2 = "estimator2"
MOTION = "motion"
VARIANTS = (GRADIENT, HAMILTONIAN_FAMILY, MISMATCHED, ESTIMATOR1, ESTIMATOR2, MOTION)


@dataclass
class SwarmState:
    p: NDArray[np.float64]
    v: NDArray[np.float64]
    mu_hat: NDArray[np.float64] | None = None

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=float).ravel()
        self.v = np.asarray(self.v, dtype=float).ravel()
        if self.p.shape != self.v.shape:
            raise InvalidInputError("p and v must have the same length")
        if self.mu_hat is not None:
            self.mu_hat = np.asarray(self.mu_hat, dtype=float).ravel()

    def pack(self) -> NDArray[np.float64]:
        parts = [self.p, self.v]
        if self.mu_hat is not None:
            parts.append(self.mu_hat)
        return np.concatenate(parts)

    @classmethod
    def unpack(cls, x: ArrayLike, nm: int, with_estimator: bool) -> SwarmState:
        x = np.asarray(x, dtype=float)
        mu_hat = x[2 * nm :] if with_estimator else None
        return cls(x[:nm], x[nm : 2 * nm], mu_hat)


@dataclass(frozen=True)
class ControllerConfig:
    """Controller variant plus the parameters that variant uses.

    ``A`` and ``A_v`` are n x |E| motion matrices (see ``motion.assemble_motion``).
    """

    variant: str = GRADIENT
    lam: float = 1.0
    mu: NDArray[np.float64] | None = None
    kappa: float = 1.0
    c1: float = 1.0
    c2: float = 1.0
    A: NDArray[np.float64] | None = None
    A_v: NDArray[np.float64] | None = None
    mu_hat0: NDArray[np.float64] | None = None
    extras: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise InvalidInputError(f"unknown controller variant {self.variant!r}")
        if not 0.0 <= self.lam <= 1.0:
            raise InvalidInputError("lambda must lie in [0, 1]")
        if self.kappa <= 0:
            raise InvalidInputError("kappa must be positive")
        if self.c1 <= 0 or self.c2 <= 0:
            raise InvalidInputError("c1 and c2 must be positive")
        if self.variant in (MISMATCHED, ESTIMATOR1, ESTIMATOR2) and self.mu is None:
            raise InvalidInputError(f"variant {self.variant} needs a mismatch vector mu")
        if self.variant == MOTION and self.A is None:
            raise InvalidInputError("motion variant needs the motion matrix A")

    @property
    def has_estimator(self) -> bool:
        return self.variant in (ESTIMATOR1, ESTIMATOR2)


# --- kernels on (n, m) arrays -------------------------------------------------


def _shape_terms(G: FormationGraph, P: NDArray, d2: NDArray):
    Z = G.B.T @ P
    e = np.einsum("ij,ij->i", Z, Z) - d2
    return Z, e, G.B @ (Z * e[:, None])


def _split(G: FormationGraph, shape: ShapeSpec, state: SwarmState):
    m = shape.m
    return state.p.reshape(G.n, m), state.v.reshape(G.n, m)


# --- public control laws --------------------------------------------------------


def potential(G: FormationGraph, shape: ShapeSpec, state: SwarmState) -> float:
    """Stored energy: kinetic terms |v_i|^2/2 plus edge terms (|z_k|^2 - d_k^2)^2/4."""
    P, V = _split(G, shape, state)
    _, e, _ = _shape_terms(G, P, shape.d**2)
    return 0.5 * float(np.sum(V * V)) + 0.25 * float(e @ e)


def potential_gradient_p(G: FormationGraph, shape: ShapeSpec, p: ArrayLike) -> NDArray[np.float64]:
    """Gradient of the edge potentials with respect to the stacked positions."""
    P = np.asarray(p, dtype=float).reshape(G.n, shape.m)
    return _shape_terms(G, P, shape.d**2)[2].ravel()


def gradient_control(G: FormationGraph, shape: ShapeSpec, state: SwarmState) -> NDArray[np.float64]:
    """``u = -v - B D_z e``."""
    P, V = _split(G, shape, state)
    _, _, F = _shape_terms(G, P, shape.d**2)
    return (-V - F).ravel()


def hamiltonian_family_rhs(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, lam: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Convex blend of the damped Hamiltonian flow and the gradient flow.

    ``lam = 0`` is the closed loop under gradient control, ``lam = 1`` the pure
    gradient descent of the stored energy in (p, v).
    """
    if not 0.0 <= lam <= 1.0:
        raise InvalidInputError("lambda must lie in [0, 1]")
    P, V = _split(G, shape, state)
    gp = _shape_terms(G, P, shape.d**2)[2]
    pdot = -(lam * gp - (1.0 - lam) * V)
    vdot = -((1.0 - lam) * gp + V)
    return pdot.ravel(), vdot.ravel()


def build_A1(G: FormationGraph, mu: ArrayLike) -> NDArray[np.float64]:
    """n x |E| matrix with ``mu_k`` at the tail row of edge k."""
    mu = np.asarray(mu, dtype=float)
    return G.S1 * mu[None, :]


def mismatched_control(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, mu: ArrayLike
) -> NDArray[np.float64]:
    """``u = -v - B D_z e - S1 D_z mu``: the tail of each edge aims at d_k^2 - mu_k."""
    mu = np.asarray(mu, dtype=float)
    P, V = _split(G, shape, state)
    Z, _, F = _shape_terms(G, P, shape.d**2)
    return (-V - F - G.S1 @ (Z * mu[:, None])).ravel()


def mismatched_control_a1(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, mu: ArrayLike
) -> NDArray[np.float64]:
    """Same law written as ``u = -v - B D_z e - A1(mu) z``."""
    P, V = _split(G, shape, state)
    Z, _, F = _shape_terms(G, P, shape.d**2)
    return (-V - F - build_A1(G, mu) @ Z).ravel()


def estimator1_rhs(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, mu: ArrayLike
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Compensated control and the gradient-type estimator.

    The tail of edge k integrates ``-z_k . v_tail``; with this sign the energy
    |mu - mu_hat|^2/2 + |v|^2/2 + |e|^2/4 decays at rate |v|^2.
    """
    mu = np.asarray(mu, dtype=float)
    P, V = _split(G, shape, state)
    Z, _, F = _shape_terms(G, P, shape.d**2)
    xi = mu - state.mu_hat
    u = -V - F - G.S1 @ (Z * xi[:, None])
    mu_hat_dot = -np.einsum("ij,ij->i", Z, V[G.tails])
    return u.ravel(), mu_hat_dot


def estimator2_rhs(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, mu: ArrayLike, kappa: float
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Compensated control with the high-gain estimator ``kappa (e + mu - mu_hat)``.

    The estimating agent sees ``e_k + mu_k`` as one biased measurement.
    """
    if kappa <= 0:
        raise InvalidInputError("kappa must be positive")
    mu = np.asarray(mu, dtype=float)
    P, V = _split(G, shape, state)
    Z, e, F = _shape_terms(G, P, shape.d**2)
    xi = mu - state.mu_hat
    u = -V - F - G.S1 @ (Z * xi[:, None])
    biased = e + mu
    return u.ravel(), kappa * (biased - state.mu_hat)


def motion_control(
    G: FormationGraph,
    shape: ShapeSpec,
    state: SwarmState,
    A: ArrayLike,
    c1: float = 1.0,
    c2: float = 1.0,
) -> NDArray[np.float64]:
    """``u = -c1 v - c2 B D_z e + A z``."""
    A = np.asarray(A, dtype=float)
    P, V = _split(G, shape, state)
    Z, _, F = _shape_terms(G, P, shape.d**2)
    return (-c1 * V - c2 * F + A @ Z).ravel()


def motion_control_error_form(
    G: FormationGraph,
    shape: ShapeSpec,
    state: SwarmState,
    A_v: ArrayLike,
    A_a: ArrayLike,
    c1: float = 1.0,
    c2: float = 1.0,
) -> NDArray[np.float64]:
    """``u = -c1 e_v - c2 B D_z e + A_a z`` with velocity error ``e_v = v - A_v z``."""
    A_v = np.asarray(A_v, dtype=float)
    A_a = np.asarray(A_a, dtype=float)
    P, V = _split(G, shape, state)
    Z, _, F = _shape_terms(G, P, shape.d**2)
    ev = V - A_v @ Z
    return (-c1 * ev - c2 * F + A_a @ Z).ravel()


def velocity_error(
    G: FormationGraph, shape: ShapeSpec, state: SwarmState, A_v: ArrayLike
) -> NDArray[np.float64]:
    P, V = _split(G, shape, state)
    return (V - np.asarray(A_v, dtype=float) @ (G.B.T @ P)).ravel()


# --- flat right-hand sides ------------------------------------------------------


def make_rhs(
    G: FormationGraph, shape: ShapeSpec, cfg: ControllerConfig
) -> Callable[[float, NDArray[np.float64]], NDArray[np.float64]]:
    """Flat ``f(t, x)`` for the closed loop selected by ``cfg``."""
    n, m, E = G.n, shape.m, G.num_edges
    nm = n * m
    B = G.B
    Bt = np.ascontiguousarray(B.T)
    S1 = G.S1
    S1t = np.ascontiguousarray(S1.T)
    d2 = shape.d**2
    variant = cfg.variant
    mu = None if cfg.mu is None else np.asarray(cfg.mu, dtype=float)
    if mu is not None and mu.shape != (E,):
        raise InvalidInputError(f"mu must have {E} entries")
    size = 2 * nm + (E if cfg.has_estimator else 0)

    def split(x):
        if x.shape != (size,):
            raise InvalidInputError(f"state has length {x.shape}, expected {size}")
        return x[:nm].reshape(n, m), x[nm : 2 * nm].reshape(n, m)

    if variant == GRADIENT:

        def f(t, x):
            P, V = split(x)
            Z = Bt @ P
            e = np.einsum("ij,ij->i", Z, Z) - d2
            return np.concatenate([x[nm:], (-V - B @ (Z * e[:, None])).ravel()])

    elif variant == HAMILTONIAN_FAMILY:
        lam = cfg.lam

        def f(t, x):
            P, V = split(x)
            Z = Bt @ P
            e = np.einsum("ij,ij->i", Z, Z) - d2
            gp = B @ (Z * e[:, None])
            return np.concatenate(
                [(-(lam * gp - (1.0 - lam) * V)).ravel(), (-((1.0 - lam) * gp + V)).ravel()]
            )

    elif variant == MISMATCHED:

        def f(t, x):
            P, V = split(x)
            Z = Bt @ P
            e = np.einsum("ij,ij->i", Z, Z) - d2
            u = -V - B @ (Z * e[:, None]) - S1 @ (Z * mu[:, None])
            return np.concatenate([x[nm:], u.ravel()])

    elif variant in (ESTIMATOR1, ESTIMATOR2):
        kappa = cfg.kappa
        second = variant == ESTIMATOR2

        def f(t, x):
            P, V = split(x)
            mu_hat = x[2 * nm :]
            Z = Bt @ P
            e = np.einsum("ij,ij->i", Z, Z) - d2
            u = -V - B @ (Z * e[:, None]) - S1 @ (Z * (mu - mu_hat)[:, None])
            if second:
                mhd = kappa * (e + mu - mu_hat)
            else:
                mhd = -np.einsum("ij,ij->i", Z, S1t @ V)
            return np.concatenate([x[nm : 2 * nm], u.ravel(), mhd])

    elif variant == MOTION:
        A = np.asarray(cfg.A, dtype=float)
        if A.shape != (n, E):
            raise InvalidInputError(f"A must be {n}x{E}")
        c1, c2 = cfg.c1, cfg.c2

        def f(t, x):
            P, V = split(x)
            Z = Bt @ P
            e = np.einsum("ij,ij->i", Z, Z) - d2
            u = -c1 * V - c2 * (B @ (Z * e[:, None])) + A @ Z
            return np.concatenate([x[nm:], u.ravel()])

    else:  # pragma: no cover - guarded by ControllerConfig
        raise InvalidInputError(variant)

    f.state_size = size  # type: ignore[attr-defined]
    return f


def state_size(G: FormationGraph, m: int, cfg: ControllerConfig) -> int:
    return 2 * G.n * m + (G.num_edges if cfg.has_estimator else 0)
