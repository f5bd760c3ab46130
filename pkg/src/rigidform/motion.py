"""Distributed motion parameters for steady translation and rotation.

For each edge the tail agent holds a parameter ``mu_k`` and the head agent a
parameter ``mu_tilde_k``. Placed in the n x |E| matrix ``A_v`` they turn the
measured relative positions into a velocity field ``A_v z``. At the desired
shape the map from ``(mu, mu_tilde)`` to agent velocities is ``T(bz*)``;
kernels of ``T`` composed with the edge maps give the parameters that
translate the formation and the ones that rotate it without deformation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import numlin
from .errors import InvalidInputError, PreconditionError
from .graph import FormationGraph, ShapeSpec, block_diag_vectors, is_inf_min_rigid, kron_eye
from .numlin import Subspace

MOTION_RTOL = 1e-9


def head_indicator(G: FormationGraph) -> NDArray[np.float64]:
    return -G.S2


def transfer_matrix(G: FormationGraph, bzstar: ArrayLike, m: int) -> NDArray[np.float64]:
    """``T = [S1 D_z | H D_z]`` (bars implied), of size n*m x 2|E|.

    ``H`` marks the head of every edge with +1, so that ``T (mu; mu_tilde)``
    equals ``A_v(mu, mu_tilde) bz*`` with ``mu_tilde_k`` acting at the head.
    """
    z = np.asarray(bzstar, dtype=float).ravel()
    if z.size != G.num_edges * m:
        raise InvalidInputError("bzstar has the wrong length")
    D = block_diag_vectors(z, m)
    return np.hstack([kron_eye(G.S1, m) @ D, kron_eye(head_indicator(G), m) @ D])


def _edge_velocity_map(G: FormationGraph, m: int) -> NDArray[np.float64]:
    return kron_eye(G.B, m).T


def _require_rigid(G: FormationGraph, bzstar: NDArray, m: int) -> None:
    rep = is_inf_min_rigid(G, bzstar, m)
    if not rep.ok:
        raise PreconditionError(f"framework is {rep.reason}")


def translational_basis(
    G: FormationGraph, bzstar: ArrayLike, m: int, tol: float = MOTION_RTOL
) -> Subspace:
    """Parameters that translate the shape: kernel of ``B^T T`` with the
    motionless directions (kernel of ``T``) projected out."""
    z = np.asarray(bzstar, dtype=float).ravel()
    _require_rigid(G, z, m)
    T = transfer_matrix(G, z, m)
    ker_t = numlin.null_space(T, tol)
    ker_bt = numlin.null_space(_edge_velocity_map(G, m) @ T, tol)
    X = ker_bt.basis - numlin.project_onto(ker_t, ker_bt.basis)
    return Subspace.span(X, T.shape[1], tol=1e-6)


def rotational_basis(
    G: FormationGraph, bzstar: ArrayLike, m: int, tol: float = MOTION_RTOL
) -> Subspace:
    """Parameters that move the shape rigidly, minus translations and
    motionless directions: what remains are the rotations."""
    z = np.asarray(bzstar, dtype=float).ravel()
    _require_rigid(G, z, m)
    T = transfer_matrix(G, z, m)
    U = translational_basis(G, z, m, tol)
    ker_t = numlin.null_space(T, tol)
    Dz = block_diag_vectors(z, m)
    ker_rigid = numlin.null_space(Dz.T @ _edge_velocity_map(G, m) @ T, tol)
    drop = Subspace.span(np.vstack([U.basis, ker_t.basis]), T.shape[1])
    X = ker_rigid.basis - numlin.project_onto(drop, ker_rigid.basis)
    return Subspace.span(X, T.shape[1], tol=1e-6)


@dataclass(frozen=True)
class MotionParams:
    mu: NDArray[np.float64]
    mu_tilde: NDArray[np.float64]
    A_v: NDArray[np.float64]
    A_a: NDArray[np.float64]
    A: NDArray[np.float64]
    c1: float

    @property
    def stacked(self) -> NDArray[np.float64]:
        return np.concatenate([self.mu, self.mu_tilde])


def velocity_matrix(G: FormationGraph, mu: ArrayLike, mu_tilde: ArrayLike) -> NDArray[np.float64]:
    mu = np.asarray(mu, dtype=float).ravel()
    mu_tilde = np.asarray(mu_tilde, dtype=float).ravel()
    if mu.size != G.num_edges or mu_tilde.size != G.num_edges:
        raise InvalidInputError(f"motion parameters need {G.num_edges} entries each")
    return G.S1 * mu[None, :] + head_indicator(G) * mu_tilde[None, :]


def assemble_motion(
    G: FormationGraph,
    mu: ArrayLike,
    mu_tilde: ArrayLike,
    c1: float = 1.0,
    scale: float = 1.0,
) -> MotionParams:
    """Build ``A_v``, the acceleration matrix ``A_a = A_v B^T A_v`` and
    ``A = c1 A_v + A_a``. ``scale`` shrinks both parameter vectors uniformly."""
    if c1 <= 0:
        raise InvalidInputError("c1 must be positive")
    mu = scale * np.asarray(mu, dtype=float).ravel()
    mu_tilde = scale * np.asarray(mu_tilde, dtype=float).ravel()
    A_v = velocity_matrix(G, mu, mu_tilde)
    A_a = A_v @ G.B.T @ A_v
    return MotionParams(mu, mu_tilde, A_v, A_a, c1 * A_v + A_a, c1)


def rigid_velocity_field(
    positions: ArrayLike, v_c: ArrayLike, omega: ArrayLike | float
) -> NDArray[np.float64]:
    """Velocities ``v_c + omega x (p_i - p_c)`` (2D: ``omega`` scalar)."""
    P = np.asarray(positions, dtype=float)
    R = P - P.mean(axis=0)
    v_c = np.asarray(v_c, dtype=float)
    if P.shape[1] == 2:
        w = float(np.ravel(omega)[0]) if np.ndim(omega) else float(omega)
        return v_c + w * np.column_stack([-R[:, 1], R[:, 0]])
    return v_c + np.cross(np.asarray(omega, dtype=float), R)


def fit_motion_parameters(
    G: FormationGraph,
    shape: ShapeSpec,
    v_c: ArrayLike,
    omega: ArrayLike | float,
    tol: float = MOTION_RTOL,
) -> tuple[NDArray[np.float64], NDArray[np.float64], float]:
    """Parameters on the translation and rotation bases that best reproduce
    the rigid velocity field of ``(v_c, omega)`` over the reference shape.

    Returns ``(mu, mu_tilde, residual)``.
    """
    if shape.positions is None:
        raise PreconditionError("motion targets need a reference placement of the shape")
    m = shape.m
    bz = shape.body_zstar(G)
    U = translational_basis(G, bz, m, tol)
    W = rotational_basis(G, bz, m, tol)
    basis = np.vstack([U.basis, W.basis])
    T = transfer_matrix(G, bz, m)
    target = rigid_velocity_field(shape.positions, v_c, omega).ravel()
    M = T @ basis.T
    coef = numlin.least_squares(M, target)
    params = basis.T @ coef
    residual = float(np.linalg.norm(M @ coef - target))
    E = G.num_edges
    return params[:E], params[E:], residual


@dataclass(frozen=True)
class MembershipReport:
    translational_residual: float
    rotational_residual: float
    rigid_rate_residual: float


def motion_membership(
    G: FormationGraph, shape: ShapeSpec, mu: ArrayLike, mu_tilde: ArrayLike, tol: float = MOTION_RTOL
) -> MembershipReport:
    """How far a parameter vector is from the motion subspaces.

    ``translational_residual`` is the distance of the vector from the span of
    translations, rotations and motionless directions; ``rigid_rate_residual``
    the largest |d/dt |z_k|^2| of the induced field relative to its speed scale.
    """
    m = shape.m
    bz = shape.body_zstar(G)
    x = np.concatenate([np.ravel(mu), np.ravel(mu_tilde)]).astype(float)
    T = transfer_matrix(G, bz, m)
    U = translational_basis(G, bz, m, tol)
    W = rotational_basis(G, bz, m, tol)
    K = numlin.null_space(T, tol)
    scale = max(np.linalg.norm(x), 1e-300)
    uw_k = Subspace.span(np.vstack([U.basis, W.basis, K.basis]), x.size)
    u_k = Subspace.span(np.vstack([U.basis, K.basis]), x.size)
    vel = (T @ x).reshape(G.n, m)
    Z = bz.reshape(-1, m)
    rates = 2 * np.einsum("ij,ij->i", Z, vel[G.tails] - vel[G.heads])
    vscale = max(np.abs(vel).max() * np.abs(Z).max(), 1e-300)
    return MembershipReport(
        float(np.linalg.norm(x - numlin.project_onto(u_k, x)) / scale),
        float(np.linalg.norm(x - numlin.project_onto(uw_k, x)) / scale),
        float(np.abs(rates).max() / vscale),
    )


# --- linearised estimator-2 dynamics ----------------------------------------------


def estimator2_stability_matrix(G: FormationGraph, zstar: ArrayLike, m: int) -> NDArray[np.float64]:
    """``F = [[-I, -S2 D_z*], [2 D_z*^T B^T, 0]]`` (bars implied)."""
    z = np.asarray(zstar, dtype=float).ravel()
    nm, E = G.n * m, G.num_edges
    D = block_diag_vectors(z, m)
    F = np.zeros((nm + E, nm + E))
    F[:nm, :nm] = -np.eye(nm)
    F[:nm, nm:] = -kron_eye(G.S2, m) @ D
    F[nm:, :nm] = 2.0 * D.T @ kron_eye(G.B, m).T
    return F


def estimator2_jacobian(
    G: FormationGraph, zstar: ArrayLike, m: int, kappa: float, with_z: bool = False
) -> NDArray[np.float64]:
    """Jacobian of the (v, e, h) error dynamics at the desired shape, where
    ``h = e + mu - mu_hat``; with ``with_z`` the neutral z block is appended."""
    z = np.asarray(zstar, dtype=float).ravel()
    nm, E = G.n * m, G.num_edges
    D = block_diag_vectors(z, m)
    Bbt = kron_eye(G.B, m).T
    size = nm + 2 * E + (E * m if with_z else 0)
    J = np.zeros((size, size))
    J[:nm, :nm] = -np.eye(nm)
    J[:nm, nm : nm + E] = -kron_eye(G.S2, m) @ D
    J[:nm, nm + E : nm + 2 * E] = -kron_eye(G.S1, m) @ D
    J[nm : nm + E, :nm] = 2.0 * D.T @ Bbt
    J[nm + E : nm + 2 * E, :nm] = 2.0 * D.T @ Bbt
    J[nm + E : nm + 2 * E, nm + E : nm + 2 * E] = -kappa * np.eye(E)
    if with_z:
        J[nm + 2 * E :, :nm] = Bbt
    return J


@dataclass(frozen=True)
class HurwitzReport:
    hurwitz: bool
    max_real: float
    spectrum: NDArray[np.complex128]

    def __bool__(self) -> bool:
        return self.hurwitz


def check_assumption1(G: FormationGraph, shape: ShapeSpec, tol: float = 1e-9) -> HurwitzReport:
    """Is ``F`` Hurwitz at the desired shape (max real eigenvalue below ``-tol``)?"""
    F = estimator2_stability_matrix(G, shape.zstar, shape.m)
    spec = numlin.eigenvalues(F)
    mr = float(spec.real.max())
    return HurwitzReport(mr < -tol, mr, spec)
