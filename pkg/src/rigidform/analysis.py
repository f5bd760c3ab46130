"""Post-hoc trajectory analytics.

Rigid-body velocity fits, Lyapunov functions of the closed loops and
window-constancy tables for steady motions of a distorted formation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import numlin
from .errors import InvalidInputError, PreconditionError
from .graph import FormationGraph, ShapeSpec
from .simulator import Trajectory

_J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class BodyMotion:
    v_c: NDArray[np.float64]
    omega: NDArray[np.float64] | float
    residual: float


def _skew(r: NDArray) -> NDArray:
    return np.array([[0.0, -r[2], r[1]], [r[2], 0.0, -r[0]], [-r[1], r[0], 0.0]])


def fit_body_motion(p: ArrayLike, v: ArrayLike, m: int) -> BodyMotion:
    """Least-squares fit of ``v_i = v_c + omega x (p_i - p_c)``.

    In the plane ``omega`` is a scalar and the cross product is the quarter
    turn ``J (p_i - p_c)``.

    Raises:
        PreconditionError: agents are collinear (plane) or coplanar (space),
            so the rotation is not identifiable.
    """
    if m not in (2, 3):
        raise InvalidInputError(f"ambient dimension must be 2 or 3, got {m}")
    P = np.asarray(p, dtype=float).reshape(-1, m)
    V = np.asarray(v, dtype=float).reshape(-1, m)
    if P.shape != V.shape:
        raise InvalidInputError("p and v must describe the same agents")
    n = P.shape[0]
    R = P - P.mean(axis=0)
    scale = max(float(np.abs(R).max()), 1e-300)
    spread = numlin.rank(R / scale, 1e-9) if np.any(R) else 0
    if spread < m or n < m + 1:
        raise PreconditionError("degenerate geometry: agents do not span the space")
    k = 1 if m == 2 else 3
    M = np.zeros((n * m, m + k))
    for i in range(n):
        M[i * m : (i + 1) * m, :m] = np.eye(m)
        if m == 2:
            M[i * m : (i + 1) * m, 2] = _J @ R[i]
        else:
            M[i * m : (i + 1) * m, 3:] = -_skew(R[i])
    b = V.ravel()
    x = numlin.least_squares(M, b)
    residual = float(np.linalg.norm(M @ x - b))
    omega = float(x[2]) if m == 2 else x[3:]
    return BodyMotion(x[:m], omega, residual)


# --- Lyapunov functions ---------------------------------------------------------

LYAPUNOV_VARIANTS = ("weighted_energy", "estimator1", "motion", "energy")


def _z_e(G: FormationGraph, shape: ShapeSpec, p: NDArray) -> tuple[NDArray, NDArray]:
    P = p.reshape(G.n, shape.m)
    Z = G.B.T @ P
    return Z, np.einsum("ij,ij->i", Z, Z) - shape.d**2


def lyapunov_value(
    variant: str,
    G: FormationGraph,
    shape: ShapeSpec,
    p: ArrayLike,
    v: ArrayLike,
    mu_hat: ArrayLike | None = None,
    *,
    mu: ArrayLike | None = None,
    A_v: ArrayLike | None = None,
    c1: float = 1.0,
    c2: float = 1.0,
    eps: float = 0.0,
) -> float:
    """Evaluate one of the Lyapunov functions used for the closed loops.

    Variants:
        ``weighted_energy``: ``|e|^2/2 + sum_i |v_i|^2``.
        ``estimator1``: ``|mu - mu_hat|^2/2 + |v|^2/2 + |e|^2/4``.
        ``motion``: ``(eps c1 + c2)/4 |e|^2 + |e_v|^2/2 + eps e_v^T B D_z e``
            with ``e_v = v - A_v z``.
        ``energy``: ``|v|^2/2 + |e|^2/4``.
    """
    p = np.asarray(p, dtype=float).ravel()
    V = np.asarray(v, dtype=float).reshape(G.n, shape.m)
    Z, e = _z_e(G, shape, p)
    if variant == "weighted_energy":
        return 0.5 * float(e @ e) + float(np.sum(V * V))
    if variant == "energy":
        return 0.5 * float(np.sum(V * V)) + 0.25 * float(e @ e)
    if variant == "estimator1":
        if mu is None or mu_hat is None:
            raise InvalidInputError("estimator1 Lyapunov function needs mu and mu_hat")
        xi = np.asarray(mu, dtype=float) - np.asarray(mu_hat, dtype=float)
        return 0.5 * float(xi @ xi) + 0.5 * float(np.sum(V * V)) + 0.25 * float(e @ e)
    if variant == "motion":
        if A_v is None:
            raise InvalidInputError("motion Lyapunov function needs A_v")
        ev = V - np.asarray(A_v, dtype=float) @ Z
        grad = G.B @ (Z * e[:, None])
        return (
            0.25 * (eps * c1 + c2) * float(e @ e)
            + 0.5 * float(np.sum(ev * ev))
            + eps * float(np.sum(ev * grad))
        )
    raise InvalidInputError(f"unknown Lyapunov variant {variant!r}")


def lyapunov_series(traj: Trajectory, variant: str, **params) -> NDArray[np.float64]:
    """``lyapunov_value`` at every recorded sample."""
    mh = traj.mu_hat
    return np.array(
        [
            lyapunov_value(
                variant, traj.graph, traj.shape, traj.p[j], traj.v[j],
                None if mh is None else mh[j], **params,
            )
            for j in range(len(traj))
        ]
    )


def is_non_increasing(values: ArrayLike, slack: float = 1e-8) -> bool:
    """True when no sample exceeds its predecessor by more than ``slack``
    relative to the initial magnitude."""
    x = np.asarray(values, dtype=float)
    tol = slack * max(abs(float(x[0])), 1.0)
    return bool(np.all(np.diff(x) <= tol))


# --- constancy of steady motions ------------------------------------------------


def body_axes(P: NDArray) -> NDArray[np.float64]:
    """Orthonormal axes attached to the agents (columns), by Gram-Schmidt.

    The first axis points from agent 1 to agent 2; in space the second is
    built from agent 3 and the third completes a right-handed frame.
    """
    m = P.shape[1]
    a = P[1] - P[0]
    a = a / np.linalg.norm(a)
    if m == 2:
        return np.column_stack([a, _J @ a])
    b = P[2] - P[0]
    b = b - (b @ a) * a
    nb = np.linalg.norm(b)
    if nb == 0:
        raise PreconditionError("agents 1, 2, 3 are collinear; no body frame")
    b /= nb
    return np.column_stack([a, b, np.cross(a, b)])


def accelerations(traj: Trajectory) -> NDArray[np.float64]:
    """Central differences of the recorded velocities (one-sided at the ends)."""
    return np.gradient(traj.v, traj.times, axis=0)


@dataclass(frozen=True)
class ConstancyRow:
    name: str
    mean: float
    variation: float


def _rel_variation(x: NDArray, floor: float) -> float:
    return float((x.max() - x.min()) / max(abs(float(x.mean())), floor))


def _vec_variation(X: NDArray, floor: float) -> float:
    mean = X.mean(axis=0)
    dev = np.linalg.norm(X - mean, axis=1).max()
    return float(dev / max(np.linalg.norm(mean), floor))


def body_motion_series(traj: Trajectory, sl: slice | None = None):
    """Fitted ``(v_c, omega)`` per sample, expressed on the agents' body axes."""
    idx = range(len(traj))[sl or slice(None)]
    vcs, oms = [], []
    for j in idx:
        P, V = traj.p[j], traj.v[j]
        fit = fit_body_motion(P, V, traj.m)
        R = body_axes(P)
        vcs.append(R.T @ fit.v_c)
        oms.append(np.atleast_1d(fit.omega) if traj.m == 2 else R.T @ fit.omega)
    return np.array(vcs), np.array(oms)


def constancy_report(
    traj: Trajectory, t_from: float, floor: float = 1e-12
) -> list[ConstancyRow]:
    """Relative variation, after ``t_from``, of speeds, |e_k|, |a_i| and the
    body-frame velocity fit.

    Scalars use ``(max - min) / |mean|``; the fitted vectors use the largest
    deviation from their window mean divided by the norm of that mean, listed
    per component as well as for the whole vector. ``floor`` guards |mean| = 0.
    """
    if t_from >= traj.times[-1]:
        raise InvalidInputError("t_from must precede the end of the run")
    sl = traj.window(t_from)
    rows: list[ConstancyRow] = []
    S = traj.speeds[sl]
    for i in range(traj.n):
        rows.append(ConstancyRow(f"s[{i + 1}]", float(S[:, i].mean()), _rel_variation(S[:, i], floor)))
    Ee = np.abs(traj.e[sl])
    for k in range(Ee.shape[1]):
        rows.append(ConstancyRow(f"|e[{k + 1}]|", float(Ee[:, k].mean()), _rel_variation(Ee[:, k], floor)))
    Acc = np.linalg.norm(accelerations(traj)[sl], axis=2)
    # drop the one-sided end point, which is only first-order accurate
    Acc = Acc[:-1] if Acc.shape[0] > 2 else Acc
    for i in range(traj.n):
        rows.append(ConstancyRow(f"|a[{i + 1}]|", float(Acc[:, i].mean()), _rel_variation(Acc[:, i], floor)))
    try:
        vc, om = body_motion_series(traj, sl)
    except PreconditionError:
        return rows
    for name, X in (("v_c", vc), ("omega", om)):
        scale = max(float(np.linalg.norm(X.mean(axis=0))), floor)
        for c in range(X.shape[1]):
            col = X[:, c]
            rows.append(
                ConstancyRow(f"{name}_b[{c + 1}]", float(col.mean()), float((col.max() - col.min()) / scale))
            )
        rows.append(ConstancyRow(f"|{name}|", float(np.linalg.norm(X.mean(axis=0))), _vec_variation(X, floor)))
    return rows


def angle_between(a: ArrayLike, b: ArrayLike) -> float:
    """Angle in degrees between two lines (direction sign ignored)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidInputError("zero vector has no direction")
    ua, ub = a / na, b / nb
    # half-angle form stays accurate near 0 and 180 degrees
    theta = float(np.degrees(2.0 * np.arctan2(np.linalg.norm(ua - ub), np.linalg.norm(ua + ub))))
    return min(theta, 180.0 - theta)


def estimator1_error_bound(
    e0: ArrayLike, v0: ArrayLike, mu: ArrayLike, mu_hat0: ArrayLike
) -> float:
    """Upper bound on the final |e|^2 for the gradient-type estimator:
    ``2|mu - mu_hat(0)|^2 + 2|v(0)|^2 + |e(0)|^2``."""
    xi = np.asarray(mu, dtype=float) - np.asarray(mu_hat0, dtype=float)
    v0 = np.asarray(v0, dtype=float).ravel()
    e0 = np.asarray(e0, dtype=float)
    return float(2 * xi @ xi + 2 * v0 @ v0 + e0 @ e0)
