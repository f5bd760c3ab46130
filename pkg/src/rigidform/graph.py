"""Formation graphs, incidence machinery and rigidity of frameworks.

Agents are indexed from 0 inside the library. Stacked vectors follow the
usual convention: ``p = col(p_1, ..., p_n)`` with each block of length ``m``,
and ``z = col(z_1, ..., z_|E|)`` with ``z_k = p_tail(k) - p_head(k)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from . import numlin
from .errors import InvalidInputError

RIGIDITY_RTOL = 1e-7


@dataclass(frozen=True)
class FormationGraph:
    """Undirected sensing graph with an orientation on every edge.

    The tail of edge k is the agent that estimates (or owns the mismatch of)
    that edge.
    """

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        object.__setattr__(self, "edges", edges)
        if self.n < 2:
            raise InvalidInputError("a formation needs at least two agents")
        seen = set()
        for k, (t, h) in enumerate(edges):
            if not (0 <= t < self.n and 0 <= h < self.n):
                raise InvalidInputError(f"edge {k} = {(t, h)} references a missing agent")
            if t == h:
                raise InvalidInputError(f"edge {k} is a self loop")
            key = frozenset((t, h))
            if key in seen:
                raise InvalidInputError(f"edge {k} = {(t, h)} is parallel to an earlier edge")
            seen.add(key)

    @classmethod
    def from_incidence(cls, B: ArrayLike) -> FormationGraph:
        B = np.asarray(B, dtype=float)
        edges = []
        for k in range(B.shape[1]):
            col = B[:, k]
            tails = np.flatnonzero(col == 1)
            heads = np.flatnonzero(col == -1)
            if len(tails) != 1 or len(heads) != 1 or np.count_nonzero(col) != 2:
                raise InvalidInputError(f"column {k} of B is not a valid incidence column")
            edges.append((int(tails[0]), int(heads[0])))
        return cls(B.shape[0], tuple(edges))

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def tails(self) -> NDArray[np.intp]:
        return np.array([t for t, _ in self.edges], dtype=np.intp)

    @cached_property
    def heads(self) -> NDArray[np.intp]:
        return np.array([h for _, h in self.edges], dtype=np.intp)

    @cached_property
    def B(self) -> NDArray[np.float64]:
        """Incidence matrix, +1 at the tail and -1 at the head of each column."""
        return self.S1 + self.S2

    @cached_property
    def S1(self) -> NDArray[np.float64]:
        S = np.zeros((self.n, self.num_edges))
        S[self.tails, np.arange(self.num_edges)] = 1.0
        return S

    @cached_property
    def S2(self) -> NDArray[np.float64]:
        S = np.zeros((self.n, self.num_edges))
        S[self.heads, np.arange(self.num_edges)] = -1.0
        return S

    def neighbors(self, i: int) -> list[int]:
        out = []
        for t, h in self.edges:
            if t == i:
                out.append(h)
            elif h == i:
                out.append(t)
        return out


def kron_eye(A: NDArray[np.float64], m: int) -> NDArray[np.float64]:
    """``A (x) I_m``, the bar operator."""
    return np.kron(A, np.eye(m))


def block_diag_vectors(x: ArrayLike, m: int) -> NDArray[np.float64]:
    """``D_x``: the (k*m) x k matrix holding block i of ``x`` in column i."""
    X = np.asarray(x, dtype=float).reshape(-1, m)
    k = X.shape[0]
    D = np.zeros((k * m, k))
    for i in range(k):
        D[i * m : (i + 1) * m, i] = X[i]
    return D


def _check_stacked(x: ArrayLike, blocks: int, m: int, what: str) -> NDArray[np.float64]:
    x = np.asarray(x, dtype=float)
    if x.size != blocks * m:
        raise InvalidInputError(f"{what} has length {x.size}, expected {blocks}*{m} = {blocks * m}")
    return x.reshape(blocks, m)


def relative_positions(G: FormationGraph, p: ArrayLike, m: int) -> NDArray[np.float64]:
    """Stacked ``z = (B (x) I_m)^T p``."""
    P = _check_stacked(p, G.n, m, "p")
    return (P[G.tails] - P[G.heads]).ravel()


def rigidity_matrix(G: FormationGraph, z: ArrayLike, m: int) -> NDArray[np.float64]:
    """``R(z) = D_z^T (B (x) I_m)^T``, of size |E| x n*m."""
    Z = _check_stacked(z, G.num_edges, m, "z")
    R = np.zeros((G.num_edges, G.n * m))
    for k, (t, h) in enumerate(G.edges):
        R[k, t * m : (t + 1) * m] = Z[k]
        R[k, h * m : (h + 1) * m] = -Z[k]
    return R


def distance_errors(z: ArrayLike, d: ArrayLike) -> NDArray[np.float64]:
    """``e_k = |z_k|^2 - d_k^2``."""
    d = np.asarray(d, dtype=float)
    z = np.asarray(z, dtype=float)
    if d.size == 0 or z.size % d.size:
        raise InvalidInputError("z and d lengths are inconsistent")
    Z = z.reshape(d.size, -1)
    return np.einsum("ij,ij->i", Z, Z) - d * d


def q_matrix(G: FormationGraph, z: ArrayLike, m: int) -> NDArray[np.float64]:
    """``D_z^T B^T B D_z`` (bars implied); equals R(z) R(z)^T."""
    R = rigidity_matrix(G, z, m)
    return R @ R.T


def rigid_edge_count(n: int, m: int) -> int:
    """Edges of a minimally rigid framework: 2n-3 in the plane, 3n-6 in space."""
    if m == 2:
        return 2 * n - 3
    if m == 3:
        return 3 * n - 6
    raise InvalidInputError(f"ambient dimension must be 2 or 3, got {m}")


@dataclass(frozen=True)
class RigidityReport:
    ok: bool
    rank: int
    required: int
    num_edges: int
    reasons: tuple[str, ...] = field(default_factory=tuple)

    def __bool__(self) -> bool:
        return self.ok

    @property
    def reason(self) -> str:
        return "; ".join(self.reasons) if self.reasons else "infinitesimally and minimally rigid"


def is_inf_min_rigid(
    G: FormationGraph, z: ArrayLike, m: int, tol: float = RIGIDITY_RTOL
) -> RigidityReport:
    """Check rank{R(z)} and |E| against 2n-3 (plane) or 3n-6 (space)."""
    required = rigid_edge_count(G.n, m)
    R = rigidity_matrix(G, z, m)
    r = numlin.rank(R, tol) if np.any(R) else 0
    reasons = []
    if r != required:
        reasons.append(f"not infinitesimally rigid (rank R(z) = {r}, need {required})")
    if G.num_edges != required:
        reasons.append(f"not minimally rigid (|E|={G.num_edges}, need {required})")
    return RigidityReport(not reasons, r, required, G.num_edges, tuple(reasons))


@dataclass(frozen=True)
class ShapeSpec:
    """Desired shape: relative positions ``zstar`` and distances ``d``.

    ``positions`` holds a reference placement of the desired shape (one row per
    agent) when it is known; it fixes the body frame used for motion design.
    """

    m: int
    zstar: NDArray[np.float64]
    d: NDArray[np.float64]
    positions: NDArray[np.float64] | None = None

    def __post_init__(self):
        if self.m not in (2, 3):
            raise InvalidInputError(f"ambient dimension must be 2 or 3, got {self.m}")
        z = np.asarray(self.zstar, dtype=float).ravel()
        d = np.asarray(self.d, dtype=float).ravel()
        if z.size != d.size * self.m:
            raise InvalidInputError("zstar and d have inconsistent lengths")
        if np.any(d <= 0):
            raise InvalidInputError("desired distances must be positive")
        if not np.allclose(np.linalg.norm(z.reshape(-1, self.m), axis=1), d, rtol=1e-9, atol=0):
            raise InvalidInputError("d_k must equal |zstar_k|")
        object.__setattr__(self, "zstar", z)
        object.__setattr__(self, "d", d)
        if self.positions is not None:
            object.__setattr__(self, "positions", np.asarray(self.positions, dtype=float))

    @classmethod
    def from_positions(cls, G: FormationGraph, positions: ArrayLike) -> ShapeSpec:
        P = np.asarray(positions, dtype=float)
        if P.ndim != 2 or P.shape[0] != G.n:
            raise InvalidInputError(f"positions must have shape ({G.n}, m)")
        m = P.shape[1]
        z = relative_positions(G, P.ravel(), m)
        d = np.linalg.norm(z.reshape(-1, m), axis=1)
        return cls(m, z, d, P - P.mean(axis=0))

    @classmethod
    def from_relative(cls, G: FormationGraph, zstar: ArrayLike, m: int) -> ShapeSpec:
        """Shape from desired relative positions; reference placement recovered
        by least squares when ``zstar`` is realisable."""
        z = np.asarray(zstar, dtype=float).ravel()
        Z = _check_stacked(z, G.num_edges, m, "zstar")
        d = np.linalg.norm(Z, axis=1)
        P = np.linalg.lstsq(G.B.T, Z, rcond=None)[0]
        positions = None
        if np.allclose(G.B.T @ P, Z, atol=1e-9 * max(1.0, d.max())):
            positions = P - P.mean(axis=0)
        return cls(m, z, d, positions)

    def body_zstar(self, G: FormationGraph) -> NDArray[np.float64]:
        """Relative positions expressed in the body frame of the reference placement."""
        if self.positions is None:
            return self.zstar
        return relative_positions(G, self.positions.ravel(), self.m)


# --- canonical shapes -------------------------------------------------------


def equilateral_triangle(side: float = 1.0) -> NDArray[np.float64]:
    r = side / np.sqrt(3.0)
    ang = np.pi / 2 + 2 * np.pi / 3 * np.arange(3)
    return np.column_stack([r * np.cos(ang), r * np.sin(ang)])


def regular_tetrahedron(side: float = 1.0) -> NDArray[np.float64]:
    """Agents 1-3 span an equilateral base in z = 0, agent 4 is the apex."""
    base = equilateral_triangle(side)
    P = np.zeros((4, 3))
    P[:3, :2] = base
    P[3, 2] = side * np.sqrt(2.0 / 3.0)
    return P - P.mean(axis=0)


def regular_hexagon(side: float = 1.0) -> NDArray[np.float64]:
    """Vertex labels as in the six-agent experiment: 1 left, 6 right,
    2 and 5 at the bottom, 3 and 4 at the top."""
    s3 = np.sqrt(3.0)
    unit = np.array([[-2, 0], [-1, -s3], [-1, s3], [1, s3], [1, -s3], [2, 0]], dtype=float)
    return unit * (side / 2.0)
