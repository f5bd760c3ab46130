"""Dense linear-algebra kernels: rank, null spaces, projections, eigenvalues.

Rank, null space and least squares sit on top of the LAPACK SVD shipped with
numpy. Eigenvalues of general real matrices are computed here with balancing,
Householder reduction to Hessenberg form and the Francis double-shift QR
iteration, so that stability verdicts do not depend on a black box.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import InvalidInputError

DEFAULT_RTOL = 1e-9
_EPS = np.finfo(float).eps


def _as_matrix(M: ArrayLike) -> NDArray[np.float64]:
    A = np.asarray(M, dtype=float)
    if A.ndim == 1:
        A = A.reshape(1, -1)
    if A.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix has non-finite entries")
    return A


@dataclass(frozen=True)
class Subspace:
    """Orthonormal basis of a subspace of R^ambient_dim.

    ``basis`` has one basis vector per row, so its shape is (dim, ambient_dim).
    """

    ambient_dim: int
    basis: NDArray[np.float64]

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float).reshape(-1, self.ambient_dim)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def projector(self) -> NDArray[np.float64]:
        return self.basis.T @ self.basis

    def contains(self, x: ArrayLike, tol: float = 1e-9) -> bool:
        """True if ``x`` lies in the subspace up to ``tol`` relative to its norm."""
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x - project_onto(self, x))
        return bool(r <= tol * max(np.linalg.norm(x), 1.0))

    @classmethod
    def span(cls, vectors: ArrayLike, ambient_dim: int, tol: float = DEFAULT_RTOL) -> Subspace:
        """Orthonormal basis for the span of the rows of ``vectors``."""
        V = np.asarray(vectors, dtype=float).reshape(-1, ambient_dim)
        if V.shape[0] == 0:
            return cls(ambient_dim, np.zeros((0, ambient_dim)))
        _, s, vt = np.linalg.svd(V, full_matrices=False)
        if s.size == 0 or s[0] == 0.0:
            return cls(ambient_dim, np.zeros((0, ambient_dim)))
        r = int(np.sum(s > tol * s[0]))
        return cls(ambient_dim, vt[:r])

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(n, np.eye(n))


def singular_values(M: ArrayLike) -> NDArray[np.float64]:
    return np.linalg.svd(_as_matrix(M), compute_uv=False)


def rank(M: ArrayLike, tol: float = DEFAULT_RTOL) -> int:
    """Numerical rank: singular values above ``tol`` times the largest one."""
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    s = singular_values(M)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


def null_space(M: ArrayLike, tol: float = DEFAULT_RTOL) -> Subspace:
    """Orthonormal basis of the numerical kernel of ``M``.

    Directions whose singular value is at most ``tol * sigma_max`` are kept;
    a zero matrix returns the whole domain.
    """
    if tol <= 0:
        raise InvalidInputError("tol must be positive")
    A = _as_matrix(M)
    cols = A.shape[1]
    _, s, vt = np.linalg.svd(A, full_matrices=True)
    if s.size == 0 or s[0] == 0.0:
        return Subspace.full(cols)
    r = int(np.sum(s > tol * s[0]))
    return Subspace(cols, vt[r:])


def orthogonal_complement(S: Subspace, tol: float = DEFAULT_RTOL) -> Subspace:
    if S.dim == 0:
        return Subspace.full(S.ambient_dim)
    return null_space(S.basis, tol)


def project_onto(S: Subspace, x: ArrayLike) -> NDArray[np.float64]:
    """Orthogonal projection of ``x`` onto ``S``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != S.ambient_dim:
        raise InvalidInputError(
            f"vector of length {x.shape[-1]} does not live in R^{S.ambient_dim}"
        )
    return (x @ S.basis.T) @ S.basis


def least_squares(M: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Minimum-norm minimiser of ||M x - b||."""
    A = _as_matrix(M)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != A.shape[0]:
        raise InvalidInputError(f"rhs has {b.shape[0]} rows, matrix has {A.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise InvalidInputError("rhs has non-finite entries")
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return x


# --- eigenvalues ------------------------------------------------------------


def _balance(a: NDArray[np.float64]) -> None:
    # Parlett-Reinsch diagonal similarity scaling by powers of two, in place.
    radix = 2.0
    sqrdx = radix * radix
    n = a.shape[0]
    done = False
    while not done:
        done = True
        for i in range(n):
            c = np.sum(np.abs(a[:, i])) - abs(a[i, i])
            r = np.sum(np.abs(a[i, :])) - abs(a[i, i])
            if c == 0.0 or r == 0.0:
                continue
            g = r / radix
            f = 1.0
            s = c + r
            while c < g:
                f *= radix
                c *= sqrdx
            g = r * radix
            while c > g:
                f /= radix
                c /= sqrdx
            if (c + r) / f < 0.95 * s:
                done = False
                a[i, :] /= f
                a[:, i] *= f


def hessenberg(M: ArrayLike) -> NDArray[np.float64]:
    """Upper Hessenberg matrix orthogonally similar to ``M`` (Householder)."""
    a = _as_matrix(M).copy()
    n = a.shape[0]
    for k in range(n - 2):
        x = a[k + 1 :, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        v = x.copy()
        v[0] += np.copysign(alpha, x[0])
        v /= np.linalg.norm(v)
        a[k + 1 :, k:] -= 2.0 * np.outer(v, v @ a[k + 1 :, k:])
        a[:, k + 1 :] -= 2.0 * np.outer(a[:, k + 1 :] @ v, v)
        a[k + 2 :, k] = 0.0
    return a


def _hqr(a: NDArray[np.float64]) -> NDArray[np.complex128]:
    # Francis double-shift QR on an upper Hessenberg matrix (destroys ``a``).
    n = a.shape[0]
    wr = np.zeros(n)
    wi = np.zeros(n)
    anorm = float(np.sum(np.abs(np.triu(a, -1))))
    nn = n - 1
    t = 0.0
    x = y = w = 0.0
    while nn >= 0:
        its = 0
        while True:
            l = nn
            while l >= 1:
                s = abs(a[l - 1, l - 1]) + abs(a[l, l])
                if s == 0.0:
                    s = anorm
                if abs(a[l, l - 1]) <= _EPS * s:
                    a[l, l - 1] = 0.0
                    break
                l -= 1
            x = a[nn, nn]
            if l == nn:
                wr[nn] = x + t
                nn -= 1
                break
            y = a[nn - 1, nn - 1]
            w = a[nn, nn - 1] * a[nn - 1, nn]
            if l == nn - 1:
                p = 0.5 * (y - x)
                q = p * p + w
                z = np.sqrt(abs(q))
                x += t
                if q >= 0.0:
                    z = p + np.copysign(z, p)
                    wr[nn - 1] = wr[nn] = x + z
                    if z != 0.0:
                        wr[nn] = x - w / z
                else:
                    wr[nn - 1] = wr[nn] = x + p
                    wi[nn - 1] = -z
                    wi[nn] = z
                nn -= 2
                break
            if its == 60:
                raise ArithmeticError("QR iteration failed to converge")
            if its in (10, 20, 40):
                # exceptional shift
                t += x
                for i in range(nn + 1):
                    a[i, i] -= x
                s = abs(a[nn, nn - 1]) + abs(a[nn - 1, nn - 2])
                y = x = 0.75 * s
                w = -0.4375 * s * s
            its += 1
            m = nn - 2
            while m >= l:
                z = a[m, m]
                r = x - z
                s = y - z
                p = (r * s - w) / a[m + 1, m] + a[m, m + 1]
                q = a[m + 1, m + 1] - z - r - s
                r = a[m + 2, m + 1]
                s = abs(p) + abs(q) + abs(r)
                p /= s
                q /= s
                r /= s
                if m == l:
                    break
                u = abs(a[m, m - 1]) * (abs(q) + abs(r))
                v = abs(p) * (abs(a[m - 1, m - 1]) + abs(z) + abs(a[m + 1, m + 1]))
                if u <= _EPS * v:
                    break
                m -= 1
            for i in range(m + 2, nn + 1):
                a[i, i - 2] = 0.0
                if i != m + 2:
                    a[i, i - 3] = 0.0
            for k in range(m, nn):
                if k != m:
                    p = a[k, k - 1]
                    q = a[k + 1, k - 1]
                    r = a[k + 2, k - 1] if k != nn - 1 else 0.0
                    x = abs(p) + abs(q) + abs(r)
                    if x != 0.0:
                        p /= x
                        q /= x
                        r /= x
                s = np.copysign(np.sqrt(p * p + q * q + r * r), p)
                if s == 0.0:
                    continue
                if k == m:
                    if l != m:
                        a[k, k - 1] = -a[k, k - 1]
                else:
                    a[k, k - 1] = -s * x
                p += s
                x = p / s
                y = q / s
                z = r / s
                q /= p
                r /= p
                # row transformation
                rows = a[k, k : nn + 1] + q * a[k + 1, k : nn + 1]
                if k != nn - 1:
                    rows += r * a[k + 2, k : nn + 1]
                    a[k + 2, k : nn + 1] -= rows * z
                a[k + 1, k : nn + 1] -= rows * y
                a[k, k : nn + 1] -= rows * x
                # column transformation
                top = min(nn, k + 3)
                cols = x * a[l : top + 1, k] + y * a[l : top + 1, k + 1]
                if k != nn - 1:
                    cols += z * a[l : top + 1, k + 2]
                    a[l : top + 1, k + 2] -= cols * r
                a[l : top + 1, k + 1] -= cols * q
                a[l : top + 1, k] -= cols
    return wr + 1j * wi


def eigenvalues(M: ArrayLike) -> NDArray[np.complex128]:
    """All eigenvalues of a real square matrix, with multiplicity.

    Returned in descending order of real part (ties broken by imaginary part).
    """
    A = _as_matrix(M)
    if A.shape[0] != A.shape[1]:
        raise InvalidInputError(f"eigenvalues need a square matrix, got {A.shape}")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    a = A.copy()
    _balance(a)
    h = hessenberg(a)
    lam = _hqr(h)
    order = np.lexsort((-lam.imag, -lam.real))
    return lam[order]


def spectral_abscissa(M: ArrayLike) -> float:
    """Largest real part over the spectrum of ``M``."""
    return float(np.max(eigenvalues(M).real))
