"""Real symmetric eigensolver for tridiagonal and banded matrices.

Band matrices are first reduced to tridiagonal form by Givens rotations with
bulge chasing, then diagonalized by implicit-shift QL iteration.  The
rotations are accumulated, so eigenvectors always come back in the original
basis.  Kernels are compiled with numba; the algorithms themselves are plain
loops over rows of row-major arrays (eigenvectors are carried transposed so
rotations touch contiguous memory).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .errors import NumericalFailure, ParameterError
from .fock_model import BandedSymmetric, TridiagonalSymmetric

__all__ = [
    "EigenDecomposition",
    "MAX_SWEEPS",
    "reduce_to_tridiagonal",
    "eig_symmetric_tridiagonal",
    "eig_banded",
]

MAX_SWEEPS = 50  # QL sweeps allowed per eigenvalue before giving up


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues and the matching orthonormal eigenvector columns."""

    values: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        for arr in (self.values, self.vectors):
            arr.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.values.size

    def orthonormality_error(self) -> float:
        V = self.vectors
        return float(np.max(np.abs(V.T @ V - np.eye(V.shape[1]))))

    def residuals(self, matrix) -> np.ndarray:
        """``||A v_j - lambda_j v_j||_2`` for every column."""
        A = matrix.to_dense() if hasattr(matrix, "to_dense") else np.asarray(matrix)
        R = A @ self.vectors - self.vectors * self.values
        return np.linalg.norm(R, axis=0)


@numba.njit(cache=True)
def _rotate(A, Qt, p, q, c, s, lo, hi):
    # A <- G A G^T on planes (p, q); Q <- Q G^T, carried as rows of Qt.
    for j in range(lo, hi):
        ap = A[p, j]
        aq = A[q, j]
        A[p, j] = c * ap + s * aq
        A[q, j] = -s * ap + c * aq
    for i in range(lo, hi):
        ap = A[i, p]
        aq = A[i, q]
        A[i, p] = c * ap + s * aq
        A[i, q] = -s * ap + c * aq
    for j in range(Qt.shape[1]):
        ap = Qt[p, j]
        aq = Qt[q, j]
        Qt[p, j] = c * ap + s * aq
        Qt[q, j] = -s * ap + c * aq


@numba.njit(cache=True)
def _annihilate(A, Qt, row, col, b):
    # Zero A[row, col] (and its mirror) by rotating planes (row - 1, row).
    x = A[row - 1, col]
    y = A[row, col]
    if y == 0.0:
        return False
    r = math.hypot(x, y)
    c = x / r
    s = y / r
    D = A.shape[0]
    lo = max(0, row - 1 - b - 2)
    hi = min(D, row + b + 2)
    _rotate(A, Qt, row - 1, row, c, s, lo, hi)
    A[row, col] = 0.0
    A[col, row] = 0.0
    return True


@numba.njit(cache=True)
def _band_to_tridiagonal(A, Qt, b):
    D = A.shape[0]
    for k in range(D - 2):
        for l in range(min(k + b, D - 1), k + 1, -1):
            if not _annihilate(A, Qt, l, k, b):
                continue
            # fill-in appears at (q + b, p) for the planes (p, q) just used
            p = l - 1
            q = l
            while q + b < D:
                row = q + b
                if not _annihilate(A, Qt, row, p, b):
                    break
                p = row - 1
                q = row


@numba.njit(cache=True)
def _tql_implicit(d, e, Zt, max_sweeps):
    # d: diagonal, e[i] couples i and i+1 (e[n-1] is scratch).  Returns the
    # index of the eigenvalue that failed to converge, or -1.
    n = d.size
    eps = np.finfo(np.float64).eps
    for l in range(n):
        sweeps = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= eps * dd:
                    break
                m += 1
            if m == l:
                break
            if sweeps == max_sweeps:
                return l
            sweeps += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            i = m - 1
            while i >= l:
                f = s * e[i]
                bb = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * bb
                p = s * r
                d[i + 1] = g + p
                g = c * r - bb
                for k in range(Zt.shape[1]):
                    f = Zt[i + 1, k]
                    Zt[i + 1, k] = s * Zt[i, k] + c * f
                    Zt[i, k] = c * Zt[i, k] - s * f
                i -= 1
            if underflow:
                continue
            d[l] -= p
            e[l] = g
            e[m] = 0.0
    return -1


def reduce_to_tridiagonal(m: BandedSymmetric) -> tuple[TridiagonalSymmetric, np.ndarray]:
    """Orthogonal similarity ``Q^T A Q = T`` with ``T`` tridiagonal.

    Returns ``(T, Q)``.  Bandwidth 0 and 1 inputs come back unchanged with
    ``Q = I``.
    """
    D = m.dimension
    if m.bandwidth <= 1:
        off = m.bands[1] if m.bandwidth == 1 else np.zeros(D - 1)
        return TridiagonalSymmetric(m.bands[0], off), np.eye(D)
    A = np.ascontiguousarray(m.to_dense())
    Qt = np.eye(D)
    _band_to_tridiagonal(A, Qt, m.bandwidth)
    diag = np.diag(A).copy()
    off = 0.5 * (np.diag(A, 1) + np.diag(A, -1))
    return TridiagonalSymmetric(diag, off), np.ascontiguousarray(Qt.T)


def _solve(t: TridiagonalSymmetric, Q: np.ndarray | None) -> EigenDecomposition:
    D = t.dimension
    d = np.array(t.diag, dtype=np.float64)
    e = np.zeros(D)
    e[: D - 1] = t.offdiag
    Zt = np.eye(D) if Q is None else np.ascontiguousarray(Q.T)
    failed = _tql_implicit(d, e, Zt, MAX_SWEEPS)
    if failed >= 0:
        raise NumericalFailure(
            f"QL iteration did not converge for eigenvalue {failed} "
            f"within {MAX_SWEEPS} sweeps (dimension {D})"
        )
    order = np.argsort(d, kind="stable")
    return EigenDecomposition(d[order], np.ascontiguousarray(Zt[order].T))


def eig_symmetric_tridiagonal(t: TridiagonalSymmetric) -> EigenDecomposition:
    return _solve(t, None)


def eig_banded(m: BandedSymmetric) -> EigenDecomposition:
    if not isinstance(m, BandedSymmetric):
        raise ParameterError("eig_banded expects a BandedSymmetric matrix")
    t, Q = reduce_to_tridiagonal(m)
    return _solve(t, Q)
