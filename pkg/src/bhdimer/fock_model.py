"""Bose-Hubbard dimer Hamiltonians in the site-number and S_x bases.

Site basis: index ``k = n_L`` in ``0..N``.  S_x basis: quantum number
``n = -N/2..N/2`` stored at index ``i = n + N/2``; ``n`` is half-integer for
odd ``N``.  The spin Hamiltonian ``-S_x + u S_z**2`` is dimensionless and
relates to the physical one through ``H_site = 2 J N H_spin + C_N``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, RabiRegimeWarning

__all__ = [
    "ModelParams",
    "TridiagonalSymmetric",
    "BandedSymmetric",
    "build_hamiltonian_site_basis",
    "build_hamiltonian_spin_basis",
    "energy_offset_cn",
    "sx_quantum_numbers",
    "site_sz_diagonal",
    "spin_ladder",
    "spin_sz_matrix",
]


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters of the dimer.

    ``u = U N / J`` is stored alongside ``U``; build instances with
    :meth:`from_u` when the dimensionless coupling is the natural input.
    """

    J: float
    U: float
    N: int
    u: float = float("nan")

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise ParameterError(f"N must be an integer >= 1, got {self.N!r}")
        J, U = float(self.J), float(self.U)
        if not (math.isfinite(J) and J > 0):
            raise ParameterError(f"J must be finite and > 0, got {self.J!r}")
        if not (math.isfinite(U) and U >= 0):
            raise ParameterError(f"U must be finite and >= 0, got {self.U!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "U", U)
        if math.isnan(self.u):
            object.__setattr__(self, "u", U * self.N / J)
        if self.u >= 1.0:
            warnings.warn(
                f"u = {self.u:g} >= 1: outside the Rabi regime, approximate "
                "spectra and revival formulas degrade",
                RabiRegimeWarning,
                stacklevel=3,
            )

    @classmethod
    def from_u(cls, J: float, u: float, N: int) -> "ModelParams":
        if not (math.isfinite(u) and u >= 0):
            raise ParameterError(f"u must be finite and >= 0, got {u!r}")
        return cls(J=J, U=u * J / N, N=N, u=float(u))

    @property
    def dimension(self) -> int:
        return self.N + 1


@dataclass(frozen=True, eq=False)
class TridiagonalSymmetric:
    """Real symmetric tridiagonal matrix stored as diagonal + off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.array(self.diag, dtype=float)
        e = np.array(self.offdiag, dtype=float)
        if d.ndim != 1 or e.ndim != 1 or d.size < 1 or e.size != d.size - 1:
            raise ParameterError("offdiag must have exactly len(diag) - 1 entries")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise ParameterError("matrix entries must be finite")
        d.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def dimension(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag[:, None] * x if x.ndim == 2 else self.diag * x
        y = np.array(y, dtype=np.result_type(x, float))
        y[:-1] += self.offdiag.reshape((-1,) + (1,) * (x.ndim - 1)) * x[1:]
        y[1:] += self.offdiag.reshape((-1,) + (1,) * (x.ndim - 1)) * x[:-1]
        return y


@dataclass(frozen=True, eq=False)
class BandedSymmetric:
    """Real symmetric band matrix; ``bands[j][i] = A[i, i + j]``.

    ``bands[0]`` is the diagonal (length D) and ``bands[j]`` the j-th
    super-diagonal (length D - j).  Only the upper half is stored.
    """

    bands: tuple

    def __post_init__(self):
        bands = tuple(np.array(b, dtype=float) for b in self.bands)
        if not bands or bands[0].ndim != 1 or bands[0].size < 1:
            raise ParameterError("a banded matrix needs a non-empty diagonal")
        D = bands[0].size
        for j, b in enumerate(bands):
            if b.ndim != 1 or b.size != max(D - j, 0):
                raise ParameterError(f"band {j} must have length {max(D - j, 0)}")
            if not np.all(np.isfinite(b)):
                raise ParameterError("matrix entries must be finite")
            b.setflags(write=False)
        object.__setattr__(self, "bands", bands)

    @property
    def dimension(self) -> int:
        return self.bands[0].size

    @property
    def bandwidth(self) -> int:
        return len(self.bands) - 1

    def to_dense(self) -> np.ndarray:
        D = self.dimension
        A = np.zeros((D, D))
        for j, b in enumerate(self.bands):
            if b.size:
                A += np.diag(b, j)
                if j:
                    A += np.diag(b, -j)
        return A

    @classmethod
    def from_dense(cls, A: np.ndarray, bandwidth: int) -> "BandedSymmetric":
        A = np.asarray(A, dtype=float)
        return cls(tuple(np.diag(A, j).copy() for j in range(bandwidth + 1)))


def energy_offset_cn(p: ModelParams) -> float:
    """Constant ``C_N = N**2 U / 2 - N U`` separating the site and spin forms."""
    return 0.5 * p.N * p.N * p.U - p.N * p.U


def site_sz_diagonal(N: int) -> np.ndarray:
    """Diagonal of ``S_z = (n_L - n_R) / (2N)`` in the site basis."""
    k = np.arange(N + 1, dtype=float)
    return (2.0 * k - N) / (2.0 * N)


def build_hamiltonian_site_basis(p: ModelParams) -> TridiagonalSymmetric:
    N, J, U = p.N, p.J, p.U
    k = np.arange(N + 1, dtype=float)
    diag = U * (k * (k - 1) + (N - k) * (N - k - 1))
    kk = k[:-1]
    offdiag = -J * np.sqrt((kk + 1.0) * (N - kk))
    return TridiagonalSymmetric(diag, offdiag)


def sx_quantum_numbers(N: int) -> np.ndarray:
    """``n = -N/2, ..., N/2`` in storage order."""
    return np.arange(N + 1, dtype=float) - N / 2.0


def spin_ladder(N: int) -> np.ndarray:
    """``<n+1| S+ |n>`` with the 1/N scaling, for n = -N/2 .. N/2 - 1."""
    n = sx_quantum_numbers(N)[:-1]
    return np.sqrt((N / 2.0 + n + 1.0) * (N / 2.0 - n)) / N


def spin_sz_matrix(N: int) -> TridiagonalSymmetric:
    """``S_z = (S+ + S-) / 2`` in the S_x basis (zero diagonal)."""
    return TridiagonalSymmetric(np.zeros(N + 1), 0.5 * spin_ladder(N))


def build_hamiltonian_spin_basis(p: ModelParams) -> BandedSymmetric:
    """``H = -S_x + u S_z**2`` with exact ladder matrix elements.

    S_z**2 is pentadiagonal with a vanishing first off-diagonal, so the
    band storage carries three bands with the middle one identically zero.
    """
    N, u = p.N, p.u
    n = sx_quantum_numbers(N)
    a = spin_ladder(N)
    # (S+ + S-)**2 / 4: diagonal from S+S- + S-S+, second band from S+**2.
    a_up = np.concatenate([a, [0.0]])
    a_down = np.concatenate([[0.0], a])
    sz2_diag = 0.25 * (a_up**2 + a_down**2)
    sz2_band2 = 0.25 * a[:-1] * a[1:]
    return BandedSymmetric(
        (
            -n / N + u * sz2_diag,
            np.zeros(N),
            u * sz2_band2,
        )
    )
