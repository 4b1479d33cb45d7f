"""Approximate spectra of the dimer and the action-angle machinery behind them.

Dimensionless energies ``H`` refer to ``-S_x + u S_z**2``; physical (BH)
energies are ``2 J N H + C_N``.  Levels are labelled by the S_x quantum
number ``n = -N/2..N/2``; the Maslov index is zero, so quantization reads
``I = n / N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from .eigensolver import eig_symmetric_tridiagonal
from .errors import DomainError, NumericalFailure, ParameterError
from .fock_model import (
    ModelParams,
    build_hamiltonian_site_basis,
    energy_offset_cn,
    sx_quantum_numbers,
)

__all__ = [
    "METHODS",
    "SpectrumResult",
    "to_physical",
    "dimensionless_first",
    "dimensionless_second",
    "semiclassical_first",
    "semiclassical_second",
    "perturbative_spectrum",
    "sx_of_phi",
    "sx_derivatives",
    "action_integral",
    "solve_energy_for_action",
    "wkb_s2_winding",
    "wkb_s2_closed_form",
    "corrected_spectrum_iterative",
    "exact_spectrum",
    "compute_spectrum",
]

METHODS = ("exact", "bh1", "bh2", "pert1", "pert2", "wkb2")

SIMPSON_START = 4096
SIMPSON_MAX = 2**18
SIMPSON_TOL = 1e-10
# Imaginary offset of the integration contour for the S_2 winding.  Where
# S_x crosses zero on the real axis the integrand has a pole; the real part
# of the shifted-contour integral is the finite-part value.
CONTOUR_SHIFT = 0.05


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    n: np.ndarray
    energies: np.ndarray
    method: str

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"unknown spectrum method {self.method!r}")
        n = np.array(self.n, dtype=float)
        e = np.array(self.energies, dtype=float)
        if n.shape != e.shape:
            raise ParameterError("n and energies must have the same length")
        if not np.all(np.isfinite(e)):
            raise NumericalFailure(f"non-finite energies in {self.method} spectrum")
        n.setflags(write=False)
        e.setflags(write=False)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "energies", e)


def _check_n(p: ModelParams, n):
    n = np.asarray(n, dtype=float)
    if np.any(np.abs(n) > p.N / 2 + 1e-12):
        raise ParameterError(f"|n| must not exceed N/2 = {p.N / 2:g}")
    return n


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def to_physical(p: ModelParams, h):
    """Map dimensionless energies onto BH units."""
    return 2.0 * p.J * p.N * np.asarray(h) + energy_offset_cn(p)


def dimensionless_first(n, N: int, u: float):
    n = np.asarray(n, dtype=float)
    return _scalar(-n / N + u / 8.0 - u * n * n / (2.0 * N * N))


def dimensionless_second(n, N: int, u: float):
    n = np.asarray(n, dtype=float)
    extra = -n * u * u / (16.0 * N) + n**3 * u * u / (4.0 * N**3)
    return _scalar(dimensionless_first(n, N, u) + extra)


def semiclassical_first(p: ModelParams, n):
    n = _check_n(p, n)
    N, u = p.N, p.u
    return _scalar(2.0 * p.J * (-n + 3.0 * u * N / 8.0 - u / 2.0 - u * n * n / (2.0 * N)))


def semiclassical_second(p: ModelParams, n):
    n = _check_n(p, n)
    N, u = p.N, p.u
    extra = -u * u * n / 16.0 + u * u * n**3 / (4.0 * N * N)
    return _scalar(semiclassical_first(p, n) + 2.0 * p.J * extra)


def perturbative_spectrum(p: ModelParams, n, order: int = 2, physical: bool = False):
    """Quantum perturbation theory in u, to first or second order."""
    if order not in (1, 2):
        raise ParameterError("order must be 1 or 2")
    n = _check_n(p, n)
    N, u = float(p.N), p.u
    e = -n / N + (u / 8.0) * (1.0 + 2.0 / N - 4.0 * n * n / (N * N))
    if order == 2:
        e = e + (u * u / 16.0) * (
            -(n / N) * (1.0 + 2.0 / N - 2.0 / (N * N)) + 4.0 * n**3 / N**3
        )
    if physical:
        e = to_physical(p, e)
    return _scalar(e)


def _sx_raw(H, u, phi):
    # "+" root of u s^2 S^2 + S + H - u s^2 / 4 = 0 in a form that stays
    # finite as sin(phi) -> 0.  Works for complex phi.
    w = u * np.sin(phi) ** 2
    q = np.sqrt(1.0 + w * (w - 4.0 * H) + 0j)
    return (w - 4.0 * H) / (2.0 * (1.0 + q))


def sx_derivatives(H, u, phi):
    """``S_x`` and its first two phi-derivatives along an energy shell.

    Accepts complex ``phi``; no domain checks are made.
    """
    s = np.sin(phi)
    w = u * s * s
    dw = u * np.sin(2.0 * phi)
    d2w = 2.0 * u * np.cos(2.0 * phi)
    q = np.sqrt(1.0 + w * w - 4.0 * H * w + 0j)
    q_w = (w - 2.0 * H) / q
    q_ww = (1.0 - q_w * q_w) / q
    f = w - 4.0 * H
    g = 2.0 * (1.0 + q)
    g1 = 2.0 * q_w
    g2 = 2.0 * q_ww
    S = f / g
    S_w = (g - f * g1) / (g * g)
    S_ww = (-2.0 * g1 * g + 2.0 * f * g1 * g1 - f * g2 * g) / g**3
    return S, S_w * dw, S_ww * dw * dw + S_w * d2w


def sx_of_phi(H: float, u: float, phi):
    """S_x on the energy shell ``H`` at angle ``phi`` (the "+" branch).

    Raises DomainError when the discriminant is negative or the shell leaves
    the Bloch sphere (|S_x| > 1/2), i.e. the energy is outside the band.
    """
    phi = np.asarray(phi, dtype=float)
    w = u * np.sin(phi) ** 2
    disc = 1.0 + w * (w - 4.0 * H)
    if np.any(disc < 0):
        raise DomainError(f"negative discriminant for H={H:g}, u={u:g}")
    S = (w - 4.0 * H) / (2.0 * (1.0 + np.sqrt(disc)))
    if np.any(np.abs(S) > 0.5 + 1e-12):
        raise DomainError(f"H={H:g} lies outside the band for u={u:g}")
    return _scalar(S)


def _periodic_simpson(f, what: str):
    # Composite Simpson on [0, 2pi], doubling the panel count until two
    # successive estimates agree.
    panels = SIMPSON_START
    prev = None
    while panels <= SIMPSON_MAX:
        x = np.linspace(0.0, 2.0 * np.pi, panels + 1)
        val = simpson(f(x), x=x)
        if prev is not None and abs(val - prev) < SIMPSON_TOL * max(1.0, abs(val)):
            return val
        prev = val
        panels *= 2
    raise NumericalFailure(f"{what}: quadrature did not converge with {SIMPSON_MAX} panels")


def action_integral(H: float, u: float, order="exact") -> float:
    """Action ``I(H)``: numerical quadrature or the order-1/2 closed forms."""
    if order == "exact":
        sx_of_phi(H, u, np.linspace(0.0, np.pi / 2, 257))  # domain check
        val = _periodic_simpson(lambda x: _sx_raw(H, u, x).real, "action integral")
        return float(val / (2.0 * np.pi))
    order = int(order)
    I = -H + u / 8.0 - u * H * H / 2.0
    if order == 1:
        return I
    if order == 2:
        return I + 3.0 * u * u * H / 16.0 - 3.0 * u * u * H**3 / 4.0
    raise ParameterError(f"order must be 'exact', 1 or 2, got {order!r}")


def solve_energy_for_action(I: float, u: float, tol: float = 1e-14) -> float:
    """Invert the order-2 action cubic for H by Newton iteration seeded at -I."""
    H = -I
    for _ in range(100):
        f = action_integral(H, u, 2) - I
        df = -1.0 - u * H + 3.0 * u * u / 16.0 - 9.0 * u * u * H * H / 4.0
        step = f / df
        H -= step
        if abs(step) < tol:
            return H
    raise NumericalFailure(f"Newton solve of the action cubic failed for I={I:g}")


def wkb_s2_winding(H: float, u: float, N: int) -> float:
    """Second-order WKB energy shift from the winding of S_2 over one period."""
    if u == 0.0:
        return 0.0
    if abs(action_integral(H, u, 2)) < 1e-12:
        # the I = 0 orbit: the integrand is odd about the turning points
        return 0.0

    def integrand(x):
        S, S1, S2 = sx_derivatives(H, u, x + 1j * CONTOUR_SHIFT)
        return (-1.0 / (4.0 * S * S) * (-S1 * S1 / (2.0 * S) + S2)).real

    winding = _periodic_simpson(integrand, f"S_2 winding at H={H:g}")
    return float(winding / (2.0 * np.pi * N * N))


def wkb_s2_closed_form(H: float, u: float, N: int, sign: int = -1) -> float:
    """Large-|H| estimate ``sign * 3 u^2 (1/4 - H^2)^2 / (16 H^3 N^2)``.

    ``sign=-1`` is the textbook form; ``sign=+1`` agrees with the numerical
    winding to leading order in u.
    """
    if H == 0.0:
        raise DomainError("closed-form S_2 shift diverges at H = 0")
    return sign * 3.0 * u * u * (0.25 - H * H) ** 2 / (16.0 * H**3 * N * N)


def corrected_spectrum_iterative(
    p: ModelParams, tol: float = 1e-12, max_iter: int = 100
) -> SpectrumResult:
    """Spectrum with the S_2 correction, found by fixed-point iteration.

    Each level starts from the second-order energy, evaluates the S_2 shift
    and re-solves ``I(H) = n/N - shift``.  The map H -> H' can contract
    slowly with alternating sign, so steps are Aitken-accelerated
    (Steffensen); the fixed point is unchanged.
    """
    N, u = p.N, p.u
    ns = sx_quantum_numbers(N)
    H_out = np.empty_like(ns)

    def step(H, I):
        return solve_energy_for_action(I - wkb_s2_winding(H, u, N), u)

    for i, n in enumerate(ns):
        I = n / N
        if n == 0.0:
            H_out[i] = solve_energy_for_action(0.0, u)
            continue
        H = dimensionless_second(n, N, u)
        for _ in range(max_iter):
            H1 = step(H, I)
            if abs(H1 - H) < tol:
                H = H1
                break
            H2 = step(H1, I)
            curv = H2 - 2.0 * H1 + H
            H_new = H - (H1 - H) ** 2 / curv if curv != 0.0 else H2
            done = abs(H_new - H) < tol
            H = H_new
            if done:
                break
        else:
            raise NumericalFailure(f"corrected spectrum did not converge for n={n:g}")
        H_out[i] = H
    return SpectrumResult(ns, to_physical(p, H_out), "wkb2")


def exact_spectrum(p: ModelParams) -> SpectrumResult:
    """Exact levels; energy decreases with n, so ascending values map to n = N/2 - j."""
    dec = eig_symmetric_tridiagonal(build_hamiltonian_site_basis(p))
    ns = sx_quantum_numbers(p.N)
    return SpectrumResult(ns, dec.values[::-1], "exact")


def compute_spectrum(p: ModelParams, method: str) -> SpectrumResult:
    ns = sx_quantum_numbers(p.N)
    if method == "exact":
        return exact_spectrum(p)
    if method == "bh1":
        return SpectrumResult(ns, semiclassical_first(p, ns), method)
    if method == "bh2":
        return SpectrumResult(ns, semiclassical_second(p, ns), method)
    if method in ("pert1", "pert2"):
        order = int(method[-1])
        return SpectrumResult(ns, perturbative_spectrum(p, ns, order, physical=True), method)
    if method == "wkb2":
        return corrected_spectrum_iterative(p)
    raise ParameterError(f"unknown spectrum method {method!r}")
