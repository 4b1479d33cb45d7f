"""Collapse and revival of the population imbalance.

Exact dynamics come from the spectral decomposition of the site-basis
Hamiltonian with phases ``exp(-i E t)`` (E in physical units, times in 1/J).
The analytic formula is a sum of Gaussian revival packets, one per revival
index ``m``, accumulated as complex numbers so that its modulus is the
envelope.  Supporting pieces: Gaussian-integral coefficients, eigenstate
correction factors, a brute-force discrete sum over S_x levels and the
Bessel-overlap check of semiclassical eigenstates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, jv

from .eigensolver import eig_banded, eig_symmetric_tridiagonal
from .errors import DomainError, ParameterError
from .fock_model import (
    ModelParams,
    build_hamiltonian_site_basis,
    build_hamiltonian_spin_basis,
    site_sz_diagonal,
    sx_quantum_numbers,
)

__all__ = [
    "QuantumState",
    "InitialCondition",
    "RevivalParams",
    "TimeSeries",
    "PHASES",
    "initial_state",
    "gaussian_sx_amplitudes",
    "evolve_state",
    "evolve_delta_exact",
    "analytic_delta",
    "timescales",
    "envelope_coefficients",
    "gaussian_sm",
    "correction_factors",
    "discrete_sum_reference",
    "bessel_overlap_check",
    "envelope_peaks",
    "locate_revival",
    "compare_series",
    "envelope_rmse",
]

PHASES = ("leading", "full", "rabi")
BETA_CUTOFF = 1e-6  # |cos 2 alpha| below this is rejected
GAUSS_WIDTHS = 6.0
_CHUNK = 8192


@dataclass(frozen=True, eq=False)
class QuantumState:
    amplitudes: np.ndarray
    basis: str

    def __post_init__(self):
        if self.basis not in ("site", "sx"):
            raise ParameterError(f"basis must be 'site' or 'sx', got {self.basis!r}")
        a = np.array(self.amplitudes, dtype=complex)
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > 1e-12:
            raise ParameterError(f"state is not normalized (norm {nrm:.15g})")
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)


@dataclass(frozen=True)
class InitialCondition:
    """``all_left`` puts every particle on site L; ``two_site`` is the
    product state with amplitude sin(alpha) on L and cos(alpha) on R."""

    kind: str = "all_left"
    alpha: float = math.pi / 2

    def __post_init__(self):
        if self.kind not in ("all_left", "two_site"):
            raise ParameterError(f"unknown initial condition {self.kind!r}")
        if self.kind == "all_left":
            object.__setattr__(self, "alpha", math.pi / 2)
        a = float(self.alpha)
        if not (0.0 <= a <= math.pi / 2):
            raise ParameterError(f"alpha must lie in [0, pi/2], got {a!r}")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def from_cos_alpha(cls, cos_alpha: float) -> "InitialCondition":
        if not (0.0 <= cos_alpha <= 1.0):
            raise ParameterError(f"cos(alpha) must lie in [0, 1], got {cos_alpha!r}")
        return cls("two_site", math.acos(cos_alpha))

    def trig(self) -> tuple[float, float]:
        """(sin alpha, cos alpha) with exact zeros at the interval ends."""
        if self.kind == "all_left":
            return 1.0, 0.0
        s, c = math.sin(self.alpha), math.cos(self.alpha)
        return (0.0 if abs(s) < 1e-15 else s), (0.0 if abs(c) < 1e-15 else c)


@dataclass(frozen=True)
class RevivalParams:
    """Revival bookkeeping; times are math.inf when u = 0.

    ``m_max`` is kept as a real number so that ``T_B = m_max * T_R``;
    ``T_B_approx`` is the leading-order closed form for the all-left case.
    """

    beta: float
    gamma: float
    n_max: float
    eps1: float
    eps2: float
    T_c: float
    T_R: float
    T_B: float
    T_B_approx: float
    m_max: float

    def revival_width(self, p: ModelParams, m: int) -> float:
        if p.u == 0:
            return math.inf
        return math.sqrt(2 * p.N * (1 + (9 / 16) * p.u**2 * m * m * math.pi**2)) / (p.J * p.u)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        v = np.array(self.values, dtype=float)
        if t.ndim != 1 or t.shape != v.shape:
            raise ParameterError("times and values must be 1-d and equally long")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ParameterError("times must be strictly increasing")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)


def _signed_log_power(base: float, expo: np.ndarray):
    # log|base**expo| and its sign, with 0**0 = 1
    if base == 0.0:
        logabs = np.where(expo == 0, 0.0, -np.inf)
        return logabs, np.ones_like(expo)
    sign = np.where((base < 0) & (expo % 2 == 1), -1.0, 1.0)
    return expo * math.log(abs(base)), sign


def initial_state(N: int, ic: InitialCondition, basis: str = "site") -> QuantumState:
    """Exact (binomial) initial amplitudes in the site or S_x basis."""
    s, c = ic.trig()
    k = np.arange(N + 1, dtype=float)
    log_binom = gammaln(N + 1.0) - gammaln(k + 1.0) - gammaln(N - k + 1.0)
    if basis == "site":
        ls, sg1 = _signed_log_power(s, k)
        lc, sg2 = _signed_log_power(c, N - k)
        amp = sg1 * sg2 * np.exp(0.5 * log_binom + ls + lc)
    elif basis == "sx":
        # k = N/2 + n counts the quanta of S_x
        lp, sg1 = _signed_log_power(c + s, k)
        lm, sg2 = _signed_log_power(s - c, N - k)
        amp = sg1 * sg2 * np.exp(0.5 * log_binom - 0.5 * N * math.log(2.0) + lp + lm)
    else:
        raise ParameterError(f"basis must be 'site' or 'sx', got {basis!r}")
    return QuantumState(amp / np.linalg.norm(amp), basis)


def gaussian_sx_amplitudes(N: int, ic: InitialCondition) -> np.ndarray:
    """Gaussian approximation to the S_x-basis amplitudes (up to sign)."""
    s, c = ic.trig()
    n = sx_quantum_numbers(N)
    beta = 1.0 / (c * c - s * s) ** 2
    n_max = 0.5 * N * 2 * s * c
    return (2.0 / (math.pi * N * beta)) ** 0.25 * np.exp(-((n - n_max) ** 2) / (N * beta))


class _Spectral:
    """Eigendecomposition of the site Hamiltonian plus projected operators."""

    def __init__(self, p: ModelParams):
        dec = eig_symmetric_tridiagonal(build_hamiltonian_site_basis(p))
        self.E = dec.values
        self.V = dec.vectors
        N = p.N
        k = np.arange(N, dtype=float)
        self.hop = np.sqrt((k + 1.0) * (N - k))  # <k+1| a_L^+ a_R |k>
        self.N = N

    def sz(self):
        return self.V.T @ (site_sz_diagonal(self.N)[:, None] * self.V)

    def sy_antisym(self):
        # V^T (A - A^T) V with A[k+1, k] = hop[k]; S_y = (A - A^T) / (2 i N)
        V = self.V
        AV = np.zeros_like(V)
        AV[1:] = self.hop[:, None] * V[:-1]
        AV[:-1] -= self.hop[:, None] * V[1:]
        return V.T @ AV


def evolve_state(p: ModelParams, ic: InitialCondition, t: float) -> QuantumState:
    """Site-basis state at time t."""
    sp = _Spectral(p)
    b = sp.V.T @ initial_state(p.N, ic, "site").amplitudes.real
    return QuantumState(sp.V @ (np.exp(-1j * sp.E * t) * b), "site")


def _pair_sum(times, weights, freqs, const, trig):
    out = np.empty(times.size)
    for s in range(0, times.size, _CHUNK):
        tt = times[s : s + _CHUNK]
        out[s : s + _CHUNK] = const + trig(np.outer(tt, freqs)) @ weights
    return out


def evolve_delta_exact(p: ModelParams, ic: InitialCondition, times) -> tuple[TimeSeries, TimeSeries]:
    """Exact Delta(t) and <S_y>(t) via the spectral decomposition.

    Both observables reduce to sums over eigenvalue pairs; pairs with
    negligible weight are dropped before the time loop.
    """
    times = np.asarray(times, dtype=float)
    sp = _Spectral(p)
    b = sp.V.T @ initial_state(p.N, ic, "site").amplitudes.real
    bb = np.outer(b, b)
    iu = np.triu_indices(b.size, 1)
    omega = (sp.E[:, None] - sp.E[None, :])[iu]

    wz = 2.0 * (bb * sp.sz())[iu]
    keep = np.abs(wz) > 1e-15
    const = float(np.sum(b * b * np.diag(sp.sz())))
    delta = _pair_sum(times, wz[keep], omega[keep], const, np.cos)

    wy = (bb * sp.sy_antisym())[iu] / p.N
    keep = np.abs(wy) > 1e-15
    sy = _pair_sum(times, wy[keep], omega[keep], 0.0, np.sin)
    return TimeSeries(times, delta, "delta_exact"), TimeSeries(times, sy, "sy_exact")


def timescales(p: ModelParams, ic: InitialCondition = InitialCondition()) -> RevivalParams:
    s, c = ic.trig()
    cos2a = c * c - s * s
    sin2a = 2.0 * s * c
    if abs(cos2a) < BETA_CUTOFF:
        raise DomainError("alpha too close to pi/4: the revival width factor diverges")
    beta = 1.0 / cos2a**2
    N, J, u = p.N, p.J, p.u
    gamma = 1.0 / (1.0 - 0.75 * u * sin2a)
    n_max = 0.5 * N * sin2a
    eps1 = (1.0 / math.sqrt(N)) * (2.0 / (1.0 - sin2a)) * abs(cos2a) if sin2a < 1 else math.inf
    eps2 = 0.5 * u * sin2a
    if u == 0:
        inf = math.inf
        return RevivalParams(beta, gamma, n_max, eps1, eps2, inf, inf, inf, inf, inf)
    T_c = math.sqrt(2 * N) / (J * u)
    T_R = gamma * math.pi * N / (u * J)
    m_max = math.sqrt(2 * (math.pi**2 * N - 8)) / (3 * u * math.pi) if math.pi**2 * N > 8 else 0.0
    T_B_approx = math.pi * math.sqrt(2.0) * N**1.5 / (3 * u * u * J)
    return RevivalParams(beta, gamma, n_max, eps1, eps2, T_c, T_R, m_max * T_R, T_B_approx, m_max)


def analytic_delta(
    p: ModelParams,
    ic: InitialCondition,
    times,
    phase: str = "leading",
    normalize: bool = True,
) -> tuple[TimeSeries, TimeSeries]:
    """Sum of Gaussian revival packets; returns (Delta, envelope).

    ``phase`` selects the fast carrier: ``leading`` drops the 1/N**2 term,
    ``full`` keeps it, ``rabi`` replaces everything by the bare 2Jt.  With
    ``normalize`` the m=0 packet is scaled to amplitude |cos 2 alpha|/2 at
    t=0, which makes the u=0 limit exact.
    """
    if phase not in PHASES:
        raise ParameterError(f"phase must be one of {PHASES}")
    times = np.asarray(times, dtype=float)
    rp = timescales(p, ic)
    s, c = ic.trig()
    cos2a = c * c - s * s
    N, J, u = p.N, p.J, p.u
    beta, gamma = rp.beta, rp.gamma
    pref = math.sqrt(beta * (N * N / 4.0 - rp.n_max**2)) / N
    sign = -math.copysign(1.0, cos2a)
    phi = J * (2.0 + u * u / 8.0 + u / N)
    c3 = 3.0 / (8.0 * beta)
    if phase == "full":
        phi -= J * u * u / (2.0 * N * N)
        c3 = (3.0 / 8.0) * (1.0 / beta + 1.0 / N)

    if u == 0:
        ms = [0]
    else:
        M = int(math.floor(rp.m_max)) + 2
        ms = range(-M, M + 1)
        if times.size:
            # packet m sits at m * spacing with half-width <= reach0 + slope |m|
            spacing = rp.T_R - 3 * math.pi / (2 * J)
            reach0 = GAUSS_WIDTHS * math.sqrt(N * beta) / (J * u)
            slope = GAUSS_WIDTHS * math.sqrt(N / beta) * 0.75 * gamma * math.pi / J
            if spacing > slope:
                t_lo, t_hi = float(times.min()), float(times.max())
                lo = math.floor(min((t_lo - reach0) / (spacing + slope), (t_lo - reach0) / (spacing - slope)))
                hi = math.ceil((t_hi + reach0) / (spacing - slope))
                ms = range(max(-M, lo), min(M, hi) + 1)

    sorted_times = times.size < 2 or bool(np.all(np.diff(times) > 0))
    z = np.zeros(times.size, dtype=complex)
    for m in ms:
        den = beta**2 + (9 / 16) * u * u * m * m * gamma**2 * math.pi**2
        eta = beta**3 / 2.0 + (9 / 8) * beta * u * u * m * m * math.pi**2
        centre = (m * rp.T_R - 3 * m * math.pi / (2 * J)) if m else 0.0
        if u == 0:
            idx = slice(None)
        else:
            reach = GAUSS_WIDTHS * math.sqrt(N * den / beta) / (J * u)
            if sorted_times:
                lo, hi = np.searchsorted(times, [centre - reach, centre + reach])
                idx = slice(lo, hi)
            else:
                idx = np.nonzero(np.abs(times - centre) < reach)[0]
        t = times[idx]
        if t.size == 0:
            continue
        tau = t - m * rp.T_R if m else t
        arg = (-0.5 * J * J * u * u * beta * (t - centre) ** 2 + eta) / (N * den)
        amp = pref * math.exp(-u * u / 32.0) * den**-0.25 * np.exp(arg)
        if phase == "rabi":
            carrier = np.exp(-2j * J * t)
        else:
            phi1 = (u * u / (8 * beta)) * (2 * J * tau + 1.5 * m * gamma * math.pi) + u * (
                J * tau * beta**2 / N + c3 * (m * gamma * math.pi + (J / N) * u * tau)
            )
            carrier = np.exp(1j * (phi1 - phi * t))
        z[idx] += amp * carrier
    if normalize:
        amp00 = pref * math.exp(-u * u / 32.0) * beta**-0.5 * math.exp(beta / (2.0 * N))
        z *= (abs(cos2a) / 2.0) / amp00
    delta = sign * z.real
    return TimeSeries(times, delta, f"delta_analytic_{phase}"), TimeSeries(times, np.abs(z), "envelope_analytic")


def envelope_coefficients(p: ModelParams, m, tau, beta: float = 1.0, gamma: float = 1.0) -> dict:
    """Coefficients of the Gaussian integral for the m-th revival packet.

    ``D_R`` is given in completed-square form with the printed shift
    3 m_bar pi/(2J); ``D_R_expanded`` is the same quantity assembled directly
    from A and B (the two disagree for m != 0, tau != 0).
    """
    if beta < 1.0:
        raise ParameterError("beta must be >= 1")
    N, J, u = p.N, p.J, p.u
    tau = np.asarray(tau, dtype=float)
    mb = gamma * m
    X = mb * math.pi + (J / N) * u * tau
    A = (2 * beta - 1.5j * u * X) / N
    B = (2.0 / N) * (beta + 1j * J * u * tau)
    D_D = 4 * beta**2 + (9 / 4) * u * u * X**2
    D_R = (
        -(2 * beta / N) * J * J * u * u * (tau + 3 * mb * math.pi / (2 * J)) ** 2
        + 2 * beta**3 / N
        + (9 / (2 * N)) * u * u * mb * mb * math.pi**2 * beta
    )
    D_R_expanded = (
        2 * beta**3 - 3 * J * u * u * tau * mb * math.pi * beta - 2 * beta * J * J * u * u * tau**2
    ) / N
    D_I = (4 * J * u * tau * beta**2 + 1.5 * u * beta**2 * X - 1.5 * J * J * u**3 * tau**2 * X) / N
    phi_A = np.arctan2(-1.5 * u * X, 2 * beta)
    phi_s = D_I / D_D - phi_A / 2
    out = dict(A=A, B=B, D_R=D_R, D_R_expanded=D_R_expanded, D_I=D_I, D_D=D_D, phi_A=phi_A, phi_s=phi_s)
    return {k: (np.asarray(v).item() if np.ndim(v) == 0 else v) for k, v in out.items()}


def gaussian_sm(p: ModelParams, m, tau, beta: float = 1.0, gamma: float = 1.0):
    """Closed-form Gaussian integral for packet m, in complex arithmetic.

    Normalized so that |value| is comparable with the discrete sum divided by
    sqrt(beta (N^2/4 - n_max^2)).
    """
    co = envelope_coefficients(p, m, tau, beta, gamma)
    A, B = co["A"], co["B"]
    N = p.N
    return (
        math.sqrt(2.0) * math.exp(-beta / N) / math.sqrt(math.pi * N)
        * np.sqrt(np.pi / A) * np.exp(B * B / (4 * A))
    )


def correction_factors(p: ModelParams, m, tau, ic: InitialCondition = InitialCondition()) -> dict:
    """Eigenstate-correction factors R, phi'_s and the first-order factor."""
    u, J, N = p.u, p.J, p.N
    tau = np.asarray(tau, dtype=float)
    R = math.exp(-u * u / 32.0)
    phi_s_prime = (u * u / 8.0) * (2 * J * tau + 1.5 * m * math.pi)
    rp = timescales(p, ic)
    co = envelope_coefficients(p, m, tau, rp.beta, rp.gamma)
    ratio = co["B"] / (2 * co["A"])
    first = 1.0 - (u / 2.0) * (
        rp.beta * (1.0 - 4 * rp.n_max**2 / N**2) * (0.5 - ratio) + 2 * rp.n_max / N
    )
    out = dict(R=R, phi_s_prime=phi_s_prime, first_order_factor=first)
    return {k: (np.asarray(v).item() if np.ndim(v) == 0 else v) for k, v in out.items()}


def discrete_sum_reference(p: ModelParams, ic: InitialCondition, t, drop_linear_term: bool = True):
    """Brute-force <S_+>(t) over S_x levels with second-order level spacings.

    Returns the complex sum on the N/2 scale, so Delta = Re(value) / N.  With
    ``drop_linear_term`` the 3 u^2 n / (2 N^2) piece of the spacing is left
    out, matching the analytic treatment.
    """
    N, J, u = p.N, p.J, p.u
    c = initial_state(N, ic, "sx").amplitudes.real
    n = sx_quantum_numbers(N)[:-1]
    w = np.sqrt((N / 2 + n + 1) * (N / 2 - n)) * c[:-1] * c[1:]
    dE = J * (
        2 + 2 * u * n / N + u * u / 8 - 1.5 * u * u * n * n / N**2 + u / N - 0.5 * u * u / N**2
    )
    if not drop_linear_term:
        dE = dE - J * 1.5 * u * u * n / N**2
    keep = np.abs(w) > 1e-300
    w, dE = w[keep], dE[keep]
    t = np.asarray(t, dtype=float)
    flat = np.atleast_1d(t).ravel()
    out = np.empty(flat.size, dtype=complex)
    for s in range(0, flat.size, _CHUNK):
        out[s : s + _CHUNK] = np.exp(-1j * np.outer(flat[s : s + _CHUNK], dE)) @ w
    return out[0] if t.ndim == 0 else out.reshape(t.shape)


def bessel_overlap_check(p: ModelParams, k: float, l: int = 1) -> dict:
    """Compare eigenvector components on S_x states k +/- 2l with J_l(C2).

    The eigenvector of level k comes from the spin-basis Hamiltonian with its
    sign fixed so that the component on k is positive.  Predictions are
    +J_l(C2) on k + 2l and (-1)^l J_l(C2) on k - 2l; the first-order
    perturbative coefficients are reported for l = 1.
    """
    N, u = p.N, p.u
    if abs(k) + 2 * l > N / 2:
        raise ParameterError("need |k| + 2l <= N/2")
    dec = eig_banded(build_hamiltonian_spin_basis(p))
    j = int(round(N / 2 - k))
    v = dec.vectors[:, j]
    i = int(round(k + N / 2))
    if v[i] < 0:
        v = -v
    C2 = (u * N / 4.0) * (0.25 - k * k / N**2)
    Jl = float(jv(l, C2))
    out = dict(
        C2=C2,
        predicted_plus=Jl,
        predicted_minus=(-1) ** l * Jl,
        measured_plus=float(v[i + 2 * l]),
        measured_minus=float(v[i - 2 * l]),
    )
    if l == 1:
        d_plus = 1 - 4 * (k + 1) ** 2 / N**2 + 2 / N
        d_minus = 1 - 4 * (k - 1) ** 2 / N**2 + 2 / N
        out["perturbative_plus"] = u * N * d_plus / 32
        out["perturbative_minus"] = -u * N * d_minus / 32
    return out


def envelope_peaks(times, values) -> tuple[np.ndarray, np.ndarray]:
    """Local maxima of |values| with three-point quadratic refinement."""
    t = np.asarray(times, dtype=float)
    a = np.abs(np.asarray(values, dtype=float))
    if a.size < 3:
        return np.empty(0), np.empty(0)
    i = np.nonzero((a[1:-1] > a[:-2]) & (a[1:-1] >= a[2:]))[0] + 1
    y0, y1, y2 = a[i - 1], a[i], a[i + 1]
    curv = y0 - 2 * y1 + y2
    with np.errstate(divide="ignore", invalid="ignore"):
        dx = np.where(curv != 0, 0.5 * (y0 - y2) / curv, 0.0)
    h = t[i + 1] - t[i]
    return t[i] + dx * h, y1 - 0.25 * (y0 - y2) * dx


def locate_revival(peak_t, peak_h, center: float, half_width: float) -> float:
    """Time of the revival maximum near ``center``.

    A parabola is fitted to log peak heights above half the window maximum.
    """
    peak_t = np.asarray(peak_t)
    peak_h = np.asarray(peak_h)
    w = (peak_t > center - half_width) & (peak_t < center + half_width) & (peak_h > 0)
    if not np.any(w):
        return math.nan
    tt, hh = peak_t[w], peak_h[w]
    sel = hh >= 0.5 * hh.max()
    if sel.sum() < 3:
        return float(tt[np.argmax(hh)])
    a, b, _ = np.polyfit(tt[sel] - center, np.log(hh[sel]), 2)
    if a >= 0:
        return float(tt[np.argmax(hh)])
    return float(center - b / (2 * a))


def compare_series(exact: TimeSeries, approx: TimeSeries, T_R: float | None = None, revivals: int = 3) -> dict:
    """Error metrics between two series sampled on one grid.

    Also reports the envelope peaks of |exact| and, given ``T_R``, the
    offset of each located revival from m T_R for m = 1..revivals.
    """
    if exact.times.shape != approx.times.shape or not np.array_equal(exact.times, approx.times):
        raise ParameterError("series must share one time grid")
    diff = approx.values - exact.values
    out = dict(
        rmse=float(np.sqrt(np.mean(diff**2))) if diff.size else 0.0,
        max_abs=float(np.max(np.abs(diff))) if diff.size else 0.0,
    )
    pt, ph = envelope_peaks(exact.times, exact.values)
    out["peak_times"] = pt
    out["peak_heights"] = ph
    offsets = []
    if T_R is not None and math.isfinite(T_R):
        at, ah = envelope_peaks(approx.times, approx.values)
        for m in range(1, revivals + 1):
            te = locate_revival(pt, ph, m * T_R, 0.5 * T_R)
            ta = locate_revival(at, ah, m * T_R, 0.5 * T_R)
            offsets.append((m, te - m * T_R, ta - m * T_R))
    out["revival_offsets"] = offsets
    return out


def envelope_rmse(exact: TimeSeries, envelope: TimeSeries, t_max: float | None = None) -> float:
    """RMSE between the peak-extracted envelope of ``exact`` and ``envelope``."""
    pt, ph = envelope_peaks(exact.times, exact.values)
    if t_max is not None:
        keep = pt <= t_max
        pt, ph = pt[keep], ph[keep]
    env = np.interp(pt, envelope.times, envelope.values)
    return float(np.sqrt(np.mean((env - ph) ** 2)))
