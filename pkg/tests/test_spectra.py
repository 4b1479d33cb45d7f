import math

import mpmath as mp
import numpy as np
import pytest

from bhdimer.errors import DomainError, ParameterError
from bhdimer.fock_model import ModelParams, sx_quantum_numbers
from bhdimer.spectra import (
    action_integral,
    compute_spectrum,
    corrected_spectrum_iterative,
    dimensionless_first,
    dimensionless_second,
    exact_spectrum,
    perturbative_spectrum,
    semiclassical_first,
    semiclassical_second,
    solve_energy_for_action,
    sx_derivatives,
    sx_of_phi,
    to_physical,
    wkb_s2_closed_form,
    wkb_s2_winding,
)

SMALL = ModelParams.from_u(1.0, 0.5, 26)


def test_first_order_rabi_ladder():
    assert semiclassical_first(ModelParams.from_u(1.0, 0.0, 10), 3) == -6.0


def test_first_order_n0():
    assert semiclassical_first(SMALL, 0) == pytest.approx(9.25, abs=1e-13)


def test_second_order_limits():
    p = ModelParams.from_u(1.0, 0.0, 12)
    np.testing.assert_array_equal(semiclassical_second(p, [-2, 0, 5]), [4.0, 0.0, -10.0])
    assert semiclassical_second(SMALL, 0) == semiclassical_first(SMALL, 0)


def test_n_range_checked():
    with pytest.raises(ParameterError):
        semiclassical_first(SMALL, 14)


def test_exact_matches_eigensolver_order():
    ex = exact_spectrum(SMALL)
    assert np.all(np.diff(ex.energies) < 0)  # energy decreases with n
    assert ex.n[0] == -13 and ex.n[-1] == 13


def test_second_order_beats_first():
    ex = exact_spectrum(SMALL).energies
    e1 = compute_spectrum(SMALL, "bh1").energies
    e2 = compute_spectrum(SMALL, "bh2").energies
    assert np.max(np.abs(e2 - ex)) < np.max(np.abs(e1 - ex))


@pytest.mark.parametrize("N, u", [(26, 0.05), (50, 0.1), (100, 0.02)])
def test_order_consistency_small_u(N, u):
    p = ModelParams.from_u(1.0, u, N)
    ex = exact_spectrum(p)
    mask = np.abs(ex.n) <= N / 4
    e1 = compute_spectrum(p, "bh1").energies
    e2 = compute_spectrum(p, "bh2").energies
    assert np.all((np.abs(e2 - ex.energies) <= np.abs(e1 - ex.energies) + 1e-12)[mask])


def test_perturbative_noninteracting():
    p = ModelParams.from_u(1.0, 0.0, 20)
    n = sx_quantum_numbers(20)
    np.testing.assert_array_equal(perturbative_spectrum(p, n, 1), -n / 20)
    np.testing.assert_array_equal(perturbative_spectrum(p, n, 2), -n / 20)


@pytest.mark.parametrize("N", [26, 50, 200])
@pytest.mark.parametrize("u", [0.05, 0.5, 0.9])
def test_perturbative_close_to_semiclassical(N, u):
    p = ModelParams.from_u(1.0, u, N)
    n = sx_quantum_numbers(N)
    d1 = np.abs(perturbative_spectrum(p, n, 1) - dimensionless_first(n, N, u))
    d2 = np.abs(perturbative_spectrum(p, n, 2) - dimensionless_second(n, N, u))
    assert np.all(d1 <= 3 * u / N + u * u / N)
    assert np.all(d2 <= 3 * u / N + u * u / N)
    # the O(u/N) constant for |n| <= N/4: 2.2 u/N bounds it
    inner = np.abs(n) <= N / 4
    assert np.all(d2[inner] <= 2.2 * u / N)


def test_perturbative_second_order_beats_first():
    p = SMALL
    n = sx_quantum_numbers(26)
    exact = (exact_spectrum(p).energies - to_physical(p, 0.0)) / (2 * p.J * p.N)
    err1 = np.max(np.abs(perturbative_spectrum(p, n, 1) - exact))
    err2 = np.max(np.abs(perturbative_spectrum(p, n, 2) - exact))
    assert err2 < err1 < 0.01


def test_perturbative_physical_flag():
    n = np.array([-3.0, 0.0, 4.0])
    np.testing.assert_allclose(
        perturbative_spectrum(SMALL, n, 2, physical=True), to_physical(SMALL, perturbative_spectrum(SMALL, n, 2))
    )
    with pytest.raises(ParameterError):
        perturbative_spectrum(SMALL, 0, 3)


def test_sx_at_phi_zero():
    for H, u in [(-0.3, 0.2), (0.1, 0.9), (0.45, 0.0)]:
        assert sx_of_phi(H, u, 0.0) == pytest.approx(-H, abs=1e-15)


def test_sx_back_substitution():
    H, u = -0.4, 0.1
    S = sx_of_phi(H, u, math.pi / 2)
    assert -S + u * (0.25 - S * S) == pytest.approx(H, abs=1e-12)


def test_sx_outside_band():
    with pytest.raises(DomainError):
        sx_of_phi(0.55, 0.5, np.linspace(0, 2 * np.pi, 101))


def test_sx_derivatives_against_finite_differences():
    H, u, phi, h = -0.3, 0.4, 0.7, 1e-4
    S, S1, S2 = (np.real(v) for v in sx_derivatives(H, u, phi))
    f = lambda x: sx_of_phi(H, u, x)
    assert S == pytest.approx(f(phi), abs=1e-15)
    assert S1 == pytest.approx((f(phi + h) - f(phi - h)) / (2 * h), abs=1e-8)
    assert S2 == pytest.approx((f(phi + h) - 2 * f(phi) + f(phi - h)) / h**2, abs=1e-6)


def test_action_noninteracting():
    for order in ("exact", 1, 2):
        assert action_integral(-0.2, 0.0, order) == pytest.approx(0.2, abs=1e-15)


def test_action_orders_small_u():
    H, u = -0.3, 0.05
    mp.mp.dps = 30
    ref = mp.quad(
        lambda x: (lambda w: (w + 4 * 0.3) / (2 * (1 + mp.sqrt(1 + w * (w + 4 * 0.3)))))(u * mp.sin(x) ** 2),
        [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi],
    ) / (2 * mp.pi)
    ex = action_integral(H, u)
    assert ex == pytest.approx(float(ref), abs=1e-12)
    e1 = abs(ex - action_integral(H, u, 1))
    e2 = abs(ex - action_integral(H, u, 2))
    assert e2 <= e1 <= 1e-3


def test_action_order2_large_u():
    H, u = -0.45, 0.5
    assert abs(action_integral(H, u) - action_integral(H, u, 2)) <= u**3


def test_action_order_difference_exact():
    H, u = 0.17, 0.3
    diff = action_integral(H, u, 2) - action_integral(H, u, 1)
    assert diff == pytest.approx(3 * u * u * H / 16 - 3 * u * u * H**3 / 4, rel=0, abs=1e-16)


def test_solve_energy_inverts_cubic():
    for I in (-0.4, 0.0, 0.25):
        H = solve_energy_for_action(I, 0.5)
        assert action_integral(H, 0.5, 2) == pytest.approx(I, abs=1e-14)


def test_winding_zero_cases():
    assert wkb_s2_winding(-0.3, 0.0, 40) == 0.0
    H0 = solve_energy_for_action(0.0, 0.05)
    assert wkb_s2_winding(H0, 0.05, 50) == 0.0


def test_winding_against_mpmath():
    mp.mp.dps = 25
    H, u, N = mp.mpf("-0.4"), mp.mpf("0.05"), 50

    def sx(x):
        w = u * mp.sin(x) ** 2
        return (w - 4 * H) / (2 * (1 + mp.sqrt(1 + w * w - 4 * H * w)))

    def integrand(x):
        s, s1, s2 = sx(x), mp.diff(sx, x), mp.diff(sx, x, 2)
        return -1 / (4 * s * s) * (-s1 * s1 / (2 * s) + s2)

    ref = mp.quad(integrand, [0, mp.pi / 2, mp.pi, 3 * mp.pi / 2, 2 * mp.pi]) / (2 * mp.pi * N * N)
    assert wkb_s2_winding(-0.4, 0.05, 50) == pytest.approx(float(ref), rel=1e-7)


def test_winding_closed_form_example():
    # large-|H| closed form with its textbook sign at u = 0.05, H = -0.4, N = 50
    numeric = wkb_s2_winding(-0.4, 0.05, 50)
    assert numeric == pytest.approx(wkb_s2_closed_form(-0.4, 0.05, 50), rel=0.05)


@pytest.mark.parametrize("u", [0.01, 0.005])
def test_winding_sign_corrected_closed_form(u):
    numeric = wkb_s2_winding(-0.4, u, 50)
    assert numeric == pytest.approx(wkb_s2_closed_form(-0.4, u, 50, sign=+1), rel=0.05)


def test_closed_form_diverges_at_zero():
    with pytest.raises(DomainError):
        wkb_s2_closed_form(0.0, 0.1, 10)


def test_corrected_spectrum_noninteracting():
    p = ModelParams.from_u(1.0, 0.0, 10)
    res = corrected_spectrum_iterative(p)
    np.testing.assert_allclose(res.energies, -2.0 * res.n, atol=1e-12)


def test_corrected_spectrum_is_fixed_point():
    p = ModelParams.from_u(1.0, 0.05, 50)
    res = corrected_spectrum_iterative(p)
    H = (res.energies - to_physical(p, 0.0)) / (2 * p.J * p.N)
    for n, h in zip(res.n[::7], H[::7]):
        shift = 0.0 if n == 0 else wkb_s2_winding(h, p.u, p.N)
        assert action_integral(h, p.u, 2) == pytest.approx(n / p.N - shift, abs=1e-11)


def test_physical_conversion_identity():
    for method in ("bh1", "bh2"):
        res = compute_spectrum(SMALL, method)
        dimless = dimensionless_first if method == "bh1" else dimensionless_second
        np.testing.assert_allclose(res.energies, to_physical(SMALL, dimless(res.n, 26, 0.5)), atol=1e-12)


def test_unknown_method():
    with pytest.raises(ParameterError):
        compute_spectrum(SMALL, "wkb3")
