import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mollified_qft.errors import AccuracyError, UnsupportedError
from mollified_qft.genfunc import (
    DEFAULT_EPS,
    asymptotic_order,
    association_defect,
    damper_tail_integral,
    embed_distribution,
    fit_power_law,
    observed_order,
    sift_integral,
    witness_bumps,
)
from mollified_qft.mollifier import build_complex_moment_mollifier, build_damper, damper_to_mollifier


# --- embeddings -------------------------------------------------------------

def test_delta_embedding_is_reflected_scaled_mollifier(rho):
    eps = 0.1
    x = np.linspace(-1, 1, 31)
    rep = embed_distribution("delta", rho)
    np.testing.assert_allclose(rep(eps, x), rho(-x / eps) / eps)


def test_smooth_embedding_reproduces_gaussian(rho):
    rep = embed_distribution(lambda x: np.exp(-x * x), rho)
    assert abs(rep(0.05, 0.0) - 1.0) < 1e-9


def test_heaviside_embedding_is_half_line_mass(rho):
    rep = embed_distribution("heaviside", rho)
    x = np.array([0.0, 0.05, -0.05])
    eps = 0.1
    got = rep(eps, x)
    # oracle: direct trapezoid over the samples on the half-line z > -x/eps
    for xv, g in zip(x, got):
        z = np.asarray(rho.x)
        fine = np.linspace(-xv / eps, z[-1], 400001)
        oracle = np.trapezoid(np.real(rho(fine)), fine)
        assert abs(g - oracle) < 1e-8
    assert abs(got[0] - 0.5) < 1e-12


def test_delta_prime_embedding(rho):
    rep = embed_distribution("delta_prime", rho)
    # pairing with x gives -1 (distributional derivative of delta)
    eps = 0.2
    x = np.linspace(-60, 60, 120001)
    assert abs(np.trapezoid(x * rep(eps, x), x) + 1.0) < 1e-6


def test_plane_wave_embedding(rho):
    rep = embed_distribution("plane_wave", rho, k=2.0)
    x = np.linspace(-3, 3, 7)
    np.testing.assert_allclose(rep(0.1, x), np.exp(2j * x), atol=1e-12)
    with pytest.raises(UnsupportedError):
        embed_distribution("plane_wave", rho)


def test_unsupported_kind(rho):
    with pytest.raises(UnsupportedError):
        embed_distribution("dirac_comb", rho)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-2, 2))
def test_embedding_linearity(rho, alpha, beta, x0):
    f1 = np.sin
    f2 = lambda x: np.exp(-np.abs(x))  # noqa: E731
    comb = embed_distribution(lambda x: alpha * f1(x) + beta * f2(x), rho)
    e1 = embed_distribution(f1, rho)
    e2 = embed_distribution(f2, rho)
    eps = 0.07
    assert abs(comb(eps, x0) - (alpha * e1(eps, x0) + beta * e2(eps, x0))) < 1e-12


def test_product_association(rho):
    d = [association_defect(np.abs, lambda x: np.abs(x - 0.3), rho, e) for e in DEFAULT_EPS[:5]]
    assert all(b < a for a, b in zip(d, d[1:]))


def test_witness_bumps_have_compact_support():
    for w in witness_bumps():
        lo, hi = w.support
        assert w(np.array([lo - 0.01, hi + 0.01])).tolist() == [0.0, 0.0]
        assert w(np.array([(lo + hi) / 2]))[0] == 1.0


# --- sifting -------------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.2, 0.05, 0.01])
def test_sift_constant(rho, damper, eps):
    a = 0.4
    val = sift_integral(lambda x: np.ones_like(x), rho, 1, damper, eps, a)
    assert abs(val - damper(eps * a)) < 1e-10


def test_sift_cosine(rho, damper):
    val = sift_integral(np.cos, rho, 1, damper, 0.05, 0.0)
    assert abs(val - 1.0) < 1e-9


def test_sift_error_below_floor_or_steep(rho, damper):
    errs = [sift_integral(np.cos, rho, 1, damper, e, 0.3) - damper(e * 0.3) * np.cos(0.3) for e in DEFAULT_EPS]
    sw = asymptotic_order(errs, DEFAULT_EPS)
    assert sw.below_floor or sw.slope >= 6


def test_sift_square_with_hermite_mollifier(damper):
    h = build_complex_moment_mollifier(2, zero_m0=True)
    vals = [sift_integral(np.exp, h, 2, damper, e, 0.0) * e for e in DEFAULT_EPS]
    sw = asymptotic_order(vals, DEFAULT_EPS)
    assert sw.slope >= 2.8 and sw.r2 > 0.999


def test_sift_square_leading_term(damper):
    # without M[2,0] = 0 the leading term is M[2,0] chi_hat(eps a) f(a) / eps
    h = build_complex_moment_mollifier(2)
    m20 = h.moments[(2, 0)]
    vals = [(sift_integral(np.exp, h, 2, damper, e, 0.0) - m20 / e) * e for e in DEFAULT_EPS]
    assert asymptotic_order(vals, DEFAULT_EPS).slope >= 2.8


def test_sift_x_squared_is_tiny(damper):
    h = build_complex_moment_mollifier(2, zero_m0=True)
    vals = [abs(sift_integral(lambda x: x * x, h, 2, damper, e, 0.0)) * e for e in DEFAULT_EPS]
    # third moment of rho^2 is the first that survives, and x^2 has no cubic term
    assert max(vals) < 1e-8


def test_sift_three_dimensional_origin():
    r3 = damper_to_mollifier(build_damper(1.0, 3.0, d=3))
    chi = build_damper(1.0, 3.0, d=3)
    val = sift_integral(lambda r: np.exp(-r * r), r3, 1, chi, 0.05)
    assert abs(val - 1.0) < 1e-9
    with pytest.raises(UnsupportedError):
        sift_integral(np.cos, r3, 1, chi, 0.05, a=0.5)


def test_sift_detects_unresolved_integrand(rho):
    with pytest.raises(AccuracyError):
        # the full grid (2 pi/dx = 24) resolves the product band 13 + 3; the
        # half-resolution rerun aliases frequency 13 onto 1, inside the plateau
        sift_integral(lambda x: np.cos(13 * x), rho, 1, None, 1.0, 0.0)


def test_sift_rejects_zero_power(rho):
    with pytest.raises(ValueError):
        sift_integral(np.cos, rho, 0, None, 0.1)


# --- damper tails ----------------------------------------------------------

def test_damper_tail_gaussian(damper):
    damped, plain = damper_tail_integral(lambda x: np.exp(-x * x), damper, 0.1)
    assert abs(damped - plain) < 1e-10
    assert abs(plain - math.sqrt(math.pi)) < 1e-10


def test_damper_tail_huge_plateau_is_exact():
    chi = build_damper(100.0, 300.0)
    damped, plain = damper_tail_integral(lambda x: np.exp(-x * x), chi, 0.1)
    assert damped == plain


def test_damper_tail_odd_integrand(damper):
    damped, plain = damper_tail_integral(lambda x: x * np.exp(-x * x), damper, 0.1)
    assert abs(damped) < 1e-12 and abs(plain) < 1e-12


# --- sweeps ----------------------------------------------------------------

def test_power_law_fit_exact():
    eps = np.array(DEFAULT_EPS)
    sw = asymptotic_order(eps ** 3, eps)
    assert abs(sw.slope - 3) < 0.01
    assert sw.classification.startswith("associated-to-zero")


def test_moderate_classification():
    eps = np.array(DEFAULT_EPS)
    sw = asymptotic_order(lambda e: 5 / e ** 2, eps)
    assert abs(sw.slope + 2) < 1e-12
    assert sw.classification.startswith("moderate")


def test_below_floor_classification():
    eps = np.array(DEFAULT_EPS)
    sw = asymptotic_order(np.full(eps.size, 1e-15), eps)
    assert sw.below_floor and sw.slope is None


def test_sweep_is_sorted_descending():
    eps = list(DEFAULT_EPS)[::-1]
    sw = asymptotic_order([e ** 2 for e in eps], eps)
    assert np.all(np.diff(sw.eps) < 0)
    assert abs(sw.values[0] - DEFAULT_EPS[0] ** 2) < 1e-15


def test_sweep_preconditions():
    with pytest.raises(ValueError):
        asymptotic_order([1, 2, 3], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        asymptotic_order([1.0] * 5, [0.1, 0.1, 0.2, 0.3, 0.4])
    with pytest.raises(ValueError):
        asymptotic_order([1, 2, np.nan, 4, 5], [0.5, 0.4, 0.3, 0.2, 0.1])


@settings(max_examples=30, deadline=None)
@given(st.floats(-6, 6), st.floats(0.01, 100))
def test_fit_recovers_any_power(s, c):
    eps = np.array(DEFAULT_EPS)
    slope, pref, r2 = fit_power_law(eps, c * eps ** s)
    assert abs(slope - s) < 1e-9 and abs(pref / c - 1) < 1e-9
    # R^2 is only meaningful when the data actually vary
    if abs(s) > 1e-3:
        assert r2 > 1 - 1e-12


def test_observed_order():
    h = np.array([0.1, 0.05, 0.025])
    assert np.allclose(observed_order(h, 3 * h ** 2), 2.0)
