import math

import numpy as np
import pytest

from mollified_qft.errors import AccuracyError, UnsupportedError
from mollified_qft.freefield import (
    FieldParams,
    chi_moment,
    delta3_kernel,
    delta_eps,
    g_inner_delta,
    g_inner_plane_waves,
    g_norm_direct,
    norm_N,
    normalized_delta,
    psi,
    zero_point_dimensional,
    zero_point_leading,
    zero_point_model_full,
)
from mollified_qft.genfunc import asymptotic_order
from mollified_qft.mollifier import build_damper


@pytest.fixture(scope="module")
def p3():
    return FieldParams(1.0, 3, build_damper(1, 3, d=3), build_damper(1, 3, d=3))


@pytest.fixture(scope="module")
def p1():
    return FieldParams(1.0, 1, build_damper(1, 3), build_damper(1, 3))


def test_params_validation():
    with pytest.raises(ValueError):
        FieldParams(0.0, 1, build_damper(1, 3), build_damper(1, 3))
    with pytest.raises(ValueError):
        FieldParams(1.0, 3, build_damper(1, 3), build_damper(1, 3, d=3))


# --- two-point function ------------------------------------------------------

def test_delta_at_origin_is_momentum_integral(p3):
    eps = 0.1
    val = delta_eps(p3, eps, 0.0, 0.0)
    assert abs(val.imag) < 1e-15 and val.real > 0
    # oracle: Cartesian-free radial integral by a dense trapezoid
    p = np.linspace(0, 3 / eps, 200001)
    f = p * p / np.sqrt(p * p + 1) * p3.rho_hat(eps * p)
    assert abs(val.real - np.trapezoid(f, p) / (4 * math.pi ** 2)) < 1e-8 * val.real


def test_delta_time_reflection(p3):
    r = np.array([0.0, 0.3, 2.0])
    a = delta_eps(p3, 0.1, 0.7, r)
    b = delta_eps(p3, 0.1, -0.7, r)
    np.testing.assert_allclose(a, np.conj(b), rtol=1e-12, atol=1e-14)


def test_embedding_equivalence_on_delta():
    base = build_damper(1, 3, d=3)
    eta = build_damper(2, 6, d=3)
    p = FieldParams(1.0, 3, base, base)
    for t, r in ((0.0, 0.5), (0.5, 1.0)):
        diff = abs(delta_eps(p, 0.1, t, r, rho_hat=base * eta) - delta_eps(p, 0.1, t, r))
        assert diff < 1e-9


def test_mass_suppresses_delta(p3):
    vals = []
    # past the oscillatory regime m ~ 1/t the amplitude falls with the mass
    for m in (30.0, 100.0, 1000.0):
        p = FieldParams(m, 3, p3.rho_hat, p3.chi_hat)
        vals.append(abs(delta_eps(p, 0.1, 1.0, 0.5)))
    assert vals[0] > vals[1] > vals[2]
    # brute-force oracle at 4x panels
    p = FieldParams(100.0, 3, p3.rho_hat, p3.chi_hat)
    P = 30.0
    q = np.linspace(0, P, 4 * 8192 + 1)
    E = np.sqrt(q * q + 1e4)
    f = q * q / E * p.rho_hat(0.1 * q) * np.exp(-1j * E) * np.sinc(q * 0.5 / math.pi)
    assert abs(np.trapezoid(f, q) / (4 * math.pi ** 2) - delta_eps(p, 0.1, 1.0, 0.5)) < 1e-9


def test_schwartz_decay_proxy(p3):
    r = np.linspace(0, 40, 81)
    vals = np.abs(delta_eps(p3, 0.2, 0.0, r)) * (1 + r) ** 4
    assert np.max(vals) < 1e3 * vals[0]


def test_delta_accuracy_cap(p3, monkeypatch):
    import mollified_qft.freefield as ff
    monkeypatch.setattr(ff, "MAX_PANELS", 128)
    with pytest.raises(AccuracyError) as info:
        delta_eps(p3, 0.01, 50.0, 0.0, rtol=1e-14)
    assert "did not converge" in str(info.value)


def test_psi_normalization():
    val = psi(2.0, 0.0, 0.0, 1.0)
    assert abs(abs(val) - 1 / math.sqrt(2 * math.pi * 2 * math.sqrt(5))) < 1e-15


# --- norm ------------------------------------------------------------------

def test_norm_slope(p3):
    eps = np.geomspace(0.2, 0.0015, 8)
    sw = asymptotic_order([norm_N(p3, e) for e in eps], eps)
    assert abs(sw.slope + 1) < 0.05


def test_norm_positive_and_monotone_in_damper(p3):
    d = build_damper(1, 3, d=3)
    big = build_damper(1, 3, d=3) * build_damper(1, 6, d=3)  # equal on the plateau, smaller on the band
    n1 = norm_N(p3, 0.1, rho_hat=d)
    n2 = norm_N(p3, 0.1, rho_hat=big)
    assert n1 > 0 and n2 > 0 and n1 >= n2


def test_norm_squared_matches_delta_at_origin(p3):
    eps = 0.1
    assert abs(norm_N(p3, eps) ** 2 - delta_eps(p3, eps, 0.0, 0.0, rho_hat=p3.rho_hat * p3.rho_hat)) < 1e-10


@pytest.mark.parametrize("eps", [0.2, 0.1])
def test_normalized_g_norm_is_one(p3, eps):
    assert abs(g_norm_direct(p3, eps) - 1) < 1e-8


def test_normalized_delta_scale(p3):
    nd = normalized_delta(p3, 0.1)
    assert abs(nd(0.0, 0.0) - delta_eps(p3, 0.1, 0.0, 0.0) / norm_N(p3, 0.1)) < 1e-12


def test_g_norm_one_dimensional(p1):
    assert abs(g_norm_direct(p1, 0.1) - 1) < 1e-8


# --- G scalar products -------------------------------------------------------

def test_plane_wave_products(p1):
    eps = 0.1
    val = g_inner_plane_waves(p1, eps, 0.7, 0.7)
    assert abs(val.imag) < 1e-15
    assert abs(val.real - p1.chi(0.0).real / eps) < 1e-12
    assert g_inner_plane_waves(p1, eps, 0.7, 0.7, conjugate=True) == 0
    assert abs(g_inner_plane_waves(p1, eps, 0.0, 20.0)) < 1e-12


def test_psi_delta_difference_decays(p1):
    eps = [0.2, 0.1, 0.05, 0.025, 0.0125]
    diffs = [abs(g_inner_delta(p1, e, "psi.delta", p=1.3, x=(0.2, 0.7)).difference) for e in eps]
    sw = asymptotic_order(diffs, eps)
    assert sw.below_floor or sw.slope >= 6


def test_delta_delta_at_coincident_points_is_norm_squared(p1):
    for e in (0.2, 0.05):
        res = g_inner_delta(p1, e, "delta.delta", x1=(0.0, 0.3), x2=(0.0, 0.3))
        assert abs(res.full - norm_N(p1, e) ** 2) < 1e-10 * norm_N(p1, e) ** 2
        assert abs(res.difference) < 1e-10 * norm_N(p1, e) ** 2


def test_delta_delta_conjugate_is_negligible(p1):
    eps = [0.4, 0.3, 0.2, 0.15, 0.1]
    vals = [abs(g_inner_delta(p1, e, "delta.delta*", x1=(0.0, 0.3), x2=(0.0, 0.1)).full) for e in eps]
    sw = asymptotic_order(vals, eps)
    assert sw.below_floor or sw.slope > 4


def test_g_inner_delta_restrictions(p3, p1):
    with pytest.raises(UnsupportedError):
        g_inner_delta(p3, 0.1, "psi.delta", p=1.0, x=(0, 0))
    with pytest.raises(UnsupportedError):
        g_inner_delta(p1, 0.1, "nonsense")


# --- delta kernel -------------------------------------------------------------

@pytest.mark.parametrize("eps", [0.5, 0.1, 0.02])
def test_delta3_kernel_integrates_to_one(p1, eps):
    k = p1.rho_conv
    x = eps * np.asarray(k.x)
    vals = delta3_kernel(p1, eps, x)
    assert abs(np.sum(vals) * eps * k.grid_step - 1) < 1e-10


def test_delta3_kernel_even(p1):
    x = np.linspace(-1, 1, 41)
    np.testing.assert_allclose(delta3_kernel(p1, 0.1, x), delta3_kernel(p1, 0.1, -x), atol=1e-13)


def test_delta3_kernel_width_scales_linearly(p1):
    eps = np.array([0.2, 0.1, 0.05, 0.025, 0.0125])
    widths = []
    for e in eps:
        x = np.linspace(0, 10 * e, 20001)
        v = delta3_kernel(p1, e, x)
        half = v[0] / 2
        widths.append(x[np.argmax(v < half)])
    slope = np.polyfit(np.log(eps), np.log(widths), 1)[0]
    assert abs(slope - 1) < 0.02


def test_delta3_kernel_three_dimensional(p3):
    v = delta3_kernel(p3, 0.1, np.array([[0.0, 0.0, 0.05], [0.05, 0.0, 0.0]]))
    assert abs(v[0] - v[1]) < 1e-12


# --- zero-point energy ---------------------------------------------------------

def test_zero_point_slope_and_positivity(p3):
    eps = np.geomspace(0.2, 0.2 * 10 ** -1.5, 8)
    vals = [zero_point_leading(p3, e) for e in eps]
    assert min(vals) > 0
    assert abs(asymptotic_order(vals, eps).slope + 7) < 0.15


def test_zero_point_heavy_mass_limit(p3):
    p = FieldParams(1e4, 3, p3.rho_hat, p3.chi_hat)
    eps = 0.2
    approx = zero_point_leading(p, eps)
    chi_int = 4 * math.pi * np.trapezoid(np.linspace(0, 3, 30001) ** 2 * p3.chi_hat(np.linspace(0, 3, 30001)) ** 2,
                                         np.linspace(0, 3, 30001)) / eps ** 3
    q = np.linspace(0, 3 / eps, 30001)
    rho_int = 4 * math.pi * np.trapezoid(q * q * p3.rho_hat(eps * q) ** 2, q)
    ref = 1e4 * 0.5 * chi_int / (2 * math.pi) ** 3 * rho_int
    assert abs(approx / ref - 1) < 0.01


def test_zero_point_dimensional_reduces_to_natural_units(p3):
    assert abs(zero_point_dimensional(p3, 0.1, 1.0, 1.0) / zero_point_leading(p3, 0.1) - 1) < 1e-12


def test_full_model_real_and_close_to_leading(p1):
    for e in (0.2, 0.1, 0.05):
        full = zero_point_model_full(p1, e)
        lead = zero_point_leading(p1, e)
        assert isinstance(full, float)
        assert abs(full - lead) / lead <= e ** 2 + 1e-7


def test_time_averaging_is_negligible(p1):
    omega = build_damper(1, 3)
    e = 0.0025
    base = zero_point_model_full(p1, e)
    avg = zero_point_model_full(p1, e, dt=10.0, omega_hat=omega)
    assert abs(avg - base) / base < 1e-3


def test_full_model_restrictions(p3, p1):
    with pytest.raises(UnsupportedError):
        zero_point_model_full(p3, 0.1)
    with pytest.raises(ValueError):
        zero_point_model_full(p1, 0.1, dt=1.0)


def test_chi_moment_functional(p1):
    # for real even chi: M[2,0] = int chi^2 = (1/2pi) int chi_hat^2, odd moments vanish
    q = np.linspace(-3, 3, 60001)
    ref = np.trapezoid(p1.chi_hat(q) ** 2, q) / (2 * math.pi)
    assert abs(chi_moment(p1, 0) - ref) < 1e-9
    assert abs(chi_moment(p1, 1)) < 1e-12
