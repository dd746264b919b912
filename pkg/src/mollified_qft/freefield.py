"""Continuum quantities of the damper-regularized free scalar field.

All momentum integrals are cut off by rho_hat(eps p), so they are proper
integrals over |p| <= b/eps and are evaluated with Simpson panels whose
density follows the largest phase frequency.  Radial reductions are used in
d=3; several full (pre-reduction) double integrals are available in d=1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np

from ._quad import simpson_refined, simpson_weights
from .errors import AccuracyError, UnsupportedError
from .mollifier import (
    Damper,
    SampledMollifier,
    convolve_mollifiers,
    damper_to_mollifier,
)

MAX_PANELS = 1 << 22


@dataclass(frozen=True, eq=False)
class FieldParams:
    """Mass, dimension, mollifier damper rho_hat and scalar-product damper chi_hat."""

    mass: float
    d: int
    rho_hat: Damper
    chi_hat: Damper
    chi_x_hat: Optional[Damper] = None

    def __post_init__(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.d not in (1, 3):
            raise ValueError("d must be 1 or 3")
        for dmp in (self.rho_hat, self.chi_hat, self.chi_x_hat):
            if dmp is not None and dmp.d != self.d:
                raise ValueError("damper dimension does not match the field dimension")

    def energy(self, p):
        return np.sqrt(np.asarray(p, dtype=float) ** 2 + self.mass ** 2)

    @cached_property
    def rho(self) -> SampledMollifier:
        return damper_to_mollifier(self.rho_hat)

    @cached_property
    def chi(self) -> SampledMollifier:
        return damper_to_mollifier(self.chi_hat)

    @cached_property
    def chi_x(self) -> SampledMollifier:
        return self.chi if self.chi_x_hat is None else damper_to_mollifier(self.chi_x_hat)

    @cached_property
    def rho_conv(self) -> SampledMollifier:
        """rho_check * rho, the kernel of the regularized delta function."""
        return convolve_mollifiers(self.rho.reflect(), self.rho)


def psi(p, t, x, mass, d=1):
    """Plane wave psi_p(t, x) = exp(i(p.x - E t)) / sqrt((2 pi)^d 2E)."""
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    E = np.sqrt(np.sum(np.atleast_1d(p) ** 2) + mass ** 2) if p.ndim else math.sqrt(p * p + mass ** 2)
    phase = np.dot(np.atleast_1d(p), np.atleast_1d(x)) - E * t
    return np.exp(1j * phase) / math.sqrt((2 * math.pi) ** d * 2 * E)


def _panels_for(P, E_P, r, t, minimum=64):
    # >= 20 panels per period of the fastest phase in the integrand
    periods = (P * r + E_P * abs(t)) / (2 * math.pi)
    n = max(minimum, int(20 * periods) + 2)
    return n + n % 2


def _radial_momentum_integral(integrand, P, n_start, rtol, what):
    try:
        return simpson_refined(integrand, 0.0, P, n_start=n_start, rtol=rtol, atol=1e-300,
                               max_panels=MAX_PANELS)
    except AccuracyError as exc:
        raise AccuracyError(f"{what}: {exc}", estimate=exc.estimate) from None


# ---------------------------------------------------------------------------
# Delta_eps

@dataclass(frozen=True, eq=False)
class DeltaEps:
    """Evaluator (t, r) -> Delta_eps, optionally scaled (normalized form)."""

    params: FieldParams
    eps: float
    scale: float = 1.0
    rho_hat: Optional[Damper] = field(default=None, repr=False)

    def __call__(self, t, r):
        return self.scale * delta_eps(self.params, self.eps, t, r, rho_hat=self.rho_hat)


def delta_eps(params: FieldParams, eps, t, r, rho_hat=None, energy_power=0, rtol=1e-11):
    """Damper-regularized positive-frequency two-point function.

    d=3: (1/4pi^2) int_0^{b/eps} p^2/E rho_hat(eps p) e^{-iEt} sinc(pr) dp
    d=1: (1/2pi)   int_0^{b/eps} 1/E  rho_hat(eps p) e^{-iEt} cos(pr) dp

    ``energy_power=1`` inserts an extra factor E_p (i d/dt Delta).  ``r`` may
    be an array; ``t`` is the time difference t_xi - t_x.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    rh = params.rho_hat if rho_hat is None else rho_hat
    m = params.mass
    P = rh.b / eps
    r_arr = np.atleast_1d(np.abs(np.asarray(r, dtype=float)))
    n0 = _panels_for(P, math.hypot(P, m), float(np.max(r_arr)), t)

    def integrand(p):
        E = np.sqrt(p * p + m * m)
        base = rh(eps * p) * np.exp(-1j * E * t) * E ** (energy_power - 1)
        if params.d == 3:
            return (p * p * base)[None, :] * np.sinc(np.outer(r_arr, p) / math.pi)
        return base[None, :] * np.cos(np.outer(r_arr, p))

    val = _radial_momentum_integral(integrand, P, n0, rtol, "delta_eps")
    val = val / (4 * math.pi ** 2) if params.d == 3 else val / (2 * math.pi)
    return val if np.ndim(r) else complex(val[0])


def norm_N(params: FieldParams, eps, rho_hat=None) -> float:
    """N(rho_hat, eps) = sqrt((2pi)^-d int d^dp |rho_hat(eps p)|^2 / (2E_p))."""
    rh = params.rho_hat if rho_hat is None else rho_hat
    m = params.mass
    P = rh.b / eps

    def integrand(p):
        E = np.sqrt(p * p + m * m)
        w = p * p if params.d == 3 else 1.0
        return w * rh(eps * p) ** 2 / E

    val = _radial_momentum_integral(integrand, P, 256, 1e-13, "norm_N")
    val = val / (4 * math.pi ** 2) if params.d == 3 else val / (2 * math.pi)
    return math.sqrt(val)


def normalized_delta(params: FieldParams, eps) -> DeltaEps:
    """Delta_eps / N(rho_hat, eps)."""
    return DeltaEps(params, eps, 1.0 / norm_N(params, eps))


def g_norm_direct(params: FieldParams, eps, normalized=True) -> float:
    """G-norm of Delta_eps(xi - x) at equal times, from the position-space scalar product.

    ||Delta||_G^2 = int d^dxi chi_hat(eps xi) 2 Re(Delta^* Delta_E) where
    Delta_E = i d/dt Delta carries an extra E_p.  Both profiles are
    computed by sine (d=3) or cosine (d=1) transforms and integrated over the
    radius on a grid fine enough for the band limit 2 b/eps.
    """
    rh = params.rho_hat
    m = params.mass
    P = rh.b / eps
    sig = rh.sigma or (rh.b - rh.a) / 18.0
    R = 16.0 * eps / sig + 40.0 / m
    dr = math.pi / (2.0 * P)
    r = np.arange(0, int(math.ceil(R / dr)) + 1) * dr
    n_p = _panels_for(P, 0.0, R, 0.0, minimum=512)
    p = np.linspace(0.0, P, n_p + 1)
    wp = simpson_weights(n_p, P / n_p)
    E = np.sqrt(p * p + m * m)
    damp = rh(eps * p)
    g1 = np.empty(r.size)
    g2 = np.empty(r.size)
    for i in range(0, r.size, 256):
        rr = r[i:i + 256]
        if params.d == 3:
            k = np.sin(np.outer(rr, p))
            g1[i:i + 256] = k @ (wp * p * damp / E)      # r Delta
            g2[i:i + 256] = k @ (wp * p * damp)          # r Delta_E
        else:
            k = np.cos(np.outer(rr, p))
            g1[i:i + 256] = k @ (wp * damp / E)
            g2[i:i + 256] = k @ (wp * damp)
    chi = params.chi_hat(eps * r)
    w = np.full(r.size, dr)
    w[0] = 0.5 * dr
    if params.d == 3:
        pref = 1.0 / (4 * math.pi ** 2)
        val = 8 * math.pi * np.sum(w * chi * g1 * g2) * pref ** 2
    else:
        pref = 1.0 / (2 * math.pi)
        val = 2 * 2 * np.sum(w * chi * g1 * g2) * pref ** 2
    val = math.sqrt(val)
    return val / norm_N(params, eps) if normalized else val


# ---------------------------------------------------------------------------
# G scalar products

def _chi_kernel(params, eps, q, conj_variant=False):
    chi = params.chi
    q = np.asarray(q, dtype=float)
    if params.d == 3 and q.ndim and q.shape[-1] == 3:
        q = np.linalg.norm(q, axis=-1)
    vals = chi(q / eps) / eps ** params.d
    return np.where(chi.in_range(q / eps), vals, 0.0)


def g_inner_plane_waves(params: FieldParams, eps, p1, p2, t_xi=0.0, conjugate=False):
    """<psi_p1 || psi_p2>_G (or <psi_p1 || psi_p2^*>_G with ``conjugate=True``) in closed form."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    E1 = math.sqrt(float(np.sum(p1 ** 2)) + params.mass ** 2)
    E2 = math.sqrt(float(np.sum(p2 ** 2)) + params.mass ** 2)
    if conjugate:
        pref = (E1 - E2) / (2 * math.sqrt(E1 * E2))
        return complex(pref * np.exp(1j * (E1 + E2) * t_xi) * _chi_kernel(params, eps, p1 + p2))
    pref = (E1 + E2) / (2 * math.sqrt(E1 * E2))
    return complex(pref * np.exp(1j * (E1 - E2) * t_xi) * _chi_kernel(params, eps, p1 - p2))


@dataclass
class GInner:
    full: complex
    reduced: complex

    @property
    def difference(self) -> complex:
        return self.full - self.reduced


def _p_grid(params, eps, n=None):
    P = params.rho_hat.b / eps
    sig = params.rho_hat.sigma or (params.rho_hat.b - params.rho_hat.a) / 18.0
    if n is None:
        n = int(2 * params.rho_hat.b / sig * 40)
    n += n % 2
    p = np.linspace(-P, P, n + 1)
    return p, simpson_weights(n, 2 * P / n)


def _z_grid(params):
    chi = params.chi
    return chi.x, chi.values * chi.grid_step


def g_inner_delta(params: FieldParams, eps, kind, t_xi=0.0, p=None, x=None, x1=None, x2=None) -> GInner:
    """Full double-integral form and reduced closed form of G scalar products (d=1).

    kinds: ``"psi.delta"`` (args p, x=(t, x)), ``"delta.delta"`` and
    ``"delta.delta*"`` (args x1=(t1, x1), x2=(t2, x2)).  Substituting
    p2 = p1 - eps z puts the chi kernel on its own sample grid.
    """
    if kind not in ("psi.delta", "delta.delta", "delta.delta*"):
        raise UnsupportedError(f"unknown scalar-product kind {kind!r}")
    if params.d != 1:
        raise UnsupportedError("full G scalar products are implemented in d=1")
    m = params.mass
    rh = params.rho_hat
    z, wz = _z_grid(params)

    def E(q):
        return np.sqrt(q * q + m * m)

    if kind == "psi.delta":
        t, xs = x
        Ep = math.sqrt(p * p + m * m)
        p2 = p - eps * z
        E2 = E(p2)
        h = (rh(eps * p2) * np.exp(-1j * (p2 * xs - E2 * t)) / np.sqrt(4 * math.pi * E2)
             * (Ep + E2) / (2 * np.sqrt(Ep * E2)) * np.exp(1j * (Ep - E2) * t_xi))
        full = complex(np.sum(h * wz))
        reduced = complex(rh(eps * p) * np.exp(-1j * (p * xs - Ep * t)) / math.sqrt(4 * math.pi * Ep))
        return GInner(full, reduced)

    t1, y1 = x1
    t2, y2 = x2
    p1, wp = _p_grid(params, eps)
    P1 = p1[:, None]
    E1 = E(P1)
    if kind == "delta.delta":
        P2 = P1 - eps * z[None, :]
        E2 = E(P2)
        h = (rh(eps * P1) * rh(eps * P2) / (2 * math.pi) * (E1 + E2) / (4 * E1 * E2)
             * np.exp(1j * (E1 - E2) * t_xi - 1j * (E1 * t1 - E2 * t2))
             * np.exp(1j * (P1 * y1 - P2 * y2)))
        full = complex(wp @ h @ wz)
        red_int = (rh(eps * p1) ** 2 / (2 * E(p1)) / (2 * math.pi)
                   * np.exp(1j * (p1 * (y1 - y2) - E(p1) * (t1 - t2))))
        reduced = complex(np.sum(red_int * wp))
        return GInner(full, reduced)
    # delta.delta*
    P2 = -P1 + eps * z[None, :]
    E2 = E(P2)
    h = (rh(eps * P1) * rh(eps * P2) / (2 * math.pi) * (E1 - E2) / (4 * E1 * E2)
         * np.exp(1j * (E1 + E2) * t_xi - 1j * (E1 * t1 + E2 * t2))
         * np.exp(1j * (P1 * y1 + P2 * y2)))
    full = complex(wp @ h @ wz)
    return GInner(full, 0j)


# ---------------------------------------------------------------------------
# regularized delta kernel and zero-point energy

def delta3_kernel(params: FieldParams, eps, disp):
    """(1/eps^d) (rho_check * rho)(disp/eps); radial in d=3."""
    disp = np.asarray(disp, dtype=float)
    if params.d == 3 and disp.ndim and disp.shape[-1] == 3:
        disp = np.linalg.norm(disp, axis=-1)
    k = params.rho_conv
    arg = disp / eps
    return np.where(k.in_range(arg), np.real(k(arg)), 0.0) / eps ** params.d


def _radial_box_integral(f, d, upper):
    # int d^d y f(|y|) for f supported in |y| <= upper
    if d == 3:
        g = lambda s: 4 * math.pi * s * s * f(s)  # noqa: E731
    else:
        g = lambda s: 2.0 * f(s)  # noqa: E731
    return float(simpson_refined(g, 0.0, upper, n_start=512, rtol=1e-13, atol=1e-300))


def zero_point_leading(params: FieldParams, eps) -> float:
    """E_0 = 1/(2 (2pi)^d) int d^dx |chi_hat|^2(eps x) int d^dp E_p |rho_hat|^2(eps p)."""
    m = params.mass
    chi_hat, rh = params.chi_hat, params.rho_hat
    xint = _radial_box_integral(lambda s: chi_hat(s) ** 2, params.d, chi_hat.b) / eps ** params.d
    pint = _radial_box_integral(lambda p: np.sqrt(p * p + m * m) * rh(eps * p) ** 2, params.d, rh.b / eps)
    return xint * pint / (2 * (2 * math.pi) ** params.d)


def zero_point_dimensional(params: FieldParams, eps, lambda_c, lambda_r, hbar_c=1.0) -> float:
    """Leading zero-point energy with length scales lambda_c (chi) and lambda_r (rho).

    The dampers are evaluated at eps x/lambda_c and eps lambda_r p/hbar; with
    hbar = c = 1 in natural units ``hbar_c`` sets the energy-length conversion.
    """
    m = params.mass
    d = params.d
    chi_hat, rh = params.chi_hat, params.rho_hat
    xint = _radial_box_integral(lambda s: chi_hat(s) ** 2, d, chi_hat.b) * (lambda_c / eps) ** d
    kscale = eps * lambda_r / hbar_c
    pint = _radial_box_integral(lambda p: np.sqrt(p * p + m * m) * rh(kscale * p) ** 2, d, rh.b / kscale)
    return xint * pint / (2 * (2 * math.pi * hbar_c) ** d)


def chi_moment(params: FieldParams, n) -> complex:
    """M2[n] = int z^n chi_xi(z) chi_x^*(z) dz (d=1 samples)."""
    a, b = params.chi, params.chi_x
    if not np.array_equal(a.x, b.x):
        z = a.x
        vals = a(z) * np.conj(b(z))
    else:
        z = a.x
        vals = a.values * np.conj(b.values)
    return complex(np.sum(z ** n * vals) * a.grid_step)


def zero_point_model_full(params: FieldParams, eps, dt=None, omega_hat: Optional[Damper] = None,
                          t_shift=0.0, n_p=None) -> float:
    """Full (p1, p2) double integral of the zero-point energy in the d=1 model.

    E = 1/2 int dp1 dp2 rho_hat1 rho_hat2 cos((E1-E2) T) K(p1,p2) eps^-2 chi_xi chi_x^*((p1-p2)/eps)
    with K = (E1 E2 + p1 p2 + m^2)(E1+E2)/(4 E1 E2) and T = t - t_xi.  With
    ``dt`` set, the cosine is replaced by omega((E1-E2) dt)/omega(0) where
    omega is the inverse transform of the averaging damper ``omega_hat``.
    """
    if params.d != 1:
        raise UnsupportedError("the full zero-point integral is available for the d=1 model only")
    m = params.mass
    rh = params.rho_hat
    chi_a, chi_b = params.chi, params.chi_x
    z = chi_a.x
    kern = chi_a.values * np.conj(chi_b(z) if chi_b is not chi_a else chi_b.values)
    keep = np.abs(kern) > 1e-30 * np.max(np.abs(kern))
    z, kern = z[keep], kern[keep] * chi_a.grid_step
    p1, wp = _p_grid(params, eps, n_p)
    P1 = p1[:, None]
    P2 = P1 - eps * z[None, :]
    E1 = np.sqrt(P1 * P1 + m * m)
    E2 = np.sqrt(P2 * P2 + m * m)
    K = (E1 * E2 + P1 * P2 + m * m) * (E1 + E2) / (4 * E1 * E2)
    if dt is None:
        osc = np.cos((E1 - E2) * t_shift)
    else:
        if omega_hat is None:
            raise ValueError("time averaging needs an averaging damper omega_hat")
        om = damper_to_mollifier(omega_hat)
        osc = np.real(om((E1 - E2) * dt)) / np.real(om(0.0))
    h = rh(eps * P1) * rh(eps * P2) * K * osc
    val = wp @ h @ kern
    return float(np.real(val)) / (2 * eps)
