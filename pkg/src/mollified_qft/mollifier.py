"""Dampers and suitable mollifiers.

A *damper* is a smooth real function of momentum equal to 1 on a plateau
``|p| <= a`` and to 0 outside ``|p| >= b``.  A real even damper is at the same
time the Fourier transform of a *suitable mollifier* rho: a real, rapidly
decaying function with ``int rho = 1`` and vanishing higher moments.

Fourier convention (used everywhere in the package)::

    F phi(p)      = int e^{+i p.x} phi(x) dx
    F^-1 phi(x)   = (2 pi)^-d int e^{-i p.x} phi(p) dp

Two transition profiles are available:

``"erf"`` (default)
    ``0.5*erfc((|p|-c)/(sqrt(2)*s))`` with ``c=(a+b)/2``, ``s=(b-a)/18``,
    clipped to exactly 1 on the plateau and exactly 0 beyond ``b``.  The clip
    moves the function by at most 1.1e-19, far below double precision, so the
    sampled object is indistinguishable from a C-infinity bump.  Its inverse
    transform has a Gaussian envelope and a closed form, which is what makes
    sixth moments checkable at the 1e-8 level.

``"smoothstep"``
    the classic ``exp(-1/t)`` glue.  Exactly compactly supported, but its
    inverse transform decays only like ``exp(-c*sqrt(|x|))``, so high moments
    are dominated by the truncated tail; it is kept for comparison.
"""
from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from itertools import product as _iproduct
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares
from scipy.special import erfc, gamma as _gamma

from ._quad import simpson_weights
from .errors import (
    ConstructionFailed,
    GeometryError,
    GridExtentError,
    IncompatibleGridError,
    ResolutionError,
    UnsupportedError,
)

PROFILES = ("erf", "smoothstep")
ERF_HALF_WIDTH = 9.0          # transition band spans +-9 standard deviations
MOMENT_ORDER = 6
MOMENT_POWERS = (1, 2, 3)


# ---------------------------------------------------------------------------
# smooth steps

def _glue(t):
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    pos = t > 0
    out[pos] = np.exp(-1.0 / t[pos])
    return out


def smooth_step(t):
    """exp(-1/t) smooth step: 1 for t <= 0, 0 for t >= 1, C-infinity in between."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    f1 = _glue(1.0 - t)
    f0 = _glue(t)
    return f1 / (f1 + f0)


def _erf_sigma(a, b):
    return (b - a) / (2.0 * ERF_HALF_WIDTH)


def _profile_values(profile, r, a, b):
    r = np.abs(np.asarray(r, dtype=float))
    if profile == "erf":
        c = 0.5 * (a + b)
        s = _erf_sigma(a, b)
        v = 0.5 * erfc((r - c) / (math.sqrt(2.0) * s))
    elif profile == "smoothstep":
        v = smooth_step((r - a) / (b - a))
    else:
        raise GeometryError(f"unknown damper profile {profile!r}; expected one of {PROFILES}")
    v = np.where(r <= a, 1.0, v)
    return np.where(r >= b, 0.0, v)


# ---------------------------------------------------------------------------
# Damper

@dataclass(frozen=True, eq=False)
class Damper:
    """Real even (radial for d=3) damper, possibly a product of elementary steps.

    ``factors`` holds ``(a, b, profile)`` triples; the damper is their
    pointwise product, so a product of dampers is again a damper with
    plateau ``min a`` and support ``min b``.
    Calling the damper evaluates the closed form at momentum ``p`` (d=1) or
    at ``|p|`` (d=3).
    """

    factors: tuple
    d: int = 1
    n_points: int = 1024
    extent: float = 1.5

    @property
    def a(self) -> float:
        return min(f[0] for f in self.factors)

    @property
    def b(self) -> float:
        return min(f[1] for f in self.factors)

    @property
    def symmetric(self) -> bool:
        return True

    @property
    def profile(self) -> str:
        kinds = {f[2] for f in self.factors}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        out = np.ones_like(p)
        for a, b, prof in self.factors:
            out = out * _profile_values(prof, p, a, b)
        return out

    def at(self, pvec):
        """Evaluate at momentum vectors (last axis = components)."""
        pvec = np.asarray(pvec, dtype=float)
        if self.d == 1 and (pvec.ndim == 0 or pvec.shape[-1] != 1):
            return self(pvec)
        return self(np.linalg.norm(pvec, axis=-1))

    def scaled(self, eps, p):
        """chi_hat_eps(p) = chi_hat(eps p)."""
        return self(eps * np.asarray(p, dtype=float))

    def __mul__(self, other: "Damper") -> "Damper":
        if not isinstance(other, Damper):
            return NotImplemented
        if other.d != self.d:
            raise IncompatibleGridError("cannot multiply dampers of different dimension")
        return Damper(self.factors + other.factors, self.d, max(self.n_points, other.n_points), self.extent)

    @cached_property
    def grid(self) -> np.ndarray:
        b_out = max(f[1] for f in self.factors) * self.extent
        if self.d == 1:
            return np.linspace(-b_out, b_out, self.n_points)
        return np.linspace(0.0, b_out, self.n_points)

    @property
    def grid_step(self) -> float:
        return float(self.grid[1] - self.grid[0])

    @cached_property
    def values(self) -> np.ndarray:
        return self(self.grid)

    @property
    def sigma(self) -> Optional[float]:
        """Gaussian width of the transition for a single erf factor, else None."""
        if len(self.factors) == 1 and self.factors[0][2] == "erf":
            a, b, _ = self.factors[0]
            return _erf_sigma(a, b)
        return None

    def decay_scale(self) -> float:
        """Length beyond which the inverse transform is negligible (heuristic)."""
        sigmas = [_erf_sigma(a, b) for a, b, prof in self.factors if prof == "erf"]
        if len(sigmas) == len(self.factors):
            return 14.0 / min(sigmas) * math.sqrt(len(sigmas))
        widths = [b - a for a, b, _ in self.factors]
        return 1500.0 / min(widths)

    def header(self) -> dict:
        return {"a": self.a, "b": self.b, "d": self.d, "grid_step": self.grid_step,
                "factors": [list(f) for f in self.factors]}


def build_damper(a, b, d=1, n_points=1024, extent=1.5, profile="erf") -> Damper:
    """Smooth step damper equal to 1 for |p| <= a and 0 for |p| >= b."""
    if d not in (1, 3):
        raise GeometryError(f"dimension must be 1 or 3, got {d}")
    if not (0 < a < b):
        raise GeometryError(f"need 0 < a < b, got a={a}, b={b}")
    if profile not in PROFILES:
        raise GeometryError(f"unknown damper profile {profile!r}")
    if n_points < 512:
        raise ResolutionError(f"damper grid needs >= 512 points, got {n_points}")
    if extent < 1.5:
        raise ResolutionError("damper grid must cover [-1.5 b, 1.5 b]")
    dmp = Damper(((float(a), float(b), profile),), d, int(n_points), float(extent))
    g = dmp.grid
    inside = np.count_nonzero((np.abs(g) >= a) & (np.abs(g) <= b))
    if d == 1:
        inside //= 2
    if inside < 16:
        raise ResolutionError(f"only {inside} grid points resolve the transition band [{a}, {b}]")
    return dmp


# ---------------------------------------------------------------------------
# closed-form inverse transforms for a single erf step

def _erf_rho_1d(x, c, s):
    x = np.asarray(x, dtype=float)
    return (c / np.pi) * np.sinc(c * x / np.pi) * np.exp(-0.5 * (s * x) ** 2)


def _sinc_prime_over_x(x, c):
    """f'(x)/x for f(x) = sin(cx)/(cx), stable near 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    u = c * x
    small = np.abs(u) < 0.05
    xs = x[small]
    # series sum_{k>=1} (-1)^k 2k c^{2k} x^{2k-2} / (2k+1)!
    acc = np.zeros_like(xs)
    for k in range(5, 0, -1):
        acc = acc * xs * xs + (-1) ** k * 2 * k * c ** (2 * k) / math.factorial(2 * k + 1)
    out[small] = acc
    xl = x[~small]
    ul = u[~small]
    out[~small] = (ul * np.cos(ul) - np.sin(ul)) / (c * xl ** 3)
    return out


def _erf_rho_1d_prime(x, c, s):
    x = np.asarray(x, dtype=float)
    g = np.exp(-0.5 * (s * x) ** 2)
    f = np.sinc(c * x / np.pi)
    return (c / np.pi) * g * x * (_sinc_prime_over_x(x, c) - s * s * f)


def _erf_rho_3d(r, c, s):
    r = np.abs(np.asarray(r, dtype=float))
    g = np.exp(-0.5 * (s * r) ** 2)
    f = np.sinc(c * r / np.pi)
    # rho_3(r) = -rho_1'(r) / (2 pi r)
    return -(c / np.pi) * g * (_sinc_prime_over_x(r, c) - s * s * f) / (2.0 * np.pi)


# ---------------------------------------------------------------------------
# moments

def _sphere_factor(alpha):
    """int over the unit sphere of omega^alpha."""
    if any(k % 2 for k in alpha):
        return 0.0
    num = 2.0 * np.prod([_gamma((k + 1) / 2.0) for k in alpha])
    return float(num / _gamma((sum(alpha) + 3) / 2.0))


def multi_indices(d, order):
    """All multi-indices of dimension d with 0 <= |alpha| <= order, graded."""
    if d == 1:
        return list(range(order + 1))
    out = []
    for tot in range(order + 1):
        out.extend(al for al in _iproduct(range(tot + 1), repeat=d) if sum(al) == tot)
    return out


class MomentTable(Mapping):
    """Map ``(m, n) -> M[m, n] = int z^n rho(z)^m dz`` (n an int or a multi-index)."""

    def __init__(self, entries, max_order):
        self._entries = dict(entries)
        self.max_order = max_order

    def __getitem__(self, key):
        return self._entries[key]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self):
        return len(self._entries)

    def max_abs(self, m=1, lo=1, hi=None):
        """Largest |M[m, n]| over lo <= |n| <= hi."""
        hi = self.max_order if hi is None else hi
        vals = [abs(v) for (mm, n), v in self._entries.items()
                if mm == m and lo <= (n if isinstance(n, int) else sum(n)) <= hi]
        return max(vals) if vals else 0.0

    def __repr__(self):
        return f"MomentTable({len(self)} entries, max_order={self.max_order})"


def _moment_quad(x, values, d, m, n):
    f = values ** m
    dx = x[1] - x[0]
    if d == 1:
        return complex(np.sum(x ** n * f) * dx)
    alpha = (n,) if isinstance(n, int) else tuple(n)
    if len(alpha) != 3:
        raise ValueError("d=3 moments need a 3-component multi-index")
    ang = _sphere_factor(alpha)
    if ang == 0.0:
        return 0j
    w = np.full(x.shape, dx)
    w[0] = 0.5 * dx
    return complex(ang * np.sum(w * x ** (sum(alpha) + 2) * f))


# ---------------------------------------------------------------------------
# SampledMollifier

@dataclass(frozen=True, eq=False)
class SampledMollifier:
    """Samples of a mollifier on a uniform grid.

    For d=1 ``x`` is a symmetric grid on the line; for d=3 it is a radial grid
    starting at r=0.  ``exact`` is an optional vectorised evaluator with full
    relative accuracy (closed forms); otherwise evaluation uses a cubic spline.
    """

    x: np.ndarray
    values: np.ndarray
    d: int = 1
    damper: Optional[Damper] = None
    exact: Optional[Callable] = field(default=None, repr=False)
    label: str = "rho"

    @property
    def grid_step(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values) or bool(np.max(np.abs(self.values.imag)) < 1e-12)

    @cached_property
    def _spline(self):
        return CubicSpline(self.x, self.values)

    def in_range(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 3:
            x = np.abs(x)
        return (x >= self.x[0]) & (x <= self.x[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.d == 3:
            x = np.abs(x)
        if self.exact is not None:
            return self.exact(x)
        inside = self.in_range(x)
        out = np.zeros(x.shape, dtype=self.values.dtype)
        out[inside] = self._spline(x[inside])
        return out

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        inside = self.in_range(x)
        out = np.zeros(x.shape, dtype=self.values.dtype)
        out[inside] = self._spline(x[inside], 1)
        return out

    def fourier(self, p):
        """rho_hat(p): the damper if known, otherwise quadrature of the samples."""
        if self.damper is not None:
            return self.damper(p)
        p = np.atleast_1d(np.asarray(p, dtype=float))
        if self.d != 1:
            raise UnsupportedError("sample quadrature Fourier transform only in d=1")
        return np.exp(1j * np.outer(p, self.x)) @ self.values * self.grid_step

    @cached_property
    def moments(self) -> MomentTable:
        ent = {}
        for m in MOMENT_POWERS:
            for n in multi_indices(self.d, MOMENT_ORDER):
                ent[(m, n)] = _moment_quad(self.x, self.values, self.d, m, n)
        return MomentTable(ent, MOMENT_ORDER)

    def reflect(self) -> "SampledMollifier":
        """rho_check(x) = rho(-x)."""
        if self.d == 3:
            return self
        ex = None if self.exact is None else (lambda y, _e=self.exact: _e(-np.asarray(y, dtype=float)))
        return SampledMollifier(-self.x[::-1], self.values[::-1].copy(), 1, self.damper, ex,
                                self.label + "_check")

    def header(self) -> dict:
        h = {"label": self.label, "d": self.d, "grid_step": self.grid_step,
             "n_samples": int(self.x.size)}
        if self.damper is not None:
            h.update(a=self.damper.a, b=self.damper.b)
        return h


def moment(rho: SampledMollifier, m: int, n) -> complex:
    """M[m, n] = int z^n rho(z)^m dz by trapezoidal quadrature on the sample grid."""
    key = (m, n if rho.d == 1 or isinstance(n, int) else tuple(n))
    if m in MOMENT_POWERS and key in rho.moments:
        return rho.moments[key]
    return _moment_quad(rho.x, rho.values, rho.d, m, n)


def _all_erf(damper):
    return all(f[2] == "erf" for f in damper.factors)


def _default_grid(damper, dx, extent):
    if dx is None:
        if len(damper.factors) > 1 and _all_erf(damper):
            # products are built by real-space convolution: the integrand of
            # each convolution is band-limited to the sum of the supports
            dx = math.pi / (2.0 * sum(f[1] for f in damper.factors))
        else:
            dx = math.pi / (4.0 * damper.b)
    if extent is None:
        extent = damper.decay_scale()
    n = int(math.ceil(extent / dx))
    return dx, n


def damper_to_mollifier(damper: Damper, dx=None, extent=None, check_tail=True) -> SampledMollifier:
    """Inverse Fourier transform of a damper sampled on a real-space grid.

    A single erf step uses its closed form; other dampers go through an FFT
    (d=1) or a radial sine-transform quadrature (d=3).
    """
    dx, n = _default_grid(damper, dx, extent)
    if damper.d == 1:
        x = np.arange(-n, n + 1) * dx
    else:
        x = np.arange(0, n + 1) * dx
    sig = damper.sigma
    exact = None
    if sig is not None:
        a, b, _ = damper.factors[0]
        c = 0.5 * (a + b)
        if damper.d == 1:
            exact = lambda y, c=c, s=sig: _erf_rho_1d(y, c, s)  # noqa: E731
        else:
            exact = lambda y, c=c, s=sig: _erf_rho_3d(y, c, s)  # noqa: E731
        values = exact(x)
    elif damper.d == 1 and _all_erf(damper):
        out = None
        for a, b, prof in damper.factors:
            single = damper_to_mollifier(Damper(((a, b, prof),), 1, damper.n_points, damper.extent),
                                         dx=dx, extent=x[-1], check_tail=False)
            out = single if out is None else convolve_mollifiers(out, single, trim=True)
        exact, values = out.exact, out.values
    elif damper.d == 1:
        values = _fft_inverse(damper, x, dx)
    else:
        values = _hankel_inverse(damper, x)
    if check_tail:
        _check_tail(x, values, damper.d)
    return SampledMollifier(x, values, damper.d, damper, exact, "rho")


def _fft_inverse(damper, x, dx):
    npts = x.size  # odd, centred on 0
    dp = 2.0 * math.pi / (npts * dx)
    k = np.arange(npts) - (npts - 1) // 2
    rh = damper(k * dp).astype(complex)
    vals = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(rh))) * dp / (2.0 * math.pi)
    if np.max(np.abs(vals.imag)) < 1e-12:
        vals = vals.real
    return vals


def _hankel_inverse(damper, r, chunk=256):
    b = damper.b
    rmax = float(np.max(r))
    n_panels = max(2048, int(20 * b * rmax / (2 * math.pi)) + 2)
    n_panels += n_panels % 2
    p = np.linspace(0.0, b, n_panels + 1)
    w = simpson_weights(n_panels, b / n_panels) * damper(p) * p
    out = np.empty(r.shape)
    for i in range(0, r.size, chunk):
        rr = r[i:i + chunk]
        s = np.sin(np.outer(rr, p)) @ w
        with np.errstate(invalid="ignore", divide="ignore"):
            v = s / (2.0 * math.pi ** 2 * rr)
        zero = rr == 0
        v[zero] = (w @ p) / (2.0 * math.pi ** 2)
        out[i:i + chunk] = v
    return out


def _check_tail(x, values, d):
    a = np.abs(values)
    if d == 1:
        edge = 0.9 * np.max(np.abs(x))
        weight = np.ones_like(x)
    else:
        edge = 0.9 * np.max(x)
        weight = 4 * math.pi * x ** 2
    tail = np.sum((a * weight)[np.abs(x) >= edge]) * (x[1] - x[0])
    if tail > 1e-8:
        raise GridExtentError(f"mollifier tail mass {tail:.3e} in the outer 10% of the grid exceeds 1e-8")


def convolve_mollifiers(r1: SampledMollifier, r2: SampledMollifier, trim=False) -> SampledMollifier:
    """rho1 * rho2.

    In d=1 the convolution is evaluated as a real-space sum on the common grid,
    which equals the product of the Fourier transforms exactly for band-limited
    samples but keeps full relative accuracy in the tails.  In d=3 the product
    damper is transformed back radially.  ``trim=True`` keeps the grid of r1.
    """
    if r1.d != r2.d:
        raise IncompatibleGridError("mollifiers have different dimensions")
    if not math.isclose(r1.grid_step, r2.grid_step, rel_tol=1e-12):
        raise IncompatibleGridError(
            f"grid steps differ: {r1.grid_step} vs {r2.grid_step}")
    damper = r1.damper * r2.damper if (r1.damper is not None and r2.damper is not None) else None
    if r1.d == 3:
        if damper is None:
            raise IncompatibleGridError("d=3 convolution needs both Fourier transforms")
        out = damper_to_mollifier(damper, dx=r1.grid_step, extent=max(r1.x[-1], r2.x[-1]))
        return SampledMollifier(out.x, out.values, 3, damper, None, f"{r1.label}*{r2.label}")
    dx = r1.grid_step
    vals = np.convolve(r1.values, r2.values) * dx
    x = r1.x[0] + r2.x[0] + dx * np.arange(vals.size)
    if trim:
        start = int(round((r1.x[0] - x[0]) / dx))
        vals = vals[start:start + r1.x.size]
        x = r1.x.copy()
    exact = None
    if r1.exact is not None:
        x2, v2, e1 = r2.x, r2.values, r1.exact

        def exact(y, x2=x2, v2=v2, e1=e1, dx=dx):
            # same trapezoid sum as the samples, at arbitrary points
            y = np.asarray(y, dtype=float)
            flat = y.ravel()
            res = np.empty(flat.shape, dtype=np.result_type(v2, float))
            for i in range(0, flat.size, 512):
                blk = flat[i:i + 512]
                res[i:i + 512] = e1(blk[:, None] - x2[None, :]) @ v2 * dx
            return res.reshape(y.shape)
    return SampledMollifier(x, vals, 1, damper, exact, f"{r1.label}*{r2.label}")


def scaled_eval(f, eps, x, with_flag=False):
    """rho_eps(x) = eps^-d rho(x/eps) for mollifiers, chi_hat(eps p) for dampers.

    Points whose argument falls outside a mollifier's sampled grid evaluate to
    0; ``with_flag=True`` also returns a boolean array marking them.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(x, dtype=float)
    if isinstance(f, Damper):
        val = f.scaled(eps, x)
        return (val, np.zeros(val.shape, bool)) if with_flag else val
    y = x / eps
    flag = ~f.in_range(y)
    val = f(y) / eps ** f.d
    val = np.where(flag, 0.0, val)
    return (val, flag) if with_flag else val


# ---------------------------------------------------------------------------
# complex mollifier with prescribed moments of rho^m

def hermite_functions(n, z):
    """Orthonormal Hermite functions h_0..h_{n-1} at z (stable recurrence)."""
    z = np.asarray(z, dtype=float)
    out = np.empty((n,) + z.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * z * z)
    if n > 1:
        out[1] = math.sqrt(2.0) * z * out[0]
    for k in range(1, n - 1):
        out[k + 1] = math.sqrt(2.0 / (k + 1)) * z * out[k] - math.sqrt(k / (k + 1)) * out[k - 1]
    return out


def build_complex_moment_mollifier(N, m=2, d=1, real=False, zero_m0=False, n_basis=None,
                                   tol=1e-8, seed=0, restarts=20, half_width=14.0, dz=0.02):
    """Complex rho with M[1,0]=1, M[1,n]=0 and M[m,n]=0 for 1 <= n <= N, Im M[m,0]=0.

    rho is a combination of ``n_basis`` (default 4N) Hermite functions; the
    coefficients are found by nonlinear least squares (the M[m,n] conditions
    are polynomial in them).  ``zero_m0`` additionally asks for M[m,0]=0.
    Raises ConstructionFailed when no restart reaches ``tol``.
    """
    if d != 1:
        raise UnsupportedError("complex moment mollifiers are built in d=1 only")
    if not 0 <= N <= 8:
        raise UnsupportedError(f"N must lie in 0..8, got {N}")
    if N == 0 and not zero_m0:
        return damper_to_mollifier(build_damper(1.0, 2.0))
    K = n_basis or max(4 * N, 4)
    z = np.arange(-int(round(half_width / dz)), int(round(half_width / dz)) + 1) * dz
    basis = hermite_functions(K, z)
    powers = np.arange(N + 1)
    zp = z[None, :] ** powers[:, None] * dz

    def coeffs(v):
        return v.astype(complex) if real else v[:K] + 1j * v[K:]

    def constraints(v):
        r = coeffs(v) @ basis
        m1 = zp @ r
        mm = zp @ r ** m
        c = [m1[0] - 1.0, *m1[1:], *mm[1:], 1j * mm[0].imag]
        if zero_m0:
            c.append(mm[0])
        return np.asarray(c)

    def resid(v):
        c = constraints(v)
        return np.concatenate([c.real, c.imag])

    rng = np.random.default_rng(seed)
    best = None
    for _ in range(restarts):
        v0 = rng.normal(scale=0.5, size=K if real else 2 * K)
        sol = least_squares(resid, v0, method="trf", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                            max_nfev=5000)
        res = float(np.max(np.abs(constraints(sol.x))))
        if best is None or res < best[0]:
            best = (res, sol.x)
        if res < tol:
            break
    res, v = best
    if res >= tol:
        raise ConstructionFailed(
            f"moment constraints not met: residual {res:.3e} >= {tol:.1e}", residual=res)
    c = coeffs(v)
    values = c @ basis

    def exact(y, c=c, K=K):
        y = np.asarray(y, dtype=float)
        return np.tensordot(c, hermite_functions(K, y), axes=1)

    return SampledMollifier(z, values, 1, None, exact, f"hermite_N{N}_m{m}")
