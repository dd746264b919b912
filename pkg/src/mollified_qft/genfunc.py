"""Epsilon-indexed representatives of generalized functions.

Embedding of distributions by convolution with the reflected, scaled
mollifier, sifting integrals with powers of rho_eps, damper-tail
simplification, and power-law fits of epsilon sweeps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ._quad import gauss_legendre
from .errors import AccuracyError, UnsupportedError
from .mollifier import Damper, SampledMollifier, smooth_step

NOISE_FLOOR = 1e-13
DEFAULT_EPS = tuple(0.2 * 2.0 ** -k for k in range(8))
BUILTINS = ("delta", "delta_prime", "heaviside", "plane_wave")


@dataclass(frozen=True, eq=False)
class Representative:
    """A family f_eps given by an evaluator (eps, x) -> complex."""

    evaluator: Callable
    domain: tuple = (-np.inf, np.inf)
    name: str = ""

    def __call__(self, eps, x):
        return self.evaluator(eps, np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# embeddings

def _convolve_sampler(f, rho: SampledMollifier, eps, x):
    """(f * rho_check_eps)(x) = int f(x + eps z) rho(z) dz on the mollifier grid."""
    z = rho.x
    w = rho.values * rho.grid_step
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    out = np.empty(flat.shape, dtype=complex)
    for i in range(0, flat.size, 256):
        blk = flat[i:i + 256]
        out[i:i + 256] = f(blk[:, None] + eps * z[None, :]) @ w
    return out.reshape(x.shape)


def embed_distribution(gamma, rho: SampledMollifier, eps=None, k=None) -> Representative:
    """iota(gamma)_eps = gamma * rho_check_eps (d=1).

    ``gamma`` is a continuous function of x or one of the built-ins
    ``"delta"``, ``"delta_prime"``, ``"heaviside"``, ``"plane_wave"`` (the
    latter needs the wavenumber ``k``).  If ``eps`` is given the returned
    representative ignores its own eps argument and uses that value.
    """
    if rho.d != 1:
        raise UnsupportedError("embeddings are implemented for d=1")
    fixed = eps

    def pick(e):
        return fixed if fixed is not None else e

    if callable(gamma):
        return Representative(lambda e, x: _convolve_sampler(gamma, rho, pick(e), x),
                              name="iota(f)")
    if gamma == "delta":
        return Representative(lambda e, x: rho(-x / pick(e)) / pick(e), name="iota(delta)")
    if gamma == "delta_prime":
        return Representative(lambda e, x: -rho.derivative(-x / pick(e)) / pick(e) ** 2,
                              name="iota(delta')")
    if gamma == "heaviside":
        total = complex(np.sum(rho.values) * rho.grid_step)
        lo = float(rho.x[0])

        def heav(e, x):
            e = pick(e)
            x = np.asarray(x, dtype=float)
            out = np.empty(x.shape, dtype=complex)
            for idx, xv in np.ndenumerate(x):
                u = -xv / e  # int_{z > u} rho = total - int_{lo}^{u} rho
                if u <= lo:
                    out[idx] = total
                else:
                    u = min(u, float(rho.x[-1]))
                    n_sub = max(1, int(math.ceil((u - lo) / 0.5)))
                    out[idx] = total - gauss_legendre(rho, lo, u, n_sub)
            return out
        return Representative(heav, name="iota(H)")
    if gamma == "plane_wave":
        if k is None:
            raise UnsupportedError("plane_wave embedding needs a wavenumber k")
        return Representative(
            lambda e, x: np.exp(1j * k * x) * rho.fourier(pick(e) * k), name=f"iota(e^(i{k}x))")
    raise UnsupportedError(f"unsupported distribution kind {gamma!r}")


# ---------------------------------------------------------------------------
# sifting and damper integrals

def _richardson_sum(integrand_vals, step, what):
    fine = np.sum(integrand_vals) * step
    coarse = np.sum(integrand_vals[::2]) * 2 * step
    scale = np.sum(np.abs(integrand_vals)) * step
    if abs(fine - coarse) > 1e-8 * max(abs(fine), scale, 1e-300):
        raise AccuracyError(f"{what}: Richardson disagreement {abs(fine - coarse):.3e}",
                            estimate=abs(fine - coarse))
    return complex(fine)


def sift_integral(f, rho: SampledMollifier, m, chi_hat: Optional[Damper], eps, a=0.0):
    """int chi_hat(eps x) f(x) eps^{-d m} rho^m((x - a)/eps) dx.

    Evaluated after the substitution x = a + eps z on the mollifier's grid
    (trapezoid, exact for band-limited integrands); a half-resolution rerun
    guards the result.  In d=3 the point a must be the origin and f is a
    function of the radius.
    """
    if m < 1:
        raise ValueError("power m must be >= 1")
    z = rho.x
    dz = rho.grid_step
    rm = rho.values ** m
    if rho.d == 1:
        xs = a + eps * z
        damp = 1.0 if chi_hat is None else chi_hat(eps * xs)
        vals = damp * f(xs) * rm
        # the grid is centred on 0 with an odd number of points: keep the
        # centre in the coarse subsample
        if (z.size // 2) % 2:
            vals = vals[1:-1]
        res = _richardson_sum(vals, dz, "sift_integral")
        return res * eps ** (1 - m)
    if np.any(np.asarray(a) != 0):
        raise UnsupportedError("d=3 sifting is implemented at the origin only")
    r = eps * z
    damp = 1.0 if chi_hat is None else chi_hat(eps * r)
    vals = 4 * math.pi * z ** 2 * damp * f(r) * rm
    vals = vals.astype(complex)
    vals[0] *= 0.5
    res = _richardson_sum(vals, dz, "sift_integral")
    return res * eps ** (3 * (1 - m))


def damper_tail_integral(f, chi_hat: Damper, eps, domain=(-40.0, 40.0), n=8001):
    """Return (int chi_hat(eps x) f(x) dx, int f(x) dx) over a box (d=1)."""
    lo, hi = domain
    x = np.linspace(lo, hi, n)
    h = x[1] - x[0]
    fx = f(x)
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    damped = complex(np.sum(w * chi_hat(eps * x) * fx))
    plain = complex(np.sum(w * fx))
    return damped, plain


# ---------------------------------------------------------------------------
# power-law fits

@dataclass
class EpsilonSweep:
    """(eps, value) pairs with a least-squares fit |value| ~ C eps^s."""

    eps: np.ndarray
    values: np.ndarray
    slope: Optional[float]
    prefactor: Optional[float]
    r2: Optional[float]
    n_fit: int
    classification: str
    floor: float = NOISE_FLOOR
    notes: list = field(default_factory=list)

    @property
    def below_floor(self) -> bool:
        return self.classification == "below-floor"

    def fit_block(self) -> dict:
        return {"slope": self.slope, "prefactor": self.prefactor, "r2": self.r2,
                "n_fit": self.n_fit, "classification": self.classification}

    def rows(self):
        return [(float(e), complex(v).real, complex(v).imag, abs(complex(v)))
                for e, v in zip(self.eps, self.values)]


def fit_power_law(eps, values):
    """OLS fit of log|v| = log C + s log eps; returns (s, C, R^2)."""
    lx = np.log(np.asarray(eps, dtype=float))
    ly = np.log(np.abs(np.asarray(values)))
    A = np.vstack([lx, np.ones_like(lx)]).T
    (s, lc), *_ = np.linalg.lstsq(A, ly, rcond=None)
    pred = A @ np.array([s, lc])
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(s), float(math.exp(lc)), r2


def asymptotic_order(rep, eps_list: Sequence[float] = DEFAULT_EPS, floor=NOISE_FLOOR,
                     min_points=5) -> EpsilonSweep:
    """Fit the epsilon-scaling of a scalar functional.

    ``rep`` is a callable eps -> value or a sequence of precomputed values
    aligned with ``eps_list``.  Points with |value| < floor are excluded from
    the fit; with fewer than ``min_points`` usable points the sweep is
    classified ``"below-floor"`` and no slope is reported.
    """
    eps = np.asarray(eps_list, dtype=float)
    if eps.size < min_points:
        raise ValueError(f"need at least {min_points} epsilon values, got {eps.size}")
    order = np.argsort(-eps)
    eps = eps[order]
    if np.any(np.diff(eps) >= 0):
        raise ValueError("epsilon values must be distinct")
    if callable(rep):
        vals = np.array([complex(rep(e)) for e in eps])
    else:
        vals = np.asarray(rep, dtype=complex)[order]
    if not np.all(np.isfinite(vals)):
        raise ValueError("non-finite value in sweep")
    usable = np.abs(vals) >= floor
    notes = []
    if np.count_nonzero(usable) < min_points:
        return EpsilonSweep(eps, vals, None, None, None, int(np.count_nonzero(usable)),
                            "below-floor", floor, notes)
    if not np.all(usable):
        notes.append(f"{int(np.count_nonzero(~usable))} point(s) below floor excluded from fit")
    s, c, r2 = fit_power_law(eps[usable], vals[usable])
    if s > 0:
        cls = f"associated-to-zero (negligible to order {int(math.floor(s))})"
    elif s == 0:
        cls = "bounded"
    else:
        cls = f"moderate (order {int(math.ceil(-s))})"
    return EpsilonSweep(eps, vals, s, c, r2, int(np.count_nonzero(usable)), cls, floor, notes)


def observed_order(h, errors):
    """Convergence order from errors at successively refined steps."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(h[:-1] / h[1:])


# ---------------------------------------------------------------------------
# association

def witness_bumps(centres=(-0.6, 0.0, 0.45), half_width=0.5):
    """Compactly supported smooth test functions (exp(-1/t) bumps)."""
    out = []
    for c in centres:
        def w(x, c=c):
            t = np.abs(np.asarray(x, dtype=float) - c) / half_width
            return smooth_step(2.0 * t - 1.0)
        w.support = (c - half_width, c + half_width)
        out.append(w)
    return out


def association_defect(f, g, rho: SampledMollifier, eps, witnesses=None, n=801):
    """max_w |int (iota(f)_eps iota(g)_eps - iota(f g)_eps) w dx| over witness bumps."""
    witnesses = witnesses or witness_bumps()
    ef = embed_distribution(f, rho)
    eg = embed_distribution(g, rho)
    efg = embed_distribution(lambda x: f(x) * g(x), rho)
    worst = 0.0
    for w in witnesses:
        lo, hi = w.support
        x = np.linspace(lo, hi, n)
        h = x[1] - x[0]
        diff = ef(eps, x) * eg(eps, x) - efg(eps, x)
        val = abs(np.sum(diff * w(x)) * h)
        worst = max(worst, val)
    return worst
