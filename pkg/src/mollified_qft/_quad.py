"""Small quadrature helpers used across modules."""
import numpy as np

from .errors import AccuracyError


def simpson_weights(n_panels, h):
    """Composite Simpson weights for ``n_panels`` (even) intervals of width h."""
    if n_panels % 2:
        n_panels += 1
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def simpson(f, lo, hi, n_panels):
    """Composite Simpson rule of a vectorised integrand on [lo, hi]."""
    if n_panels % 2:
        n_panels += 1
    x = np.linspace(lo, hi, n_panels + 1)
    return f(x) @ simpson_weights(n_panels, (hi - lo) / n_panels)


def simpson_refined(f, lo, hi, n_start=64, rtol=1e-12, atol=0.0, max_panels=1 << 21):
    """Simpson rule with panel doubling until successive results agree.

    ``f`` maps a 1D grid to an array whose *last* axis runs along the grid, so
    several integrals (for example one per radius) can be refined together.
    Returns the finest estimate.
    """
    n = max(int(n_start), 4)
    n += n % 2
    prev = None
    while True:
        x = np.linspace(lo, hi, n + 1)
        cur = f(x) @ simpson_weights(n, (hi - lo) / n)
        if prev is not None:
            err = np.max(np.abs(cur - prev))
            scale = np.max(np.abs(cur)) if np.size(cur) else 0.0
            if err <= atol + rtol * scale:
                return cur
        if 2 * n > max_panels:
            raise AccuracyError(
                f"Simpson rule did not converge with {n} panels on [{lo}, {hi}]",
                estimate=None if prev is None else float(np.max(np.abs(cur - prev))),
            )
        prev = cur
        n *= 2


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(24)


def gauss_legendre(f, lo, hi, n_sub):
    """Composite 24-point Gauss-Legendre rule on ``n_sub`` equal subintervals."""
    edges = np.linspace(lo, hi, n_sub + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    x = (mid[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    w = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    return np.sum(f(x) * w)
