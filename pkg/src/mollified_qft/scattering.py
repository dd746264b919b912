"""Finite-window time-evolution operator and its coupling-constant expansion.

S_tau(t) = exp(i(t - tau) H0) exp(-i(t - tau) H) with H = H0 + g V.  The
Dyson iterates S_[n] are accumulated by composite Simpson over a time grid;
an exact oracle comes from the exponential of a block-bidiagonal matrix.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.linalg import expm

from .errors import AccuracyError, ConsistencyError, UsageError
from .fock import (
    FockBasis,
    FockOperator,
    FockVector,
    LatticeModel,
    Propagator,
    build_H0_canonical,
    build_H_full,
)

MAX_ORDER = 6
MIN_TIME_POINTS = 64


@dataclass(eq=False)
class ScatteringSetup:
    """Free and interacting Hamiltonians on one basis, with coupling g and start time tau."""

    H0: FockOperator
    H: FockOperator
    g: float
    N: int
    tau: float = 0.0
    model: Optional[LatticeModel] = None

    def __post_init__(self):
        if self.H0.basis is not self.H.basis:
            raise UsageError("H0 and H must share a basis", "scattering.basis")
        # Propagator refuses non-Hermitian input
        self.prop0 = Propagator(self.H0)
        self.prop = Propagator(self.H)

    @classmethod
    def from_model(cls, model: LatticeModel, n_max):
        basis = model.basis(n_max)
        return cls(build_H0_canonical(basis, model.modes), build_H_full(model, basis),
                   model.g, model.N, model.tau, model)

    @property
    def basis(self) -> FockBasis:
        return self.H.basis

    @cached_property
    def V(self) -> np.ndarray:
        """H_It at t = tau, i.e. (H - H0)/g (dense)."""
        if self.g == 0:
            raise UsageError("the rescaled interaction needs g != 0", "physics.g")
        return (self.H.dense() - self.H0.dense()) / self.g

    @cached_property
    def V_norm(self) -> float:
        """Spectral norm of H_It, the same at every time."""
        return float(np.linalg.norm(self.V, 2))


def s_exact(setup: ScatteringSetup, t) -> np.ndarray:
    dt = t - setup.tau
    return setup.prop0.U(-dt) @ setup.prop.U(dt)


def free_factor(setup: ScatteringSetup, s) -> np.ndarray:
    """exp(i s H0)."""
    return setup.prop0.U(-s)


def interaction_hamiltonian(setup: ScatteringSetup, t) -> np.ndarray:
    """H_I(t) = e^{i(t-tau)H0} (H - H0) e^{-i(t-tau)H0}."""
    diff = setup.H.dense() - setup.H0.dense()
    return setup.prop0.evolve(diff, t - setup.tau)


def interaction_from_fields(setup: ScatteringSetup, t) -> np.ndarray:
    """g/(N+1) sum_j v_j chi_hat(eps x_j) phi_I(t, x_j)^(N+1), phi_I = free evolution of phi_0(tau, .)."""
    model = setup.model
    if model is None:
        raise UsageError("the field construction needs the lattice model", "scattering.model")
    basis = setup.basis
    acc = np.zeros((basis.dim, basis.dim), dtype=complex)
    for xj, vj in zip(model.grid.points, model.source_weights()):
        if vj == 0:
            continue
        phi_i = setup.prop0.evolve(model.phi(basis, xj), t - setup.tau)
        acc += vj * np.linalg.matrix_power(phi_i, model.N + 1)
    return model.g / (model.N + 1) * acc


def check_interaction(setup: ScatteringSetup, t, tol=1e-8) -> float:
    """Max-norm difference of the two H_I constructions; raises above ``tol``."""
    diff = float(np.max(np.abs(interaction_hamiltonian(setup, t) - interaction_from_fields(setup, t))))
    if diff > tol:
        raise ConsistencyError(f"interaction Hamiltonian constructions disagree by {diff:.3e}")
    return diff


# ---------------------------------------------------------------------------
# Dyson iterates

@dataclass
class DysonTable:
    times: np.ndarray
    terms: list          # terms[n] has shape (len(times), D, D)
    richardson: list = field(default_factory=list)

    def at(self, n, i=-1) -> np.ndarray:
        return self.terms[n][i]

    def partial_sum(self, g, n, i=-1) -> np.ndarray:
        return sum(g ** k * self.terms[k][i] for k in range(n + 1))


def _accumulate(times, h_it, order):
    D = h_it.shape[1]
    terms = [np.broadcast_to(np.eye(D, dtype=complex), (times.size, D, D)).copy()]
    for _ in range(order):
        integrand = np.einsum("tij,tjk->tik", h_it, terms[-1])
        # cumulative_simpson works on real data only
        re = cumulative_simpson(integrand.real, x=times, axis=0, initial=0.0)
        im = cumulative_simpson(integrand.imag, x=times, axis=0, initial=0.0)
        terms.append(-1j * (re + 1j * im))
    return terms


def dyson_terms(setup: ScatteringSetup, order, t_max, n_points=257, rtol=1e-6) -> DysonTable:
    """S_[0..order] on a uniform grid over [tau, t_max].

    A second accumulation on every other node must agree with the full grid
    to ``rtol`` (relative to the term's size) or an AccuracyError is raised.
    """
    if not 0 <= order <= MAX_ORDER:
        raise UsageError(f"order must be in 0..{MAX_ORDER}", "scattering.order")
    if n_points < MIN_TIME_POINTS:
        raise UsageError(f"need at least {MIN_TIME_POINTS} time points", "scattering.steps")
    if n_points % 2 == 0:
        n_points += 1
    times = np.linspace(setup.tau, t_max, n_points)
    V = setup.V
    h_it = np.array([setup.prop0.evolve(V, t - setup.tau) for t in times])
    terms = _accumulate(times, h_it, order)
    coarse = _accumulate(times[::2], h_it[::2], order)
    gaps = []
    for n in range(1, order + 1):
        fine = terms[n][::2]
        gap = float(np.max(np.abs(fine - coarse[n])))
        scale = max(1.0, float(np.max(np.abs(fine))))
        gaps.append(gap)
        if gap > rtol * scale:
            raise AccuracyError(f"Dyson term {n}: time grid too coarse (Richardson gap {gap:.3e})",
                                estimate=gap)
    return DysonTable(times, terms, gaps)


def dyson_exact(setup: ScatteringSetup, order, t) -> list:
    """S_[0..order](t) from exp of the block-bidiagonal matrix [[A, B], [0, A], ...]."""
    D = setup.basis.dim
    A = -1j * setup.H.dense() + 1j * setup.g * setup.V  # = -i H0
    B = -1j * setup.V
    M = np.zeros(((order + 1) * D, (order + 1) * D), dtype=complex)
    for k in range(order + 1):
        M[k * D:(k + 1) * D, k * D:(k + 1) * D] = A
        if k < order:
            M[k * D:(k + 1) * D, (k + 1) * D:(k + 2) * D] = B
    dt = t - setup.tau
    E = expm(dt * M)
    pre = free_factor(setup, dt)
    return [pre @ E[0:D, k * D:(k + 1) * D] for k in range(order + 1)]


@dataclass
class BoundRow:
    order: int
    g: float
    t: float
    series_error: float
    stated_bound: float
    proof_bound: float
    disk_bound: float
    bound_satisfied: bool
    stated_satisfied: bool
    disk_satisfied: bool


def remainder_bounds(setup: ScatteringSetup, table: DysonTable, max_order=None, i=-1) -> list:
    """Compare ||S - sum_{k<=n} g^k S_[k]|| with the remainder bounds.

    ``proof_bound`` = (g dt)^{n+1}/(n+1)!, ``stated_bound`` = (g dt)^n/n!,
    ``disk_bound`` = (g M dt)^{n+1}/(n+1)! with M = ||H_It|| (the bound on a
    disk where H_It has norm M).
    """
    t = float(table.times[i])
    dt = t - setup.tau
    S = s_exact(setup, t)
    M = setup.V_norm
    g = setup.g
    rows = []
    top = len(table.terms) - 1 if max_order is None else max_order
    for n in range(top + 1):
        err = float(np.linalg.norm(S - table.partial_sum(g, n, i), 2))
        proof = (g * dt) ** (n + 1) / math.factorial(n + 1)
        stated = (g * dt) ** n / math.factorial(n)
        disk = (g * M * dt) ** (n + 1) / math.factorial(n + 1)
        rows.append(BoundRow(n, g, t, err, stated, proof, disk, err <= proof, err <= stated,
                             err <= disk * (1 + 1e-9) + 1e-14))
    return rows


# ---------------------------------------------------------------------------
# ODE residual, amplitudes, zero-point shift

def ode_residual(setup: ScatteringSetup, t, steps=(0.02, 0.01, 0.005)):
    """Max-norm of (S(t+h) - S(t-h))/(2h) + i H_I(t) S(t) and the observed orders."""
    S = s_exact(setup, t)
    rhs = -1j * interaction_hamiltonian(setup, t) @ S
    errs = np.array([np.max(np.abs((s_exact(setup, t + h) - s_exact(setup, t - h)) / (2 * h) - rhs))
                     for h in steps])
    h = np.asarray(steps, dtype=float)
    return errs, np.log(errs[:-1] / errs[1:]) / np.log(h[:-1] / h[1:])


def transition_amplitude(setup: ScatteringSetup, psi: FockVector, phi: FockVector, t, order=None,
                         table: Optional[DysonTable] = None):
    """<psi | S phi> with the exact S (order=None) or the order-n partial sum; returns (amplitude, probability)."""
    for v in (psi, phi):
        if abs(v.norm() - 1.0) > 1e-12:
            raise UsageError("states must be normalized", "state")
    if order is None:
        S = s_exact(setup, t)
    else:
        if table is None:
            S = sum(setup.g ** k * T for k, T in enumerate(dyson_exact(setup, order, t)))
        else:
            S = table.partial_sum(setup.g, order)
    amp = complex(np.vdot(psi.amplitudes, S @ phi.amplitudes))
    return amp, abs(amp) ** 2


def amplitude_remainder_constant(setup: ScatteringSetup, psi, phi, t, max_order=4) -> float:
    """Smallest Cst with |R_[n]| <= Cst g^n (t-tau)^n/n! over n = 1..max_order."""
    exact, _ = transition_amplitude(setup, psi, phi, t)
    dt = t - setup.tau
    terms = dyson_exact(setup, max_order, t)
    best = 0.0
    partial = np.zeros_like(terms[0])
    for n in range(max_order + 1):
        partial = partial + setup.g ** n * terms[n]
        if n == 0:
            continue
        rem = abs(exact - complex(np.vdot(psi.amplitudes, partial @ phi.amplitudes)))
        best = max(best, rem / ((setup.g * dt) ** n / math.factorial(n)))
    return best


def zero_point_shift_check(setup: ScatteringSetup, c, t) -> float:
    """max |S_shifted - S| when H0 and H both gain c 1; the shifted S is recomputed from scratch."""
    if c == 0:
        return 0.0
    shifted = ScatteringSetup(setup.H0 + c, setup.H + c, setup.g, setup.N, setup.tau)
    return float(np.max(np.abs(s_exact(shifted, t) - s_exact(setup, t))))
