"""Discrete-mode bosonic Fock space.

Modes are orthonormal (a_k, a_k^+ with [a_j, a_k^+] = delta_jk), so a
continuum integral  int dp f(p) a_p  becomes  sum_k sqrt(w_k) f(p_k) a_k.
States with at most ``n_max`` quanta are kept; every operator carries the
range of particle-number change it can cause and the largest grade on which
its truncated matrix is exact, so that identities can be checked on the
part of the space that the cap cannot touch.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import ConsistencyError, HermiticityError, UsageError
from .mollifier import Damper, SampledMollifier


# ---------------------------------------------------------------------------
# modes and basis

@dataclass(frozen=True, eq=False)
class ModeSet:
    """Momentum modes p_k with quadrature weights w_k (momentum-volume units)."""

    momenta: np.ndarray
    weights: np.ndarray
    mass: float
    d: int = 1

    def __post_init__(self):
        p = np.asarray(self.momenta, dtype=float).reshape(-1, self.d)
        w = np.asarray(self.weights, dtype=float).reshape(-1)
        if w.size != p.shape[0]:
            raise ValueError("one weight per mode is required")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if np.any(w <= 0):
            raise ValueError("mode weights must be positive")
        object.__setattr__(self, "momenta", p)
        object.__setattr__(self, "weights", w)

    @classmethod
    def periodic(cls, K, L, mass, d=1):
        """Modes of a periodic box of side L: p = 2 pi k / L, |k_i| <= (K-1)/2 per axis."""
        if K < 1 or K % 2 == 0:
            raise ValueError("K must be a positive odd number for a symmetric grid")
        ks = np.arange(K) - (K - 1) // 2
        grid = np.array(list(itertools.product(ks, repeat=d)), dtype=float)
        w = (2 * math.pi / L) ** d
        return cls(2 * math.pi / L * grid, np.full(len(grid), w), mass, d)

    @classmethod
    def pair(cls, p, w, mass):
        """Two d=1 modes at +-p sharing the weight w."""
        return cls(np.array([[-p], [p]]), np.array([w, w]), mass, 1)

    def __len__(self):
        return self.weights.size

    @cached_property
    def energies(self) -> np.ndarray:
        return np.sqrt(np.sum(self.momenta ** 2, axis=1) + self.mass ** 2)

    @cached_property
    def partner(self) -> Optional[np.ndarray]:
        """Index of the mode with momentum -p_k, or None if the set is not symmetric."""
        out = np.empty(len(self), dtype=int)
        for k, p in enumerate(self.momenta):
            hit = np.flatnonzero(np.all(np.abs(self.momenta + p) < 1e-12, axis=1))
            if hit.size != 1 or abs(self.weights[hit[0]] - self.weights[k]) > 1e-15 * self.weights[k]:
                return None
            out[k] = hit[0]
        return out

    @property
    def symmetric(self) -> bool:
        return self.partner is not None

    def to_dict(self):
        return {"mass": self.mass, "d": self.d, "momenta": self.momenta.tolist(),
                "weights": self.weights.tolist()}


def _graded_states(K, n_max):
    """Occupation vectors ordered by total number, then lexicographically descending."""
    out = []

    def rec(prefix, left, slots):
        if slots == 1:
            out.append(prefix + (left,))
            return
        for v in range(left, -1, -1):
            rec(prefix + (v,), left - v, slots - 1)

    for total in range(n_max + 1):
        rec((), total, K)
    return np.array(out, dtype=np.int64).reshape(-1, K)


class FockBasis:
    """Occupation-number basis sum(n) <= n_max in graded lexicographic order."""

    def __init__(self, K, n_max):
        if K < 1 or n_max < 0:
            raise ValueError("need K >= 1 and n_max >= 0")
        self.K = K
        self.n_max = n_max
        self.states = _graded_states(K, n_max)
        self.grades = self.states.sum(axis=1)
        self._index = {tuple(s): i for i, s in enumerate(self.states.tolist())}
        self._ladders = {}

    def __len__(self):
        return len(self.states)

    @property
    def dim(self):
        return len(self.states)

    def index(self, occupation) -> int:
        try:
            return self._index[tuple(int(v) for v in occupation)]
        except KeyError:
            raise UsageError(f"occupation {tuple(occupation)} is not in the truncated basis",
                             "occupation") from None

    def grade_mask(self, max_grade) -> np.ndarray:
        return self.grades <= max_grade

    def ladder_matrix(self, k, sign) -> sp.csr_matrix:
        key = (k, sign)
        if key not in self._ladders:
            if not 0 <= k < self.K:
                raise IndexError(f"mode index {k} out of range")
            if sign > 0:
                src = np.flatnonzero(self.grades < self.n_max)
                tgt_states = self.states[src].copy()
                vals = np.sqrt(tgt_states[:, k] + 1.0)
                tgt_states[:, k] += 1
            else:
                src = np.flatnonzero(self.states[:, k] > 0)
                tgt_states = self.states[src].copy()
                vals = np.sqrt(tgt_states[:, k].astype(float))
                tgt_states[:, k] -= 1
            rows = np.array([self._index[tuple(s)] for s in tgt_states.tolist()], dtype=np.int64)
            m = sp.csr_matrix((vals.astype(complex), (rows, src)), shape=(self.dim, self.dim))
            self._ladders[key] = m
        return self._ladders[key]


# ---------------------------------------------------------------------------
# vectors and operators

@dataclass(eq=False)
class FockVector:
    basis: FockBasis
    amplitudes: np.ndarray

    @classmethod
    def vacuum(cls, basis):
        a = np.zeros(basis.dim, dtype=complex)
        a[0] = 1.0
        return cls(basis, a)

    @classmethod
    def occupation(cls, basis, occ):
        a = np.zeros(basis.dim, dtype=complex)
        a[basis.index(occ)] = 1.0
        return cls(basis, a)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self):
        return FockVector(self.basis, self.amplitudes / self.norm())

    def inner(self, other) -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def __add__(self, other):
        return FockVector(self.basis, self.amplitudes + other.amplitudes)

    def __rmul__(self, c):
        return FockVector(self.basis, c * self.amplitudes)


class FockOperator:
    """Sparse matrix on a FockBasis plus truncation bookkeeping.

    ``shift = (lo, hi)`` is the range of particle-number change; ``safe`` is
    the largest grade whose columns are reproduced exactly by the truncated
    matrix and ``row_safe`` the analogue for rows (the adjoint's ``safe``).
    """

    def __init__(self, basis: FockBasis, matrix, shift=(0, 0), safe=None, row_safe=None,
                 label=""):
        self.basis = basis
        self.matrix = sp.csr_matrix(matrix, dtype=complex)
        self.shift = (int(shift[0]), int(shift[1]))
        n = basis.n_max
        self.safe = n - max(self.shift[1], 0) if safe is None else int(safe)
        self.row_safe = n + min(self.shift[0], 0) if row_safe is None else int(row_safe)
        self.label = label

    # construction helpers
    @classmethod
    def identity(cls, basis, c=1.0):
        return cls(basis, c * sp.identity(basis.dim, dtype=complex, format="csr"), label="1")

    @classmethod
    def zero(cls, basis):
        return cls(basis, sp.csr_matrix((basis.dim, basis.dim), dtype=complex), label="0")

    def _check(self, other):
        if other.basis is not self.basis:
            raise UsageError("operators live on different bases", "basis")

    def __add__(self, other):
        if np.isscalar(other):
            other = FockOperator.identity(self.basis, other)
        self._check(other)
        lo = min(self.shift[0], other.shift[0])
        hi = max(self.shift[1], other.shift[1])
        return FockOperator(self.basis, self.matrix + other.matrix, (lo, hi),
                            min(self.safe, other.safe), min(self.row_safe, other.row_safe))

    __radd__ = __add__

    def __neg__(self):
        return FockOperator(self.basis, -self.matrix, self.shift, self.safe, self.row_safe, self.label)

    def __sub__(self, other):
        return self + (-other if isinstance(other, FockOperator) else -other)

    def __mul__(self, c):
        if isinstance(c, FockOperator):
            return self @ c
        return FockOperator(self.basis, c * self.matrix, self.shift, self.safe, self.row_safe, self.label)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return self * (1.0 / c)

    def __matmul__(self, other):
        if isinstance(other, FockVector):
            return FockVector(self.basis, self.matrix @ other.amplitudes)
        self._check(other)
        lo = self.shift[0] + other.shift[0]
        hi = self.shift[1] + other.shift[1]
        safe = min(other.safe, self.safe - other.shift[1])
        row_safe = min(self.row_safe, other.row_safe + self.shift[0])
        return FockOperator(self.basis, self.matrix @ other.matrix, (lo, hi), safe, row_safe)

    def __pow__(self, n):
        if n < 1:
            raise ValueError("power must be >= 1")
        out = self
        for _ in range(n - 1):
            out = out @ self
        return out

    @property
    def H(self):
        return FockOperator(self.basis, self.matrix.conj().T.tocsr(), (-self.shift[1], -self.shift[0]),
                            self.row_safe, self.safe, self.label + "^+")

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_defect(self) -> float:
        diff = self.matrix - self.matrix.conj().T
        return float(np.max(np.abs(diff.data))) if diff.nnz else 0.0

    def is_hermitian(self, tol=1e-12) -> bool:
        return self.hermiticity_defect() < tol

    def safe_columns(self) -> np.ndarray:
        return np.flatnonzero(self.basis.grade_mask(self.safe))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix.data))) if self.matrix.nnz else 0.0

    def __repr__(self):
        return (f"FockOperator(dim={self.basis.dim}, shift={self.shift}, safe={self.safe}, "
                f"nnz={self.matrix.nnz}{', ' + self.label if self.label else ''})")


def ladder(basis: FockBasis, k, sign) -> FockOperator:
    """a_k^+ (sign > 0) or a_k^- (sign < 0)."""
    s = 1 if sign > 0 else -1
    return FockOperator(basis, basis.ladder_matrix(k, s), (s, s), label=f"a{'+' if s > 0 else '-'}_{k}")


@dataclass
class CommutatorResult:
    """[A, B] with the grade up to which it is free of truncation artefacts."""

    op: FockOperator
    safe: int
    contaminated: bool

    def on_safe(self) -> np.ndarray:
        cols = self.op.safe_columns()
        return self.op.matrix[:, cols].toarray()

    def scalar_part(self):
        """Return (c, residual) with [A, B] = c 1 + residual on the safe columns."""
        cols = self.op.safe_columns()
        if cols.size == 0:
            raise ConsistencyError("no safe columns: raise n_max")
        block = self.op.matrix[:, cols].toarray()
        diag = block[cols, np.arange(cols.size)]
        c = complex(np.mean(diag))
        block[cols, np.arange(cols.size)] -= c
        return c, float(np.max(np.abs(block)))


def commutator(A: FockOperator, B: FockOperator) -> CommutatorResult:
    op = A @ B - B @ A
    return CommutatorResult(op, op.safe, op.safe < op.basis.n_max)


# ---------------------------------------------------------------------------
# fields

def plane_wave(modes: ModeSet, t, x) -> np.ndarray:
    """psi_{p_k}(t, x) for every mode."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    E = modes.energies
    return np.exp(1j * (modes.momenta @ x - E * t)) / np.sqrt((2 * math.pi) ** modes.d * 2 * E)


FIELD_KINDS = ("phi", "pi", "dx", "laplacian")


def field_coefficients(modes: ModeSet, rho_hat: Damper, eps, t, x, which="phi", axis=0):
    """(alpha_k, beta_k) with field = sum_k alpha_k a_k^+ + beta_k a_k^-."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if which not in FIELD_KINDS:
        raise UsageError(f"unknown field kind {which!r}; choose from {FIELD_KINDS}", "which")
    damp = np.array([rho_hat.at(eps * p) for p in modes.momenta]) if modes.d > 1 \
        else rho_hat(eps * modes.momenta[:, 0])
    psi = plane_wave(modes, t, x)
    sw = np.sqrt(modes.weights)
    alpha = sw * damp * np.conj(psi)
    beta = sw * np.conj(damp) * psi
    if which == "pi":
        E = modes.energies
        alpha, beta = alpha * 1j * E, beta * (-1j) * E
    elif which == "dx":
        p = modes.momenta[:, axis]
        alpha, beta = alpha * (-1j) * p, beta * 1j * p
    elif which == "laplacian":
        p2 = np.sum(modes.momenta ** 2, axis=1)
        alpha, beta = -p2 * alpha, -p2 * beta
    return alpha, beta


def linear_field(basis: FockBasis, alpha, beta, label="") -> FockOperator:
    m = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for k in range(basis.K):
        if alpha[k] != 0:
            m = m + alpha[k] * basis.ladder_matrix(k, 1)
        if beta[k] != 0:
            m = m + beta[k] * basis.ladder_matrix(k, -1)
    return FockOperator(basis, m, (-1, 1), label=label)


def field_operator(basis: FockBasis, modes: ModeSet, rho_hat: Damper, eps, x, t=0.0,
                   which="phi", axis=0) -> FockOperator:
    """Damped free field phi_0(t, x) and its derivatives as a FockOperator."""
    if basis.K != len(modes):
        raise UsageError("basis and mode set disagree on the number of modes", "modes")
    alpha, beta = field_coefficients(modes, rho_hat, eps, t, x, which, axis)
    return linear_field(basis, alpha, beta, label=f"{which}({np.atleast_1d(x).tolist()})")


def commutator_kernel(modes: ModeSet, rho_hat: Damper, eps, dx) -> np.ndarray:
    """c(dx) in [phi_0(x1), pi_0(x2)] = i c(x1 - x2) 1 for the discrete modes."""
    dx = np.asarray(dx, dtype=float)
    damp = rho_hat(eps * np.linalg.norm(modes.momenta, axis=1))
    flat = dx.reshape(-1, modes.d) if modes.d > 1 else dx.reshape(-1, 1)
    phase = np.cos(flat @ modes.momenta.T)
    out = phase @ (modes.weights * np.abs(damp) ** 2) / (2 * math.pi) ** modes.d
    return out.reshape(dx.shape[:-1] if modes.d > 1 else dx.shape)


def periodized_kernel(kernel: SampledMollifier, eps, L, dx, n_images=None) -> np.ndarray:
    """sum_j (1/eps) kernel((dx + j L)/eps) over enough images to cover the samples (d=1)."""
    dx = np.asarray(dx, dtype=float)
    reach = max(abs(kernel.x[0]), abs(kernel.x[-1])) * eps
    n = int(math.ceil(reach / L)) + 1 if n_images is None else n_images
    out = np.zeros(dx.shape)
    for j in range(-n, n + 1):
        arg = (dx + j * L) / eps
        out = out + np.where(kernel.in_range(arg), np.real(kernel(arg)), 0.0)
    return out / eps


# ---------------------------------------------------------------------------
# Hamiltonians

def build_H0_canonical(basis: FockBasis, modes: ModeSet) -> FockOperator:
    """sum_k E_k a_k^+ a_k^-, diagonal in the occupation basis."""
    diag = basis.states @ modes.energies
    return FockOperator(basis, sp.diags(diag.astype(complex), format="csr"), label="H0")


@dataclass
class H0Blocks:
    pp: FockOperator
    mm: FockOperator
    pm: FockOperator
    mp: FockOperator
    zero_point: float

    @property
    def total(self) -> FockOperator:
        return self.pp + self.mm + self.pm + self.mp


def _chi_kernel_1d(chi: SampledMollifier, q, eps, d):
    arg = np.asarray(q, dtype=float) / eps
    return np.where(chi.in_range(arg), np.real(chi(arg)), 0.0) / eps ** d


def build_H0_blocks(basis: FockBasis, modes: ModeSet, rho_hat: Damper, chi: SampledMollifier, eps,
                    t=0.0, t_xi=0.0) -> H0Blocks:
    """The four normal-ordering blocks of H0 = 1/2 int chi_hat(eps x)(pi^2 + |grad phi|^2 + m^2 phi^2).

    The spatial integral against chi_hat(eps x) turns products of plane waves
    into (2 pi)^d eps^-d chi((p1 +- p2)/eps); phases use T = t - t_xi.
    """
    K = len(modes)
    p = modes.momenta
    E = modes.energies
    m2 = modes.mass ** 2
    damp = rho_hat(eps * np.linalg.norm(p, axis=1)) if modes.d > 1 else rho_hat(eps * p[:, 0])
    sw = np.sqrt(modes.weights)
    T = t - t_xi
    amp = 0.5 * np.outer(sw * damp, sw * damp) / (2 * np.sqrt(np.outer(E, E)))
    pdot = p @ p.T
    EE = np.outer(E, E)
    qsum = np.linalg.norm(p[:, None, :] + p[None, :, :], axis=2)
    qdiff = np.linalg.norm(p[:, None, :] - p[None, :, :], axis=2)
    ksum = _chi_kernel_1d(chi, qsum, eps, modes.d)
    kdiff = _chi_kernel_1d(chi, qdiff, eps, modes.d)
    Es = E[:, None] + E[None, :]
    Ed = E[:, None] - E[None, :]
    # -E1 E2 - p1.p2 + m^2 rationalized so that it is exactly 0 for p2 = -p1
    pp2 = np.sum(p ** 2, axis=1)
    cross = np.outer(pp2, pp2) - pdot ** 2
    kin_pp = -(np.clip(cross, 0.0, None) + m2 * qsum ** 2) / (EE + m2 - pdot)
    c_pp = amp * ksum * kin_pp * np.exp(1j * Es * T)
    c_mm = amp * ksum * kin_pp * np.exp(-1j * Es * T)
    c_pm = amp * kdiff * (EE + pdot + m2) * np.exp(1j * Ed * T)
    c_mp = amp * kdiff * (EE + pdot + m2) * np.exp(-1j * Ed * T)

    def quad(c, s1, s2, shift):
        mat = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
        for i in range(K):
            for j in range(K):
                if c[i, j] != 0:
                    mat = mat + c[i, j] * (basis.ladder_matrix(i, s1) @ basis.ladder_matrix(j, s2))
        return mat

    n = basis.n_max
    pp = FockOperator(basis, quad(c_pp, 1, 1, 2), (2, 2), n - 2, n, "H++")
    mm = FockOperator(basis, quad(c_mm, -1, -1, -2), (-2, -2), n, n - 2, "H--")
    pm = FockOperator(basis, quad(c_pm, 1, -1, 0), (0, 0), n, n, "H+-")
    mp = FockOperator(basis, quad(c_mp, -1, 1, 0), (0, 0), n - 1, n - 1, "H-+")
    zp = float(np.real(np.sum(np.diag(c_mp))))
    return H0Blocks(pp, mm, pm, mp, zp)


def zero_point_discrete(modes: ModeSet, rho_hat: Damper, chi: SampledMollifier, eps) -> float:
    """E = 1/2 eps^-d chi(0) sum_k w_k E_k |rho_hat(eps p_k)|^2 (vacuum value of H-+)."""
    damp = rho_hat(eps * np.linalg.norm(modes.momenta, axis=1))
    k0 = float(_chi_kernel_1d(chi, 0.0, eps, modes.d))
    return 0.5 * k0 * float(np.sum(modes.weights * modes.energies * np.abs(damp) ** 2))


@dataclass(frozen=True, eq=False)
class SpatialGrid:
    """Quadrature nodes x_j and weights v_j for spatial integrals."""

    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def periodic(cls, J, L, d=1):
        xs = -L / 2 + L * np.arange(J) / J
        pts = np.array(list(itertools.product(xs, repeat=d)), dtype=float)
        return cls(pts, np.full(len(pts), (L / J) ** d))

    def __len__(self):
        return self.weights.size

    def shifted(self, s):
        return SpatialGrid(self.points + s, self.weights)


@dataclass(eq=False)
class LatticeModel:
    """Everything needed to build the interacting Hamiltonian on a truncated Fock space."""

    modes: ModeSet
    grid: SpatialGrid
    rho_hat: Damper
    chi_hat: Damper
    eps: float
    g: float
    N: int
    tau: float = 0.0

    def __post_init__(self):
        if self.eps <= 0:
            raise UsageError("eps must be positive", "physics.eps")
        if self.N < 0:
            raise UsageError("N must be >= 0", "physics.N")

    def basis(self, n_max) -> FockBasis:
        return FockBasis(len(self.modes), n_max)

    def source_weights(self) -> np.ndarray:
        """v_j chi_hat(eps x_j)."""
        r = np.linalg.norm(self.grid.points, axis=1)
        return self.grid.weights * self.chi_hat(self.eps * r)

    def phi(self, basis, x, t=None, which="phi", axis=0) -> FockOperator:
        return field_operator(basis, self.modes, self.rho_hat, self.eps, x,
                              self.tau if t is None else t, which, axis)

    def field_coeffs(self, x, t=None, which="phi"):
        return field_coefficients(self.modes, self.rho_hat, self.eps,
                                  self.tau if t is None else t, x, which)


def build_H_full(model: LatticeModel, basis: FockBasis, check=True) -> FockOperator:
    """H0 (canonical) + g/(N+1) sum_j v_j chi_hat(eps x_j) phi_0(tau, x_j)^(N+1)."""
    if model.N + 1 > basis.n_max:
        raise UsageError(f"N+1 = {model.N + 1} exceeds n_max = {basis.n_max}", "fock.n_max")
    H = build_H0_canonical(basis, model.modes)
    if model.g == 0:
        return H
    weights = model.source_weights()
    acc = None
    for xj, vj in zip(model.grid.points, weights):
        if vj == 0:
            continue
        term = model.phi(basis, xj) ** (model.N + 1) * vj
        acc = term if acc is None else acc + term
    if acc is not None:
        H = H + acc * (model.g / (model.N + 1))
    H.label = "H"
    if check:
        defect = H.hermiticity_defect()
        if defect > 1e-10 * max(1.0, H.max_abs()):
            raise HermiticityError(f"interacting Hamiltonian not Hermitian (defect {defect:.3e})")
    return H


# ---------------------------------------------------------------------------
# Heisenberg evolution

class Propagator:
    """Dense spectral representation of a Hermitian H: U(t) = exp(-i t H)."""

    def __init__(self, H: FockOperator, tol=1e-10):
        defect = H.hermiticity_defect()
        if defect > tol * max(1.0, H.max_abs()):
            raise HermiticityError(f"refusing to exponentiate a non-Hermitian operator (defect {defect:.3e})")
        self.basis = H.basis
        dense = H.dense()
        self.evals, self.evecs = np.linalg.eigh(0.5 * (dense + dense.conj().T))

    def U(self, t) -> np.ndarray:
        return (self.evecs * np.exp(-1j * t * self.evals)) @ self.evecs.conj().T

    def evolve(self, A, t) -> np.ndarray:
        """e^{itH} A e^{-itH} as a dense matrix."""
        a = A.dense() if isinstance(A, FockOperator) else np.asarray(A)
        V = self.evecs
        ph = np.exp(1j * t * self.evals)
        inner = V.conj().T @ a @ V
        inner = ph[:, None] * inner * np.conj(ph)[None, :]
        return V @ inner @ V.conj().T


def heisenberg_evolve(A: FockOperator, H: FockOperator, dt, propagator: Optional[Propagator] = None) -> FockOperator:
    """e^{i dt H} A e^{-i dt H}."""
    if dt == 0:
        return A
    prop = propagator or Propagator(H)
    return FockOperator(A.basis, prop.evolve(A, dt), (-A.basis.n_max, A.basis.n_max), safe=-1, row_safe=-1,
                        label=A.label + "(t)")


@dataclass
class HeisenbergCheck:
    steps: np.ndarray
    errors: np.ndarray
    orders: np.ndarray


def heisenberg_fd_check(A: FockOperator, H: FockOperator, t, steps=(1e-2, 5e-3, 2.5e-3)) -> HeisenbergCheck:
    """Central-difference d/dt A(t) against i[H, A(t)] at several steps."""
    prop = Propagator(H)
    h_dense = H.dense()
    At = prop.evolve(A, t)
    exact = 1j * (h_dense @ At - At @ h_dense)
    errs = []
    for h in steps:
        fd = (prop.evolve(A, t + h) - prop.evolve(A, t - h)) / (2 * h)
        errs.append(np.max(np.abs(fd - exact)))
    errs = np.array(errs)
    steps = np.asarray(steps, dtype=float)
    orders = np.log(errs[:-1] / errs[1:]) / np.log(steps[:-1] / steps[1:])
    return HeisenbergCheck(steps, errs, orders)


# ---------------------------------------------------------------------------
# field-equation residual

def _apply_power(phi_m, X, n):
    for _ in range(n):
        X = phi_m @ X
    return X


def _apply_H(model, basis, phis, X):
    """H_full @ X for a dense block X, without forming phi^(N+1)."""
    diag = basis.states @ model.modes.energies
    out = diag[:, None] * X
    if model.g != 0:
        acc = np.zeros_like(X)
        for phi_m, v in phis:
            acc += v * _apply_power(phi_m, X, model.N + 1)
        out = out + (model.g / (model.N + 1)) * acc
    return out


@dataclass
class FieldEquationResult:
    norm: float
    n_max: int
    work_n_max: int
    columns: int


def field_equation_residual(model: LatticeModel, n_max, xi: Callable, smear_grid: Optional[SpatialGrid] = None,
                            t=None) -> FieldEquationResult:
    """Operator norm of int Xi(x) {i[H, pi_0] - lap phi_0 + m^2 phi_0 + g phi_0^N} dx on grade <= n_max.

    The products are carried out in a Fock space with n_max + N + 2 quanta,
    which makes the columns of grade <= n_max exact; the norm is taken over
    those columns.  ``t`` defaults to tau (where H is built).
    """
    if t is not None and t != model.tau:
        raise UsageError("the residual is evaluated at t = tau", "t")
    work = n_max + model.N + 2
    basis = model.basis(work)
    cols = np.flatnonzero(basis.grade_mask(n_max))
    sg = smear_grid or model.grid
    xi_w = sg.weights * np.array([xi(x if x.size > 1 else x[0]) for x in sg.points])
    if not np.any(xi_w):
        return FieldEquationResult(0.0, n_max, work, cols.size)
    alpha = np.zeros(len(model.modes), dtype=complex)
    beta = np.zeros(len(model.modes), dtype=complex)
    a_pi, b_pi = alpha.copy(), beta.copy()
    for x, u in zip(sg.points, xi_w):
        for which, (A, B) in (("phi", (alpha, beta)), ("pi", (a_pi, b_pi))):
            al, be = model.field_coeffs(x, which=which)
            if which == "phi":
                p2 = np.sum(model.modes.momenta ** 2, axis=1)
                al, be = al * (model.modes.mass ** 2 + p2), be * (model.modes.mass ** 2 + p2)
            A += u * al
            B += u * be
    lin = linear_field(basis, alpha, beta).matrix      # int Xi (-lap + m^2) phi
    pi_xi = linear_field(basis, a_pi, b_pi).matrix      # int Xi pi
    phis = [(model.phi(basis, xj).matrix, vj) for xj, vj in zip(model.grid.points, model.source_weights())
            if vj != 0]
    Iblk = sp.identity(basis.dim, dtype=complex, format="csr")[:, cols].toarray()
    R = 1j * (_apply_H(model, basis, phis, pi_xi @ Iblk) - pi_xi @ _apply_H(model, basis, phis, Iblk))
    R = R + lin @ Iblk
    if model.g != 0:
        for x, u in zip(sg.points, xi_w):
            if u == 0:
                continue
            ph = model.phi(basis, x).matrix
            R = R + model.g * u * _apply_power(ph, Iblk, model.N)
    return FieldEquationResult(float(np.linalg.norm(R, 2)), n_max, work, cols.size)
