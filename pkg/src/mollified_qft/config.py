"""Experiment configuration: INI sections mapped onto typed dataclasses.

Grammar: standard INI (``[section]`` then ``key = value``).  Scalars are
Python literals (ints, floats, strings without quotes, ``true``/``false``);
sequences are comma-separated.  ``write_config`` emits floats with ``repr``
so that ``parse_config(write_config(c)) == c`` bit for bit.
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, fields, is_dataclass
from typing import get_type_hints

from .errors import UsageError

EXPERIMENTS = ("moments", "sifting", "embeddings", "norms", "commutators", "zpe-sweep",
               "hamiltonian-blocks", "heisenberg", "field-equation", "scattering")


def _geom(start, ratio, n):
    return tuple(start * ratio ** k for k in range(n))


@dataclass
class ExperimentSection:
    name: str = "all"
    out: str = "results"


@dataclass
class MollifierSection:
    a: float = 1.0
    b: float = 3.0
    n_points: int = 1024
    profile: str = "erf"
    chi_a: float = 1.0
    chi_b: float = 3.0


@dataclass
class PhysicsSection:
    mass: float = 1.0
    d: int = 1
    g: float = 0.1
    N: int = 3


@dataclass
class SweepSection:
    eps: tuple = _geom(0.2, 0.5, 8)


@dataclass
class SiftingSection:
    point: float = 0.3
    hermite_order: int = 2
    seed: int = 0


@dataclass
class NormsSection:
    eps: tuple = _geom(0.2, (0.0015 / 0.2) ** (1 / 7), 8)
    g_norm_eps: tuple = (0.2, 0.1, 0.05)


@dataclass
class ZpeSection:
    eps: tuple = _geom(0.2, 10 ** (-1.5 / 7), 8)
    model_eps: tuple = (0.2, 0.1, 0.05, 0.025)
    average_eps: float = 0.0025
    average_dt: float = 10.0


@dataclass
class CommutatorsSection:
    K: int = 9
    n_max: int = 5
    eps: float = 0.5
    L: float = 0.0          # 0 selects L so that the modes span the damper support b/eps
    points: int = 7


@dataclass
class HamiltonianSection:
    K: int = 5
    n_max: int = 4
    L: float = 2 * math.pi
    eps: tuple = _geom(0.4, 2 ** -0.5, 10)


@dataclass
class HeisenbergSection:
    K: int = 5
    n_max: int = 4
    L: float = 2 * math.pi
    J: int = 17
    eps: float = 0.2
    x: float = 0.3
    t: float = 0.7
    steps: tuple = (1e-2, 5e-3, 2.5e-3)


@dataclass
class FieldEquationSection:
    K: int = 5
    n_max: int = 4
    L: float = 2 * math.pi
    J: int = 17
    eps: tuple = (1.6, 0.8, 0.4, 0.2, 0.1)


@dataclass
class ScatteringSection:
    n_max: int = 4
    L: float = 2 * math.pi
    J: int = 33
    eps: float = 0.2
    tau: float = 0.0
    window: float = 1.0
    steps: int = 257
    max_order: int = 4


@dataclass
class ThresholdsSection:
    mass_tol: float = 1e-10
    moment_tol: float = 1e-8
    sift_slope: float = 6.0
    sift_floor: float = 1e-11
    sift_m2_slack: float = 0.2
    norm_slope: float = -1.0
    norm_slope_tol: float = 0.05
    g_norm_tol: float = 1e-6
    zpe_slope: float = -7.0
    zpe_slope_tol: float = 0.15
    zpe_average_tol: float = 1e-3
    commutator_tol: float = 1e-12
    kernel_tol: float = 1e-6
    block_slope: float = 3.0
    order_target: float = 2.0
    order_tol: float = 0.1
    unitarity_tol: float = 1e-11
    shift_tol: float = 1e-10


@dataclass
class ExperimentConfig:
    experiment: ExperimentSection = field(default_factory=ExperimentSection)
    mollifier: MollifierSection = field(default_factory=MollifierSection)
    physics: PhysicsSection = field(default_factory=PhysicsSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    sifting: SiftingSection = field(default_factory=SiftingSection)
    norms: NormsSection = field(default_factory=NormsSection)
    zpe: ZpeSection = field(default_factory=ZpeSection)
    commutators: CommutatorsSection = field(default_factory=CommutatorsSection)
    hamiltonian: HamiltonianSection = field(default_factory=HamiltonianSection)
    heisenberg: HeisenbergSection = field(default_factory=HeisenbergSection)
    field_equation: FieldEquationSection = field(default_factory=FieldEquationSection)
    scattering: ScatteringSection = field(default_factory=ScatteringSection)
    thresholds: ThresholdsSection = field(default_factory=ThresholdsSection)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _conv(raw, kind, path):
    raw = raw.strip()
    try:
        if kind is tuple:
            if not raw:
                return ()
            return tuple(float(x) for x in raw.split(","))
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false"):
                raise ValueError(raw)
            return low == "true"
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise UsageError(f"cannot read {raw!r} as {kind.__name__}", path) from None


def write_config(cfg: ExperimentConfig) -> str:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    for sec in fields(cfg):
        obj = getattr(cfg, sec.name)
        cp[sec.name] = {f.name: _fmt(getattr(obj, f.name)) for f in fields(obj)}
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise UsageError(str(exc).splitlines()[0], "config") from None
    cfg = ExperimentConfig()
    known = {f.name: f for f in fields(cfg)}
    for sec in cp.sections():
        if sec not in known:
            raise UsageError("unknown section", sec)
        obj = getattr(cfg, sec)
        hints = get_type_hints(type(obj))
        names = {f.name for f in fields(obj)}
        for key, raw in cp[sec].items():
            if key not in names:
                raise UsageError("unknown key", f"{sec}.{key}")
            setattr(obj, key, _conv(raw, hints[key], f"{sec}.{key}"))
    validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc.strerror}", "--config") from None


def _positive(v, path):
    if not v > 0:
        raise UsageError("must be positive", path)


def _eps_list(v, path, min_len=1):
    if len(v) == 0:
        raise UsageError("epsilon list is empty", path)
    if len(v) < min_len:
        raise UsageError(f"need at least {min_len} epsilon values", path)
    for e in v:
        if not (e > 0 and math.isfinite(e)):
            raise UsageError("epsilon values must be positive and finite", path)
    if len(set(v)) != len(v):
        raise UsageError("epsilon values must be distinct", path)


def validate(cfg: ExperimentConfig) -> ExperimentConfig:
    """Check every field a later computation relies on; raise UsageError with its path."""
    if cfg.experiment.name not in EXPERIMENTS + ("all",):
        raise UsageError(f"unknown experiment; choose from {', '.join(EXPERIMENTS + ('all',))}",
                         "experiment.name")
    m = cfg.mollifier
    for key in ("a", "b", "chi_a", "chi_b"):
        _positive(getattr(m, key), f"mollifier.{key}")
    if m.a >= m.b:
        raise UsageError("need a < b", "mollifier.b")
    if m.chi_a >= m.chi_b:
        raise UsageError("need chi_a < chi_b", "mollifier.chi_b")
    if m.n_points < 512:
        raise UsageError("need at least 512 grid points", "mollifier.n_points")
    if m.profile not in ("erf", "smoothstep"):
        raise UsageError("profile must be erf or smoothstep", "mollifier.profile")
    p = cfg.physics
    _positive(p.mass, "physics.mass")
    if p.d not in (1, 3):
        raise UsageError("d must be 1 or 3", "physics.d")
    if p.N < 0:
        raise UsageError("N must be >= 0", "physics.N")
    _eps_list(cfg.sweep.eps, "sweep.eps", 5)
    _eps_list(cfg.norms.eps, "norms.eps", 5)
    _eps_list(cfg.norms.g_norm_eps, "norms.g_norm_eps")
    _eps_list(cfg.zpe.eps, "zpe.eps", 5)
    _eps_list(cfg.zpe.model_eps, "zpe.model_eps")
    _positive(cfg.zpe.average_eps, "zpe.average_eps")
    _positive(cfg.zpe.average_dt, "zpe.average_dt")
    c = cfg.commutators
    if c.K < 1 or c.K % 2 == 0:
        raise UsageError("K must be odd", "commutators.K")
    _positive(c.eps, "commutators.eps")
    if c.L < 0:
        raise UsageError("L must be >= 0", "commutators.L")
    if c.n_max < 2:
        raise UsageError("need n_max >= 2", "commutators.n_max")
    h = cfg.hamiltonian
    if h.K % 2 == 0:
        raise UsageError("K must be odd", "hamiltonian.K")
    _eps_list(h.eps, "hamiltonian.eps", 5)
    for name, sec in (("heisenberg", cfg.heisenberg), ("field_equation", cfg.field_equation)):
        if sec.K % 2 == 0:
            raise UsageError("K must be odd", f"{name}.K")
        _positive(sec.L, f"{name}.L")
        if sec.J < 1:
            raise UsageError("need J >= 1", f"{name}.J")
    if p.N + 1 > cfg.heisenberg.n_max:
        raise UsageError("N+1 exceeds n_max", "heisenberg.n_max")
    if len(cfg.heisenberg.steps) < 2:
        raise UsageError("need at least two steps", "heisenberg.steps")
    _eps_list(cfg.field_equation.eps, "field_equation.eps", 2)
    s = cfg.scattering
    if s.steps < 64:
        raise UsageError("need at least 64 time points", "scattering.steps")
    if not 0 <= s.max_order <= 6:
        raise UsageError("max_order must be in 0..6", "scattering.max_order")
    if p.N + 1 > s.n_max:
        raise UsageError("N+1 exceeds n_max", "scattering.n_max")
    _positive(s.window, "scattering.window")
    return cfg
