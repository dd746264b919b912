import math

import numpy as np
import pytest

from mollified_qft.config import ExperimentConfig
from mollified_qft.errors import AccuracyError, ConsistencyError, UsageError
from mollified_qft.experiments import scattering_setup
from mollified_qft.fock import FockVector, zero_point_discrete
from mollified_qft.freefield import FieldParams, zero_point_leading
from mollified_qft.mollifier import build_damper, damper_to_mollifier
from mollified_qft.scattering import (
    ScatteringSetup,
    amplitude_remainder_constant,
    check_interaction,
    dyson_exact,
    dyson_terms,
    interaction_from_fields,
    interaction_hamiltonian,
    ode_residual,
    remainder_bounds,
    s_exact,
    transition_amplitude,
    zero_point_shift_check,
)


@pytest.fixture(scope="module")
def setup():
    return scattering_setup(ExperimentConfig())


@pytest.fixture(scope="module")
def table(setup):
    return dyson_terms(setup, 4, setup.tau + 1.0)


def eye(setup):
    return np.eye(setup.basis.dim)


def test_starts_at_identity_and_is_unitary(setup):
    assert np.max(np.abs(s_exact(setup, setup.tau) - eye(setup))) < 1e-13
    S = s_exact(setup, 1.3)
    assert np.max(np.abs(S.conj().T @ S - eye(setup))) < 1e-11


def test_zero_coupling_gives_identity(setup):
    free = ScatteringSetup(setup.H0, setup.H0, 0.0, setup.N)
    assert np.max(np.abs(s_exact(free, 2.0) - eye(setup))) < 1e-12


def test_interaction_picture_hamiltonian(setup):
    H_I0 = interaction_hamiltonian(setup, setup.tau)
    assert np.max(np.abs(H_I0 - (setup.H.dense() - setup.H0.dense()))) < 1e-13
    H_I = interaction_hamiltonian(setup, 0.6)
    assert np.max(np.abs(H_I - H_I.conj().T)) < 1e-12
    assert np.max(np.abs(H_I - interaction_from_fields(setup, 0.6))) < 1e-10
    assert check_interaction(setup, 0.6) < 1e-10


def test_interaction_mismatch_is_reported(setup):
    broken = ScatteringSetup(setup.H0, setup.H0 + setup.H0 * 0.01, setup.g, setup.N, setup.tau, setup.model)
    with pytest.raises(ConsistencyError):
        check_interaction(broken, 0.5)


def test_first_term_for_time_independent_interaction(setup):
    # with H0 = 0 the interaction picture is static and S_[1](t) = -i t V
    zero = setup.H0 * 0.0
    static = ScatteringSetup(zero, zero + (setup.H - setup.H0), setup.g, setup.N)
    tab = dyson_terms(static, 2, 1.0)
    V = static.V
    assert np.max(np.abs(tab.at(1) - (-1j * V))) < 1e-10
    assert np.max(np.abs(tab.at(2) - (-0.5 * V @ V))) < 1e-10


def test_dyson_quadrature_matches_exact(setup, table):
    exact = dyson_exact(setup, 4, table.times[-1])
    for n in range(5):
        assert np.max(np.abs(table.at(n) - exact[n])) < 1e-8
    assert max(table.richardson) < 1e-6


def test_remainder_bounds(setup, table):
    rows = remainder_bounds(setup, table)
    errs = [r.series_error for r in rows]
    assert all(a > b for a, b in zip(errs, errs[1:]))
    assert all(r.bound_satisfied for r in rows)
    assert all(r.disk_satisfied for r in rows)
    assert setup.V_norm < 1


def test_ode_residual_order(setup):
    errs, orders = ode_residual(setup, 0.7)
    assert np.all(np.abs(orders - 2) < 0.1)


def test_amplitudes(setup):
    b = setup.basis
    vac = FockVector.vacuum(b)
    free = ScatteringSetup(setup.H0, setup.H0, 0.0, setup.N)
    amp, prob = transition_amplitude(free, vac, vac, 1.0)
    assert abs(amp - 1) < 1e-13 and abs(prob - 1) < 1e-13
    one = FockVector.occupation(b, (1, 0))
    amp0, _ = transition_amplitude(setup, one, vac, 1.0, order=0)
    assert amp0 == 0
    exact, p = transition_amplitude(setup, vac, vac, 1.0)
    approx, _ = transition_amplitude(setup, vac, vac, 1.0, order=4)
    assert abs(exact - approx) < 1e-6 and 0 < p <= 1
    cst = amplitude_remainder_constant(setup, vac, vac, 1.0)
    assert math.isfinite(cst) and cst > 0
    with pytest.raises(UsageError):
        transition_amplitude(setup, 2.0 * vac, vac, 1.0)


def test_zero_point_shift_is_invisible(setup):
    assert zero_point_shift_check(setup, 0.0, 1.0) == 0.0
    d = build_damper(1, 3)
    c = zero_point_leading(FieldParams(1.0, 1, d, d), 0.2)
    assert zero_point_shift_check(setup, c, 1.0) < 1e-12
    assert zero_point_shift_check(setup, 1000.0, 1.0) < 1e-10
    c_disc = zero_point_discrete(setup.model.modes, d, damper_to_mollifier(d), 0.2)
    assert zero_point_shift_check(setup, c_disc, 1.0) < 1e-12


def test_group_property(setup):
    # S(t) = e^{i(t-tau)H0} U(t-tau): composing two free-picture steps
    s1 = s_exact(setup, 0.4)
    U0 = setup.prop0.U
    U = setup.prop.U
    assert np.max(np.abs(U0(-0.4) @ U(0.4) - s1)) < 1e-13
    assert np.max(np.abs(U(0.3) @ U(0.4) - U(0.7))) < 1e-12


def test_dyson_argument_checks(setup):
    with pytest.raises(UsageError):
        dyson_terms(setup, 7, 1.0)
    with pytest.raises(UsageError):
        dyson_terms(setup, 2, 1.0, n_points=32)
    with pytest.raises(AccuracyError):
        dyson_terms(setup, 2, 40.0, n_points=65, rtol=1e-10)


def test_mismatched_bases(setup):
    other = scattering_setup(ExperimentConfig())
    with pytest.raises(UsageError):
        ScatteringSetup(setup.H0, other.H, setup.g, setup.N)


def test_rescaled_interaction_needs_coupling(setup):
    free = ScatteringSetup(setup.H0, setup.H0, 0.0, setup.N)
    with pytest.raises(UsageError):
        free.V
