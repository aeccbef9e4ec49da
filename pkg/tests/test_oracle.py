import math

import numpy as np
import pytest

from qsd.errors import ArgumentError, DimensionError
from qsd.linalg import DensityMatrix, Operator, StateVector, outer_product
from qsd.integrator import ModelSpec
from qsd.models import (LocalizationChain, build_dephasing_qubit, build_localization_model,
                        build_photon_number_model, fig1_initial_state, plus_state)
from qsd.oracle import (ConvergenceError, MasterEvolution, default_dt, expectation_of,
                        lindblad_rhs, propagate)

TIMES = np.linspace(0.0, 3.0, 31)


def shipped():
    chain = LocalizationChain(4)
    loc, _, _ = build_localization_model(chain)
    return [
        ("photon_number", build_photon_number_model(), fig1_initial_state(), 0.5),
        ("dephasing", build_dephasing_qubit(), plus_state(), 3.0),
        ("localization", loc, plus_state(), 3.0),
    ]


def test_rhs_of_maximally_mixed_qubit_vanishes():
    rho = DensityMatrix.maximally_mixed(2)
    assert np.all(lindblad_rhs(build_dephasing_qubit(), rho.entries) == 0)


def test_rhs_is_traceless_and_hermitian():
    rng = np.random.default_rng(0)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    h = Operator((a + a.conj().T) / 2)
    l = Operator(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))
    rho = outer_product(plus_state(3)).entries
    d = lindblad_rhs(ModelSpec(h, (l,)), rho)
    assert abs(np.trace(d)) < 1e-12
    np.testing.assert_allclose(d, d.conj().T, atol=1e-12)


def test_dephasing_coherence_decays_exponentially():
    rhos = propagate(MasterEvolution(build_dephasing_qubit(), outer_product(plus_state()), TIMES))
    for t, r in zip(TIMES, rhos):
        assert abs(r.entries[0, 1] - 0.5 * math.exp(-t)) < 1e-8
        assert r.entries[0, 0].real == pytest.approx(0.5, abs=1e-12)


def test_dephasing_rate_scales():
    rhos = propagate(MasterEvolution(build_dephasing_qubit(2.5), outer_product(plus_state()), TIMES))
    assert abs(rhos[-1].entries[0, 1] - 0.5 * math.exp(-2.5 * 3.0)) < 1e-8


def test_photon_number_coherences():
    # rho_mn picks up exp(-(i (m-n) + (m-n)^2) t); populations stay put
    times = np.linspace(0, 0.5, 6)
    psi = fig1_initial_state()
    rhos = propagate(MasterEvolution(build_photon_number_model(), outer_product(psi), times))
    rho0 = outer_product(psi).entries
    k = np.arange(10)
    diff = k[:, None] - k[None, :]
    for t, r in zip(times, rhos):
        exact = rho0 * np.exp(-(1j * diff + diff ** 2) * t)
        assert np.max(np.abs(r.entries - exact)) < 1e-8
    assert expectation_of(rhos[-1].entries, build_photon_number_model().lindblads[0]) == pytest.approx(5.0)


@pytest.mark.parametrize("n", [1, 2, 4, 8])
def test_localization_coherence_rate(n):
    chain = LocalizationChain(n)
    model, _, _ = build_localization_model(chain)
    rhos = propagate(MasterEvolution(model, outer_product(plus_state()), TIMES))
    assert abs(rhos[-1].entries[0, 1] - 0.5 * math.exp(-chain.branch_rate * 3.0)) < 1e-8


@pytest.mark.parametrize("name,model,psi,t_max", shipped())
def test_trace_and_positivity_on_shipped_models(name, model, psi, t_max):
    times = np.linspace(0, t_max, 11)
    for r in propagate(MasterEvolution(model, outer_product(psi), times)):
        assert abs(np.trace(r.entries) - 1) < 1e-10
        assert np.linalg.eigvalsh(r.entries).min() >= -1e-9


def test_default_dt_passes_halving_on_photon_number_model():
    model = build_photon_number_model()
    assert default_dt(model) == pytest.approx(0.01 / (9 + 2 * 81))
    propagate(MasterEvolution(model, outer_product(fig1_initial_state()), np.array([0.0, 0.05])))


def test_coarse_step_fails_halving_check():
    ev = MasterEvolution(build_dephasing_qubit(), outer_product(plus_state()), np.array([0.0, 3.0]), dt=0.5)
    with pytest.raises(ConvergenceError):
        propagate(ev)


def test_bad_grids_rejected():
    rho = outer_product(plus_state())
    for t in ([0.1, 0.2], [0.0, 0.2, 0.2], []):
        with pytest.raises(ArgumentError):
            MasterEvolution(build_dephasing_qubit(), rho, np.array(t))
    with pytest.raises(DimensionError):
        MasterEvolution(build_photon_number_model(), rho, TIMES)


def test_rhs_without_collapse_is_commutator():
    h = Operator(np.array([[0.2, 1 - 1j], [1 + 1j, -0.4]]))
    model = ModelSpec(h, (Operator(np.zeros((2, 2))),))
    rho = outer_product(plus_state()).entries
    np.testing.assert_array_equal(lindblad_rhs(model, rho), -1j * (h.entries @ rho - rho @ h.entries))


def test_rhs_dephasing_hand_value():
    # -(L^+L rho + rho L^+L - 2 L rho L^+) at (0, 1) with L = diag(0, 1): -(0 + 0.5 - 0) = -0.5
    d = lindblad_rhs(build_dephasing_qubit(), np.full((2, 2), 0.5))
    assert d[0, 1] == -0.5 and d[1, 0] == -0.5
    assert d[0, 0] == 0 and d[1, 1] == 0


def test_unitary_evolution_closed_form():
    e = np.array([0.0, 0.7, -1.3])
    model = ModelSpec(Operator.diag(e), (Operator(np.zeros((3, 3))),))
    rho0 = outer_product(plus_state(3)).entries
    times = np.linspace(0, 2, 5)
    for t, r in zip(times, propagate(MasterEvolution(model, DensityMatrix(rho0), times))):
        exact = rho0 * np.exp(-1j * (e[:, None] - e[None, :]) * t)
        assert np.max(np.abs(r.entries - exact)) < 1e-8


def test_maximally_mixed_is_stationary():
    rng = np.random.default_rng(5)
    a = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    model = ModelSpec(Operator(a + a.conj().T), (Operator((b + b.conj().T) / 4),))
    rho0 = DensityMatrix.maximally_mixed(3)
    for r in propagate(MasterEvolution(model, rho0, np.linspace(0, 2, 5))):
        assert np.max(np.abs(r.entries - rho0.entries)) < 1e-10


def test_expectation_of_examples():
    n = build_photon_number_model().lindblads[0]
    assert expectation_of(np.eye(10), Operator.identity(10)) == 10  # trace of the identity pair
    assert expectation_of(DensityMatrix.maximally_mixed(3).entries, Operator.identity(3)) == pytest.approx(1)
    assert expectation_of(outer_product(StateVector.basis(10, 3)).entries, n) == 3
    assert expectation_of(DensityMatrix.maximally_mixed(10).entries, n) == pytest.approx(4.5, abs=1e-15)
