import math

import numpy as np
import pytest

from flyingatom.config import SimulationConfig, derive_parameters
from flyingatom.errors import ConfigurationError
from flyingatom.perturbation import (
    constant_velocity_photon_number,
    expansion_operators,
    oracle_grid,
    perturbative_amplitudes,
    perturbative_photon_number,
    quadrature_oracle,
)
from flyingatom.rabi_model import HilbertDims, basis_index, build_rabi_coulomb


def test_adiabatic_suppression():
    c = perturbative_amplitudes(0.3, 1e-3)
    assert max(abs(c.c_e1), abs(c.c_g2), abs(c.c_e3)) < 1e-100
    assert perturbative_photon_number(0.3, 1e-3) == 0.0


def test_fast_limit_vanishes():
    c = perturbative_amplitudes(0.3, 1e6)
    assert max(abs(c.c_e1), abs(c.c_g2), abs(c.c_e3)) < 1e-6


def test_c_g2_formula():
    eta0, xi = 0.3, 1.27
    c = perturbative_amplitudes(eta0, xi)
    assert c.c_g2.real == 0.0
    assert abs(c.c_g2) == pytest.approx(eta0**2 * math.sqrt(2 * math.pi) * math.exp(-1 / xi**2) / xi)
    assert c.c_e3.imag == 0.0 and c.c_e1.imag == 0.0


def test_photon_number_formula():
    c = perturbative_amplitudes(0.3, 2.0)
    n = abs(c.c_e1) ** 2 + 2 * abs(c.c_g2) ** 2 + 3 * abs(c.c_e3) ** 2
    assert perturbative_photon_number(0.3, 2.0) == pytest.approx(n, rel=1e-15)
    np.testing.assert_allclose(perturbative_photon_number(0.3, np.array([2.0, 2.0])), n)


@pytest.mark.parametrize("target", ["e1", "|g,2>", "e,3"])
def test_quadrature_matches_closed_form_at_reference_point(target):
    xi = derive_parameters(SimulationConfig(e_k=40.0)).xi
    q = quadrature_oracle(0.3, xi, target)
    c = perturbative_amplitudes(0.3, xi)[target]
    assert abs(q - c) <= 1e-6 * abs(c)


def test_oracle_grid():
    rows = oracle_grid()
    assert len(rows) == 2 * 4 * 3
    assert max(r["rel_err"] for r in rows) < 1e-6


def test_printed_cubic_sign_is_not_the_closed_form():
    # the '+8/6' cubic coefficient does not reproduce the closed forms;
    # the Taylor-consistent '-8/6' does (previous test)
    rows = oracle_grid(cubic_sign=+1.0)
    assert max(r["rel_err"] for r in rows) > 1e-2


def test_g2_purely_imaginary():
    q = quadrature_oracle(0.3, 0.8, "g2")
    assert abs(q.real) < 1e-12 * abs(q)


def test_linear_in_eta_at_small_coupling():
    a = quadrature_oracle(1e-4, 1.0, "e1")
    b = quadrature_oracle(2e-4, 1.0, "e1")
    assert b / a == pytest.approx(2.0, rel=1e-6)


def test_bad_target_and_params():
    with pytest.raises(ConfigurationError):
        quadrature_oracle(0.3, 1.0, "g1")
    with pytest.raises(ConfigurationError):
        perturbative_amplitudes(0.0, 1.0)
    with pytest.raises(ConfigurationError):
        perturbative_amplitudes(0.3, -1.0)


def test_expansion_matches_hamiltonian_to_third_order():
    # H_c(eta) - H_0 and sum_k eta^k A_k differ at O(eta^4) on the low states
    dims = HilbertDims(3, 4)
    ops = expansion_operators(dims)
    H0 = build_rabi_coulomb(dims, 1, 1, 0.0)
    g0 = basis_index("g0", dims)
    errs = []
    for eta in (1e-2, 2e-2):
        V = build_rabi_coulomb(dims, 1, 1, eta) - H0
        approx = sum(eta**k * A[:8, :8] for k, A in enumerate(ops, start=1))
        errs.append(np.max(np.abs((V - approx)[:, g0])))
    assert errs[1] / errs[0] == pytest.approx(16, rel=0.01)


def test_single_peak_in_e_k():
    e_k = np.linspace(1, 400, 800)
    n = perturbative_photon_number(0.3, e_k / (10 * math.pi))
    i = int(np.argmax(n))
    assert 0 < i < len(n) - 1
    assert np.all(np.diff(n[: i + 1]) >= 0) and np.all(np.diff(n[i:]) <= 0)


def test_constant_velocity_exact_below_first_order_at_high_speed():
    xi = 100 / (10 * math.pi)
    exact = constant_velocity_photon_number(0.3, xi)
    pert = perturbative_photon_number(0.3, xi)
    assert exact < pert
    assert exact == pytest.approx(pert, rel=0.1)
