"""Property tests for the invariants of the operators, states and observables."""

import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from flyingatom.config import SimulationConfig, derive_parameters, dump_config, parse_config
from flyingatom.observables import (
    dressed_basis,
    entanglement_entropy,
    photon_correlator,
    reduced_density_matrix,
)
from flyingatom.perturbation import perturbative_amplitudes, quadrature_oracle
from flyingatom.propagator import Grid, WavepacketState, precompute_local_propagators, step
from flyingatom.rabi_model import (
    CouplingProfile,
    HilbertDims,
    build_pzw,
    build_rabi_coulomb,
    build_rabi_dipole,
    field_quadrature,
    pzw_conjugate,
)

DIMS = HilbertDims()
etas = st.floats(0.0, 0.3)
freqs = st.floats(0.5, 2.0)


@given(etas, freqs, freqs)
def test_hamiltonians_hermitian(eta, wc, wa):
    for H in (build_rabi_coulomb(DIMS, wc, wa, eta), build_rabi_dipole(DIMS, wc, wa, eta)):
        assert np.max(np.abs(H - H.conj().T)) < 1e-12


@given(etas)
def test_gauge_invariant_spectrum(eta):
    ec = np.linalg.eigvalsh(build_rabi_coulomb(DIMS, 1, 1, eta))[:4]
    ed = np.linalg.eigvalsh(build_rabi_dipole(DIMS, 1, 1, eta))[:4]
    np.testing.assert_allclose(ec, ed, rtol=1e-6)


@given(etas, freqs)
def test_pzw_maps_gauges(eta, wa):
    Hc = build_rabi_coulomb(DIMS.working(), 1.0, wa, eta)
    assert np.max(np.abs(pzw_conjugate(Hc, DIMS, eta) - build_rabi_dipole(DIMS, 1.0, wa, eta))) < 1e-6


@given(etas)
def test_pzw_inverse(eta):
    T, Tm = build_pzw(DIMS, eta), build_pzw(DIMS, -eta)
    np.testing.assert_allclose(Tm, T.conj().T, atol=1e-13)


@given(st.floats(0.0, 1.0), st.floats(0.1, 3.0), st.floats(-20, 20))
def test_coupling_bounds_and_symmetry(eta0, mu_c, x):
    prof = CouplingProfile(eta0, mu_c)
    assert 0.0 <= prof(x) <= eta0
    assert prof(x) == prof(-x)
    assert prof.derivative(x) == -prof.derivative(-x)


@given(st.floats(1e-3, 500.0), st.floats(1.0, 200.0))
def test_derived_parameters_consistent(e_k, k0):
    d = derive_parameters(SimulationConfig(e_k=e_k, k0=k0, n_x=16384))
    assert d.mass * d.v0**2 / 2 == pytest.approx(e_k, rel=1e-12)
    assert d.xi == pytest.approx(2 * e_k / k0, rel=1e-12)
    assert d.n_steps * d.dt == pytest.approx(d.tau0, rel=1e-12)


@given(
    st.floats(0.01, 100.0),
    st.floats(0.0, 0.5),
    st.floats(0.15, 0.4),
    st.lists(st.floats(0.0, 1.0), max_size=3),
)
def test_config_round_trip(e_k, eta0, mu_s, snaps):
    cfg = parse_config({"e_k": e_k, "eta0": eta0, "mu_s": mu_s, "snapshot_times": snaps})
    again = parse_config(dump_config(cfg))
    assert again == cfg and derive_parameters(again) == derive_parameters(cfg)


def random_state(seed, n_x=64, dims=HilbertDims(3, 2), sector_only=False):
    rng = np.random.default_rng(seed)
    grid = Grid(-4.0, 4.0, n_x)
    amp = rng.normal(size=(n_x, dims.dim_rabi)) + 1j * rng.normal(size=(n_x, dims.dim_rabi))
    amp /= math.sqrt(np.sum(np.abs(amp) ** 2) * grid.dx)
    return WavepacketState(amp, grid, dims)


@pytest.mark.filterwarnings("ignore:only .* of the trace survives")
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_entropy_bounds(seed, m_cut):
    s = random_state(seed)
    S = entanglement_entropy(s, m_cut=m_cut, levels=list(range(m_cut)))
    assert -1e-12 <= S <= 1 + 1e-12
    rho = reduced_density_matrix(s)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-10)
    assert np.min(np.linalg.eigvalsh(rho)) > -1e-12


@given(st.integers(0, 2**32 - 1), etas)
def test_photon_correlator_positive(seed, eta):
    dims = HilbertDims(3, 6)
    b = dressed_basis(build_rabi_coulomb(dims, 1, 1, eta))
    xx = photon_correlator(b, field_quadrature(dims))[0]
    rng = np.random.default_rng(seed)
    v = rng.normal(size=dims.dim_rabi) + 1j * rng.normal(size=dims.dim_rabi)
    assert np.vdot(v, xx @ v).real >= -1e-12 * np.vdot(v, v).real


@given(st.integers(0, 2**32 - 1), st.floats(0.01, 0.2), st.integers(1, 4))
def test_step_preserves_norm(seed, dt, n):
    cfg = SimulationConfig(e_k=40.0, n_x=1024, x_min=-9.0, x_max=9.0, n_phot=3, n_guard=4)
    grid = Grid.from_config(cfg)
    s = random_state(seed, n_x=grid.n_x, dims=cfg.dims)
    s = WavepacketState(s.amplitudes, grid, cfg.dims)
    s.amplitudes /= math.sqrt(s.norm2())
    pre = precompute_local_propagators(grid, cfg, dt)
    assert abs(step(s, dt, pre, n).norm2() - 1.0) < 1e-12 * n


@given(st.sampled_from([0.1, 0.2, 0.3]), st.floats(0.4, 5.0), st.sampled_from(["e1", "g2", "e3"]))
def test_oracle_agrees_with_closed_form(eta0, xi, target):
    c = perturbative_amplitudes(eta0, xi)[target]
    assume(abs(c) > 1e-250)
    q = quadrature_oracle(eta0, xi, target)
    assert abs(q - c) <= 1e-6 * abs(c)
