"""Measured quantities of a joint state.

Photon numbers come in three flavours:

* the bare Coulomb-gauge number ``<a^dag a>``;
* the bare number of the same physical state represented in the dipole gauge,
  ``<psi_d| a^dag a |psi_d>`` with ``psi_d = T psi`` point by point; and
* the physical (emittable) number ``<X^- X^+>``, where ``X^+`` keeps the
  positive-frequency part of the field quadrature in the local dressed basis.

Per-point operators depend only on ``eta(x_j)`` and are built once per run in
:class:`LocalDressing`.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .config import SimulationConfig, derive_parameters
from .errors import ConfigurationError
from .propagator import Grid, WavepacketState, active_slice
from .rabi_model import (
    HilbertDims,
    bare_energies,
    basis_index,
    basis_labels,
    build_dipole_kinetic_correction,
    build_rabi_coulomb,
    build_rabi_dipole,
    field_quadrature,
    number_operator,
    parity_sectors,
    pauli,
    pzw_unitaries,
)

log = logging.getLogger(__name__)

TIE_TOL = 1e-10


# --------------------------------------------------------------------------
# dressed bases
# --------------------------------------------------------------------------


@dataclass
class DressedBasis:
    """Eigenpairs of the local Rabi Hamiltonian, energies ascending.

    ``vectors[j][:, l]`` is eigenstate ``l`` at point ``j``.  Phases are fixed
    so that each eigenvector overlaps its predecessor at the neighbouring
    point with a real positive number (the first point: largest component
    real positive).
    """

    eta: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray
    discontinuities: int = 0


def _tie_break(E: np.ndarray, V: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # within (near-)degenerate groups order by the dominant bare component
    order = np.arange(len(E))
    start = 0
    while start < len(E):
        stop = start + 1
        while stop < len(E) and abs(E[stop] - E[start]) < TIE_TOL * max(1.0, abs(E[start])):
            stop += 1
        if stop - start > 1:
            keys = [tuple(np.round(-np.abs(V[:, l]), 12)) for l in range(start, stop)]
            order[start:stop] = start + np.array(sorted(range(stop - start), key=lambda i: keys[i]))
        start = stop
    return E[order], V[:, order]


def dressed_basis(H: np.ndarray, eta: np.ndarray | None = None) -> DressedBasis:
    """Diagonalize a stack of local Hamiltonians ``(n, d, d)``."""
    H = np.asarray(H)
    if H.ndim == 2:
        H = H[None]
    E, V = np.linalg.eigh(H)
    E = E.copy()
    V = V.copy()
    for j in range(len(E)):
        gaps = np.diff(E[j])
        if np.any(gaps < TIE_TOL * np.maximum(1.0, np.abs(E[j][:-1]))):
            E[j], V[j] = _tie_break(E[j], V[j])
    jumps = 0
    for j in range(len(E)):
        if j == 0:
            ref = V[j][np.argmax(np.abs(V[j]), axis=0), np.arange(V.shape[2])]
        else:
            ref = np.einsum("al,al->l", V[j - 1].conj(), V[j])
            jumps += int(np.sum(np.abs(ref) < 0.5))
        ph = np.where(np.abs(ref) > 0, ref / np.maximum(np.abs(ref), 1e-300), 1.0)
        V[j] = V[j] * ph.conj()[None, :]
    if jumps:
        log.debug("dressed basis: %d eigenvector discontinuities along the grid", jumps)
    return DressedBasis(
        eta=np.zeros(len(E)) if eta is None else np.asarray(eta),
        energies=E,
        vectors=V,
        discontinuities=jumps,
    )


def positive_frequency_part(basis: DressedBasis, field: np.ndarray) -> np.ndarray:
    """``X^+ = sum_{l<k} <l|F|k> |l><k|`` in the bare basis, per point.

    ``field`` is one operator or a per-point stack.
    """
    V = basis.vectors
    F = np.broadcast_to(field, V.shape)
    F_eig = np.einsum("jal,jab,jbk->jlk", V.conj(), F, V)
    Xp = np.triu(F_eig, k=1)
    return np.einsum("jal,jlk,jbk->jab", V, Xp, V.conj())


def photon_correlator(basis: DressedBasis, field: np.ndarray) -> np.ndarray:
    """``X^- X^+`` per point, in the bare basis."""
    V = basis.vectors
    F = np.broadcast_to(field, V.shape)
    F_eig = np.einsum("jal,jab,jbk->jlk", V.conj(), F, V)
    Xp = np.triu(F_eig, k=1)
    XmXp = np.einsum("jml,jmk->jlk", Xp.conj(), Xp)
    return np.einsum("jal,jlk,jbk->jab", V, XmXp, V.conj())


# --------------------------------------------------------------------------
# per-run operator cache
# --------------------------------------------------------------------------


class LocalDressing:
    """Per-point operators for one grid and coupling profile.

    Points outside the active (coupled) region are exactly bare: there the
    PZW unitary is the identity and ``X^- X^+ = a^dag a``.
    """

    def __init__(self, grid: Grid, config: SimulationConfig):
        self.grid = grid
        self.dims = dims = config.dims
        self.eta = config.profile(grid.x)
        self.active = act = active_slice(self.eta)
        eta_a = self.eta[act]
        wc, wa = config.omega_c, config.omega_a
        self.number = number_operator(dims)

        self.coulomb_basis = dressed_basis(build_rabi_coulomb(dims, wc, wa, eta_a), eta_a)
        self.xx_coulomb = photon_correlator(self.coulomb_basis, field_quadrature(dims))

        # PZW rotation psi_d = T psi; the dipole-gauge field is T i(a - a^dag) T^dag
        self.pzw = pzw_unitaries(dims, eta_a)
        self.dipole_basis = dressed_basis(build_rabi_dipole(dims, wc, wa, eta_a), eta_a)
        sx, _, _ = pauli(dims)
        dipole_field = field_quadrature(dims)[None] - 2.0 * eta_a[:, None, None] * sx[None]
        self.xx_dipole = photon_correlator(self.dipole_basis, dipole_field)
        a = np.kron(np.diag(np.sqrt(np.arange(1, dims.n_levels)), 1), np.eye(2))
        a_prime = a[None] + 1j * eta_a[:, None, None] * sx[None]
        self.number_transformed = np.einsum("jba,jbc->jac", a_prime.conj(), a_prime)

    def rotate_to_dipole(self, state: WavepacketState) -> WavepacketState:
        """Dipole-gauge representation ``T(eta(x_j)) psi_j`` of a Coulomb state."""
        if state.gauge != "coulomb":
            raise ConfigurationError("rotate_to_dipole expects a Coulomb-gauge state")
        out = state.copy()
        act = self.active
        out.amplitudes[act] = np.einsum("jab,jb->ja", self.pzw, state.amplitudes[act])
        out.gauge = "dipole"
        return out

    def expectation(self, state: WavepacketState, local_ops: np.ndarray, outside: np.ndarray) -> float:
        psi = state.amplitudes
        act = self.active
        inner = np.einsum("ja,jab,jb->", psi[act].conj(), local_ops, psi[act]).real
        mask = np.ones(psi.shape[0], dtype=bool)
        mask[act] = False
        outer = np.einsum("ja,ab,jb->", psi[mask].conj(), outside, psi[mask]).real
        return float((inner + outer) * state.grid.dx)


# --------------------------------------------------------------------------
# observables
# --------------------------------------------------------------------------


def _photon_counts(dims: HilbertDims) -> np.ndarray:
    return np.arange(dims.dim_rabi) // 2


def bare_photon_number(state: WavepacketState) -> float:
    """``<a^dag a>`` of a Coulomb-gauge state."""
    if state.gauge != "coulomb":
        raise ConfigurationError("bare_photon_number expects a Coulomb-gauge state")
    w = np.abs(state.amplitudes) ** 2 * _photon_counts(state.dims)
    return float(np.sum(w) * state.grid.dx)


def bare_photon_number_dipole(state: WavepacketState, dressing: LocalDressing) -> float:
    """Bare photon number of the dipole-gauge representation, ``<T^dag a^dag a T>``."""
    d_state = dressing.rotate_to_dipole(state)
    w = np.abs(d_state.amplitudes) ** 2 * _photon_counts(state.dims)
    return float(np.sum(w) * state.grid.dx)


def transformed_photon_number_dipole(state: WavepacketState, dressing: LocalDressing) -> float:
    """``<a'^dag a'>`` in the dipole representation with ``a' = T a T^dag``.

    Equals the Coulomb-gauge ``<a^dag a>`` up to truncation error.
    """
    d_state = dressing.rotate_to_dipole(state)
    return dressing.expectation(d_state, dressing.number_transformed, dressing.number)


def physical_photon_number(
    state: WavepacketState, dressing: LocalDressing, gauge: str = "coulomb"
) -> float:
    """``<X^- X^+>``, evaluated in the Coulomb or the dipole representation."""
    if state.gauge != "coulomb":
        raise ConfigurationError("physical_photon_number expects a Coulomb-gauge state")
    if gauge == "coulomb":
        return dressing.expectation(state, dressing.xx_coulomb, dressing.number)
    if gauge == "dipole":
        return dressing.expectation(dressing.rotate_to_dipole(state), dressing.xx_dipole, dressing.number)
    raise ConfigurationError(f"unknown gauge {gauge!r}")


def populations(state: WavepacketState, targets) -> dict[str, np.ndarray]:
    """Position densities ``|psi_j,target|^2`` keyed by label."""
    out = {}
    for label in targets:
        idx = basis_index(label, state.dims)
        out[basis_labels(state.dims)[idx]] = np.abs(state.amplitudes[:, idx]) ** 2
    return out


def integrated_populations(state: WavepacketState, targets) -> dict[str, float]:
    return {k: float(np.sum(v) * state.grid.dx) for k, v in populations(state, targets).items()}


def momentum_density(state: WavepacketState) -> np.ndarray:
    psik = sfft.fft(state.amplitudes, axis=0)
    return np.sum(np.abs(psik) ** 2, axis=1)


def mean_momentum(state: WavepacketState, k0: float | None = None) -> float:
    """``<p>`` from the momentum-space amplitudes; divided by ``k0`` if given."""
    w = momentum_density(state)
    p = float(np.sum(w * state.grid.k) / np.sum(w))
    return p / k0 if k0 else p


def mean_position(state: WavepacketState) -> float:
    w = np.sum(np.abs(state.amplitudes) ** 2, axis=1)
    return float(np.sum(w * state.grid.x) / np.sum(w))


def reduced_density_matrix(state: WavepacketState) -> np.ndarray:
    """``rho_R = Tr_x |psi><psi| = sum_j psi_j psi_j^dag dx``."""
    psi = state.amplitudes
    return psi.T @ psi.conj() * state.grid.dx


def entropy_levels(dims: HilbertDims, m_cut: int = 4, omega_c: float = 1.0, omega_a: float = 1.0) -> np.ndarray:
    """The ``m_cut`` lowest bare levels of the parity sector holding ``|g,0>``.

    The other sector is never populated from ``|g,0>``, so it would only
    waste the cutoff.  Ties in bare energy are broken by basis index.
    """
    sector = parity_sectors(dims)[0]
    E = bare_energies(dims, omega_c, omega_a)[sector]
    order = np.lexsort((sector, E))
    return np.sort(sector[order[:m_cut]])


def von_neumann_entropy(rho: np.ndarray, base: float) -> float:
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    lam = lam[lam > 0]
    # + 0.0 turns the -0.0 of a pure state into 0.0
    return float(-np.sum(lam * np.log(lam)) / math.log(base)) + 0.0


def entanglement_entropy(state: WavepacketState, m_cut: int = 4, levels=None) -> float:
    """Entropy of the Rabi factor, in ``[0, 1]`` through the log base ``m_cut``.

    ``rho_R`` is projected onto ``levels`` (default :func:`entropy_levels`),
    renormalized to unit trace, and ``S = -sum lam log_m lam``.
    """
    if m_cut < 2:
        raise ConfigurationError("m_cut must be >= 2")
    if levels is None:
        levels = entropy_levels(state.dims, m_cut)
    else:
        levels = np.array([basis_index(l, state.dims) if isinstance(l, str) else int(l) for l in levels])
        if len(levels) != m_cut:
            raise ConfigurationError(f"expected {m_cut} levels, got {len(levels)}")
    rho = reduced_density_matrix(state)[np.ix_(levels, levels)]
    tr = float(np.trace(rho).real)
    if tr < 0.5:
        warnings.warn(f"only {tr:.3f} of the trace survives the m_cut={m_cut} projection", RuntimeWarning)
    if tr <= 0:
        return 0.0
    return von_neumann_entropy(rho / tr, m_cut)


def standard_observers(grid: Grid, config: SimulationConfig, dressing: LocalDressing | None = None):
    """Observer callbacks for every quantity in the time-series output.

    The per-point dressed operators are built on first use, so selecting
    only cheap observables never pays for them.
    """
    cache = {"dressing": dressing}

    def dr() -> LocalDressing:
        if cache["dressing"] is None:
            cache["dressing"] = LocalDressing(grid, config)
        return cache["dressing"]

    k0 = config.k0
    pops = ("g0", "e1", "g2", "e3")
    obs = {
        "p_over_k0": lambda s: mean_momentum(s, k0),
        "x_mean": mean_position,
        "n_bare_c": bare_photon_number,
        "n_bare_d": lambda s: bare_photon_number_dipole(s, dr()),
        "n_bare_d_transformed": lambda s: transformed_photon_number_dipole(s, dr()),
        "n_phys_c": lambda s: physical_photon_number(s, dr(), "coulomb"),
        "n_phys_d": lambda s: physical_photon_number(s, dr(), "dipole"),
        "entropy": entanglement_entropy,
    }
    for lab in pops:
        obs[f"pop_{lab}"] = lambda s, lab=lab: integrated_populations(s, [lab])[lab]
    return obs


# --------------------------------------------------------------------------
# dense gauge check
# --------------------------------------------------------------------------


@dataclass
class GaugeReport:
    max_discrepancy: float
    max_discrepancy_raw: float
    eigenvalue_discrepancy: float
    eigenvalues_coulomb: np.ndarray
    eigenvalues_dipole: np.ndarray
    n_x: int
    dims: HilbertDims
    band_fraction: float

    def summary(self) -> dict:
        return {
            "max_discrepancy": self.max_discrepancy,
            "max_discrepancy_raw": self.max_discrepancy_raw,
            "eigenvalue_discrepancy": self.eigenvalue_discrepancy,
            "n_x": self.n_x,
            "n_phot": self.dims.n_phot,
            "n_guard": self.dims.n_guard,
            "band_fraction": self.band_fraction,
        }


MAX_DENSE_DIM = 4096


def _spectral_derivative(grid: Grid) -> np.ndarray:
    # the Nyquist entry is kept: zeroing it would leave a spurious
    # zero-kinetic-energy grid mode among the low-lying states
    F = np.fft.fft(np.eye(grid.n_x), axis=0)
    return np.fft.ifft(grid.k[:, None] * F, axis=0)


def _band_projector(grid: Grid, fraction: float) -> np.ndarray:
    n = grid.n_x
    kmax = np.pi / grid.dx
    mask = (np.abs(grid.k) <= fraction * kmax).astype(float)
    if n % 2 == 0:
        mask[n // 2] = 0.0
    F = np.fft.fft(np.eye(n), axis=0)
    return np.fft.ifft(mask[:, None] * F, axis=0)


def verify_gauge_equivalence(
    config: SimulationConfig,
    n_x: int = 64,
    domain: tuple[float, float] = (-6.0, 6.0),
    band_fraction: float = 0.5,
    n_eig: int = 6,
) -> GaugeReport:
    """Dense check of ``T H^(c) T^dag = H^(d)`` on a small grid.

    ``H^(d)`` contains the transformed kinetic terms with the spectral
    momentum matrix and symmetric ordering ``eta' p + p eta'``.  Products
    are formed at the working Fock cutoff and projected afterwards.

    A pointwise unitary never conjugates a non-diagonal grid momentum into
    ``p + eta' sigma_x X`` exactly (the off-diagonal entries pick up
    ``T_j T_k^dag - 1``), so the headline number is the discrepancy
    compressed to center-of-mass modes below ``band_fraction`` of the
    Nyquist wavenumber, where the continuum identity applies.  The raw
    elementwise figure is reported alongside.
    """
    dims = config.dims
    work = dims.working()
    Dw, d = work.dim_rabi, dims.dim_rabi
    if n_x * Dw > MAX_DENSE_DIM:
        raise ConfigurationError(
            f"dense gauge check too large: n_x * working dim = {n_x * Dw} > {MAX_DENSE_DIM}"
        )
    grid = Grid(domain[0], domain[1], n_x)
    mass = derive_parameters(config).mass
    wc, wa = config.omega_c, config.omega_a
    eta = config.profile(grid.x)
    deta = config.profile.derivative(grid.x)

    P = _spectral_derivative(grid)
    K = P @ P / (2.0 * mass)

    Hc_loc = build_rabi_coulomb(work, wc, wa, eta)
    Hd_loc = build_rabi_dipole(work, wc, wa, eta)
    T = pzw_unitaries(work, eta)
    corr = build_dipole_kinetic_correction(work)

    # T H^(c) T^dag as an (n_x, Dw, n_x, Dw) block array
    TT = np.einsum("jab,kcb->jkac", T, T.conj())
    conj = (K[:, :, None, None] * TT).transpose(0, 2, 1, 3).copy()
    TH = np.einsum("jab,jbc,jdc->jad", T, Hc_loc, T.conj())
    idx = np.arange(n_x)
    conj[idx, :, idx, :] += TH

    eye = np.eye(Dw)
    sym = deta[:, None] * P + P * deta[None, :]
    Hd = np.einsum("jk,ab->jakb", K, eye) + np.einsum("jk,ab->jakb", sym / (2.0 * mass), corr.cross)
    Hd[idx, :, idx, :] += Hd_loc + (deta**2 / (2.0 * mass))[:, None, None] * corr.quadratic[None]

    diff = (conj - Hd)[:, :d, :, :d]
    raw = float(np.max(np.abs(diff)))
    B = _band_projector(grid, band_fraction)
    diff_b = np.einsum("ij,jakb,kl->ialb", B, diff, B, optimize=True)
    banded = float(np.max(np.abs(diff_b)))

    # spectra of the two full Hamiltonians at the physical cutoff
    Hc_loc_d = build_rabi_coulomb(dims, wc, wa, eta)
    Hd_loc_d = build_rabi_dipole(dims, wc, wa, eta)
    corr_d = build_dipole_kinetic_correction(dims)
    eye_d = np.eye(d)
    Hc_full = np.einsum("jk,ab->jakb", K, eye_d)
    Hc_full[idx, :, idx, :] += Hc_loc_d
    Hd_full = np.einsum("jk,ab->jakb", K, eye_d) + np.einsum("jk,ab->jakb", sym / (2.0 * mass), corr_d.cross)
    Hd_full[idx, :, idx, :] += Hd_loc_d + (deta**2 / (2.0 * mass))[:, None, None] * corr_d.quadratic[None]
    ec = np.linalg.eigvalsh(Hc_full.reshape(n_x * d, n_x * d))[:n_eig]
    ed = np.linalg.eigvalsh(Hd_full.reshape(n_x * d, n_x * d))[:n_eig]
    return GaugeReport(
        max_discrepancy=banded,
        max_discrepancy_raw=raw,
        eigenvalue_discrepancy=float(np.max(np.abs(ec - ed))),
        eigenvalues_coulomb=ec,
        eigenvalues_dipole=ed,
        n_x=n_x,
        dims=dims,
        band_fraction=band_fraction,
    )
