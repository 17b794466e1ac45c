"""Operators on the truncated two-level-atom x cavity-mode space.

Basis ordering is interleaved, spin inside Fock level::

    index(s, n) = 2 * n + (1 if s == "e" else 0)

i.e. |g,0>, |e,0>, |g,1>, |e,1>, ...  The first ``2 * (n + 1)`` indices span
exactly the states with at most ``n`` photons, so projecting an operator built
at a larger cutoff down to a smaller one is plain slicing.

Pauli conventions: ``sigma_z|e> = +|e>``, ``sigma_z|g> = -|g>`` and
``sigma_y = -i|e><g| + i|g><e|``.  With these, the PZW unitary
``T = exp(-i eta sigma_x (a + a^dag))`` maps the Coulomb-gauge Rabi
Hamiltonian onto the dipole-gauge one, ``T H_c T^dag = H_d``.

Functions of the quadrature (cos, sin, exp) are evaluated at the working
cutoff ``n_phot + n_guard`` and projected afterwards; the truncated
quadrature's trig functions are wrong near the top of the truncated space.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np

from .errors import ConfigurationError, ContractError

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, 1j], [-1j, 0]], dtype=complex)
SZ = np.array([[-1, 0], [0, 1]], dtype=complex)
I2 = np.eye(2, dtype=complex)

HERMITIAN_ATOL = 1e-12


@dataclass(frozen=True)
class HilbertDims:
    """Fock cutoff of the Rabi factor.

    ``n_phot`` is the physical cutoff (photon states 0..n_phot); ``n_guard``
    extra levels are used only while evaluating matrix functions.
    """

    n_phot: int = 8
    n_guard: int = 10

    def __post_init__(self):
        if int(self.n_phot) != self.n_phot or self.n_phot < 3:
            raise ConfigurationError(f"n_phot must be an integer >= 3, got {self.n_phot!r}")
        if int(self.n_guard) != self.n_guard or self.n_guard < 0:
            raise ConfigurationError(f"n_guard must be a non-negative integer, got {self.n_guard!r}")

    @property
    def n_levels(self) -> int:
        return self.n_phot + 1

    @property
    def dim_rabi(self) -> int:
        return 2 * (self.n_phot + 1)

    def working(self) -> "HilbertDims":
        """Dims at the guard cutoff, itself guarded by ``n_guard`` more levels."""
        return HilbertDims(self.n_phot + self.n_guard, self.n_guard)


# --------------------------------------------------------------------------
# basis labels and parity
# --------------------------------------------------------------------------

_LABEL_RE = re.compile(r"^\|?\s*([ge])\s*,?\s*(\d+)\s*>?$")


def basis_labels(dims: HilbertDims) -> list[str]:
    return [f"{'ge'[i % 2]}{i // 2}" for i in range(dims.dim_rabi)]


def basis_index(label: str, dims: HilbertDims) -> int:
    """Index of a bare label such as ``"g0"``, ``"e,1"`` or ``"|g,2>"``."""
    m = _LABEL_RE.match(str(label).strip())
    if m is None:
        raise ConfigurationError(f"unknown basis label {label!r}")
    s, n = m.group(1), int(m.group(2))
    if n > dims.n_phot:
        raise ConfigurationError(f"label {label!r} exceeds the Fock cutoff n_phot={dims.n_phot}")
    return 2 * n + (s == "e")


def bare_energies(dims: HilbertDims, omega_c: float = 1.0, omega_a: float = 1.0) -> np.ndarray:
    idx = np.arange(dims.dim_rabi)
    return omega_c * (idx // 2) + 0.5 * omega_a * np.where(idx % 2, 1.0, -1.0)


def parity_sectors(dims: HilbertDims) -> tuple[np.ndarray, np.ndarray]:
    """Index sets of the two conserved-parity sectors.

    The first sector holds |g,0>, |e,1>, |g,2>, ...; the second |e,0>, |g,1>, ...
    Both Rabi Hamiltonians, the PZW unitary and the kinetic term are block
    diagonal in this split.
    """
    idx = np.arange(dims.dim_rabi)
    even = ((idx // 2) + (idx % 2)) % 2 == 0
    return idx[even], idx[~even]


# --------------------------------------------------------------------------
# elementary operators
# --------------------------------------------------------------------------


def _photon_ladder(n_levels: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, n_levels, dtype=float)), 1)


@lru_cache(maxsize=None)
def _quadrature_eigh(n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    a = _photon_ladder(n_levels)
    return np.linalg.eigh(a + a.T)


@lru_cache(maxsize=None)
def _pzw_generator(n_levels: int) -> np.ndarray:
    a = _photon_ladder(n_levels)
    return np.kron(a + a.T, SX.real)


@lru_cache(maxsize=None)
def _pzw_generator_eigh(n_levels: int) -> tuple[np.ndarray, np.ndarray]:
    return np.linalg.eigh(_pzw_generator(n_levels))


def _kron_spin(photon_ops: np.ndarray, spin: np.ndarray) -> np.ndarray:
    """Batched ``kron(photon_op, spin)`` in the interleaved ordering."""
    n, L, _ = photon_ops.shape
    out = np.einsum("nij,ab->niajb", photon_ops, spin)
    return out.reshape(n, 2 * L, 2 * L)


def build_ladder(dims: HilbertDims) -> tuple[np.ndarray, np.ndarray]:
    """Annihilation and creation operators on the Rabi space.

    The truncated ladder operator is already the exact projection of the
    untruncated one, so no guard levels are involved.
    """
    if not isinstance(dims, HilbertDims):
        raise ConfigurationError("build_ladder expects a HilbertDims")
    a = np.kron(_photon_ladder(dims.n_levels), I2)
    return a, a.conj().T


def pauli(dims: HilbertDims) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    eye = np.eye(dims.n_levels)
    return np.kron(eye, SX), np.kron(eye, SY), np.kron(eye, SZ)


def number_operator(dims: HilbertDims) -> np.ndarray:
    return np.kron(np.diag(np.arange(dims.n_levels, dtype=float)), I2).astype(complex)


def field_quadrature(dims: HilbertDims) -> np.ndarray:
    """``i(a - a^dag)``, the Coulomb-gauge electric-field quadrature."""
    a, ad = build_ladder(dims)
    return 1j * (a - ad)


def transformed_annihilation(dims: HilbertDims, eta: float) -> np.ndarray:
    """``T a T^dag = a + i eta sigma_x`` (exact, no truncation error)."""
    a, _ = build_ladder(dims)
    sx, _, _ = pauli(dims)
    return a + 1j * eta * sx


def transformed_field(dims: HilbertDims, eta: float) -> np.ndarray:
    """``T i(a - a^dag) T^dag = i(a - a^dag) - 2 eta sigma_x``."""
    sx, _, _ = pauli(dims)
    return field_quadrature(dims) - 2.0 * eta * sx


# --------------------------------------------------------------------------
# coupling profile
# --------------------------------------------------------------------------

_SHAPES = ("gaussian",)


@dataclass(frozen=True)
class CouplingProfile:
    """Position-dependent normalized coupling ``eta(x)``."""

    eta0: float = 0.3
    mu_c: float = 1.0
    shape: str = "gaussian"

    def __post_init__(self):
        if self.shape not in _SHAPES:
            raise ConfigurationError(f"unknown coupling shape {self.shape!r}; known: {_SHAPES}")
        if not self.eta0 >= 0:
            raise ConfigurationError(f"eta0 must be >= 0, got {self.eta0}")
        if not self.mu_c > 0:
            raise ConfigurationError(f"mu_c must be > 0, got {self.mu_c}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return self.eta0 * np.exp(-(x**2) / (2.0 * self.mu_c**2))

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        return -x / self.mu_c**2 * self(x)


def eval_coupling(profile: CouplingProfile, x):
    return profile(x)


def eval_coupling_derivative(profile: CouplingProfile, x):
    return profile.derivative(x)


# --------------------------------------------------------------------------
# matrix functions
# --------------------------------------------------------------------------


def check_hermitian(op: np.ndarray, atol: float = HERMITIAN_ATOL) -> None:
    op = np.asarray(op)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        raise ContractError(f"expected a square matrix, got shape {op.shape}")
    dev = np.max(np.abs(op - op.conj().T)) if op.size else 0.0
    scale = max(1.0, float(np.max(np.abs(op)))) if op.size else 1.0
    if dev > atol * scale:
        raise ContractError(f"operator is not Hermitian (max |A - A^dag| = {dev:.3e})")


def matrix_function(
    op: np.ndarray, f: Callable[[np.ndarray], np.ndarray], dims: HilbertDims | None = None
) -> np.ndarray:
    """``f(op)`` for Hermitian ``op`` through its eigendecomposition.

    If ``dims`` is given, the result is projected to ``dims.dim_rabi``.
    """
    check_hermitian(op)
    w, v = np.linalg.eigh(op)
    out = (v * f(w)) @ v.conj().T
    if dims is not None:
        d = dims.dim_rabi
        out = out[:d, :d]
    return out


def quadrature_functions(dims: HilbertDims, scales, funcs) -> list[np.ndarray]:
    """Photon-space ``f(s (a + a^dag))`` for each scale ``s`` and each ``f``.

    Evaluated at the working cutoff and projected to ``dims.n_levels``.
    Returns one ``(len(scales), n_levels, n_levels)`` array per function.
    """
    w, v = _quadrature_eigh(dims.n_phot + dims.n_guard + 1)
    vl = v[: dims.n_levels]
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    arg = np.multiply.outer(scales, w)
    zero = scales == 0
    out = []
    for f in funcs:
        res = np.einsum("im,nm,jm->nij", vl, f(arg), vl)
        # the decoupled limit is exact rather than a roundoff-level identity
        res[zero] = f(np.zeros(1))[0] * np.eye(dims.n_levels)
        out.append(res)
    return out


# --------------------------------------------------------------------------
# Rabi Hamiltonians and the PZW unitary
# --------------------------------------------------------------------------


def _as_eta_array(eta) -> tuple[np.ndarray, bool]:
    arr = np.asarray(eta, dtype=float)
    if np.any(arr < 0) or not np.all(np.isfinite(arr)):
        raise ConfigurationError("coupling eta must be finite and >= 0")
    return np.atleast_1d(arr), arr.ndim == 0


def build_rabi_coulomb(dims: HilbertDims, omega_c: float, omega_a: float, eta) -> np.ndarray:
    """Coulomb-gauge Rabi Hamiltonian
    ``w_c a^dag a + (w_a / 2) {sigma_z cos[2 eta X] + sigma_y sin[2 eta X]}``.

    ``eta`` may be an array, in which case a stack ``(len(eta), d, d)`` is
    returned.
    """
    etas, scalar = _as_eta_array(eta)
    cos_q, sin_q = quadrature_functions(dims, 2.0 * etas, (np.cos, np.sin))
    H = 0.5 * omega_a * (_kron_spin(cos_q, SZ) + _kron_spin(sin_q, SY))
    H += omega_c * number_operator(dims)
    return H[0] if scalar else H


def build_rabi_dipole(dims: HilbertDims, omega_c: float, omega_a: float, eta) -> np.ndarray:
    """Dipole-gauge Rabi Hamiltonian
    ``w_c a^dag a + (w_a / 2) sigma_z - i w_c eta sigma_x (a - a^dag) + w_c eta^2``.
    """
    etas, scalar = _as_eta_array(eta)
    a, ad = build_ladder(dims)
    sx, _, sz = pauli(dims)
    H0 = omega_c * number_operator(dims) + 0.5 * omega_a * sz
    coupling = -1j * omega_c * sx @ (a - ad)
    eye = np.eye(dims.dim_rabi)
    H = H0[None] + etas[:, None, None] * coupling[None] + (omega_c * etas**2)[:, None, None] * eye
    return H[0] if scalar else H


def build_pzw(dims: HilbertDims, eta: float) -> np.ndarray:
    """PZW unitary ``exp(-i eta sigma_x (a + a^dag))`` projected to ``dims``.

    Negative ``eta`` is accepted and gives the adjoint.  The projection is
    unitary only on the low photon numbers: at ``eta = 0.3`` the block with
    ``n <= n_phot - 5`` satisfies ``T^dag T = 1`` to about 1e-7, while the top
    levels lose weight to states above the cutoff.
    """
    if not np.isfinite(eta):
        raise ConfigurationError("eta must be finite")
    if eta == 0:
        return np.eye(dims.dim_rabi, dtype=complex)
    gen = _pzw_generator(dims.n_phot + dims.n_guard + 1)
    return matrix_function(gen, lambda w: np.exp(-1j * eta * w), dims)


def pzw_unitaries(dims: HilbertDims, etas, sign: float = 1.0) -> np.ndarray:
    """Stack of ``exp(-i sign eta sigma_x (a + a^dag))`` for many couplings.

    ``sign=-1`` gives the adjoints.  Same math as :func:`build_pzw`, with the
    generator eigendecomposition shared across all couplings.
    """
    w, v = _pzw_generator_eigh(dims.n_phot + dims.n_guard + 1)
    d = dims.dim_rabi
    vl = v[:d]
    etas = np.atleast_1d(np.asarray(etas, dtype=float))
    phases = np.exp(-1j * sign * np.multiply.outer(etas, w))
    out = np.einsum("im,nm,jm->nij", vl, phases, vl)
    out[etas == 0] = np.eye(d)
    return out


def pzw_conjugate(op_working: np.ndarray, dims: HilbertDims, eta: float) -> np.ndarray:
    """``T op T^dag`` evaluated at the working cutoff, then projected.

    ``op_working`` must live on ``dims.working()``.  Taking the product of
    already-projected matrices would drop the intermediate states above the
    cutoff, which matter at the top of the truncated space.
    """
    work = dims.working()
    if op_working.shape != (work.dim_rabi, work.dim_rabi):
        raise ConfigurationError(
            f"pzw_conjugate expects an operator of size {work.dim_rabi}, got {op_working.shape}"
        )
    T = build_pzw(work, eta)
    d = dims.dim_rabi
    return (T @ op_working @ T.conj().T)[:d, :d]


class KineticCorrection(NamedTuple):
    """Rabi-space factors of the transformed kinetic energy.

    ``T p^2 T^dag = p^2 + cross [eta' p + p eta'] + quadratic eta'^2``.
    """

    cross: np.ndarray
    quadratic: np.ndarray


def build_dipole_kinetic_correction(dims: HilbertDims) -> KineticCorrection:
    """``sigma_x (a + a^dag)`` and ``(a + a^dag)^2`` on the Rabi space.

    The square is projected from the working cutoff; squaring the truncated
    quadrature would miss the last level's ``n + 1`` contribution.
    """
    work = dims.working()
    a_w, ad_w = build_ladder(work)
    X_w = a_w + ad_w
    d = dims.dim_rabi
    sx, _, _ = pauli(dims)
    a, ad = build_ladder(dims)
    return KineticCorrection(cross=sx @ (a + ad), quadratic=(X_w @ X_w)[:d, :d])
