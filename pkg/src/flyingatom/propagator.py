"""Split-step propagation of the joint (center-of-mass x Rabi) state.

The Coulomb-gauge Hamiltonian ``p^2 / 2m + H_R(x)`` splits into a part that
is diagonal in momentum and a part that is block diagonal in position, so one
Strang step is

    exp(-i K dt/2) exp(-i V dt) exp(-i K dt/2)

with the kinetic factor applied after an FFT along the grid axis and the
potential factor applied pointwise from a per-point eigendecomposition of the
local Rabi Hamiltonian.  Consecutive half kinetic steps are fused inside
:func:`evolve`.

Both factors conserve the parity split of :func:`rabi_model.parity_sectors`,
so sectors that start empty stay exactly empty and are skipped.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Mapping

import numpy as np
import scipy.fft as sfft

from .config import SimulationConfig, derive_parameters
from .errors import ConfigurationError, NumericalError
from .rabi_model import (
    HilbertDims,
    bare_energies,
    basis_index,
    build_rabi_coulomb,
    parity_sectors,
)

log = logging.getLogger(__name__)

# couplings below this are treated as exactly zero (bare propagator)
ETA_ZERO = 1e-12
# probability allowed inside the boundary margins before wraparound is flagged
LEAKAGE_LIMIT = 1e-8


@dataclass(frozen=True)
class Grid:
    """Periodic grid ``x_j = x_min + j dx`` with ``dx = (x_max - x_min) / n_x``."""

    x_min: float
    x_max: float
    n_x: int

    def __post_init__(self):
        if not self.x_max > self.x_min or self.n_x < 2:
            raise ConfigurationError(f"invalid grid [{self.x_min}, {self.x_max}] with {self.n_x} points")

    @classmethod
    def from_config(cls, config: SimulationConfig) -> "Grid":
        lo, hi = config.domain
        return cls(lo, hi, int(config.n_x))

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_x

    @cached_property
    def x(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_x)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n_x, d=self.dx)

    def margin_mask(self, fraction: float = 0.1) -> np.ndarray:
        w = fraction * self.length
        return (self.x < self.x_min + w) | (self.x > self.x_max - w)


@dataclass
class WavepacketState:
    """Amplitudes ``psi[j, r]`` on grid point ``j`` and Rabi basis index ``r``.

    Normalized as ``sum |psi|^2 dx = 1``.
    """

    amplitudes: np.ndarray
    grid: Grid
    dims: HilbertDims
    gauge: str = "coulomb"
    t: float = 0.0

    def __post_init__(self):
        shape = (self.grid.n_x, self.dims.dim_rabi)
        if self.amplitudes.shape != shape:
            raise ConfigurationError(f"amplitudes have shape {self.amplitudes.shape}, expected {shape}")
        if self.gauge not in ("coulomb", "dipole"):
            raise ConfigurationError(f"unknown gauge tag {self.gauge!r}")

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx)

    def copy(self) -> "WavepacketState":
        return dataclasses.replace(self, amplitudes=self.amplitudes.copy())


def product_state(
    grid: Grid, dims: HilbertDims, x0: float, k0: float, mu_s: float, label: str = "g0"
) -> WavepacketState:
    """Gaussian wavepacket times a single bare Rabi state, normalized on the grid."""
    idx = basis_index(label, dims)
    u = (grid.x - x0) / mu_s
    phi = np.exp(-0.5 * u**2) * np.exp(1j * k0 * grid.x)
    psi = np.zeros((grid.n_x, dims.dim_rabi), dtype=complex)
    psi[:, idx] = phi
    psi /= math.sqrt(np.sum(np.abs(phi) ** 2) * grid.dx)
    return WavepacketState(psi, grid, dims)


def initial_state(grid: Grid, config: SimulationConfig) -> WavepacketState:
    """Atom in ``|g,0>`` with a Gaussian center-of-mass packet at ``x0`` moving with ``k0``."""
    margin = 8.0 * config.mu_s
    if config.x0 - margin < grid.x_min or config.x0 + margin > grid.x_max:
        raise ConfigurationError(
            f"wavepacket at x0={config.x0} with width {config.mu_s} is clipped by the domain "
            f"[{grid.x_min}, {grid.x_max}]"
        )
    return product_state(grid, config.dims, config.x0, config.k0, config.mu_s, "g0")


# --------------------------------------------------------------------------
# precomputation
# --------------------------------------------------------------------------


def active_slice(eta: np.ndarray) -> slice:
    """Contiguous range of grid points with non-negligible coupling."""
    nz = np.flatnonzero(eta >= ETA_ZERO)
    if nz.size == 0:
        return slice(0, 0)
    if nz[-1] - nz[0] + 1 != nz.size:
        # non-monotone profile on a periodic grid: treat everything as active
        return slice(0, len(eta))
    return slice(int(nz[0]), int(nz[-1]) + 1)


@dataclass
class LocalPropagators:
    """Per-point spectral data of the local Rabi Hamiltonian for one ``dt``.

    Points outside ``active`` have zero coupling and share the bare
    propagator ``exp(-i E_bare dt)``.
    """

    dt: float
    mass: float
    grid: Grid
    dims: HilbertDims
    eta: np.ndarray
    active: slice
    energies: np.ndarray  # (n_active, d)
    vectors: np.ndarray  # (n_active, d, d), columns are eigenvectors
    bare: np.ndarray  # (d,)
    sectors: tuple[np.ndarray, np.ndarray]
    unitaries: np.ndarray = field(init=False)
    sector_unitaries: list[np.ndarray] = field(init=False)
    kinetic_energy: np.ndarray = field(init=False)

    def __post_init__(self):
        self.unitaries = self.propagator(1)
        self.sector_unitaries = [
            np.ascontiguousarray(self.unitaries[:, idx][:, :, idx]) for idx in self.sectors
        ]
        self.kinetic_energy = self.grid.k**2 / (2.0 * self.mass)

    def propagator(self, n: int = 1) -> np.ndarray:
        """``exp(-i H_R(x_j) n dt)`` for every active point."""
        phase = np.exp(-1j * self.energies * (n * self.dt))
        return np.einsum("jab,jb,jcb->jac", self.vectors, phase, self.vectors.conj())

    def kinetic_phase(self, fraction: float = 1.0) -> np.ndarray:
        return np.exp(-1j * self.kinetic_energy * (fraction * self.dt))

    def bare_phase(self, n: int = 1) -> np.ndarray:
        return np.exp(-1j * self.bare * (n * self.dt))


def precompute_local_propagators(grid: Grid, config: SimulationConfig, dt: float) -> LocalPropagators:
    derived = derive_parameters(config)
    dims = config.dims
    eta = config.profile(grid.x)
    act = active_slice(eta)
    H = build_rabi_coulomb(dims, config.omega_c, config.omega_a, eta[act])
    energies, vectors = np.linalg.eigh(H)
    return LocalPropagators(
        dt=dt,
        mass=derived.mass,
        grid=grid,
        dims=dims,
        eta=eta,
        active=act,
        energies=energies,
        vectors=vectors,
        bare=bare_energies(dims, config.omega_c, config.omega_a),
        sectors=parity_sectors(dims),
    )


# --------------------------------------------------------------------------
# stepping
# --------------------------------------------------------------------------


class _SectorStepper:
    """Fused split-step loop over the occupied parity sectors."""

    def __init__(self, state: WavepacketState, pre: LocalPropagators):
        self.pre = pre
        amps = state.amplitudes
        self.sectors = []
        for idx, U in zip(pre.sectors, pre.sector_unitaries):
            block = amps[:, idx]
            if np.any(block != 0):
                self.sectors.append((idx, np.ascontiguousarray(block), U, pre.bare_phase()[idx]))
        self.full_k = pre.kinetic_phase(1.0)[:, None]
        self.half_k = pre.kinetic_phase(0.5)[:, None]

    def _kinetic(self, psi: np.ndarray, phase: np.ndarray) -> np.ndarray:
        out = sfft.fft(psi, axis=0, overwrite_x=False)
        out *= phase
        return sfft.ifft(out, axis=0, overwrite_x=True)

    def _potential(self, psi: np.ndarray, U: np.ndarray, bare: np.ndarray) -> None:
        act = self.pre.active
        lo, hi = act.start, act.stop
        if lo > 0:
            psi[:lo] *= bare
        if hi < psi.shape[0]:
            psi[hi:] *= bare
        if hi > lo:
            psi[lo:hi] = np.matmul(U, psi[lo:hi, :, None])[:, :, 0]

    def advance(self, n_steps: int) -> None:
        if n_steps <= 0:
            return
        updated = []
        for idx, psi, U, bare in self.sectors:
            psi = self._kinetic(psi, self.half_k)
            for i in range(n_steps):
                self._potential(psi, U, bare)
                psi = self._kinetic(psi, self.full_k if i < n_steps - 1 else self.half_k)
            updated.append((idx, psi, U, bare))
        self.sectors = updated

    def write(self, state: WavepacketState) -> None:
        for idx, psi, _, _ in self.sectors:
            state.amplitudes[:, idx] = psi


def _check_finite(state: WavepacketState, t: float) -> None:
    if not np.all(np.isfinite(state.amplitudes)):
        raise NumericalError(
            f"non-finite amplitudes at t={t:.6g}; reduce dt or raise the Fock cutoff (n_phot/n_guard)"
        )


def step(state: WavepacketState, dt: float, pre: LocalPropagators, n_steps: int = 1) -> WavepacketState:
    """``n_steps`` Strang steps of size ``pre.dt`` (``dt`` must match it)."""
    if state.gauge != "coulomb":
        raise ConfigurationError("propagation is only defined for Coulomb-gauge states")
    if not math.isclose(dt, pre.dt, rel_tol=1e-12, abs_tol=0.0):
        raise ConfigurationError(f"step dt={dt} does not match the precomputed dt={pre.dt}")
    out = state.copy()
    stepper = _SectorStepper(out, pre)
    stepper.advance(n_steps)
    stepper.write(out)
    out.t = state.t + n_steps * dt
    _check_finite(out, out.t)
    return out


# --------------------------------------------------------------------------
# diagnostics that need the Hamiltonian
# --------------------------------------------------------------------------


def kinetic_energy(state: WavepacketState, mass: float) -> float:
    psik = sfft.fft(state.amplitudes, axis=0)
    w = np.sum(np.abs(psik) ** 2, axis=1)
    return float(np.sum(w * state.grid.k**2) / (2.0 * mass) / np.sum(w) * state.norm2())


def total_energy(state: WavepacketState, pre: LocalPropagators) -> float:
    """``<p^2/2m + H_R^(c)(x)>``."""
    psi = state.amplitudes
    dx = state.grid.dx
    act = pre.active
    proj = np.einsum("jba,jb->ja", pre.vectors.conj(), psi[act])
    pot = np.sum(pre.energies * np.abs(proj) ** 2)
    mask = np.ones(psi.shape[0], dtype=bool)
    mask[act] = False
    pot += np.sum(np.abs(psi[mask]) ** 2 * pre.bare)
    return kinetic_energy(state, pre.mass) + float(pot) * dx


def boundary_leakage(state: WavepacketState, fraction: float = 0.1) -> float:
    mask = state.grid.margin_mask(fraction)
    return float(np.sum(np.abs(state.amplitudes[mask]) ** 2) * state.grid.dx)


# --------------------------------------------------------------------------
# driver
# --------------------------------------------------------------------------


@dataclass
class TimeSeriesRecord:
    index: int
    t: float
    t_over_tau0: float
    values: dict[str, float]
    snapshot: WavepacketState | None = None


Observer = Callable[[WavepacketState], float]


def evolve(
    state: WavepacketState,
    config: SimulationConfig,
    observers: Mapping[str, Observer] | None = None,
    snapshot_times: list[float] | None = None,
    pre: LocalPropagators | None = None,
) -> Iterator[TimeSeriesRecord]:
    """Advance from ``t = 0`` to ``t_end * tau0``, yielding one record per output.

    Outputs are equally spaced in ``t / tau0`` (``config.n_outputs`` chunks
    plus the initial point).  ``snapshot_times`` (in units of tau0) are
    rounded to the nearest output and carry a copy of the full state.
    Every record also carries ``norm2``, ``energy`` and ``leakage``.
    """
    derived = derive_parameters(config)
    grid = state.grid
    if pre is None:
        pre = precompute_local_propagators(grid, config, derived.dt)
    observers = dict(observers or {})
    n_out = config.n_outputs
    times = config.snapshot_times if snapshot_times is None else snapshot_times
    snap_idx = {int(round(t / config.t_end * n_out)) for t in times}

    current = state.copy()
    stepper = _SectorStepper(current, pre)
    for i in range(n_out + 1):
        if i > 0:
            stepper.advance(derived.stride)
            stepper.write(current)
            current.t = i * derived.stride * derived.dt
            _check_finite(current, current.t)
        values = {
            "norm2": current.norm2(),
            "energy": total_energy(current, pre),
            "leakage": boundary_leakage(current),
        }
        for name, fn in observers.items():
            values[name] = float(fn(current))
        yield TimeSeriesRecord(
            index=i,
            t=current.t,
            t_over_tau0=current.t / derived.tau0,
            values=values,
            snapshot=current.copy() if i in snap_idx else None,
        )


def self_convergence(
    config: SimulationConfig, dt: float | None = None, t_end: float | None = None, levels: int = 3
) -> dict:
    """Strang order from runs at ``dt, dt/2, dt/4, ...`` against each other.

    ``order = log2(|psi_dt - psi_dt/2| / |psi_dt/2 - psi_dt/4|)`` using the
    grid L2 norm.  The step counts double exactly, so all runs end at the
    same time.
    """
    if levels < 3:
        raise ConfigurationError("self-convergence needs at least three step sizes")
    derived = derive_parameters(config)
    t_total = (config.t_end if t_end is None else t_end) * derived.tau0
    dt0 = derived.dt if dt is None else dt
    n0 = max(1, math.ceil(t_total / dt0 - 1e-9))
    grid = Grid.from_config(config)
    start = initial_state(grid, config)
    finals = []
    for lvl in range(levels):
        n = n0 * 2**lvl
        h = t_total / n
        pre = precompute_local_propagators(grid, config, h)
        finals.append(step(start, h, pre, n).amplitudes)
    diffs = [
        math.sqrt(np.sum(np.abs(finals[i] - finals[i + 1]) ** 2) * grid.dx) for i in range(levels - 1)
    ]
    orders = [math.log2(diffs[i] / diffs[i + 1]) for i in range(len(diffs) - 1)]
    return {"dt": [t_total / (n0 * 2**l) for l in range(levels)], "diffs": diffs, "orders": orders}
