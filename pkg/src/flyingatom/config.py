"""Simulation parameters and the quantities derived from them.

Units: hbar = 1, and inputs are expressed with omega_c = 1 and mu_c = 1 unless
overridden.  The atom mass is not an input; it follows from the normalized
kinetic energy ``e_k = m v0^2 / (2 omega_c)`` at fixed ``k0``.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigurationError
from .rabi_model import CouplingProfile, HilbertDims

DEFAULT_X0 = -25.0 / 6.0
DEFAULT_K0 = 20.0 * math.pi
DEFAULT_STEPS_PER_PERIOD = 400
# split-step error per unit time scales with the atom velocity; slow atoms
# can use a longer step at the same accuracy (see DerivedParameters.dt)
DEFAULT_DX_PER_STEP = 2e-4


@dataclass
class SimulationConfig:
    """All physical and numerical parameters of one run.

    ``e_k`` has no default: every run must say how fast the atom is.
    ``t_end`` is in units of the transit time ``tau0``.  ``dt`` left as
    ``None`` selects the default rule in :func:`derive_parameters`.
    """

    e_k: float | None = None
    omega_c: float = 1.0
    omega_a: float = 1.0
    eta0: float = 0.3
    mu_c: float = 1.0
    x0: float = DEFAULT_X0
    k0: float = DEFAULT_K0
    mu_s: float = 0.25
    dt: float | None = None
    t_end: float = 1.0
    n_x: int = 2048
    x_min: float | None = None
    x_max: float | None = None
    n_phot: int = 8
    n_guard: int = 10
    n_outputs: int = 200
    shape: str = "gaussian"
    snapshot_times: list[float] = field(default_factory=list)

    @property
    def dims(self) -> HilbertDims:
        return HilbertDims(self.n_phot, self.n_guard)

    @property
    def profile(self) -> CouplingProfile:
        return CouplingProfile(self.eta0, self.mu_c, self.shape)

    @property
    def domain(self) -> tuple[float, float]:
        half = 4.0 * abs(self.x0)
        lo = -half if self.x_min is None else self.x_min
        hi = half if self.x_max is None else self.x_max
        return lo, hi

    def replace(self, **changes) -> "SimulationConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def validate(self) -> "SimulationConfig":
        if self.e_k is None:
            raise ConfigurationError("e_k (normalized kinetic energy) is required")
        for name in ("e_k", "k0", "omega_c", "omega_a", "mu_c", "mu_s", "t_end"):
            val = getattr(self, name)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise ConfigurationError(f"{name} must be a finite positive number, got {val!r}")
        if not (math.isfinite(self.eta0) and self.eta0 >= 0):
            raise ConfigurationError(f"eta0 must be >= 0, got {self.eta0!r}")
        if self.dt is not None and not (math.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt!r}")
        if int(self.n_x) != self.n_x or self.n_x < 16:
            raise ConfigurationError(f"n_x must be an integer >= 16, got {self.n_x!r}")
        if int(self.n_outputs) != self.n_outputs or self.n_outputs < 1:
            raise ConfigurationError(f"n_outputs must be a positive integer, got {self.n_outputs!r}")
        self.dims  # validates the Fock cutoff
        self.profile  # validates the shape
        lo, hi = self.domain
        if not hi > lo:
            raise ConfigurationError(f"empty domain [{lo}, {hi}]")
        margin = 8.0 * self.mu_s
        if self.x0 - margin < lo or -self.x0 + margin > hi:
            raise ConfigurationError(
                f"domain [{lo:.4g}, {hi:.4g}] clips the wavepacket: it must contain "
                f"[x0 - 8 mu_s, -x0 + 8 mu_s] = [{self.x0 - margin:.4g}, {-self.x0 + margin:.4g}]"
            )
        # the packet's momentum amplitude is exp(-(k - k0)^2 mu_s^2 / 2)
        k_nyq = math.pi * self.n_x / (hi - lo)
        k_need = abs(self.k0) + 8.0 / self.mu_s
        if k_nyq < k_need:
            raise ConfigurationError(
                f"grid too coarse: Nyquist wavenumber {k_nyq:.4g} < k0 + 8/mu_s = {k_need:.4g}; "
                "raise n_x or shrink the domain"
            )
        for t in self.snapshot_times:
            if not 0 <= t <= self.t_end:
                raise ConfigurationError(f"snapshot time {t} outside [0, t_end={self.t_end}]")
        return self


@dataclass(frozen=True)
class DerivedParameters:
    mass: float
    v0: float
    xi: float
    tau0: float
    mu_t: float
    dt: float
    n_steps: int
    stride: int

    def to_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def default_dt(omega_c: float, v0: float, mu_c: float = 1.0) -> float:
    """One 400th of an optical period, lengthened for slow atoms.

    The split-step error is driven by how far the atom moves during one
    step, so the step is allowed to grow until the atom covers
    ``DEFAULT_DX_PER_STEP * mu_c`` per step, capped at a tenth of a period
    so that no Rabi phase ``E dt`` in the truncated space wraps.
    """
    base = 2.0 * math.pi / (omega_c * DEFAULT_STEPS_PER_PERIOD)
    slow = DEFAULT_DX_PER_STEP * mu_c / v0
    return min(max(base, slow), 2.0 * math.pi / (omega_c * 10))


def derive_parameters(config: SimulationConfig) -> DerivedParameters:
    """Mass, velocity, adiabatic parameter, transit time and step layout.

    ``m = k0^2 / (2 omega_c e_k)``, ``v0 = k0 / m``, ``xi = v0 / (omega_c mu_c)``,
    ``tau0 = |2 x0 / v0|`` and ``mu_t = mu_c / v0``.  The run is split into
    ``n_outputs`` chunks of ``stride`` steps, with ``dt`` shrunk slightly so
    that the last step lands exactly on ``t_end * tau0``.
    """
    if config.e_k is None or not config.e_k > 0:
        raise ConfigurationError(f"e_k must be > 0, got {config.e_k!r}")
    if not config.k0 > 0:
        raise ConfigurationError(f"k0 must be > 0, got {config.k0!r}")
    mass = config.k0**2 / (2.0 * config.omega_c * config.e_k)
    v0 = config.k0 / mass
    xi = v0 / (config.omega_c * config.mu_c)
    tau0 = abs(2.0 * config.x0 / v0)
    mu_t = config.mu_c / v0
    dt_target = config.dt if config.dt is not None else default_dt(config.omega_c, v0, config.mu_c)
    t_total = config.t_end * tau0
    stride = max(1, math.ceil(t_total / (dt_target * config.n_outputs)))
    n_steps = stride * config.n_outputs
    return DerivedParameters(mass, v0, xi, tau0, mu_t, t_total / n_steps, n_steps, stride)


def xi_to_e_k(xi: float, k0: float = DEFAULT_K0, mu_c: float = 1.0) -> float:
    """Kinetic energy giving adiabatic parameter ``xi`` at fixed ``k0``: ``xi k0 mu_c / 2``."""
    return xi * k0 * mu_c / 2.0


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

_FIELDS = {f.name for f in dataclasses.fields(SimulationConfig)}


def config_from_dict(data: dict[str, Any] | None) -> SimulationConfig:
    data = dict(data or {})
    unknown = sorted(set(data) - _FIELDS)
    if unknown:
        raise ConfigurationError(f"unknown config keys: {', '.join(unknown)}")
    try:
        cfg = SimulationConfig(**data)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc
    for name in ("e_k", "omega_c", "omega_a", "eta0", "mu_c", "x0", "k0", "mu_s", "t_end", "dt"):
        val = getattr(cfg, name)
        # YAML 1.1 reads exponent forms without a dot ("1e-3") as strings
        if isinstance(val, str):
            try:
                val = float(val)
            except ValueError:
                pass
            else:
                setattr(cfg, name, val)
        if val is not None and (isinstance(val, bool) or not isinstance(val, (int, float))):
            raise ConfigurationError(f"{name} must be a number, got {val!r}")
    cfg.snapshot_times = [float(t) for t in cfg.snapshot_times]
    return cfg


def load_config_data(source: str | Path | dict | None) -> dict[str, Any]:
    """Raw key/value mapping from a YAML/JSON file, inline text or a dict."""
    if source is None:
        return {}
    if isinstance(source, dict):
        return dict(source)
    if isinstance(source, Path) or ("\n" not in source and Path(source).is_file()):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {source}: {exc}") from exc
    else:
        text = str(source)
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"malformed config: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a mapping of key: value pairs")
    return data


def parse_config(source: str | Path | dict | None = None, **overrides) -> SimulationConfig:
    """Build a validated config from a YAML/JSON file, inline text or a dict.

    Omitted fields take the documented defaults; keyword overrides win over
    the source.  ``e_k`` must end up set.
    """
    data = load_config_data(source)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(data).validate()


def dump_config(config: SimulationConfig) -> str:
    """JSON text that :func:`parse_config` reads back to an equal config."""
    return json.dumps(config.to_dict(), indent=2, sort_keys=True)
