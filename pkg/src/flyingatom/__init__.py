"""Wavepacket simulation of a two-level atom flying through an ultrastrong-coupling cavity."""

from .config import SimulationConfig, derive_parameters, parse_config
from .errors import ConfigurationError, ContractError, FlyingAtomError, NumericalError, OutputError
from .rabi_model import CouplingProfile, HilbertDims

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "ContractError",
    "CouplingProfile",
    "FlyingAtomError",
    "HilbertDims",
    "NumericalError",
    "OutputError",
    "SimulationConfig",
    "derive_parameters",
    "parse_config",
    "__version__",
]
