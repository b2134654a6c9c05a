"""Kinetic-to-hydrodynamic convergence experiments for Cucker-Smale-type swarms.

A stochastic particle solver for the kinetic equation on the unit torus is run
side by side with pseudospectral solvers for the isothermal and pressureless
Euler-alignment limits, and the distance between the two is tracked as the
relaxation parameter epsilon shrinks.
"""

__version__ = "0.1.0"

from .core import (Grid1D, ModelParams, RunConfig, VelocityGrid, config_from_dict,
                   config_to_dict, load_config, validate_config)
from .errors import ConfigError, KinHydroError, NumericalError

__all__ = [
    "ConfigError", "Grid1D", "KinHydroError", "ModelParams", "NumericalError", "RunConfig",
    "VelocityGrid", "__version__", "config_from_dict", "config_to_dict", "load_config",
    "validate_config",
]
