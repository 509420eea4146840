"""Porous thermoelasticity with heat-flux memory in one dimension."""

__version__ = "0.1.0"

from .checks import AdmissibilityError, AdmissibilityReport, Violation
from .config import ConfigError, Scenario, scenario_from_config
from .kernel import FrequencyGrid, PronyKernel, TabulatedKernel, default_grid
from .material import DerivedConstants, MaterialParams, derive_constants, validate_material
from .simulator import InstabilityError, Trajectory, build_scenario, run

__all__ = [
    "AdmissibilityError",
    "AdmissibilityReport",
    "ConfigError",
    "DerivedConstants",
    "FrequencyGrid",
    "InstabilityError",
    "MaterialParams",
    "PronyKernel",
    "Scenario",
    "TabulatedKernel",
    "Trajectory",
    "Violation",
    "build_scenario",
    "default_grid",
    "derive_constants",
    "run",
    "scenario_from_config",
    "validate_material",
]
