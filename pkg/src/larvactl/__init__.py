"""Age-structured mosquito larval population model with stabilizing and
tracking controls, a direct PDE solver for cross-checks, and numerical
certificates for the Lyapunov inequalities."""

__version__ = "0.1.0"

from .control import ControllerSpec, make_controller, validate_reference  # noqa: E402
from .dynamics import (DensityField, TransformedState, init_from_density, reconstruct,  # noqa: E402
                       simulate)
from .equilibrium import SteadyState, calibrate_exponents, solve_steady_state  # noqa: E402
from .errors import LarvaError, NumericalError, ScenarioError  # noqa: E402
from .model_config import ScenarioConfig, load_scenario, scenario_from_dict  # noqa: E402
from .pde_oracle import compare_with_transform  # noqa: E402

__all__ = [
    "ControllerSpec", "DensityField", "LarvaError", "NumericalError", "ScenarioConfig",
    "ScenarioError", "SteadyState", "TransformedState", "calibrate_exponents",
    "compare_with_transform", "init_from_density", "load_scenario", "make_controller",
    "reconstruct", "scenario_from_dict", "simulate", "solve_steady_state", "validate_reference",
]
