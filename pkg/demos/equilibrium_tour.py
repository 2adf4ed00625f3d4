"""Steady state of the reference vital rates, and what it takes to move it.

Run:  python demos/equilibrium_tour.py
"""

import warnings

import numpy as np

from larvactl.equilibrium import calibrate_exponents, required_sex_ratio, solve_steady_state
from larvactl.errors import HypothesisWarning, NoEquilibriumError
from larvactl.fixtures import fixture_scenarios
from larvactl.model_config import scenario_from_dict

warnings.simplefilter("ignore", HypothesisWarning)
config = scenario_from_dict(fixture_scenarios()["reference-rates"])
steady = solve_steady_state(config.P_star, config)

print("Reference rates on a grid of", config.grid.n_a, "age cells")
for key, value in steady.summary().items():
    print(f"  {key:>8} = {value:.6g}")

# The equilibrium profile decays in age at rate zeta_I plus the mortality.
a = steady.a
print("\nI*(a) at a = 0, 1, 2, 3, 4:", np.round(np.interp([0, 1, 2, 3, 4], a, steady.I_star), 4))

# Each renewal kernel is a probability density in age.
for name in ("g_F", "g_I", "g"):
    print(f"integral of {name} = {config.grid.integrate(getattr(steady, name)):.12f}")

# Asking for both exponents equal to 0.01 needs more females than there are adults.
print("\nsex ratio needed for zeta_I = zeta_F = 0.01:", f"{required_sex_ratio(0.01, 0.01, config):.5f}")
try:
    calibrate_exponents(config, 0.01, 0.01)
except NoEquilibriumError as exc:
    print("calibration refused:", exc)

# Exponents that the rates can actually reach calibrate cleanly.
r, P = calibrate_exponents(config, -0.5, 0.3)
print(f"\nzeta_I = -0.5, zeta_F = 0.3 reached with r = {r:.6f}, P* = {P:.6f}")

# Raising the control level thins the equilibrium until it vanishes.
for P_level in (3.0, 5.0, 5.7, 6.0):
    print(f"P* = {P_level:4.1f}: birth level I(0) = {solve_steady_state(P_level, config).I0:.4f}")
