"""Pointwise stability conditions, the renewal-kernel condition and the
Lyapunov bookkeeping for a stabilized run.

Run:  python demos/stability_conditions.py
"""

import warnings

import numpy as np

from larvactl.diagnostics import (Q_matrix, check_conditions, lambda_min_closed_form,
                                  lyapunov_columns, search_H6)
from larvactl.dynamics import simulate
from larvactl.equilibrium import solve_steady_state
from larvactl.errors import HypothesisWarning
from larvactl.fixtures import fixture_scenarios
from larvactl.model_config import EnvironmentSignal, scenario_from_dict

warnings.simplefilter("ignore", HypothesisWarning)

# A small environment where the quadratic form is positive definite.
K, G, g = 1.0, 2.0, 2.0
print("lambda_min closed form:", lambda_min_closed_form(K, G, g))
print("lambda_min eigen-solve:", np.linalg.eigvalsh(Q_matrix(K, G, g))[0])
print(check_conditions(EnvironmentSignal.constant(K, G, g), [0.0]).verdict)

# The reference environments have K much larger than Gamma and gamma.
config = scenario_from_dict(fixture_scenarios()["fig3"])
times = np.linspace(0, config.T, 241)
print("\nfig3:", check_conditions(config.env, times).verdict)

steady = solve_steady_state(config.P_star, config)
h6 = search_H6(steady.g_F, steady.g_I, steady.grid)
print(f"kernel condition: kappa_I = {h6.kappa_I:.3g}, kappa_F = {h6.kappa_F:.3g}, "
      f"sigma = {h6.sigma:.3g}, weighted form holds: {h6.weighted_ok}")

run = simulate(config, steady=steady)
cols = lyapunov_columns(run, config.env, steady.k_I)
inside = np.flatnonzero(cols["region_A_member"])
print(f"run enters the positivity region at t = {run.t[inside[0]]:.3g} "
      f"and V_I falls from {run.V_I[0]:.3g} to {run.V_I[-1]:.3g}")
