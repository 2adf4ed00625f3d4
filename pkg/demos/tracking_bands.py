"""Tracking a decaying oscillation around the equilibrium output, with a
wide and a narrow admissible control band.

Run:  python demos/tracking_bands.py [output-dir]
"""

import sys
import warnings
from pathlib import Path

import numpy as np

from larvactl.control import validate_reference
from larvactl.diagnostics import tracking_certificates
from larvactl.dynamics import simulate
from larvactl.equilibrium import solve_steady_state
from larvactl.errors import HypothesisWarning
from larvactl.fixtures import fixture_scenarios
from larvactl.model_config import scenario_from_dict
from larvactl.svg import emit_svg

warnings.simplefilter("ignore", HypothesisWarning)
out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(exist_ok=True)

for name in ("fig6-wide", "fig7-narrow"):
    config = scenario_from_dict(fixture_scenarios()[name])
    steady = solve_steady_state(config.P_star, config)
    run = simulate(config, steady=steady)
    err = np.abs(np.log(run.y / run.y_d))
    c = config.control
    print(f"\n{name}: band [{c.P_min}, {c.P_max}], feedforward in "
          f"[{run.P_FF.min():.3f}, {run.P_FF.max():.3f}]")
    print(f"  tracking error at t = 1, 5, T: {err[np.searchsorted(run.t, 1.0)]:.3g}, "
          f"{err[np.searchsorted(run.t, 5.0)]:.3g}, {err[-1]:.3g}")
    print(f"  feedback clipped on {run.saturated.mean():.1%} of steps")
    cert = tracking_certificates(run, config.grid.A)
    print(f"  L = {cert.L:.4g}, certified = {cert.certified}, W nonincreasing = {cert.W_nonincreasing}")
    # The sufficient admissibility condition is conservative for these rates.
    print("  reference check:", validate_reference(c, steady, config.env, run.t).describe())
    emit_svg(run, ["y", "y_d"], out / f"{name}.svg", title=name, x_label="t", y_label="output")
    print("  wrote", out / f"{name}.svg")
