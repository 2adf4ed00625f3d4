"""Compare the reduced (log-amplitude plus renewal) solver against the
direct age-structured solver on three grids.

Run:  python demos/oracle_refinement.py
"""

import warnings

from larvactl.errors import HypothesisWarning
from larvactl.fixtures import fixture_scenarios
from larvactl.model_config import scenario_from_dict
from larvactl.pde_oracle import compare_with_transform

warnings.simplefilter("ignore", HypothesisWarning)
base = scenario_from_dict(fixture_scenarios()["oracle-perturbed"])

print(" n_a   max err I   max err F   max err M   max err y")
for n_a in (64, 128, 256):
    rep = compare_with_transform(base.with_grid(n_a))
    m = rep.maxima()
    print(f"{n_a:4d}  {m['err_I']:.6f}    {m['err_F']:.6f}    {m['err_M']:.6f}    {m['err_y']:.2e}")

# The remaining gap does not vanish with the grid: the reduced model moves
# adults with the aquatic log-amplitude, while in the full system they carry
# their own logistic term.
