import copy
import warnings

import pytest

from larvactl.equilibrium import solve_steady_state
from larvactl.errors import HypothesisWarning
from larvactl.fixtures import RATES, STARS, fixture_scenarios
from larvactl.model_config import scenario_from_dict

ACCEPTANCE_LINES: list[str] = []


def base_dict(n_a=64, T=10.0, variant="stabilizing", eta0=0.0, env=None, rates=None, **control):
    data = {
        "age_grid": {"A": 4.0, "n_a": n_a},
        "rates": dict(RATES, **(rates or {})),
        "env": dict(env or STARS),
        "control": {"variant": variant, "P_star": 5.7, **control},
        "horizon": {"T": T},
        "initial": {"eta0": eta0},
    }
    return data


def make_config(**kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        return scenario_from_dict(base_dict(**kw))


def fixture_config(name, **sections):
    data = copy.deepcopy(fixture_scenarios()[name])
    for key, value in sections.items():
        data[key] = {**data.get(key, {}), **value}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        return scenario_from_dict(data)


@pytest.fixture(scope="session")
def config():
    return make_config()


@pytest.fixture(scope="session")
def steady(config):
    return solve_steady_state(config.P_star, config)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
