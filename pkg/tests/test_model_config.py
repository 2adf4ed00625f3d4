import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import base_dict, make_config
from larvactl.errors import (HypothesisError, HypothesisWarning, InvalidRateError,
                             ScenarioError)
from larvactl.fixtures import fixture_scenarios
from larvactl.model_config import (AgeGrid, EnvironmentSignal, Expression, env_at,
                                   load_scenario, sample_rates, scenario_from_dict)


def write(tmp_path, data, name="s.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


def test_reference_fixture_loads_rates(tmp_path):
    cfg = load_scenario(write(tmp_path, fixture_scenarios()["reference-rates"]))
    assert cfg.grid.A == 4.0
    a = np.array([0.0, 1.0, 2.5])
    np.testing.assert_allclose(cfg.rates.mu_I0(a), 0.36 * np.exp(0.5 * a), rtol=1e-15)
    np.testing.assert_allclose(cfg.rates.mu_F(a), 0.36 * np.exp(0.5 * a), rtol=1e-15)
    np.testing.assert_allclose(cfg.rates.beta(a), 3.68 * np.exp(-0.5 * a), rtol=1e-15)
    np.testing.assert_allclose(cfg.rates.w(a), (-a**2 + 4 * a) / 16, rtol=1e-15)


def test_sampled_rate_values(config):
    table = config.table()
    a = config.grid.nodes
    j2 = int(np.argmin(abs(a - 2.0)))
    assert table.w[j2] == pytest.approx(0.25, abs=1e-15)
    assert table.mu_I[0] == pytest.approx(0.36, abs=1e-15)
    assert table.w[0] == 0.0 and abs(table.w[-1]) < 1e-15


def test_sex_ratio_out_of_range(tmp_path):
    data = base_dict(rates={"r": 1.2})
    with pytest.raises(ScenarioError, match="sex ratio out of range"):
        load_scenario(write(tmp_path, data))


def test_zero_carrying_capacity_violates_h1(tmp_path):
    data = base_dict(env={"K": 0.0, "Gamma_star": 7.0, "gamma_star": 0.1, "K_star": 1.0})
    with pytest.raises(HypothesisError, match="H1 violated"):
        load_scenario(write(tmp_path, data))


def test_negative_growth_rate_violates_h1():
    data = base_dict(env={"K_star": 1.0, "Gamma_star": 1.0, "gamma_star": 1.0,
                          "Gamma": "sin(t)"})
    with pytest.raises(HypothesisError):
        scenario_from_dict(data)


def test_missing_file_and_parse_errors(tmp_path):
    with pytest.raises(ScenarioError, match="cannot read"):
        load_scenario(tmp_path / "absent.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ScenarioError, match="parse failure at line 1"):
        load_scenario(bad)


def test_schema_checks():
    data = base_dict()
    data["schema_version"] = 2
    with pytest.raises(ScenarioError, match="schema_version"):
        scenario_from_dict(data)
    data = base_dict()
    del data["env"]
    with pytest.raises(ScenarioError, match="env"):
        scenario_from_dict(data)


def test_expression_rejects_unknown_names():
    with pytest.raises(ScenarioError, match="unknown names"):
        Expression("open(a)", ("a",))
    with pytest.raises(ScenarioError, match="cannot parse"):
        Expression("a +", ("a",))


def test_negative_rate_rejected():
    with pytest.raises(InvalidRateError):
        make_config(rates={"mu_I": "-1 + 0*a"})


def test_tabulated_and_interpolated_rates():
    grid_nodes = np.linspace(0, 4, 65)
    listed = make_config(rates={"w": list((-grid_nodes**2 + 4 * grid_nodes) / 16)})
    interp = make_config(rates={"w": {"a": [0, 2, 4], "values": [0.0, 0.25, 0.0]}})
    np.testing.assert_allclose(listed.table().w, (-grid_nodes**2 + 4 * grid_nodes) / 16)
    assert interp.table().w[16] == pytest.approx(0.125)


def test_h2_divergence_warning():
    with pytest.warns(HypothesisWarning, match="not verifiable"):
        scenario_from_dict(base_dict())


def test_env_at_constant_and_periodic_formulas():
    env = EnvironmentSignal.constant(2.0, 3.0, 4.0)
    for t in (0.0, 1.5, 100.0):
        assert env_at(env, t) == (2.0, 3.0, 4.0)
    cfg = make_config(T=60.0, env=fixture_scenarios()["fig1"]["env"])
    K, G, g = env_at(cfg.env, 0.0)
    assert K == pytest.approx(50.0, abs=1e-14)
    # Gamma*(1 + 0.3 sin(4 pi t / T)) at t = T/8 peaks at 1.3 Gamma*
    assert env_at(cfg.env, 60.0 / 8)[1] == pytest.approx(1.3 * 7.0, rel=1e-14)


def test_means_default_to_time_averages():
    cfg = make_config(T=10.0, env={"K": "2 + sin(2*pi*t/T)", "Gamma": 3.0, "gamma": 0.5})
    assert cfg.env.K_star == pytest.approx(2.0, abs=1e-12)
    assert cfg.env.Gamma_star == 3.0 and cfg.env.gamma_star == 0.5


def test_load_is_deterministic(tmp_path):
    path = write(tmp_path, fixture_scenarios()["fig3"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        a, b = load_scenario(path), load_scenario(path)
    ta, tb = a.table(), b.table()
    for name in ("mu_I", "mu_F", "mu_M", "beta", "w", "lam"):
        assert np.array_equal(getattr(ta, name), getattr(tb, name))
    assert np.array_equal(a.env.K(np.linspace(0, 60, 7)), b.env.K(np.linspace(0, 60, 7)))


def test_age_grid_quadrature():
    grid = AgeGrid(4.0, 64)
    assert grid.da == 1 / 16
    assert grid.integrate(np.ones(65)) == pytest.approx(4.0, abs=1e-14)
    assert grid.integrate(grid.nodes) == pytest.approx(8.0, abs=1e-13)
    with pytest.raises(ScenarioError):
        AgeGrid(4.0, 2)


def test_density_dependent_mortality():
    cfg = make_config(rates={"c_p": 0.1})
    assert cfg.rates.density_dependent
    a = cfg.grid.nodes
    np.testing.assert_allclose(sample_rates(cfg.rates, cfg.grid, p=2.0).mu_I,
                               0.36 * np.exp(0.5 * a) * 1.2)


@settings(max_examples=40, deadline=None)
@given(K=st.floats(0.1, 100), amp=st.floats(0.0, 0.99), T=st.floats(1.0, 50.0))
def test_h1_bound_holds_for_positive_signals(K, amp, T):
    data = base_dict(n_a=16, T=T, env={"K_star": K, "Gamma_star": 1.0, "gamma_star": 1.0,
                                       "K": f"K_star*(1+{amp}*sin(3*pi*t/T))"})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        cfg = scenario_from_dict(data)
    assert cfg.epsilon >= K * (1 - amp) - 1e-9
    assert cfg.epsilon > 0


@settings(max_examples=40, deadline=None)
@given(r=st.floats(1e-6, 1 - 1e-6))
def test_any_interior_sex_ratio_accepted(r):
    cfg = make_config(n_a=16, rates={"r": r})
    assert math.isclose(cfg.rates.r, r)
