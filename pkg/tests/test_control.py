import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import fixture_config, make_config
from larvactl.control import (ControllerSpec, Reference, feedback, feedforward, make_controller,
                              make_reference, saturate, stabilizing_control, static_control,
                              validate_reference)
from larvactl.dynamics import simulate
from larvactl.equilibrium import solve_steady_state
from larvactl.errors import InfeasibleFeedforward, InvalidReference, ScenarioError
from larvactl.model_config import EnvironmentSignal, Expression, env_at

NAMES = ("t", "T", "y_star")


def test_static_law(config):
    assert static_control(config.control) == 5.7
    ctrl = make_controller(config.control.with_variant("static"), None, config.env)
    assert all(ctrl(t, 1.0).P == 5.7 for t in (0.0, 3.0, 1e3))


def test_stabilizing_reduces_to_static_with_mean_environment(config, steady):
    for t in np.linspace(0, 50, 11):
        assert stabilizing_control(config.control, config.env, t, steady.k_I) == config.P_star


def test_stabilizing_response_to_growth_shift(steady):
    d = 0.4
    env = EnvironmentSignal(K=lambda t: 50.0, Gamma=lambda t: 7.0 + d, gamma=lambda t: 0.1,
                            K_star=50.0, Gamma_star=7.0, gamma_star=0.1)
    spec = ControllerSpec("stabilizing", 5.7)
    P = stabilizing_control(spec, env, 1.0, steady.k_I)
    assert P == pytest.approx(5.7 + d * (1 - steady.k_I * 0.1 / 50.0), rel=1e-14)


def test_stabilizing_law_finite_on_damped_environment():
    cfg = fixture_config("fig5")
    st_ = solve_steady_state(cfg.P_star, cfg)
    P0 = make_controller(cfg.control, st_, cfg.env)(0.0, st_.y_star).P
    assert math.isfinite(P0) and P0 > 0
    run = simulate(cfg, steady=st_)
    assert abs(run.eta[-1]) < 1e-6


def test_feedforward_at_equilibrium_reference(config, steady):
    ref = Reference(Expression("y_star + 0*t", NAMES), steady.y_star)
    ff = feedforward(steady, config.env, 2.0, ref)
    K, G, g = config.env.means
    assert ff == pytest.approx(steady.zeta_I + G - steady.p_star * G * g / K * steady.y_star, rel=1e-14)
    # equals the equilibrium level, so holding it keeps y at y*
    assert ff == pytest.approx(config.P_star, rel=1e-12)
    run = simulate(make_config(T=20.0, variant="static", P_star=ff))
    np.testing.assert_allclose(run.y, steady.y_star, rtol=1e-10)


def test_feedforward_exponential_reference(config, steady):
    c = 0.07
    flat = Reference(Expression("y_star + 0*t", NAMES), steady.y_star)
    expo = Reference(Expression(f"y_star*exp({c}*t)", NAMES), steady.y_star,
                     derivative=Expression(f"{c}*y_star*exp({c}*t)", NAMES))
    K, G, g = config.env.means
    t = 1.5
    shift = steady.p_star * G * g / K * (expo(t) - flat(t))
    assert feedforward(steady, config.env, t, expo) == pytest.approx(
        feedforward(steady, config.env, t, flat) - c - shift, rel=1e-13)


def test_feedforward_of_oscillating_reference_at_start():
    cfg = fixture_config("fig6-wide")
    st_ = solve_steady_state(cfg.P_star, cfg)
    ref = make_reference(cfg.control, st_, cfg.T)
    assert ref.rate(0.0) == pytest.approx(2 * math.pi / 30, rel=1e-15)
    K, G, g = cfg.env.means
    expected = st_.zeta_I - (2 * math.pi / 30) / st_.y_star + G - st_.p_star * G * g / K * st_.y_star
    assert feedforward(st_, cfg.env, 0.0, ref) == pytest.approx(expected, rel=1e-14)


def test_finite_difference_rate_fallback(steady):
    ref = Reference(Expression("y_star + sin(t)", NAMES), steady.y_star, h=1e-4)
    assert ref.rate(0.3) == pytest.approx(math.cos(0.3), rel=1e-7)


def test_feedback_law():
    assert feedback(2.0, 2.0, 1.0) == 0.0
    assert feedback(math.e * 3, 3.0, 2.0) == pytest.approx(2.0)
    with pytest.raises(InvalidReference):
        feedback(-1.0, 1.0, 1.0)


def test_saturation():
    assert saturate(0.05, 5.7, 5.6, 5.8) == (0.05, False)
    sat, flag = saturate(1e12, 5.7, 5.6, 5.8)
    assert sat == pytest.approx(0.1) and flag
    with pytest.raises(InfeasibleFeedforward):
        saturate(0.0, 6.0, 5.6, 5.8)


def test_spec_validation():
    with pytest.raises(ScenarioError):
        ControllerSpec("bang-bang", 1.0)
    with pytest.raises(ScenarioError):
        ControllerSpec("tracking", 1.0, alpha=0.0, y_d=Expression("1+0*t", NAMES))
    with pytest.raises(ScenarioError):
        ControllerSpec("tracking", 1.0, P_min=2, P_max=1, y_d=Expression("1+0*t", NAMES))
    with pytest.raises(ScenarioError):
        ControllerSpec("tracking", 1.0)


def test_narrow_band_saturates_often():
    run = simulate(fixture_config("fig7-narrow"))
    assert run.saturated.mean() > 0.01
    assert np.all((run.P >= 5.6 - 1e-12) & (run.P <= 5.8 + 1e-12))


# ---------------------------------------------------------------------------
# reference admissibility


def test_tiny_reference_is_admissible(config, steady):
    spec = ControllerSpec("tracking", 5.7, alpha=1.0, P_min=0.0, P_max=12.0,
                          y_d=Expression("1e-4 + 0*t", NAMES))
    rep = validate_reference(spec, steady, config.env, np.linspace(0, 10, 101))
    assert rep.passed, rep.describe()


def test_reference_above_bound_reports_time(config, steady):
    spec = ControllerSpec("tracking", 5.7, alpha=1.0, P_min=0.0, P_max=12.0,
                          y_d=Expression("1e-4 + heaviside(t - 3, 1)", NAMES))
    rep = validate_reference(spec, steady, config.env, np.linspace(0, 10, 101))
    assert not rep.passed
    assert rep.first_violation[0] == pytest.approx(3.0)
    assert rep.first_violation[1] == "y_d above admissible bound"


@pytest.mark.parametrize("name", ["fig6-wide", "fig7-narrow"])
def test_oscillating_references_exceed_admissible_bound(name):
    """The bound min(2, alpha)/(4 p*) is below 1/8 because w <= 1/4 forces
    p* >= 4, while the oscillating reference needs y* of order one to stay
    positive; the sufficient condition therefore fails from t = 0."""
    cfg = fixture_config(name)
    st_ = solve_steady_state(cfg.P_star, cfg)
    assert st_.p_star >= 4
    rep = validate_reference(cfg.control, st_, cfg.env, np.linspace(0, cfg.T, 481))
    assert not rep.passed
    assert rep.first_violation[:2] == (0.0, "y_d above admissible bound")
    assert rep.y_d_bound < 1 / 8


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=200, deadline=None)
@given(raw=st.floats(-1e6, 1e6), ff=st.floats(0, 10), lo=st.floats(-5, 5), width=st.floats(1e-3, 10))
def test_total_control_inside_band(raw, ff, lo, width):
    P_min, P_max = ff - abs(lo) - 1e-9, ff - abs(lo) + width
    if not P_min <= ff <= P_max:
        return
    sat, flag = saturate(raw, ff, P_min, P_max)
    assert P_min - 1e-12 <= ff + sat <= P_max + 1e-12
    assert flag == (sat != raw)


@settings(max_examples=200, deadline=None)
@given(y=st.floats(1e-6, 1e6), yd=st.floats(1e-6, 1e6), alpha=st.floats(0.01, 10), c=st.floats(1e-3, 1e3))
def test_feedback_sign_and_scale_invariance(y, yd, alpha, c):
    fb = feedback(y, yd, alpha)
    if y > yd:
        assert fb > 0
    elif y < yd:
        assert fb < 0
    assert feedback(c * y, c * yd, alpha) == pytest.approx(fb, abs=1e-9)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0, 100))
def test_stabilizing_equals_static_for_constant_signals(t):
    env = EnvironmentSignal.constant(3.0, 2.0, 1.5)
    spec = ControllerSpec("stabilizing", 1.2)
    assert stabilizing_control(spec, env, t, 0.7) == 1.2
    assert env_at(env, t) == (3.0, 2.0, 1.5)
