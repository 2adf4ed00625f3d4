"""Reference scenarios, written as scenario JSON files.

Each scenario fixes an environment formula, an initial log-amplitude and a
control law. The equilibrium means, the control level, the horizon and the
grid are shared defaults declared here and echoed in the ``notes`` field of
every file.
"""

from __future__ import annotations

import json
from pathlib import Path

from .errors import NoEquilibriumError

RATES = {
    "r": 0.5,
    "mu_I": "0.36*exp(0.5*a)",
    "mu_F": "0.36*exp(0.5*a)",
    "mu_M": "0.36*exp(0.5*a)",
    "beta": "3.68*exp(-0.5*a)",
    "w": "(-a**2+4*a)/16",
}
A = 4.0
STARS = {"K_star": 50.0, "Gamma_star": 7.0, "gamma_star": 0.1}
P_STAR = 5.7
N_A = 128

PERIODIC_ENV = {
    **STARS,
    "K": "K_star*(1+0.2*sin(3*pi*t/T))",
    "Gamma": "Gamma_star*(1+0.3*sin(4*pi*t/T))",
    "gamma": "gamma_star*(1+0.2*cos(3*pi*t/T))",
}
DAMPED_ENV = {
    **STARS,
    "K": "K_star+0.5*K_star*exp(-t/10)",
    "Gamma": "Gamma_star*(1.0+0.25*exp(-t/40.0)*sin(2*pi*t/15.0))",
    "gamma": "gamma_star*(1+0.3*exp(-t/8)*sin(2*pi*t/20))",
}
REFERENCE = "y_star + sin(2*pi*t/30)*exp(-t/30)"
REFERENCE_RATE = "(2*pi/30*cos(2*pi*t/30) - sin(2*pi*t/30)/30)*exp(-t/30)"

_DEFAULTS_NOTE = (
    f"K*={STARS['K_star']:g}, Gamma*={STARS['Gamma_star']:g}, gamma*={STARS['gamma_star']:g}, "
    f"P*={P_STAR:g}, r={RATES['r']:g}; chosen so the feedforward for the tracking reference "
    "stays inside (5.6, 5.8). Initial lag profiles psi = 0."
)


def _scenario(name, description, env, control, T, eta0, n_a=N_A, notes=()):
    return {
        "schema_version": 1,
        "name": name,
        "description": description,
        "notes": [_DEFAULTS_NOTE, *notes],
        "age_grid": {"A": A, "n_a": n_a},
        "rates": dict(RATES),
        "env": dict(env),
        "control": control,
        "horizon": {"T": T},
        "initial": {"eta0": eta0},
    }


def _tracking(name, P_min, P_max, label):
    control = {
        "variant": "tracking", "P_star": P_STAR, "alpha": 0.5, "P_min": P_min, "P_max": P_max,
        "y_d": REFERENCE, "y_d_dot": REFERENCE_RATE,
    }
    return _scenario(
        name, f"tracking y_d = y* + sin(2 pi t/30) exp(-t/30), {label} control range",
        STARS, control, 30.0, 1.0, notes=(
            "eta0 is the initial log-amplitude relative to the reference field; alpha = 0.5.",
            "Horizon of one reference period; later errors sit at round-off.",
        ))


def equilibrium_scenario(n_a: int = 256) -> dict:
    """Reference rates with the sex ratio from the exponent calibration when
    one exists in (0, 1), otherwise the default r with the scan outcome noted."""
    from .equilibrium import calibrate_exponents
    from .model_config import scenario_from_dict

    data = _scenario("reference-rates", "steady state for the reference vital rates",
                     STARS, {"variant": "static", "P_star": P_STAR}, 50.0, 0.0, n_a=n_a)
    probe = scenario_from_dict(data)
    try:
        r, P = calibrate_exponents(probe, 0.01, 0.01)
    except NoEquilibriumError as exc:
        data["notes"].append(f"sex-ratio scan for zeta_I = zeta_F = 0.01: {exc}")
    else:
        data["rates"]["r"] = r
        data["control"]["P_star"] = P
        data["notes"].append(f"sex-ratio scan for zeta_I = zeta_F = 0.01: r = {r:.12g}, P* = {P:.12g}")
    return data


def fixture_scenarios() -> dict[str, dict]:
    static = {"variant": "static", "P_star": P_STAR}
    stab = {"variant": "stabilizing", "P_star": P_STAR}
    return {
        "reference-rates": equilibrium_scenario(),
        "fig1": _scenario("fig1", "periodic environment, static control P = P*",
                          PERIODIC_ENV, static, 60.0, 0.3),
        "fig2": _scenario("fig2", "autonomous case, P = P* and constant environment",
                          STARS, static, 60.0, 0.3),
        "fig3": _scenario("fig3", "periodic environment, stabilizing control",
                          PERIODIC_ENV, stab, 60.0, 1.007),
        "fig4": _scenario("fig4", "damped oscillating environment, static control P = P*",
                          DAMPED_ENV, static, 80.0, 0.03),
        "fig5": _scenario("fig5", "damped oscillating environment, stabilizing control",
                          DAMPED_ENV, stab, 80.0, 0.03),
        "fig6-wide": _tracking("fig6-wide", 0.0, 12.0, "wide"),
        "fig7-narrow": _tracking("fig7-narrow", 5.6, 5.8, "narrow"),
        "oracle-perturbed": _scenario("oracle-perturbed",
                                      "perturbed start for the direct-solver comparison",
                                      STARS, stab, 40.0, 0.3, n_a=64),
    }


def write_fixtures(directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, data in fixture_scenarios().items():
        path = directory / f"{name}.json"
        path.write_text(json.dumps(data, indent=2) + "\n")
        paths.append(path)
    return paths
