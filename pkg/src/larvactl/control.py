"""Control laws acting on the aquatic stage.

Three variants share one calling convention, ``controller(t, y) ->
ControlSample``, where ``y`` is the current emergence output:

* ``static``      -- constant equilibrium level P*;
* ``stabilizing`` -- P* corrected by the deviation of the environment from
  its means, which cancels the non-autonomous forcing of the log-amplitude;
* ``tracking``    -- model-inversion feedforward for a reference emergence
  y_d(t) plus a logarithmic feedback, the latter clamped so the total stays
  in [P_min, P_max].
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import InfeasibleFeedforward, InvalidReference, ScenarioError
from .model_config import EnvironmentSignal, Expression, env_at

VARIANTS = ("static", "stabilizing", "tracking")


class ControlWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ControllerSpec:
    variant: str
    P_star: float
    alpha: float = 1.0
    P_min: float = -math.inf
    P_max: float = math.inf
    y_d: Expression | None = None
    y_d_dot: Expression | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ScenarioError(f"unknown controller variant {self.variant!r}; expected one of {VARIANTS}")
        if self.variant == "tracking":
            if not self.alpha > 0:
                raise ScenarioError(f"tracking gain alpha must be positive, got {self.alpha}")
            if not self.P_min < self.P_max:
                raise ScenarioError(f"need P_min < P_max, got [{self.P_min}, {self.P_max}]")
            if self.y_d is None:
                raise ScenarioError("tracking controller needs a reference y_d")

    @classmethod
    def from_dict(cls, section: Mapping[str, Any]) -> "ControllerSpec":
        try:
            P_star = float(section["P_star"])
        except (KeyError, TypeError, ValueError):
            raise ScenarioError("control.P_star is required and must be a number") from None
        names = ("t", "T", "y_star")
        y_d = section.get("y_d")
        y_d_dot = section.get("y_d_dot")
        return cls(
            variant=str(section.get("variant", "static")),
            P_star=P_star,
            alpha=float(section.get("alpha", 1.0)),
            P_min=float(section.get("P_min", -math.inf)),
            P_max=float(section.get("P_max", math.inf)),
            y_d=Expression(y_d, names) if y_d is not None else None,
            y_d_dot=Expression(y_d_dot, names) if y_d_dot is not None else None,
        )

    def with_variant(self, variant: str, **changes) -> "ControllerSpec":
        kw = {k: getattr(self, k) for k in ("P_star", "alpha", "P_min", "P_max", "y_d", "y_d_dot")}
        kw.update(changes)
        return ControllerSpec(variant=variant, **kw)


@dataclass(frozen=True)
class ControlSample:
    t: float
    P: float
    P_FF: float = math.nan
    P_FB_raw: float = math.nan
    P_FB_sat: float = math.nan
    saturated: bool = False
    y_d: float = math.nan


class Reference:
    """Reference emergence trajectory with its time derivative.

    Without a closed-form derivative a centered difference with step ``h``
    is used.
    """

    def __init__(self, expr: Expression, y_star: float, T: float = 0.0,
                 derivative: Expression | None = None, h: float = 1e-3):
        self.expr, self.derivative, self.y_star, self.T, self.h = expr, derivative, y_star, T, h

    def __call__(self, t):
        return self.expr(t=t, T=self.T, y_star=self.y_star)

    def rate(self, t):
        if self.derivative is not None:
            return self.derivative(t=t, T=self.T, y_star=self.y_star)
        return (self(t + self.h) - self(t - self.h)) / (2 * self.h)


# ---------------------------------------------------------------------------
# control laws


def static_control(spec: ControllerSpec) -> float:
    return spec.P_star


def stabilizing_control(spec: ControllerSpec, env: EnvironmentSignal, t, k_I: float):
    """P* + (Gamma(t) - Gamma*) + k_I (Gamma* gamma*/K* - Gamma(t) gamma(t)/K(t))."""
    K, G, g = env_at(env, t)
    P = spec.P_star + (G - env.Gamma_star) + k_I * (
        env.Gamma_star * env.gamma_star / env.K_star - G * g / K)
    if np.any(np.asarray(P) <= 0):
        warnings.warn(f"stabilizing control is nonpositive at t = {np.ravel(t)[0]:g}; "
                      "initial state outside the positivity region", ControlWarning, stacklevel=2)
    return P


def feedforward(steady, env: EnvironmentSignal, t, reference: Reference):
    """zeta_I - y_d'/y_d + Gamma(t) - p* (Gamma gamma / K)(t) y_d(t)."""
    yd = reference(t)
    if np.any(np.asarray(yd) <= 0):
        raise InvalidReference(f"reference y_d must stay positive (y_d = {np.min(yd):g})")
    K, G, g = env_at(env, t)
    return steady.zeta_I - reference.rate(t) / yd + G - steady.p_star * G * g / K * yd


def feedback(y, y_d, alpha: float):
    if np.any(np.asarray(y) <= 0) or np.any(np.asarray(y_d) <= 0):
        raise InvalidReference("feedback needs positive output and reference")
    return alpha * np.log(y / y_d)


def saturate(P_FB_raw: float, P_FF: float, P_min: float, P_max: float) -> tuple[float, bool]:
    """Clamp the feedback into the band left over by the feedforward."""
    if not (P_min <= P_FF <= P_max):
        raise InfeasibleFeedforward(
            f"feedforward {P_FF:.6g} outside the admissible band [{P_min:g}, {P_max:g}]")
    lo, hi = P_min - P_FF, P_max - P_FF
    sat = min(max(P_FB_raw, lo), hi)
    return sat, sat != P_FB_raw


# ---------------------------------------------------------------------------
# controller objects


class StaticController:
    variant = "static"

    def __init__(self, spec: ControllerSpec):
        self.spec = spec

    def __call__(self, t: float, y: float | None = None) -> ControlSample:
        return ControlSample(t, self.spec.P_star)


class StabilizingController:
    variant = "stabilizing"

    def __init__(self, spec: ControllerSpec, env: EnvironmentSignal, k_I: float):
        self.spec, self.env, self.k_I = spec, env, k_I

    def __call__(self, t: float, y: float | None = None) -> ControlSample:
        return ControlSample(t, float(stabilizing_control(self.spec, self.env, t, self.k_I)))


class TrackingController:
    variant = "tracking"

    def __init__(self, spec: ControllerSpec, steady, env: EnvironmentSignal, reference: Reference):
        self.spec, self.steady, self.env, self.reference = spec, steady, env, reference

    def feedforward(self, t):
        return feedforward(self.steady, self.env, t, self.reference)

    def __call__(self, t: float, y: float) -> ControlSample:
        spec = self.spec
        yd = float(self.reference(t))
        P_FF = float(self.feedforward(t))
        raw = float(feedback(y, yd, spec.alpha))
        sat, flag = saturate(raw, P_FF, spec.P_min, spec.P_max)
        return ControlSample(t, P_FF + sat, P_FF, raw, sat, flag, yd)


def make_reference(spec: ControllerSpec, steady, T: float = 0.0, h: float = 1e-3) -> Reference:
    if spec.y_d is None:
        raise ScenarioError("no reference y_d in controller spec")
    return Reference(spec.y_d, steady.y_star, T, spec.y_d_dot, h)


def make_controller(spec: ControllerSpec, steady, env: EnvironmentSignal, T: float = 0.0):
    if spec.variant == "static":
        return StaticController(spec)
    if spec.variant == "stabilizing":
        return StabilizingController(spec, env, steady.k_I)
    return TrackingController(spec, steady, env, make_reference(spec, steady, T, steady.grid.da))


# ---------------------------------------------------------------------------
# admissibility


@dataclass
class AdmissibilityReport:
    passed: bool
    y_d_bound: float
    ff_margin: float
    first_violation: tuple[float, str, float] | None = None
    times: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    y_d: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    P_FF: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def describe(self) -> str:
        if self.passed:
            return (f"reference admissible: y_d <= {self.y_d_bound:.6g} and feedforward inside "
                    f"its band on all {self.times.size} samples")
        t, kind, value = self.first_violation
        return f"reference NOT admissible: first violation at t = {t:.6g} ({kind}, value {value:.6g})"


def validate_reference(spec: ControllerSpec, steady, env: EnvironmentSignal, times,
                       reference: Reference | None = None) -> AdmissibilityReport:
    """Check the sufficient conditions on y_d and on the feedforward band.

    y_d(t) must lie in (0, min(2, alpha)/(4 p*) * min(1, (P_max - P_min)/2)]
    and P_FF(t) in [P_min + c y_d, P_max - c y_d] with c = 4 p*/min(2, alpha).
    """
    times = np.asarray(times, dtype=float)
    reference = reference or make_reference(spec, steady)
    a2 = min(2.0, spec.alpha)
    bound = a2 / (4 * steady.p_star) * min(1.0, (spec.P_max - spec.P_min) / 2)
    yd = np.broadcast_to(reference(times), times.shape)
    c = 4 * steady.p_star / a2
    with np.errstate(all="ignore"):
        K, G, g = env_at(env, times)
        ff = steady.zeta_I - reference.rate(times) / yd + G - steady.p_star * G * g / K * yd
    ff = np.broadcast_to(ff, times.shape)
    margin = np.minimum(ff - (spec.P_min + c * yd), (spec.P_max - c * yd) - ff)
    checks = [
        ("y_d nonpositive", yd <= 0, yd),
        ("y_d above admissible bound", yd > bound, yd),
        ("feedforward outside band", margin < 0, ff),
    ]
    first = None
    for kind, bad, vals in checks:
        if np.any(bad):
            j = int(np.argmax(bad))
            if first is None or times[j] < first[0]:
                first = (float(times[j]), kind, float(vals[j]))
    return AdmissibilityReport(first is None, bound, float(np.min(margin)) if margin.size else math.nan,
                               first, times, np.asarray(yd), np.asarray(ff))
