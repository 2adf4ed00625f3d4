"""Scenario definitions: age grid, vital rates, environment signals.

A scenario file is JSON with the sections ``age_grid``, ``rates``, ``env``,
``control``, ``initial``, ``horizon`` and ``output`` (see README for the
full schema).  Rates and signals are given either as numbers, as
arithmetic expressions over numpy (``"0.36*exp(0.5*a)"``) or as tabulated
arrays.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

import numpy as np

from .errors import HypothesisError, HypothesisWarning, InvalidRateError, ScenarioError

SCHEMA_VERSION = 1

_FUNCTIONS = (
    "exp", "log", "sqrt", "sin", "cos", "tan", "tanh", "sinh", "cosh",
    "arctan", "abs", "minimum", "maximum", "where", "clip", "heaviside",
)
_NAMESPACE: dict[str, Any] = {name: getattr(np, name) for name in _FUNCTIONS}
_NAMESPACE.update(pi=np.pi, e=np.e)


class Expression:
    """Arithmetic expression over numpy arrays with a fixed set of free variables."""

    def __init__(self, source: str | float, variables: tuple[str, ...]):
        self.source = str(source)
        self.variables = tuple(variables)
        try:
            self._code = compile(self.source, "<expression>", "eval")
        except SyntaxError as exc:
            raise ScenarioError(f"cannot parse expression {self.source!r}: {exc.msg}") from None
        unknown = set(self._code.co_names) - set(_NAMESPACE) - set(self.variables)
        if unknown:
            raise ScenarioError(
                f"expression {self.source!r} uses unknown names {sorted(unknown)}; "
                f"allowed variables are {list(self.variables)}"
            )

    def uses(self, name: str) -> bool:
        return name in self._code.co_names

    def __call__(self, **values):
        scope = dict(_NAMESPACE)
        scope.update(values)
        out = eval(self._code, {"__builtins__": {}}, scope)  # noqa: S307 - restricted namespace
        shape = np.broadcast(*[np.asarray(v) for v in values.values()]).shape if values else ()
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        return out.copy() if shape else float(out)

    def __repr__(self):
        return f"Expression({self.source!r})"


# ---------------------------------------------------------------------------
# age grid


@dataclass(frozen=True)
class AgeGrid:
    A: float
    n_a: int

    def __post_init__(self):
        if not (self.A > 0 and math.isfinite(self.A)):
            raise ScenarioError(f"max age A must be positive, got {self.A}")
        if int(self.n_a) != self.n_a or self.n_a < 8:
            raise ScenarioError(f"n_a must be an integer >= 8, got {self.n_a}")

    @property
    def da(self) -> float:
        return self.A / self.n_a

    @property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, self.A, self.n_a + 1)

    @property
    def weights(self) -> np.ndarray:
        """Composite trapezoid weights on the nodes."""
        wts = np.full(self.n_a + 1, self.da)
        wts[0] = wts[-1] = 0.5 * self.da
        return wts

    def integrate(self, values) -> float | np.ndarray:
        return np.asarray(values) @ self.weights

    def cumulative(self, values) -> np.ndarray:
        """Cumulative trapezoid integral from 0 to each node (first entry 0)."""
        values = np.asarray(values, dtype=float)
        out = np.empty_like(values)
        out[0] = 0.0
        np.cumsum(0.5 * self.da * (values[1:] + values[:-1]), out=out[1:])
        return out

    def refined(self, factor: int = 2) -> "AgeGrid":
        return AgeGrid(self.A, self.n_a * factor)


# ---------------------------------------------------------------------------
# vital rates


@dataclass(frozen=True)
class VitalRateSet:
    """Age-dependent demographic functions.

    ``mu_I0`` is the density-independent part of the aquatic mortality;
    the full rate is ``mu_I0(a) * (1 + c_p * p)`` with ``p`` the total
    aquatic population.  ``beta`` takes the male pressure ``m`` as a second
    argument and ignores it unless its expression mentions ``m``.
    """

    mu_I0: Callable
    mu_F: Callable
    mu_M: Callable
    beta: Callable
    w: Callable
    lam: Callable
    r: float
    c_p: float = 0.0
    beta_uses_m: bool = False
    sources: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (0.0 < self.r < 1.0):
            raise ScenarioError(f"sex ratio out of range: r = {self.r} not in (0, 1)")

    def mu_I(self, a, p=0.0):
        return self.mu_I0(a) * (1.0 + self.c_p * p)

    @property
    def density_dependent(self) -> bool:
        return self.c_p != 0.0


@dataclass(frozen=True)
class RateTable:
    """Vital rates sampled on the nodes of an age grid."""

    a: np.ndarray
    mu_I: np.ndarray
    mu_F: np.ndarray
    mu_M: np.ndarray
    beta: np.ndarray
    w: np.ndarray
    lam: np.ndarray
    r: float
    p: float = 0.0
    m: float = 0.0


def sample_rates(rates: VitalRateSet, grid: AgeGrid, p: float = 0.0, m: float = 0.0) -> RateTable:
    """Tabulate every vital rate on the grid nodes.

    Raises ``InvalidRateError`` on a NaN, infinite or negative sample.
    """
    a = grid.nodes
    table = {
        "mu_I": rates.mu_I(a, p),
        "mu_F": rates.mu_F(a),
        "mu_M": rates.mu_M(a),
        "beta": rates.beta(a, m),
        "w": rates.w(a),
        "lam": rates.lam(a),
    }
    for name, values in table.items():
        values = np.asarray(values, dtype=float)
        if values.shape != a.shape:
            values = np.broadcast_to(values, a.shape).copy()
        if not np.all(np.isfinite(values)):
            raise InvalidRateError(f"rate {name} has non-finite samples on the age grid")
        if np.any(values < 0):
            j = int(np.argmax(values < 0))
            raise InvalidRateError(f"rate {name} is negative at a = {a[j]:g} ({values[j]:g})")
        table[name] = values
    return RateTable(a=a, r=rates.r, p=p, m=m, **table)


def _rate_function(spec, name: str, variables: tuple[str, ...], grid: AgeGrid) -> tuple[Callable, bool]:
    """Build a callable from a rate spec; returns ``(f, uses_second_variable)``."""
    second = variables[1] if len(variables) > 1 else None
    if isinstance(spec, bool):
        raise ScenarioError(f"rate {name}: boolean is not a valid rate")
    if isinstance(spec, (int, float)):
        value = float(spec)
        return (lambda a, *_: np.full(np.shape(a), value)), False
    if isinstance(spec, str):
        expr = Expression(spec, variables + ("A",))
        if second is None:
            return (lambda a, *_: expr(a=np.asarray(a, float), A=grid.A)), False

        def f(a, x=0.0):
            return expr(a=np.asarray(a, float), A=grid.A, **{second: x})

        return f, expr.uses(second)
    if isinstance(spec, Mapping):
        xs = np.asarray(spec.get("a"), dtype=float)
        vs = np.asarray(spec.get("values"), dtype=float)
    elif isinstance(spec, (list, tuple)):
        vs = np.asarray(spec, dtype=float)
        if vs.size != grid.n_a + 1:
            raise ScenarioError(
                f"rate {name}: tabulated list must have n_a + 1 = {grid.n_a + 1} entries, got {vs.size}"
            )
        xs = grid.nodes
    else:
        raise ScenarioError(f"rate {name}: unsupported specification {spec!r}")
    if xs.shape != vs.shape or xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
        raise ScenarioError(f"rate {name}: tabulated ages must be increasing and match values")
    return (lambda a, *_: np.interp(a, xs, vs)), False


def rates_from_dict(section: Mapping[str, Any], grid: AgeGrid) -> VitalRateSet:
    try:
        r = float(section.get("r", 0.5))
    except (TypeError, ValueError):
        raise ScenarioError("rates.r must be a number") from None
    mu_I0, _ = _rate_function(section.get("mu_I", 0.0), "mu_I", ("a",), grid)
    mu_F, _ = _rate_function(section.get("mu_F", section.get("mu_I", 0.0)), "mu_F", ("a",), grid)
    mu_M, _ = _rate_function(section.get("mu_M", section.get("mu_F", section.get("mu_I", 0.0))), "mu_M", ("a",), grid)
    beta, uses_m = _rate_function(section.get("beta", 0.0), "beta", ("a", "m"), grid)
    w, _ = _rate_function(section.get("w", 0.0), "w", ("a",), grid)
    lam, _ = _rate_function(section.get("lambda", 1.0), "lambda", ("a",), grid)
    return VitalRateSet(
        mu_I0=mu_I0, mu_F=mu_F, mu_M=mu_M, beta=beta, w=w, lam=lam, r=r,
        c_p=float(section.get("c_p", 0.0)), beta_uses_m=uses_m, sources=dict(section),
    )


# ---------------------------------------------------------------------------
# environment


@dataclass(frozen=True)
class EnvironmentSignal:
    """Carrying capacity K(t), growth rate Gamma(t) and competition gamma(t)."""

    K: Callable
    Gamma: Callable
    gamma: Callable
    K_star: float
    Gamma_star: float
    gamma_star: float
    sources: Mapping[str, Any] = field(default_factory=dict, compare=False)

    @classmethod
    def constant(cls, K: float, Gamma: float, gamma: float) -> "EnvironmentSignal":
        return cls(
            K=lambda t: np.full(np.shape(t), float(K)),
            Gamma=lambda t: np.full(np.shape(t), float(Gamma)),
            gamma=lambda t: np.full(np.shape(t), float(gamma)),
            K_star=float(K), Gamma_star=float(Gamma), gamma_star=float(gamma),
            sources={"K": K, "Gamma": Gamma, "gamma": gamma},
        )

    @property
    def means(self) -> tuple[float, float, float]:
        return self.K_star, self.Gamma_star, self.gamma_star

    def pressure(self, t):
        """Normalized demographic pressure Gamma*gamma/K."""
        K, G, g = env_at(self, t)
        return G * g / K


def env_at(env: EnvironmentSignal, t):
    """Evaluate ``(K, Gamma, gamma)`` at time(s) ``t``."""
    if np.ndim(t) == 0:
        t = float(t)
        return float(env.K(t)), float(env.Gamma(t)), float(env.gamma(t))
    t = np.asarray(t, dtype=float)
    return env.K(t), env.Gamma(t), env.gamma(t)


def _signal(spec, name: str, consts: dict[str, float]) -> Callable:
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        value = float(spec)
        return lambda t: np.full(np.shape(t), value) if np.ndim(t) else value
    if isinstance(spec, str):
        expr = Expression(spec, ("t",) + tuple(consts))
        return lambda t: expr(t=t, **consts)
    raise ScenarioError(f"env.{name}: expected a number or an expression string, got {spec!r}")


def env_from_dict(section: Mapping[str, Any], T: float, dt: float) -> EnvironmentSignal:
    stars = {}
    for key in ("K_star", "Gamma_star", "gamma_star"):
        if key in section:
            stars[key] = float(section[key])
    consts = dict(stars, T=float(T))
    signals = {}
    for name, star in (("K", "K_star"), ("Gamma", "Gamma_star"), ("gamma", "gamma_star")):
        spec = section.get(name, stars.get(star))
        if spec is None:
            raise ScenarioError(f"env.{name} missing (give a signal or {star})")
        signals[name] = _signal(spec, name, consts)
    # Means not supplied: trapezoid time-average over the horizon.
    if len(stars) < 3:
        n = max(int(round(T / dt)), 1) * 4
        ts = np.linspace(0.0, T, n + 1) if T > 0 else np.zeros(1)
        for name, star in (("K", "K_star"), ("Gamma", "Gamma_star"), ("gamma", "gamma_star")):
            if star not in stars:
                vals = np.broadcast_to(signals[name](ts), ts.shape)
                stars[star] = float(np.trapezoid(vals, ts) / T) if T > 0 else float(vals[0])
    return EnvironmentSignal(sources=dict(section), **signals, **stars)


def check_H1(env: EnvironmentSignal, times) -> float:
    """Check the boundedness/positivity hypothesis on sampled times.

    Returns the observed lower bound ``eps = min K(t)``.
    """
    K, G, g = (np.broadcast_to(x, np.shape(times)) for x in env_at(env, np.asarray(times, float)))
    for name, vals in (("K", K), ("Gamma", G), ("gamma", g)):
        if not np.all(np.isfinite(vals)):
            raise HypothesisError(f"H1 violated: {name}(t) is not finite/bounded on the horizon")
    if np.any(K <= 0):
        t_bad = float(np.asarray(times)[np.argmax(K <= 0)])
        raise HypothesisError(f"H1 violated: K(t) <= 0 at t = {t_bad:g}")
    if np.any(G < 0) or np.any(g < 0):
        raise HypothesisError("H1 violated: Gamma(t) and gamma(t) must be nonnegative")
    return float(K.min())


def check_H2_H3(table: RateTable, grid: AgeGrid) -> None:
    """Rates are already checked finite and nonnegative by ``sample_rates``.

    The divergence of the integrated mortality cannot be observed on a
    finite grid; a warning records that it was not verified.
    """
    for name in ("mu_I", "mu_F", "mu_M"):
        total = grid.integrate(getattr(table, name))
        if np.isfinite(total):
            warnings.warn(
                f"H2: integral of {name} over (0, A) is finite on the grid ({total:.4g}); "
                "divergence at A not verifiable",
                HypothesisWarning,
                stacklevel=3,
            )
            break


# ---------------------------------------------------------------------------
# scenario


@dataclass(frozen=True)
class InitialCondition:
    """Either transformed coordinates (``eta0`` plus optional lag profiles of
    psi) or initial densities.  Density expressions may use ``I_star``,
    ``F_star`` and ``M_star``, which are bound once the equilibrium is known."""

    eta0: float = 0.0
    psi: Mapping[str, Expression] = field(default_factory=dict)
    densities: Mapping[str, Expression] | None = None


def initial_from_dict(section: Mapping[str, Any]) -> InitialCondition:
    if "densities" in section:
        dens = section["densities"]
        missing = {"I", "F", "M"} - set(dens)
        if missing:
            raise ScenarioError(f"initial.densities missing {sorted(missing)}")
        exprs = {k: Expression(dens[k], ("a", "A", "I_star", "F_star", "M_star")) for k in ("I", "F", "M")}
        return InitialCondition(densities=exprs)
    psi = {}
    for key in ("psi_I", "psi_F", "psi_M"):
        if key in section:
            psi[key[-1]] = Expression(section[key], ("a", "A"))
    return InitialCondition(eta0=float(section.get("eta0", 0.0)), psi=psi)


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    grid: AgeGrid
    rates: VitalRateSet
    env: EnvironmentSignal
    control: Any
    T: float
    initial: InitialCondition = field(default_factory=InitialCondition)
    output: Mapping[str, Any] = field(default_factory=dict)
    description: str = ""
    epsilon: float = 0.0
    source: str | None = None
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def P_star(self) -> float:
        return self.control.P_star

    def table(self, p: float = 0.0, m: float = 0.0) -> RateTable:
        return sample_rates(self.rates, self.grid, p, m)

    def with_grid(self, n_a: int) -> "ScenarioConfig":
        """Same scenario on a different age resolution."""
        raw = json.loads(json.dumps(self.raw))
        raw.setdefault("age_grid", {})["n_a"] = n_a
        return scenario_from_dict(raw, source=self.source)

    def replace(self, **sections) -> "ScenarioConfig":
        """Copy with raw sections updated (shallow merge per section)."""
        raw = json.loads(json.dumps(self.raw))
        for key, value in sections.items():
            if isinstance(value, Mapping) and isinstance(raw.get(key), Mapping):
                raw[key] = {**raw[key], **value}
            else:
                raw[key] = value
        return scenario_from_dict(raw, source=self.source)


def scenario_from_dict(data: Mapping[str, Any], source: str | None = None) -> ScenarioConfig:
    from .control import ControllerSpec

    if not isinstance(data, Mapping):
        raise ScenarioError("scenario must be a JSON object")
    version = data.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    for key in ("age_grid", "rates", "env", "control"):
        if key not in data:
            raise ScenarioError(f"scenario is missing section {key!r}")
    g = data["age_grid"]
    try:
        grid = AgeGrid(float(g["A"]), int(g.get("n_a", 256)))
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad age_grid section: {exc}") from None
    T = float(data.get("horizon", {}).get("T", 0.0))
    if T < 0:
        raise ScenarioError("horizon.T must be nonnegative")
    rates = rates_from_dict(data["rates"], grid)
    env = env_from_dict(data["env"], T, grid.da)
    n_steps = int(round(T / grid.da))
    times = np.arange(n_steps + 1) * grid.da
    eps = check_H1(env, times)
    table = sample_rates(rates, grid)
    check_H2_H3(table, grid)
    control = ControllerSpec.from_dict(data["control"])
    initial = initial_from_dict(data.get("initial", {}))
    return ScenarioConfig(
        name=str(data.get("name", Path(source).stem if source else "scenario")),
        grid=grid, rates=rates, env=env, control=control, T=T, initial=initial,
        output=dict(data.get("output", {})), description=str(data.get("description", "")),
        epsilon=eps, source=source, raw=json.loads(json.dumps(data)),
    )


def load_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: parse failure at line {exc.lineno}: {exc.msg}") from None
    return scenario_from_dict(data, source=str(path))
