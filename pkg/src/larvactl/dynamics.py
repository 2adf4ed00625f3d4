"""Simulation in log-amplitude / lag-profile coordinates.

Densities are written as ``X(a, t) = X*(a) (1 + psi_X(t - a)) exp(eta(t))``.
The amplitude ``eta`` obeys a scalar ODE driven by the control and the
environment; the lag profiles ``psi`` obey linear renewal equations with
normalized kernels and are stored in lag buffers indexed by ``a_j = j da``.
With the time step equal to ``da`` every delay term is an exact buffer read.

In tracking mode the amplitude ``v`` is measured relative to the reference
field ``I_d(a, t) = p(a) y_d(t)`` instead of the equilibrium; the buffers
are unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .control import ControlSample, TrackingController, make_controller
from .equilibrium import SteadyState, solve_steady_state
from .errors import DivergenceError, InvalidInitialCondition, NumericalError, ScenarioError
from .model_config import ScenarioConfig, env_at

ETA_MAX = 700.0


@dataclass
class TransformedState:
    t: float
    eta: float
    hist_I: np.ndarray
    hist_F: np.ndarray
    hist_M: np.ndarray
    scale: float = 1.0  # y_d(t)/y* in tracking mode, 1 otherwise

    def copy(self) -> "TransformedState":
        return TransformedState(self.t, self.eta, self.hist_I.copy(), self.hist_F.copy(),
                                self.hist_M.copy(), self.scale)


@dataclass
class DensityField:
    I: np.ndarray
    F: np.ndarray
    M: np.ndarray
    t: float = 0.0

    def __mul__(self, c: float) -> "DensityField":
        return DensityField(self.I * c, self.F * c, self.M * c, self.t)

    __rmul__ = __mul__


def equilibrium_field(steady: SteadyState) -> DensityField:
    return DensityField(steady.I_star.copy(), steady.F_star.copy(), steady.M_star.copy())


# ---------------------------------------------------------------------------
# coordinate maps


def projection(I, steady: SteadyState) -> float:
    """<pi0, I> / <pi0, I*> in L2(0, A)."""
    grid = steady.grid
    return grid.integrate(steady.pi0_I * I) / grid.integrate(steady.pi0_I * steady.I_star)


def init_from_density(field: DensityField, steady: SteadyState, scale: float = 1.0) -> TransformedState:
    """Map densities to ``(eta, psi)``; ``scale`` is y_d(0)/y* in tracking mode."""
    num = steady.grid.integrate(steady.pi0_I * field.I)
    if not num > 0:
        raise InvalidInitialCondition("projection of the initial aquatic density is not positive")
    Pi = num / steady.grid.integrate(steady.pi0_I * steady.I_star)
    hists = []
    for name, X, Xs in (("I", field.I, steady.I_star), ("F", field.F, steady.F_star),
                        ("M", field.M, steady.M_star)):
        X = np.asarray(X, dtype=float)
        if X.shape != Xs.shape:
            raise InvalidInitialCondition(f"initial {name} has shape {X.shape}, expected {Xs.shape}")
        if np.any(X < 0) or not np.all(np.isfinite(X)):
            raise InvalidInitialCondition(f"initial {name} must be finite and nonnegative")
        hists.append(X / (Xs * Pi) - 1.0)
    return TransformedState(field.t, math.log(Pi) - math.log(scale), *hists, scale=scale)


def reconstruct(state: TransformedState, steady: SteadyState) -> DensityField:
    amp = math.exp(state.eta) * state.scale
    return DensityField(steady.I_star * (1 + state.hist_I) * amp,
                        steady.F_star * (1 + state.hist_F) * amp,
                        steady.M_star * (1 + state.hist_M) * amp, state.t)


def output_y(obj, steady: SteadyState) -> float:
    """Emergence output int w I da, from a density field or a transformed state."""
    if isinstance(obj, DensityField):
        return float(steady.grid.integrate(steady.table.w * obj.I))
    q = 1.0 + steady.grid.integrate(steady.p_tilde * obj.hist_I)
    return math.exp(obj.eta) * obj.scale * steady.y_star * q


def log_deviation_sup(state: TransformedState) -> float:
    """sup_a |ln(I / I_d)| (equilibrium in place of I_d outside tracking)."""
    return float(np.max(np.abs(state.eta + np.log1p(state.hist_I))))


def neutral_component(state: TransformedState, steady: SteadyState) -> float:
    """Constant the lag profiles relax to under the discrete renewal map.

    With weights ``f = da g_F``, ``e = da g_I`` and tails ``F_j = sum_{k>=j} f_k``
    the sum ``sum_m F_{m+1} psi_F[m] + E_{m+1} psi_I[m]`` is conserved exactly
    by one renewal step; a constant history ``c`` has value ``c`` times the
    summed tails, which fixes the limit.
    """
    f = steady.grid.weights * steady.g_F
    e = steady.grid.weights * steady.g_I
    F = np.cumsum(f[::-1])[::-1][1:]
    E = np.cumsum(e[::-1])[::-1][1:]
    mass = F @ state.hist_F[:-1] + E @ state.hist_I[:-1]
    return float(mass / (F.sum() + E.sum()))


def project_neutral(state: TransformedState, steady: SteadyState) -> TransformedState:
    """Remove the neutral constant from all lag profiles."""
    c = neutral_component(state, steady)
    return TransformedState(state.t, state.eta, state.hist_I - c, state.hist_F - c,
                            state.hist_M - c, state.scale)


# ---------------------------------------------------------------------------
# stepping


class TransformedModel:
    """Precomputed weights for stepping one scenario."""

    def __init__(self, steady: SteadyState, env, controller, reference=None):
        grid = steady.grid
        self.steady, self.env, self.controller, self.reference = steady, env, controller, reference
        self.da = grid.da
        wts = grid.weights
        self.wg_F = wts * steady.g_F
        self.wg_I = wts * steady.g_I
        self.wI = wts * steady.I_star
        self.wp = wts * steady.p_tilde
        self.tracking = reference is not None

    def scale(self, t: float) -> tuple[float, float]:
        """(y_d/y*, d/dt ln y_d) in tracking mode."""
        if not self.tracking:
            return 1.0, 0.0
        yd = float(self.reference(t))
        return yd / self.steady.y_star, float(self.reference.rate(t)) / yd

    def renew(self, hist_I, hist_F, hist_M):
        """Shift the lag buffers by one cell and fill the lag-0 slots."""
        new_I = np.empty_like(hist_I)
        new_F = np.empty_like(hist_F)
        new_M = np.empty_like(hist_M)
        new_I[1:], new_F[1:], new_M[1:] = hist_I[:-1], hist_F[:-1], hist_M[:-1]
        S_I = self.wg_F[1:] @ new_F[1:]
        S_F = self.wg_I[1:] @ new_I[1:]
        cF, cI = self.wg_F[0], self.wg_I[0]
        new_I[0] = (S_I + cF * S_F) / (1.0 - cF * cI)
        new_F[0] = new_M[0] = S_F + cI * new_I[0]
        return new_I, new_F, new_M

    def rhs(self, t, eta, J, q):
        """d eta/dt given J = int (1+psi_I) I* and q = 1 + int p~ psi_I."""
        if not eta <= ETA_MAX:
            raise DivergenceError(
                f"log-amplitude diverged at t = {t:g} under the {self.controller.variant} controller")
        K, G, g = env_at(self.env, t)
        s, dlog = self.scale(t)
        e = math.exp(eta)
        y = e * s * self.steady.y_star * q
        sample = self.controller(t, y)
        deta = self.steady.zeta_I - sample.P - dlog + G - G * g / K * e * s * J
        return deta, sample

    def step(self, state: TransformedState) -> tuple[TransformedState, ControlSample]:
        h = self.da
        t = state.t
        new_I, new_F, new_M = self.renew(state.hist_I, state.hist_F, state.hist_M)
        J0 = self.steady.k_I + self.wI @ state.hist_I
        J1 = self.steady.k_I + self.wI @ new_I
        q0 = 1.0 + self.wp @ state.hist_I
        q1 = 1.0 + self.wp @ new_I
        Jm, qm = 0.5 * (J0 + J1), 0.5 * (q0 + q1)
        eta = state.eta
        k1, sample = self.rhs(t, eta, J0, q0)
        k2, _ = self.rhs(t + h / 2, eta + h / 2 * k1, Jm, qm)
        k3, _ = self.rhs(t + h / 2, eta + h / 2 * k2, Jm, qm)
        k4, _ = self.rhs(t + h, eta + h * k3, J1, q1)
        eta_new = eta + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(eta_new) or eta_new > ETA_MAX:
            raise DivergenceError(
                f"log-amplitude diverged at t = {t + h:g} under the {self.controller.variant} controller")
        if min(new_I[0], new_F[0], new_M[0]) <= -1.0:
            raise NumericalError(f"lag profile left (-1, inf) at t = {t + h:g}; positivity lost")
        s, _ = self.scale(t + h)
        return TransformedState(t + h, eta_new, new_I, new_F, new_M, s), sample


def step(state: TransformedState, controller, steady: SteadyState, env, reference=None):
    """Advance one age cell; returns ``(new_state, control_sample)``."""
    return TransformedModel(steady, env, controller, reference).step(state)


# ---------------------------------------------------------------------------
# scenario runs


@dataclass
class OutputSeries:
    t: np.ndarray
    eta: np.ndarray
    y: np.ndarray
    P: np.ndarray
    P_FF: np.ndarray
    P_FB_raw: np.ndarray
    P_FB_sat: np.ndarray
    saturated: np.ndarray
    y_d: np.ndarray
    V_I: np.ndarray
    G_I: np.ndarray
    F_psi: np.ndarray
    log_dev: np.ndarray
    mode: str
    controller: str
    sigma: float
    psi_I: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return self.t.size

    def columns(self, names=None) -> dict[str, np.ndarray]:
        cols = {"t": self.t, "eta": self.eta, "y": self.y, "P": self.P}
        if self.mode == "track":
            cols.update(y_d=self.y_d, P_FF=self.P_FF, P_FB_raw=self.P_FB_raw,
                        P_FB_sat=self.P_FB_sat, saturated=self.saturated.astype(int))
        cols.update(V_I=self.V_I, G_I=self.G_I)
        if "W" in self.meta:
            cols["W"] = self.meta["W"]
        if names is not None:
            cols = {k: cols[k] for k in names}
        return cols


def initial_state(config: ScenarioConfig, steady: SteadyState, scale: float = 1.0) -> TransformedState:
    """Transformed initial state from the scenario's ``initial`` section."""
    init = config.initial
    a = config.grid.nodes
    if init.densities is not None:
        kw = dict(a=a, A=config.grid.A, I_star=steady.I_star, F_star=steady.F_star, M_star=steady.M_star)
        fld = DensityField(*(init.densities[k](**kw) for k in ("I", "F", "M")))
        return init_from_density(fld, steady, scale)
    hists = [init.psi[k](a=a, A=config.grid.A) if k in init.psi else np.zeros_like(a) for k in "IFM"]
    for h in hists:
        if np.any(h <= -1):
            raise InvalidInitialCondition("initial lag profiles must stay above -1")
    return TransformedState(0.0, init.eta0, *hists, scale=scale)


def simulate(config: ScenarioConfig, controller=None, T: float | None = None, *,
             steady: SteadyState | None = None, state: TransformedState | None = None,
             sigma: float | None = None, record_psi: bool = False) -> OutputSeries:
    """Run the transformed dynamics from the scenario's initial condition.

    ``T`` must be a multiple of the age step.  Diagnostics channels (V_I,
    G_I and, for tracking, the functional F(psi)) are filled along the way.
    """
    steady = steady or solve_steady_state(config.P_star, config)
    T = config.T if T is None else float(T)
    da = config.grid.da
    n = int(round(T / da))
    if abs(n * da - T) > 1e-9 * max(1.0, T):
        raise ScenarioError(f"horizon T = {T} is not a multiple of the age step {da}")
    controller = controller or make_controller(config.control, steady, config.env, T)
    tracking = isinstance(controller, TrackingController)
    reference = controller.reference if tracking else None
    model = TransformedModel(steady, config.env, controller, reference)
    if state is None:
        s0 = model.scale(0.0)[0]
        state = initial_state(config, steady, s0)
    if sigma is None:
        sigma = diagnostics.default_sigma(steady)
    a = config.grid.nodes

    cols = {k: np.full(n + 1, np.nan) for k in
            ("t", "eta", "y", "P", "P_FF", "P_FB_raw", "P_FB_sat", "y_d", "G_I", "F_psi", "log_dev")}
    saturated = np.zeros(n + 1, dtype=bool)
    psi_hist = np.empty((n + 1, a.size)) if record_psi else None

    def record(k, st, sample):
        cols["t"][k] = st.t
        cols["eta"][k] = st.eta
        cols["y"][k] = output_y(st, steady)
        cols["P"][k] = sample.P
        cols["P_FF"][k], cols["P_FB_raw"][k], cols["P_FB_sat"][k] = sample.P_FF, sample.P_FB_raw, sample.P_FB_sat
        cols["y_d"][k] = sample.y_d
        saturated[k] = sample.saturated
        cols["G_I"][k] = diagnostics.G_I_functional(st.hist_I, sigma, a)
        cols["F_psi"][k] = diagnostics.F_functional(st.hist_I, sigma, a)
        cols["log_dev"][k] = log_deviation_sup(st)
        if psi_hist is not None:
            psi_hist[k] = st.hist_I

    for k in range(n):
        new, sample = model.step(state)
        record(k, state, sample)
        state = new
    # Control at the final time, for a complete P column.
    last = controller(state.t, output_y(state, steady))
    record(n, state, last)

    V_I = diagnostics.lyapunov_VI(cols["eta"], steady.k_I)
    series = OutputSeries(
        t=cols["t"], eta=cols["eta"], y=cols["y"], P=cols["P"], P_FF=cols["P_FF"],
        P_FB_raw=cols["P_FB_raw"], P_FB_sat=cols["P_FB_sat"], saturated=saturated,
        y_d=cols["y_d"], V_I=V_I, G_I=cols["G_I"], F_psi=cols["F_psi"], log_dev=cols["log_dev"],
        mode="track" if tracking else "stabilize", controller=controller.variant, sigma=sigma,
        psi_I=psi_hist, meta={"final_state": state},
    )
    if tracking:
        consts = diagnostics.tracking_constants(controller, series.t, sigma, config.grid.A)
        series.meta.update(consts)
        series.meta["W"] = series.eta ** 2 + consts["delta"] * series.F_psi
    return series
