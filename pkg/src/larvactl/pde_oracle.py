"""Direct solver for the age-structured system, used as an independent check.

Transport at unit speed with ``dt = da`` is an exact shift of one age cell,
so the only approximations are the quadrature of the boundary integrals and
the time integration of the nonlocal source terms along each characteristic
(predictor-corrector on the exponent, which keeps the update multiplicative
and therefore positive).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import make_controller
from .dynamics import DensityField, initial_state, reconstruct
from .equilibrium import SteadyState, solve_steady_state
from .errors import NumericalError
from .model_config import ScenarioConfig, env_at, sample_rates


@dataclass
class GridField:
    t: float
    I: np.ndarray
    F: np.ndarray
    M: np.ndarray

    @classmethod
    def from_density(cls, field: DensityField) -> "GridField":
        return cls(field.t, field.I.copy(), field.F.copy(), field.M.copy())


class OracleModel:
    def __init__(self, config: ScenarioConfig, env=None):
        self.config = config
        self.grid = config.grid
        self.env = env or config.env
        self.rates = config.rates
        self.wts = self.grid.weights
        self._table = sample_rates(self.rates, self.grid)

    def table(self, field: GridField):
        if not (self.rates.density_dependent or self.rates.beta_uses_m):
            return self._table
        p = self.grid.integrate(field.I)
        m = self.grid.integrate(self._table.lam * field.M)
        return sample_rates(self.rates, self.grid, p, m)

    def output(self, field: GridField) -> float:
        return float(self.wts @ (self._table.w * field.I))

    def _rates(self, t, field: GridField, controller):
        K, G, g = env_at(self.env, t)
        sample = controller(t, self.output(field))
        R_I = G * (1 - g / K * (self.wts @ field.I)) - sample.P
        R_F = -g * (self.wts @ field.F)
        R_M = -g * (self.wts @ field.M)
        return np.array([R_I, R_F, R_M]), sample

    def _advance(self, field: GridField, table, expo, t_new) -> GridField:
        da = self.grid.da
        out = []
        for X, mu, e in ((field.I, table.mu_I, expo[0]), (field.F, table.mu_F, expo[1]),
                         (field.M, table.mu_M, expo[2])):
            cell = 0.5 * da * (mu[1:] + mu[:-1])
            Y = np.empty_like(X)
            Y[1:] = X[:-1] * np.exp(e - cell)
            out.append(Y)
        I, F, M = out
        # Boundary births, solved jointly because node 0 enters its own integrals.
        wb = self.wts * table.beta
        ww = self.wts * table.w
        bI, bW = wb[1:] @ F[1:], ww[1:] @ I[1:]
        r = table.r
        I[0] = (bI + wb[0] * r * bW) / (1 - wb[0] * r * ww[0])
        emerg = bW + ww[0] * I[0]
        F[0], M[0] = r * emerg, (1 - r) * emerg
        return GridField(t_new, I, F, M)

    def step(self, field: GridField, controller) -> tuple[GridField, object]:
        da = self.grid.da
        table = self.table(field)
        R0, sample = self._rates(field.t, field, controller)
        pred = self._advance(field, table, da * R0, field.t + da)
        R1, _ = self._rates(field.t + da, pred, controller)
        new = self._advance(field, table, 0.5 * da * (R0 + R1), field.t + da)
        for X in (new.I, new.F, new.M):
            if np.any(X < 0) or not np.all(np.isfinite(X)):
                raise NumericalError(f"oracle field lost positivity/finiteness at t = {new.t:g}")
        return new, sample


def oracle_step(field: GridField, controller, config: ScenarioConfig, env=None):
    """Advance the direct solver by one age cell."""
    return OracleModel(config, env).step(field, controller)


@dataclass
class ComparisonReport:
    t: np.ndarray
    err_I: np.ndarray
    err_F: np.ndarray
    err_M: np.ndarray
    err_y: np.ndarray
    n_a: int

    @property
    def max_err_I(self) -> float:
        return float(self.err_I.max())

    def maxima(self) -> dict[str, float]:
        return {k: float(getattr(self, k).max()) for k in ("err_I", "err_F", "err_M", "err_y")}


def _rel_l2(x, y, wts) -> float:
    return math.sqrt(wts @ (x - y) ** 2) / math.sqrt(wts @ y ** 2)


def compare_with_transform(config: ScenarioConfig, controller=None, T: float | None = None,
                           steady: SteadyState | None = None) -> ComparisonReport:
    """Run both solvers in lockstep from the same densities and record
    relative L2-in-age errors (oracle taken as the reference)."""
    from .dynamics import TransformedModel, output_y

    steady = steady or solve_steady_state(config.P_star, config)
    T = config.T if T is None else T
    controller = controller or make_controller(config.control, steady, config.env, T)
    reference = getattr(controller, "reference", None)
    tmodel = TransformedModel(steady, config.env, controller, reference)
    omodel = OracleModel(config)
    state = initial_state(config, steady, tmodel.scale(0.0)[0])
    field = GridField.from_density(reconstruct(state, steady))
    n = int(round(T / config.grid.da))
    wts = config.grid.weights
    errs = np.zeros((n + 1, 4))
    times = np.zeros(n + 1)
    for k in range(n + 1):
        rec = reconstruct(state, steady)
        times[k] = state.t
        errs[k] = (_rel_l2(rec.I, field.I, wts), _rel_l2(rec.F, field.F, wts),
                   _rel_l2(rec.M, field.M, wts),
                   abs(output_y(state, steady) - omodel.output(field)) / omodel.output(field))
        if k < n:
            state, _ = tmodel.step(state)
            field, _ = omodel.step(field, controller)
    return ComparisonReport(times, *errs.T, n_a=config.grid.n_a)
