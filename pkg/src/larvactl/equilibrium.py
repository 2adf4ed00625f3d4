"""Steady state of the controlled model and the quantities derived from it.

The steady profiles are survival exponentials scaled by boundary births.
The growth exponents come from two conditions: the net-reproduction
(characteristic) equation linking the aquatic and female exponents, and the
self-consistency of the female exponent with its own logistic term.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate, optimize

from .errors import NegativeEquilibriumError, NoEquilibriumError, NumericalError
from .model_config import AgeGrid, RateTable, ScenarioConfig

_REFINE = 8  # sub-intervals per age cell for the adjoint quadrature


@dataclass(frozen=True)
class SteadyState:
    grid: AgeGrid
    table: RateTable
    P_star: float
    K_star: float
    Gamma_star: float
    gamma_star: float
    zeta_I: float
    zeta_F: float
    zeta_M: float
    I0: float
    F0: float
    M0: float
    surv_I: np.ndarray
    surv_F: np.ndarray
    surv_M: np.ndarray
    I_star: np.ndarray
    F_star: np.ndarray
    M_star: np.ndarray
    k_I: float
    y_star: float
    p_of_a: np.ndarray
    p_tilde: np.ndarray
    p_star: float
    g_F: np.ndarray
    g_I: np.ndarray
    g: np.ndarray
    pi0_I: np.ndarray
    m_star: float
    residual: float

    @property
    def a(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def pressure_star(self) -> float:
        return self.Gamma_star * self.gamma_star / self.K_star

    def summary(self) -> dict[str, float]:
        keys = ("zeta_I", "zeta_F", "zeta_M", "I0", "F0", "M0", "k_I", "y_star",
                "p_star", "m_star", "P_star", "residual")
        return {k: float(getattr(self, k)) for k in keys}


def survival_profile(zeta: float, mu, grid: AgeGrid) -> np.ndarray:
    """exp(-int_0^a (mu + zeta)) on the nodes, cumulative trapezoid in age."""
    return np.exp(-grid.cumulative(mu) - zeta * grid.nodes)


def characteristic_residual(zeta_I: float, zeta_F: float, config: ScenarioConfig,
                            table: RateTable | None = None) -> float:
    """Net reproduction minus one: r * int(w S_I) * int(beta S_F) - 1."""
    grid = config.grid
    table = config.table() if table is None else table
    S_I = survival_profile(zeta_I, table.mu_I, grid)
    S_F = survival_profile(zeta_F, table.mu_F, grid)
    return table.r * grid.integrate(table.w * S_I) * grid.integrate(table.beta * S_F) - 1.0


def _logistic_exponent(scale: float, mu, grid: AgeGrid) -> float:
    """Root of zeta = scale * int S(zeta) for scale >= 0 (unique, RHS decreasing)."""
    if scale <= 0:
        return 0.0

    def h(z):
        return z - scale * grid.integrate(survival_profile(z, mu, grid))

    hi = scale * grid.integrate(survival_profile(0.0, mu, grid))
    if hi <= 0:
        return 0.0
    return optimize.brentq(h, 0.0, hi, xtol=1e-15, rtol=1e-14)


def _solve_fixed_rates(P_star: float, config: ScenarioConfig, table: RateTable):
    grid = config.grid
    K, G, g = config.env.means
    lo = P_star - G  # zeta_I at which the aquatic boundary birth vanishes

    def births(zeta_I):
        S_I = survival_profile(zeta_I, table.mu_I, grid)
        I0 = K / (G * g) * (zeta_I + G - P_star) / grid.integrate(S_I)
        return S_I, I0

    def residual(zeta_I):
        S_I, I0 = births(zeta_I)
        F0 = table.r * I0 * grid.integrate(table.w * S_I)
        zeta_F = _logistic_exponent(g * F0, table.mu_F, grid)
        return characteristic_residual(zeta_I, zeta_F, config, table)

    r_lo = residual(lo)
    if not np.isfinite(r_lo):
        raise NumericalError("characteristic residual is not finite at the bracket end")
    if r_lo <= 0:
        raise NegativeEquilibriumError(
            f"no positive equilibrium: P* = {P_star:g} is not below zeta_I + Gamma* "
            f"(net reproduction at vanishing density is {r_lo + 1:.4g} <= 1)"
        )
    step, hi = 1.0, lo + 1.0
    while residual(hi) > 0:
        step *= 2
        hi = lo + step
        if step > 1e4:
            raise NoEquilibriumError("characteristic residual keeps its sign on the bracket")
    zeta_I = optimize.brentq(residual, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps)
    if zeta_I + G - P_star <= 0:
        raise NegativeEquilibriumError("P* must lie in (0, zeta_I + Gamma*)")
    S_I, I0 = births(zeta_I)
    F0 = table.r * I0 * grid.integrate(table.w * S_I)
    M0 = (1 - table.r) * I0 * grid.integrate(table.w * S_I)
    zeta_F = _logistic_exponent(g * F0, table.mu_F, grid)
    zeta_M = _logistic_exponent(g * M0, table.mu_M, grid)
    return zeta_I, zeta_F, zeta_M, I0, F0, M0


def solve_steady_state(P_star: float, config: ScenarioConfig, *, max_iter: int = 200,
                       tol: float = 1e-10, relax: float = 0.5) -> SteadyState:
    """Compute the steady state for the equilibrium control level ``P_star``.

    When the aquatic mortality depends on density or fertility on the male
    pressure, an outer relaxed fixed point closes the loop on those two
    scalars; otherwise a single solve suffices.
    """
    if not P_star > 0:
        raise NegativeEquilibriumError(f"P* must be positive, got {P_star:g}")
    grid = config.grid
    coupled = config.rates.density_dependent or config.rates.beta_uses_m
    p, m = 0.0, 0.0
    for it in range(max_iter if coupled else 1):
        table = config.table(p, m)
        zI, zF, zM, I0, F0, M0 = _solve_fixed_rates(P_star, config, table)
        I_star = I0 * survival_profile(zI, table.mu_I, grid)
        M_star = M0 * survival_profile(zM, table.mu_M, grid)
        p_new = grid.integrate(I_star)
        m_new = grid.integrate(table.lam * M_star)
        if not coupled:
            break
        dp = abs(p_new - p) / max(p_new, 1e-300)
        dm = abs(m_new - m) / max(m_new, 1e-300) if config.rates.beta_uses_m else 0.0
        p = (1 - relax) * p + relax * p_new if config.rates.density_dependent else 0.0
        m = (1 - relax) * m + relax * m_new if config.rates.beta_uses_m else 0.0
        if max(dp, dm) < tol:
            table = config.table(p, m)
            zI, zF, zM, I0, F0, M0 = _solve_fixed_rates(P_star, config, table)
            break
    else:
        raise NumericalError("density/male-pressure fixed point did not converge")
    return _assemble(P_star, config, table, zI, zF, zM, I0, F0, M0)


def _normalized(values, grid: AgeGrid) -> np.ndarray:
    return values / grid.integrate(values)


def _assemble(P_star, config, table, zI, zF, zM, I0, F0, M0) -> SteadyState:
    grid = config.grid
    K, G, g = config.env.means
    surv_I = survival_profile(zI, table.mu_I, grid)
    surv_F = survival_profile(zF, table.mu_F, grid)
    surv_M = survival_profile(zM, table.mu_M, grid)
    I_star, F_star, M_star = I0 * surv_I, F0 * surv_F, M0 * surv_M
    k_I = grid.integrate(I_star)
    y_star = grid.integrate(table.w * I_star)
    p_of_a = I_star / y_star
    steady = SteadyState(
        grid=grid, table=table, P_star=float(P_star), K_star=K, Gamma_star=G, gamma_star=g,
        zeta_I=zI, zeta_F=zF, zeta_M=zM, I0=I0, F0=F0, M0=M0,
        surv_I=surv_I, surv_F=surv_F, surv_M=surv_M,
        I_star=I_star, F_star=F_star, M_star=M_star,
        k_I=k_I, y_star=y_star, p_of_a=p_of_a,
        p_tilde=_normalized(table.w * p_of_a, grid), p_star=grid.integrate(p_of_a),
        g_F=_normalized(table.beta * F_star, grid), g_I=_normalized(table.w * I_star, grid),
        g=_normalized(I_star, grid), pi0_I=np.zeros(grid.n_a + 1),
        m_star=grid.integrate(table.lam * M_star),
        residual=characteristic_residual(zI, zF, config, table),
    )
    object.__setattr__(steady, "pi0_I", adjoint_eigenfunction(steady, config))
    return steady


def adjoint_eigenfunction(steady: SteadyState, config: ScenarioConfig) -> np.ndarray:
    """pi(a) = int_a^A beta(s) exp(-int_a^s (zeta_I + mu_I)) ds on the nodes.

    Evaluated from the continuous rate functions with cumulative Simpson on a
    grid refined ``_REFINE`` times, so it does not inherit the trapezoid error
    of the tabulated profiles.
    """
    grid = steady.grid
    fine = np.linspace(0.0, grid.A, grid.n_a * _REFINE + 1)
    mu = config.rates.mu_I(fine, steady.table.p)
    beta = config.rates.beta(fine, steady.table.m)
    H = integrate.cumulative_simpson(mu, x=fine, initial=0.0) + steady.zeta_I * fine
    # Shift by H(A) to keep both exponentials bounded.
    weight = beta * np.exp(H[-1] - H)
    tail = integrate.cumulative_simpson(weight[::-1], x=fine[-1] - fine[::-1], initial=0.0)[::-1]
    pi = np.exp(H - H[-1]) * tail
    pi = pi[::_REFINE]
    pi[-1] = 0.0
    return pi


def adjoint_backward_ode(steady: SteadyState, config: ScenarioConfig, rtol: float = 1e-11) -> np.ndarray:
    """Independent route to the adjoint: integrate pi' = (zeta_I + mu_I) pi - beta
    backward from pi(A) = 0 with an implicit integrator."""
    p, m, z = steady.table.p, steady.table.m, steady.zeta_I

    def rhs(a, y):
        return (z + config.rates.mu_I(np.array([a]), p)[0]) * y - config.rates.beta(np.array([a]), m)[0]

    a = steady.grid.nodes
    sol = integrate.solve_ivp(rhs, (a[-1], a[0]), [0.0], method="Radau", t_eval=a[::-1],
                              rtol=rtol, atol=1e-14)
    if not sol.success:
        raise NumericalError(f"backward adjoint integration failed: {sol.message}")
    return sol.y[0][::-1]


def required_sex_ratio(zeta_I: float, zeta_F: float, config: ScenarioConfig) -> float:
    """Sex ratio that makes the net reproduction one at the given exponents,
    with no restriction to (0, 1)."""
    table = config.table()
    grid = config.grid
    S_I = survival_profile(zeta_I, table.mu_I, grid)
    S_F = survival_profile(zeta_F, table.mu_F, grid)
    return 1.0 / (grid.integrate(table.w * S_I) * grid.integrate(table.beta * S_F))


def calibrate_exponents(config: ScenarioConfig, zeta_I: float, zeta_F: float,
                        r_range: tuple[float, float] = (1e-9, 1 - 1e-9), n_scan: int = 64,
                        xtol: float = 1e-14) -> tuple[float, float]:
    """Find ``(r, P*)`` for which the steady state has the prescribed exponents.

    The sex ratio is located by a sign scan over ``r_range`` followed by
    bisection on the characteristic residual. The equilibrium level P* is
    then fixed by the two boundary-birth conditions at the scenario's mean
    environment. Raises NoEquilibriumError when no admissible r exists.
    """
    grid = config.grid
    table0 = config.table()

    def residual(r):
        return characteristic_residual(zeta_I, zeta_F, config, _with_sex_ratio(table0, r))

    rs = np.linspace(*r_range, n_scan + 1)
    vals = np.array([residual(r) for r in rs])
    change = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    if change.size == 0:
        need = required_sex_ratio(zeta_I, zeta_F, config)
        raise NoEquilibriumError(
            f"no sex ratio in ({r_range[0]:g}, {r_range[1]:g}) gives exponents "
            f"({zeta_I:g}, {zeta_F:g}); net reproduction at r = 1 is {vals[-1] + 1:.6g}, "
            f"so r = {need:.6g} would be required")
    j = int(change[0])
    r = optimize.bisect(residual, rs[j], rs[j + 1], xtol=xtol) if vals[j] != 0 else float(rs[j])
    K, G, g = config.env.means
    S_I = survival_profile(zeta_I, table0.mu_I, grid)
    S_F = survival_profile(zeta_F, table0.mu_F, grid)
    F0 = zeta_F / (g * grid.integrate(S_F))
    I0 = F0 / (r * grid.integrate(table0.w * S_I))
    P_star = zeta_I + G - G * g / K * I0 * grid.integrate(S_I)
    return float(r), float(P_star)


def _with_sex_ratio(table: RateTable, r: float) -> RateTable:
    return replace(table, r=float(r))
