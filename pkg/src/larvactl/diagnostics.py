"""Lyapunov functionals, stability conditions and decay envelopes.

Everything here is a pure function of recorded quantities, so a trajectory
can be certified after the fact: a functional is evaluated along the run
and compared with the inequality it is supposed to satisfy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import DegenerateQError
from .model_config import AgeGrid, EnvironmentSignal, env_at

ENVELOPE_SLACK = 1e-2


# ---------------------------------------------------------------------------
# log-amplitude Lyapunov function


def lyapunov_VI(eta, k_I: float):
    """k_I (e^eta - eta - 1)."""
    eta = np.asarray(eta, dtype=float)
    # expm1 keeps V accurate for small eta
    return k_I * (np.expm1(eta) - eta)


def phi_I(eta, k_I: float):
    return k_I * np.expm1(np.asarray(eta, dtype=float))


# ---------------------------------------------------------------------------
# quadratic form


def pd_conditions(K, Gamma, gamma):
    """(K^2 < Gamma gamma, 2K < Gamma + gamma)."""
    return K * K < Gamma * gamma, 2 * K < Gamma + gamma


def Q_matrix(K: float, Gamma: float, gamma: float) -> np.ndarray:
    d = Gamma + gamma - 2 * K
    if d == 0:
        raise DegenerateQError("Gamma + gamma - 2K = 0: quadratic form undefined")
    c = Gamma * gamma / (K * d)
    return c * np.array([[Gamma, -K], [-K, gamma]])


def lambda_min_closed_form(K, Gamma, gamma):
    """Closed-form smallest eigenvalue of Q (valid when the pd conditions hold)."""
    d = Gamma + gamma - 2 * K
    num = 2 * Gamma * gamma / K * (Gamma * gamma - K * K)
    den = d * (Gamma + gamma) + np.sqrt(d * d * ((Gamma - gamma) ** 2 + 4 * K * K))
    return num / den


def Q_and_lambda_min(env: EnvironmentSignal, t: float) -> tuple[np.ndarray, float]:
    K, G, g = env_at(env, t)
    Q = Q_matrix(K, G, g)
    return Q, float(lambda_min_closed_form(K, G, g))


@dataclass
class ConditionReport:
    times: np.ndarray
    pd_K2: np.ndarray
    pd_sum: np.ndarray
    relation: np.ndarray
    lambda_min: np.ndarray
    delta_lambda: float
    c: float
    implication_holds: bool

    @property
    def pd_everywhere(self) -> bool:
        return bool(np.all(self.pd_K2 & self.pd_sum))

    @property
    def verdict(self) -> str:
        if self.pd_everywhere:
            return f"positive definite on the horizon: {self.delta_lambda:.6g} <= lambda_min <= {self.c:.6g}"
        bad = ~(self.pd_K2 & self.pd_sum)
        return (f"positive definiteness fails on {int(bad.sum())}/{bad.size} samples "
                f"(first at t = {self.times[np.argmax(bad)]:.6g})")

    def rows(self):
        for k in range(self.times.size):
            yield (self.times[k], int(self.pd_K2[k]), int(self.pd_sum[k]), int(self.relation[k]),
                   self.lambda_min[k])


def check_conditions(env: EnvironmentSignal, times) -> ConditionReport:
    times = np.atleast_1d(np.asarray(times, dtype=float))
    K, G, g = (np.broadcast_to(x, times.shape) for x in env_at(env, times))
    c1, c2 = pd_conditions(K, G, g)
    relation = K / (np.sqrt(G) + 1) < np.sqrt(g + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(G + g - 2 * K != 0, lambda_min_closed_form(K, G, g), np.nan)
    pd = c1 & c2
    lam_pd = lam[pd]
    return ConditionReport(
        times=times, pd_K2=c1, pd_sum=c2, relation=relation, lambda_min=lam,
        delta_lambda=float(lam_pd.min()) if lam_pd.size else math.nan,
        c=float(lam_pd.max()) if lam_pd.size else math.nan,
        implication_holds=bool(np.all(~pd | relation)),
    )


def constant_C(env: EnvironmentSignal, times) -> float:
    """(||K|| c + ||Gamma|| ||gamma||) / (2 eps) over the sampled horizon."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    K, G, g = (np.broadcast_to(x, times.shape) for x in env_at(env, times))
    rep = check_conditions(env, times)
    lam = rep.lambda_min[np.isfinite(rep.lambda_min)]
    c = float(lam.max()) if lam.size else 0.0
    return (K.max() * c + G.max() * g.max()) / (2 * K.min())


def region_A_check(eta: float, k_I: float, gamma1: float, C: float, P_values=()) -> bool:
    """Membership in the positivity region of the stabilizing law."""
    if not gamma1 > C * k_I:
        return False
    if eta > math.log(math.sqrt(gamma1 / (C * k_I))):
        return False
    return bool(np.all(np.asarray(P_values) > 0))


# ---------------------------------------------------------------------------
# lag-profile functionals


def G_I_functional(hist, sigma: float, a) -> float:
    hist = np.asarray(hist)
    num = np.max(np.abs(hist) * np.exp(-sigma * np.asarray(a)))
    return float(num / (1.0 + max(0.0, hist.min())))


def F_functional(hist, sigma: float, a) -> float:
    hist = np.asarray(hist)
    num = np.max(np.abs(hist) * np.exp(-sigma * np.asarray(a)))
    return float(num / (1.0 + min(hist.min(), 0.0)))


def _h_integrand(z: float) -> float:
    if abs(z) < 1e-8:
        return z
    return math.expm1(z) ** 2 / z


def h_function(p):
    """int_0^p (e^z - 1)^2 / z dz."""
    def one(x):
        return integrate.quad(_h_integrand, 0.0, float(x), epsabs=0.0, epsrel=1e-12, limit=200)[0]
    if np.ndim(p) == 0:
        return one(p)
    return np.array([one(x) for x in np.ravel(p)]).reshape(np.shape(p))


def h_and_V(G, V_I, gamma1: float, sigma_I: float):
    h = h_function(G)
    return h, V_I + gamma1 / sigma_I * h


def G_I_envelope(times, G, sigma: float, slack: float = ENVELOPE_SLACK):
    """Check G(t) <= G(0) e^{-sigma t} (1 + slack); returns (ok, worst ratio)."""
    times, G = np.asarray(times), np.asarray(G)
    bound = G[0] * np.exp(-sigma * (times - times[0]))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(bound > 0, G / bound, np.where(G > 0, np.inf, 0.0))
    worst = float(np.max(ratio))
    return worst <= 1 + slack, worst


def decay_rate_fit(times, values) -> float:
    """Exponential rate from a least-squares fit of log(values)."""
    times, values = np.asarray(times, float), np.asarray(values, float)
    keep = values > 0
    slope = np.polyfit(times[keep], np.log(values[keep]), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# kernel condition


@dataclass
class H6Report:
    kappa_I: float
    kappa_F: float
    sigma: float
    z_I: float
    z_F: float
    plain_F: float
    plain_I: float
    weighted_F: float
    weighted_I: float

    @property
    def plain_ok(self) -> bool:
        return self.plain_F < 1 and self.plain_I < 1

    @property
    def weighted_ok(self) -> bool:
        return self.weighted_F < 1 and self.weighted_I < 1

    @property
    def feasible(self) -> bool:
        return self.plain_ok and self.weighted_ok


def _h6_integral(g, grid: AgeGrid, kappa, sigma: float):
    """int |g(a) - z kappa int_a^A g| e^{sigma a} da, vectorized over kappa."""
    a = grid.nodes
    z = 1.0 / grid.integrate(a * g)
    tail = grid.integrate(g) - grid.cumulative(g)
    kappa = np.asarray(kappa, dtype=float)
    vals = np.abs(g - z * kappa[..., None] * tail) * np.exp(sigma * a)
    return vals @ grid.weights, z


def check_H6(g_F, g_I, grid: AgeGrid, kappa_I: float, kappa_F: float, sigma: float = 0.0) -> H6Report:
    pF, zI = _h6_integral(g_F, grid, kappa_I, 0.0)
    pI, zF = _h6_integral(g_I, grid, kappa_F, 0.0)
    wF, _ = _h6_integral(g_F, grid, kappa_I, sigma)
    wI, _ = _h6_integral(g_I, grid, kappa_F, sigma)
    return H6Report(kappa_I, kappa_F, sigma, zI, zF, float(pF), float(pI), float(wF), float(wI))


def search_H6(g_F, g_I, grid: AgeGrid, kappas=None, sigma_range=(1e-4, 2.0)) -> H6Report:
    """Largest sigma (by bisection) for which some kappa pair passes both weighted checks."""
    kappas = np.linspace(1e-3, 2.0, 400) if kappas is None else np.asarray(kappas)

    def best(sigma):
        wF, _ = _h6_integral(g_F, grid, kappas, sigma)
        wI, _ = _h6_integral(g_I, grid, kappas, sigma)
        jF, jI = int(np.argmin(wF)), int(np.argmin(wI))
        # kappa_I pairs with g_F, kappa_F with g_I
        return max(wF[jF], wI[jI]), kappas[jF], kappas[jI]

    lo, hi = sigma_range
    worst, kI, kF = best(lo)
    if worst >= 1:
        return check_H6(g_F, g_I, grid, kI, kF, lo)
    if best(hi)[0] < 1:
        lo = hi
    else:
        for _ in range(50):
            mid = 0.5 * (lo + hi)
            if best(mid)[0] < 1:
                lo = mid
            else:
                hi = mid
    _, kI, kF = best(lo)
    return check_H6(g_F, g_I, grid, kI, kF, lo)


def default_sigma(steady, fallback: float = 0.05) -> float:
    rep = search_H6(steady.g_F, steady.g_I, steady.grid)
    return rep.sigma if rep.feasible else fallback


# ---------------------------------------------------------------------------
# tracking certificate


def kappa_W(s, sigma: float, A: float, delta: float):
    s = np.asarray(s, dtype=float)
    return (np.sqrt(s) + math.exp(sigma * A) / delta * s) * np.exp(np.maximum(0.0, s - 1))


def tracking_constants(controller, times, sigma: float, A: float, margin: float = 1.1) -> dict:
    """delta, mu1, mu2 and the rate L = min(mu1, mu2/delta) over the sampled horizon.

    The band offsets are P_min - P_FF (<= 0) and P_max - P_FF (>= 0); their
    magnitudes enter the constants.
    """
    spec, steady = controller.spec, controller.steady
    times = np.asarray(times, dtype=float)
    ff = np.broadcast_to(controller.feedforward(times), times.shape)
    yd = np.broadcast_to(controller.reference(times), times.shape)
    lo, hi = np.abs(spec.P_min - ff), np.abs(spec.P_max - ff)
    pbar = float(np.max(np.maximum(lo, hi)))
    ydp = float(np.max(yd)) * steady.p_star
    eSA = math.exp(sigma * A)
    delta = margin * eSA / sigma * (8 * pbar + 2 * math.e * ydp)
    a2 = min(2.0, spec.alpha)
    mu1 = float(np.min(a2 * np.minimum(1.0, np.minimum(lo, hi)) - 4 * yd * steady.p_star))
    mu2 = sigma * delta - 8 * pbar * eSA - 2 * eSA * math.e * ydp
    L = min(mu1, mu2 / delta)
    return {"delta": float(delta), "mu1": mu1, "mu2": float(mu2), "L": float(L),
            "certified": bool(mu1 >= 0 and mu2 > 0)}


@dataclass
class EnvelopeReport:
    L: float
    delta: float
    W0: float
    certified: bool
    envelope_ok: bool
    worst_ratio: float
    W_nonincreasing: bool
    max_W_increase: float
    v_envelope_ok: bool
    envelope: np.ndarray = field(repr=False)


def _worst_log_ratio(values, log_bound, atol: float = 1e-12) -> float:
    """max(values / (exp(log_bound) + atol)) evaluated in log space."""
    values = np.asarray(values, dtype=float)
    log_bound = np.logaddexp(log_bound, math.log(atol))
    with np.errstate(divide="ignore"):
        logs = np.log(values)
    diff = np.where(values > 0, logs - log_bound, -np.inf)
    return float(np.exp(np.max(diff))) if diff.size else 0.0


def tracking_certificates(series, A: float, delta: float | None = None, L: float | None = None,
                          slack: float = ENVELOPE_SLACK, W_tol: float = 1e-8) -> EnvelopeReport:
    """Evaluate the tracking envelope along a recorded run."""
    sigma = series.sigma
    delta = series.meta["delta"] if delta is None else delta
    L = series.meta["L"] if L is None else L
    W = series.eta ** 2 + delta * series.F_psi
    W0 = float(W[0])
    t = series.t - series.t[0]
    # log space: with L < 0 the envelopes grow past the float range
    k0 = float(kappa_W(W0, sigma, A, delta))
    log_env = (math.log(k0) if k0 > 0 else -math.inf) - L * t / 4
    env = np.exp(np.minimum(log_env, 700.0))
    worst = _worst_log_ratio(series.log_dev, log_env)
    log_venv = ((math.log(W0) + max(0.0, W0 - 1)) if W0 > 0 else -math.inf) - L * t / 2
    v_ok = _worst_log_ratio(series.eta ** 2, log_venv) <= 1 + slack
    dW = np.diff(W)
    return EnvelopeReport(
        L=L, delta=delta, W0=W0, certified=bool(series.meta.get("certified", L > 0)),
        envelope_ok=worst <= 1 + slack, worst_ratio=worst,
        W_nonincreasing=bool(np.all(dW <= W_tol)), max_W_increase=float(dW.max()) if dW.size else 0.0,
        v_envelope_ok=bool(v_ok),
        envelope=env,
    )


# ---------------------------------------------------------------------------
# per-sample table


def lyapunov_columns(series, env: EnvironmentSignal, k_I: float, gamma1: float | None = None) -> dict:
    """Lyapunov quantities along a recorded run, one entry per time sample.

    ``gamma1`` defaults to ``2 C k_I``, inside the constraint of the
    positivity region.
    """
    t = np.asarray(series.t, dtype=float)
    K, G, g = (np.broadcast_to(x, t.shape) for x in env_at(env, t))
    d = G + g - 2 * K
    with np.errstate(divide="ignore", invalid="ignore"):
        lam = np.where(d != 0, lambda_min_closed_form(K, G, g), np.nan)
    C = constant_C(env, t)
    gamma1 = 2 * C * k_I if gamma1 is None else gamma1
    h = h_function(np.asarray(series.G_I))
    V_total = series.V_I + gamma1 / series.sigma * h
    member = np.array([region_A_check(e, k_I, gamma1, C, (p,)) for e, p in zip(series.eta, series.P)])
    return {
        "phi_I": phi_I(series.eta, k_I),
        "lambda_min": lam,
        "h_of_G": h,
        "V_total": V_total,
        "F_func": np.asarray(series.F_psi),
        "W": np.asarray(series.meta.get("W", np.full(t.shape, np.nan))),
        "region_A_member": member.astype(int),
    }
