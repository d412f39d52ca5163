"""Choosing the bridge parameter, and closed-form weight-variance analysis.

The adaptive rule picks the smallest gamma on a fixed grid whose update keeps
enough weight diversity, assuming diversity grows with gamma. Diversity is
measured by ess or div of the mixture weights (deterministic given the
forecast), or by a spread ratio against a Kalman reference update sharing
the same noise streams.

weight_variance_exact gives N^2 Var of a normalized mixture weight under a
Gaussian forecast with known moments; weight_variance_asymptotic is its
leading (1 - gamma)^2 term near gamma = 1. Both support effective-sample-size
predictions via ess ~ N / (1 + N^2 Var).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .ensemble import Ensemble, TaperSpec, tapered_covariance
from .filters import enkf_update
from .mixture import _mixture_from_cov, sample_update
from .observation import LinearGaussianObservation, kalman_gain, scaled_gain
from .resampling import div, ess
from .rng import RngNode

__all__ = [
    "GammaPolicy",
    "DEFAULT_GAMMA_GRID",
    "select_gamma",
    "spread_criterion",
    "weight_variance_exact",
    "weight_variance_asymptotic",
]

DEFAULT_GAMMA_GRID = tuple(k / 15.0 for k in range(16))

_MODES = ("fixed", "adaptive_ess", "adaptive_div", "adaptive_spread")


@dataclass(frozen=True)
class GammaPolicy:
    """How to pick gamma each update.

    mode `fixed` uses `gamma` as is; the adaptive modes binary-search `grid`
    (ascending, spanning 0 to 1) for the smallest value whose diversity
    fraction reaches band[0], probing at most `max_probes` grid points.
    band[1] is an advisory upper edge, only reported when exceeded.
    """

    mode: str = "adaptive_ess"
    gamma: float | None = None
    band: tuple[float, float] = (0.25, 0.5)
    grid: tuple[float, ...] = DEFAULT_GAMMA_GRID
    max_probes: int = 4

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown gamma policy mode {self.mode!r}")
        if self.mode == "fixed":
            if self.gamma is None or not 0.0 <= self.gamma <= 1.0:
                raise ValueError("fixed mode needs gamma in [0, 1]")
        if not 0.0 <= self.band[0] <= self.band[1] <= 1.0:
            raise ValueError("band must satisfy 0 <= low <= high <= 1")
        grid = tuple(float(g) for g in self.grid)
        if len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0 or list(grid) != sorted(grid):
            raise ValueError("grid must be ascending and span 0 to 1")
        if self.max_probes < 1:
            raise ValueError("max_probes must be positive")
        object.__setattr__(self, "grid", grid)

    @classmethod
    def fixed(cls, gamma: float) -> "GammaPolicy":
        return cls(mode="fixed", gamma=float(gamma))


def _diversity_fraction(mode, ens, obs, gamma, taper, rng, cov):
    if mode == "adaptive_spread":
        if rng is None:
            raise ValueError("spread-based selection needs an rng node")
        return spread_criterion(ens, obs, gamma, taper, rng, cov=cov)
    w = _mixture_from_cov(ens.states, cov, obs, gamma).weights
    measure = ess if mode == "adaptive_ess" else div
    return measure(w) / ens.n_members


def select_gamma(
    ens: Ensemble,
    obs: LinearGaussianObservation,
    policy: GammaPolicy,
    taper: TaperSpec,
    rng: RngNode | None = None,
    cov: np.ndarray | None = None,
):
    """Binary-search the policy grid for the smallest acceptable gamma.

    Returns (gamma, probes) where probes lists each evaluated
    (gamma, diversity fraction) pair. If no probed value reaches the lower
    band edge, falls back to gamma = 1. Assumes the diversity fraction is
    nondecreasing in gamma.
    """
    if policy.mode == "fixed":
        return float(policy.gamma), ()
    if cov is None:
        cov = tapered_covariance(ens, taper).cov
    tau0 = policy.band[0]
    grid = policy.grid
    lo, hi = 0, len(grid) - 1
    probes = []
    while lo < hi and len(probes) < policy.max_probes:
        mid = (lo + hi) // 2
        frac = _diversity_fraction(policy.mode, ens, obs, grid[mid], taper, rng, cov)
        probes.append((grid[mid], frac))
        if frac >= tau0:
            hi = mid
        else:
            lo = mid + 1
    qualifying = [g for g, frac in probes if frac >= tau0]
    gamma = min(qualifying) if qualifying else grid[-1]
    return float(gamma), tuple(probes)


def spread_criterion(
    ens: Ensemble,
    obs: LinearGaussianObservation,
    gamma: float,
    taper: TaperSpec,
    rng: RngNode,
    cov: np.ndarray | None = None,
) -> float:
    """Mean per-component ratio of bridged to Kalman analysis spread, capped at 1.

    Both updates consume the same noise streams of `rng`, so the score is a
    function of gamma alone for a given forecast; at gamma = 1 it is 1 up to
    rounding. Components where the Kalman reference has zero spread count
    as ratio 1.
    """
    if cov is None:
        cov = tapered_covariance(ens, taper).cov
    mix = _mixture_from_cov(ens.states, cov, obs, gamma)
    bridged = sample_update(mix, obs, rng)
    reference = enkf_update(ens, obs, taper, rng)
    s_b = bridged.states.std(axis=1, ddof=1)
    s_r = reference.states.std(axis=1, ddof=1)
    ratio = np.ones(ens.q)
    live = s_r > 0.0
    ratio[live] = np.minimum(1.0, s_b[live] / s_r[live])
    return float(ratio.mean())


def _weight_quadratic(cov, mean, obs, gamma):
    """Coefficients (C, d) of the log mixture weight as a quadratic in the
    forecast deviation: log w = -1/2 (x - mean)' C (x - mean) + d'(x - mean) + const."""
    gain = scaled_gain(cov, obs, gamma)
    if gamma == 0.0:
        qcov = np.zeros_like(cov)
    else:
        qcov = (gain @ obs.R @ gain.T) / gamma
        qcov = 0.5 * (qcov + qcov.T)
    r = obs.r
    a = (1.0 - gamma) * obs.hp_ht(qcov) + obs.R
    b = np.eye(r) - obs.apply_h(gain)
    core = b.T @ cho_solve(cho_factor(0.5 * (a + a.T), lower=True), b)
    core = (1.0 - gamma) * 0.5 * (core + core.T)
    c_mat = obs.ht_m_h(core)
    d_vec = obs.ht_apply(core @ (obs.y - obs.apply_h(mean)))
    return c_mat, d_vec


def weight_variance_exact(
    cov: np.ndarray, mean: np.ndarray, obs: LinearGaussianObservation, gamma: float
) -> float:
    """N^2 Var of a normalized mixture weight for a N(mean, cov) forecast.

    Closed form from Gaussian moments of exp(-1/2 x'Cx + d'x): the value is
    det(P C + I) det(2 P C + I)^{-1/2}
        exp(d' [(C + P^{-1}/2)^{-1} - (C + P^{-1})^{-1}] d) - 1,
    nonnegative, and exactly 0 at gamma = 1 where weights are uniform.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    cov = np.asarray(cov, dtype=float)
    q = cov.shape[0]
    np.linalg.cholesky(cov)  # rejects non-SPD forecast covariance
    c_mat, d_vec = _weight_quadratic(cov, mean, obs, gamma)
    pc = cov @ c_mat
    sign1, logdet1 = np.linalg.slogdet(pc + np.eye(q))
    sign2, logdet2 = np.linalg.slogdet(2.0 * pc + np.eye(q))
    if sign1 <= 0 or sign2 <= 0:
        raise np.linalg.LinAlgError("weight variance determinant lost positivity")
    p_inv = np.linalg.inv(cov)
    quad = d_vec @ np.linalg.solve(c_mat + 0.5 * p_inv, d_vec)
    quad -= d_vec @ np.linalg.solve(c_mat + p_inv, d_vec)
    return float(np.exp(logdet1 - 0.5 * logdet2 + quad) - 1.0)


def weight_variance_asymptotic(
    cov: np.ndarray, mean: np.ndarray, obs: LinearGaussianObservation, gamma: float
) -> float:
    """Leading-order N^2 Var near gamma = 1: (1 - gamma)^2 times a fixed
    functional of the forecast moments and the full-gain residual operator."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    cov = np.asarray(cov, dtype=float)
    r = obs.r
    k1 = kalman_gain(cov, obs)
    b = np.eye(r) - obs.apply_h(k1)
    rinv_b = cho_solve(cho_factor(obs.R, lower=True), b)
    g = b.T @ rinv_b
    hph = obs.hp_ht(cov)
    m = g @ hph @ g
    innov = obs.y - obs.apply_h(np.asarray(mean, dtype=float))
    value = 0.5 * np.trace(hph @ m) + innov @ m @ innov
    return float((1.0 - gamma) ** 2 * value)
