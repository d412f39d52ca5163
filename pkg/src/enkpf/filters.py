"""Endpoint filters: bootstrap particle update and stochastic ensemble Kalman update."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import Ensemble, TaperSpec, tapered_covariance
from .observation import LinearGaussianObservation, kalman_gain, log_likelihood
from .resampling import balanced_resample, div, ess, weights_from_log
from .rng import RngNode

__all__ = ["UpdateDiagnostics", "pf_update", "enkf_update"]


@dataclass(frozen=True)
class UpdateDiagnostics:
    """Per-update summary: bridge parameter and weight-diversity measures."""

    gamma: float
    ess: float
    div: float
    probes: tuple | None = None
    band_exceeded: bool = False


def pf_update(ens: Ensemble, obs: LinearGaussianObservation, rng: RngNode):
    """Reweight by the full likelihood and balanced-resample.

    Returns (analysis ensemble, normalized weights, diagnostics). Raises
    DegenerateWeightsError when every likelihood underflows.
    """
    logw = log_likelihood(ens.states, obs)
    w = weights_from_log(logw)
    idx = balanced_resample(w, rng.child("resample").generator())
    out = Ensemble(ens.states[:, idx])
    return out, w, UpdateDiagnostics(gamma=0.0, ess=ess(w), div=div(w))


def enkf_update(
    ens: Ensemble,
    obs: LinearGaussianObservation,
    taper: TaperSpec,
    rng: RngNode,
    perturbed: bool = True,
) -> Ensemble:
    """Stochastic (perturbed-observations) Kalman update with tapered covariance.

    Each member moves by K (y - H x_j + eps_j) with eps_j ~ N(0, R) drawn
    from a dedicated noise stream. `perturbed=False` drops the noise term,
    which exposes the conditional-mean map for testing and for spread
    references that need the deterministic part only.
    """
    cov = tapered_covariance(ens, taper).cov
    gain = kalman_gain(cov, obs)
    innov = obs.y[:, None] - obs.apply_h(ens.states)
    if perturbed:
        innov = innov + obs.draw_noise(rng.child("eps1").generator(), ens.n_members)
    return Ensemble(ens.states + gain @ innov)
