"""Channel estimators (MMSE, parametric, LS, sample, isotropic) and nuisance estimation.

Every estimator accepts a single observation of shape ``(N,)`` or a batch of
observations as the columns of an ``(N, T)`` array.
"""

import math
from typing import NamedTuple

import numpy as np

from .correlation import (
    QuadratureSpec, build_correlation, effective_rank, isotropic_correlation,
    spread_from_elevation,
)
from .errors import FullRankModel, NFMMSEError, SingularCovariance
from .music import _observations, locate, split_snapshots

# beta_hat is floored at this multiple of sigma_w2_hat.
BETA_FLOOR = 1e-3
_COND_LIMIT = 1e12


class NuisanceEstimates(NamedTuple):
    sigma_w2_hat: float
    beta_hat: float


class ParametricEstimate(NamedTuple):
    """Output of :func:`estimate_parametric`.

    ``channel`` is the estimate; the rest are pipeline diagnostics.
    """

    channel: np.ndarray
    location: object
    nuisances: NuisanceEstimates
    refined: object
    split: object


def wiener_filter(y, basis, eigenvalues, ratio):
    """``U diag(l / (l + ratio)) U^H y``, the eigenform of ``R (R + s I)^-1 y``."""
    gains = eigenvalues / (eigenvalues + ratio)
    coeff = basis.conj().T @ y
    coeff = gains[:, None] * coeff if coeff.ndim == 2 else gains * coeff
    return basis @ coeff


def estimate_mmse(y, true_model, beta, sigma_w2):
    """Genie MMSE estimate from the true correlation model and powers."""
    if beta <= 0:
        raise ValueError(f"beta must be positive, got {beta}")
    return wiener_filter(y, true_model.signal_basis, true_model.signal_eigenvalues,
                         sigma_w2 / beta)


def estimate_ls(y):
    return np.array(y, dtype=complex, copy=True)


def estimate_noise_variance(history, refined):
    """Average power of the snapshots in the refined model's noise subspace.

    Uses ``|Un^H y|^2 = |y|^2 - |Us^H y|^2``, which holds because the full
    eigenvector matrix is unitary.
    """
    y = _observations(history)
    n, m = y.shape
    dof = n - refined.rank
    if dof <= 0:
        raise FullRankModel(f"refined model has rank {refined.rank} = N; no noise subspace")
    proj = refined.signal_basis.conj().T @ y
    residual = np.vdot(y, y).real - np.vdot(proj, proj).real
    return max(float(residual) / (m * dof), 0.0)


def estimate_beta(history, sigma_w2_hat):
    """``tr(R_sample) / N - sigma_w2_hat``, floored at ``BETA_FLOOR * sigma_w2_hat``."""
    y = _observations(history)
    n, m = y.shape
    trace_per_element = np.vdot(y, y).real / (m * n)
    return max(float(trace_per_element - sigma_w2_hat), BETA_FLOOR * sigma_w2_hat)


def estimate_nuisances(history, refined):
    sigma = estimate_noise_variance(history, refined)
    return NuisanceEstimates(sigma, estimate_beta(history, sigma))


def _staged(stage, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except NFMMSEError as exc:
        raise type(exc)(f"{stage}: {exc}") from exc


def refined_model(geom, location, delta_theta_bar, quadrature=None, clip=True):
    """Refined correlation model centred on an estimated location."""
    spreads = spread_from_elevation(location.r, location.elevation, delta_theta_bar, clip=clip)
    return build_correlation(geom, location, spreads, quadrature, clip=clip)


def estimate_parametric(y, history, geom, grid, delta_theta_bar, *, quadrature=None,
                        clip=True, coarse_factor=None, model_factory=None):
    """Location-based approximate MMSE estimate.

    Pipeline: snapshot subspace split, MUSIC grid search, spread coupling,
    refined correlation model, noise and gain estimation, then the Wiener filter
    on the refined eigenpairs.  ``model_factory(location)`` may replace the
    refined-model construction (the harness uses it for caching).

    Returns
    -------
    ParametricEstimate
    """
    split = _staged("subspace split", split_snapshots, history)
    location = _staged("localization", locate, split, geom, grid, coarse_factor)
    if model_factory is None:
        refined = _staged("refined correlation", refined_model, geom, location,
                          delta_theta_bar, quadrature, clip)
    else:
        refined = _staged("refined correlation", model_factory, location)
    nuis = _staged("nuisance estimation", estimate_nuisances, history, refined)
    channel = parametric_filter(y, refined, nuis)
    return ParametricEstimate(channel, location, nuis, refined.with_beta(nuis.beta_hat), split)


def parametric_filter(y, refined, nuisances):
    """Wiener filter on ``refined`` eigenpairs with estimated powers."""
    return wiener_filter(y, refined.signal_basis, refined.signal_eigenvalues,
                         nuisances.sigma_w2_hat / nuisances.beta_hat)


def estimate_sample(y, history, sigma_w2_hat):
    """``(R_s - s I) R_s^-1 y`` with the sample covariance ``R_s`` of ``history``.

    With fewer snapshots than elements ``R_s`` is singular and its inverse is
    replaced by the pseudo-inverse over the relative-threshold rank.
    """
    obs = _observations(history)
    n, m = obs.shape
    if m < n:
        split = split_snapshots(obs)
        basis = split.signal_basis
        xi = split.eigenvalues[: split.detected_rank]
        coeff = basis.conj().T @ y
        gains = 1.0 - sigma_w2_hat / xi
        coeff = gains[:, None] * coeff if coeff.ndim == 2 else gains * coeff
        return basis @ coeff
    cov = (obs @ obs.conj().T) / m
    cov = 0.5 * (cov + cov.conj().T)
    if np.linalg.cond(cov) > _COND_LIMIT:
        cov = cov + 1e-12 * np.trace(cov).real / n * np.eye(n)
    try:
        solved = np.linalg.solve(cov, y)
    except np.linalg.LinAlgError as exc:
        raise SingularCovariance(f"sample covariance is singular: {exc}") from exc
    if not np.all(np.isfinite(solved)):
        raise SingularCovariance("sample covariance solve produced non-finite values")
    return y - sigma_w2_hat * solved


def estimate_iso(y, iso_model, nuisances):
    """Wiener filter on the isotropic model scaled by the estimated gain."""
    return parametric_filter(y, iso_model, nuisances)


def iso_model_for(geom, location, quadrature=None):
    return isotropic_correlation(geom, location.r, quadrature)


def direct_wiener(y, cov, sigma_w2):
    """Brute-force ``R (R + s I)^-1 y``; reference for the eigenform filters."""
    n = cov.shape[0]
    return cov @ np.linalg.solve(cov + sigma_w2 * np.eye(n), y)
