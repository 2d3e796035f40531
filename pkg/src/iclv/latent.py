"""Structural latent-attitude equations and the ordered-probit measurement model.

The structural layer maps socio-demographics to each latent variable with an
additive normal disturbance. The measurement layer maps a latent value to
Likert category probabilities through strictly increasing thresholds and the
standard normal CDF. Both identification scales (disturbance and measurement
error) are fixed to 1 by default.
"""

import numpy as np
from scipy.special import ndtr

from .model import ModelSpecError, thresholds


def structural_eval(spec, params, sociodemographics, std_draw):
    """Latent values a_l = zeta_l + struct_l . Z + sigma_l * draw_l.

    sociodemographics: mapping of regressor name to value.
    std_draw: standard-normal values, shape (L,) or (L, n) for n draws per
    latent; the result has the same shape.
    """
    std_draw = np.asarray(std_draw, dtype=float)
    if std_draw.ndim not in (1, 2) or std_draw.shape[0] != len(spec.latents):
        raise ModelSpecError(
            f"std_draw has shape {std_draw.shape}, expected leading axis of "
            f"length {len(spec.latents)}")
    out = np.empty_like(std_draw)
    for l, latent in enumerate(spec.latents):
        value = params[f"zeta.{latent.name}"]
        for z in latent.regressors:
            if z not in sociodemographics:
                raise ModelSpecError(
                    f"latent {latent.name}: missing socio-demographic '{z}'")
            value += params[f"struct.{latent.name}.{z}"] * sociodemographics[z]
        sigma = params[f"sigma.{latent.name}"]
        if sigma <= 0:
            raise ModelSpecError(f"sigma.{latent.name} must be positive")
        out[l] = value + sigma * std_draw[l]
    return out


def ordered_probit_probs(tau, gamma, loading, a, sigma=1.0):
    """Category probabilities of one indicator given latent value(s) a.

    tau: increasing thresholds, length X-1. Returns shape (X,) for scalar a,
    otherwise a stacked (..., X) array. Probabilities sum to 1 exactly up to
    floating point; edge categories use single-sided CDF evaluations so tails
    stay accurate.
    """
    tau = np.asarray(tau, dtype=float)
    if tau.ndim != 1 or tau.size < 1:
        raise ValueError("tau must be a non-empty 1-d threshold vector")
    if np.any(np.diff(tau) <= 0):
        raise ValueError("thresholds must be strictly increasing")
    a = np.asarray(a, dtype=float)
    z = (tau - gamma - loading * a[..., None]) / sigma    # (..., X-1)
    cdf = ndtr(z)
    probs = np.empty(a.shape + (tau.size + 1,))
    probs[..., 0] = cdf[..., 0]
    probs[..., 1:-1] = np.diff(cdf, axis=-1)
    probs[..., -1] = ndtr(-z[..., -1])
    return probs


def ordered_probit_cell_logprob(tau, gamma, loading, a, category, sigma=1.0):
    """log P(indicator == category) evaluated stably for extreme cells.

    category is 1-based; a may be an array. Interior cells pick the CDF
    difference on the side of the axis where both tails are small, edge cells
    use a single CDF evaluation.
    """
    tau = np.asarray(tau, dtype=float)
    X = tau.size + 1
    if not (1 <= category <= X):
        raise ValueError(f"category {category} outside 1..{X}")
    a = np.asarray(a, dtype=float)
    mid = gamma + loading * a
    if category == 1:
        p = ndtr((tau[0] - mid) / sigma)
    elif category == X:
        p = ndtr((mid - tau[-1]) / sigma)
    else:
        z_lo = (tau[category - 2] - mid) / sigma
        z_hi = (tau[category - 1] - mid) / sigma
        # evaluate on whichever side keeps both CDF values away from 1
        flip = (z_lo + z_hi) > 0
        p = np.where(flip, ndtr(-z_lo) - ndtr(-z_hi), ndtr(z_hi) - ndtr(z_lo))
    return np.log(np.maximum(p, 1e-300))


def indicator_loglik(spec, params, responses, latent_values):
    """Sum of log cell probabilities over a respondent's indicators.

    responses: mapping indicator name -> observed category (1..X).
    latent_values: array in spec latent order.
    """
    latent_index = {name: l for l, name in enumerate(spec.latent_names)}
    total = 0.0
    for ind, lat in spec.indicators:
        cat = responses[ind]
        if not (1 <= cat <= spec.n_categories):
            raise ModelSpecError(f"indicator {ind}: response {cat} outside "
                                 f"1..{spec.n_categories}")
        tau = thresholds(params, ind, spec.n_categories)
        total += float(ordered_probit_cell_logprob(
            tau, params[f"gamma.{ind}"], params[f"load.{ind}"],
            latent_values[latent_index[lat]], cat))
    return total
