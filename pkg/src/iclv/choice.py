"""Multinomial logit choice kernel: utilities, probabilities, likelihood, score.

All functions are pure; probabilities are computed with max-subtraction so
large utilities cannot overflow, and unavailable alternatives carry
probability exactly 0.
"""

import numpy as np

from . import kernel
from .model import ModelSpecError


def systematic_utility(spec, params, task, attribute_names, latent_values=None,
                       sociodemographics=None):
    """Systematic utility vector V (length J) for one choice task.

    V_j = asc_j + sum_k beta_k x_jk + sum_l lambda_l a_l for the alternatives
    the terms name; the base alternative's constant is fixed at 0.
    """
    J = len(spec.alternatives)
    attr_pos = {name: k for k, name in enumerate(attribute_names)}
    alt_pos = {alt: j for j, alt in enumerate(spec.alternatives)}
    V = np.zeros(J)
    for alt in spec.alternatives:
        if alt != spec.base:
            V[alt_pos[alt]] += params[f"asc.{alt}"]
    for term in spec.terms:
        if term.attribute in attr_pos:
            vals = task.attributes[:, attr_pos[term.attribute]]
        elif sociodemographics is not None and term.attribute in sociodemographics:
            vals = np.full(J, sociodemographics[term.attribute])
        else:
            raise ModelSpecError(
                f"term {term.param}: attribute '{term.attribute}' not available")
        beta = params[term.param]
        for alt in term.alternatives:
            V[alt_pos[alt]] += beta * vals[alt_pos[alt]]
    if spec.latents:
        if latent_values is None:
            raise ModelSpecError("latent values required for a spec with latents")
        latent_values = np.asarray(latent_values, dtype=float)
        for pname, lname, alts in spec.lambda_params():
            l = spec.latent_names.index(lname)
            for alt in alts:
                V[alt_pos[alt]] += params[pname] * latent_values[l]
    return V


def logit_probabilities(V, availability):
    """Choice probabilities over available alternatives (softmax of V)."""
    availability = np.asarray(availability, dtype=bool)
    if not availability.any():
        raise ValueError("no available alternative")
    V = np.where(availability, np.asarray(V, dtype=float), -np.inf)
    vmax = V.max()
    expV = np.exp(V - vmax)
    return expV / expV.sum()


def _latent_draws_from_values(spec, ds, params, latents_per_respondent):
    """Back out the standard-normal draws that reproduce given latent values."""
    L = len(spec.latents)
    n = len(ds.respondents)
    if L == 0:
        return np.zeros((n, 0, 1))
    if latents_per_respondent is None:
        latents_per_respondent = np.zeros((n, L))
    a = np.asarray(latents_per_respondent, dtype=float).reshape(n, L)
    draws = np.empty((n, L, 1))
    for l, latent in enumerate(spec.latents):
        mean = params[f"zeta.{latent.name}"] + np.array(
            [sum(params[f"struct.{latent.name}.{z}"] * r.sociodemographics[z]
                 for z in latent.regressors) for r in ds.respondents])
        draws[:, l, 0] = (a[:, l] - mean) / params[f"sigma.{latent.name}"]
    return draws


def choice_loglik(spec, params, ds, latents_per_respondent=None):
    """Sum over tasks of the log probability of the chosen alternative.

    latents_per_respondent: (n_resp, L) latent values held fixed, or None
    for a model without latent terms (entries are taken as 0 then).
    """
    ma = kernel.compile_model(spec, ds, params)
    draws = _latent_draws_from_values(spec, ds, params, latents_per_respondent)
    a = kernel.latent_values(ma, params.values, draws)
    logp, _ = kernel.choice_logprobs(ma, params.values, a)
    return float(logp[:, 0].sum())


def choice_loglik_gradient(spec, params, ds, latents_per_respondent=None):
    """Analytic gradient of choice_loglik over the free parameters.

    For a coefficient on attribute x the score is the classic MNL form
    sum over tasks of (x_chosen - sum_j P_j x_j).
    """
    ma = kernel.compile_model(spec, ds, params)
    draws = _latent_draws_from_values(spec, ds, params, latents_per_respondent)
    a = kernel.latent_values(ma, params.values, draws)
    logp, P = kernel.choice_logprobs(ma, params.values, a, return_probs=True)

    resid = -P[:, 0, :]
    resid[np.arange(ma.n_tasks), ma.chosen] += 1.0
    grad = np.zeros(ma.n_params)
    grad[ma.util_idx] = np.einsum("tj,tjp->p", resid, ma.X, optimize=True)
    for idx, l, member in ma.lam:
        per_task = resid @ member
        grad[idx] = float((kernel.segment_sum(per_task[:, None], ma.resp_ptr)[:, 0]
                           * a[:, l, 0]).sum())
    # latents are held fixed here, so structural parameters get no pathway
    return grad[params.free]
