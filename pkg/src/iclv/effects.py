"""Marginal effects and elasticities of attributes on choice probabilities.

Continuous attributes use the own-attribute logit forms, with probabilities
simulated over latent draws for models with latent variables: the point
elasticity of the simulated probability is beta * x * E[P(1-P)] / E[P] and
the marginal effect is beta * E[P(1-P)]. Dummy attributes are evaluated by a
full probability pass at 1 and at 0 with common random numbers. A
finite-difference mode (multiplicative +/-0.1 percent perturbation, arc
elasticity) is available as a cross-check.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import kernel
from .data import ChoiceDataset, ChoiceTask, Respondent
from .draws import DrawPlan, standard_normal_draws
from .model import ModelSpecError


@dataclass(frozen=True)
class FittedModel:
    spec: object
    params: object
    plan: DrawPlan = DrawPlan()


@dataclass(frozen=True)
class EffectResult:
    attribute: str
    alternative: str
    marginal_effect: float
    elasticity: float          # None for dummy attributes
    method: str                # "analytic" or "finite_difference"
    averaging: str             # "sample_average" or "at_means"


def _coefficient(spec, params, attribute, alternative):
    beta = 0.0
    found = False
    for term in spec.terms:
        if term.attribute == attribute and alternative in term.alternatives:
            beta += params[term.param]
            found = True
    if not found:
        raise ModelSpecError(
            f"attribute '{attribute}' does not enter the utility of "
            f"'{alternative}'")
    return beta


def _is_dummy(ds, attribute, alternative=None):
    alt_pos = {a.label: a.id for a in ds.alternatives}
    if attribute in ds.sociodemo_names:
        vals = np.array([r.sociodemographics[attribute] for r in ds.respondents])
        return np.all(np.isin(vals, (0.0, 1.0)))
    k = ds.attribute_names.index(attribute)
    j = alt_pos[alternative] if alternative else None
    vals = []
    for t in ds.tasks():
        if j is None:
            vals.append(t.attributes[:, k])
        elif t.availability[j]:
            vals.append(t.attributes[j, k])
    vals = np.concatenate([np.atleast_1d(v) for v in vals])
    return np.all(np.isin(vals, (0.0, 1.0)))


def _draw_probs(model, ds):
    """Per-draw probabilities (T, R, J) plus the compiled arrays."""
    ma = kernel.compile_model(model.spec, ds, model.params)
    L = len(model.spec.latents)
    if L:
        draws = standard_normal_draws(model.plan, len(ds.respondents), L)
    else:
        draws = np.zeros((len(ds.respondents), 0, 1))
    a = kernel.latent_values(ma, model.params.values, draws)
    _, P = kernel.choice_logprobs(ma, model.params.values, a, return_probs=True)
    return ma, P


def _mean_dataset(ds):
    """Single synthetic respondent/task at sample-average attribute values."""
    J = len(ds.alternatives)
    K = len(ds.attribute_names)
    sums = np.zeros((J, K))
    counts = np.zeros(J)
    for t in ds.tasks():
        sums[t.availability] += t.attributes[t.availability]
        counts += t.availability
    attrs = sums / np.maximum(counts[:, None], 1)
    socio = {name: float(np.mean([r.sociodemographics[name]
                                  for r in ds.respondents]))
             for name in ds.sociodemo_names}
    indicators = {name: 3 for name in ds.indicator_names}
    task = ChoiceTask(0, 0, attrs, np.ones(J, dtype=bool), 0)
    resp = Respondent(0, socio, indicators, (task,))
    return ChoiceDataset(ds.alternatives, (resp,), ds.attribute_names,
                         ds.indicator_names, ds.sociodemo_names)


def elasticity(model, ds, attribute, alternative, averaging="sample_average",
               method="analytic"):
    """Own-attribute elasticity of the alternative's choice probability.

    Covers the attribute's direct utility channel; attributes that also feed
    a structural equation are rejected (their probability response runs
    through the latent distribution, not the point form used here).
    """
    if _is_dummy(ds, attribute, alternative):
        raise ModelSpecError(
            f"'{attribute}' is a dummy; use marginal_effect for the "
            "probability change under a flip")
    for latent in model.spec.latents:
        if attribute in latent.regressors:
            raise ModelSpecError(
                f"'{attribute}' enters the structural equation of "
                f"'{latent.name}'; the point elasticity form does not apply")
    beta = _coefficient(model.spec, model.params, attribute, alternative)
    data = _mean_dataset(ds) if averaging == "at_means" else ds
    if method == "analytic":
        value = _analytic(model, data, attribute, alternative, beta,
                          want="elasticity")
    elif method == "finite_difference":
        value = _arc_elasticity(model, data, attribute, alternative)
    else:
        raise ValueError(f"unknown method '{method}'")
    me = _analytic(model, data, attribute, alternative, beta, want="marginal")
    return EffectResult(attribute, alternative, me, value, method, averaging)


def marginal_effect(model, ds, attribute, alternative,
                    averaging="sample_average"):
    """Probability change per unit of the attribute (or per dummy flip)."""
    data = _mean_dataset(ds) if averaging == "at_means" else ds
    if _is_dummy(ds, attribute, alternative):
        value = _dummy_effect(model, data, attribute, alternative)
        return EffectResult(attribute, alternative, value, None, "analytic",
                            averaging)
    beta = _coefficient(model.spec, model.params, attribute, alternative)
    value = _analytic(model, data, attribute, alternative, beta, want="marginal")
    return EffectResult(attribute, alternative, value, None, "analytic",
                        averaging)


def _attribute_values(ds, attribute, j):
    """Per-task attribute value for alternative j, in compiled task order."""
    if attribute in ds.attribute_names:
        k = ds.attribute_names.index(attribute)
        return np.array([t.attributes[j, k] for r in ds.respondents
                         for t in sorted(r.tasks, key=lambda t: t.task_id)])
    if attribute in ds.sociodemo_names:
        return np.array([r.sociodemographics[attribute]
                         for r in ds.respondents for _ in r.tasks])
    raise ModelSpecError(f"attribute '{attribute}' not in the dataset")


def _analytic(model, ds, attribute, alternative, beta, want):
    ma, P = _draw_probs(model, ds)
    j = list(model.spec.alternatives).index(alternative)
    avail = ma.avail[:, j]
    Pj = P[avail, :, j]                       # (T_avail, R)
    mean_p = Pj.mean(axis=1)
    mean_pq = (Pj * (1.0 - Pj)).mean(axis=1)
    x = _attribute_values(ds, attribute, j)[avail]
    if want == "marginal":
        return float(np.mean(beta * mean_pq))
    with np.errstate(invalid="ignore", divide="ignore"):
        per_obs = np.where(mean_p > 0, beta * x * mean_pq / mean_p, 0.0)
    return float(np.mean(per_obs))


def _perturbed(ds, attribute, alternative, factor):
    if attribute in ds.sociodemo_names:
        respondents = tuple(
            replace(r, sociodemographics={
                **r.sociodemographics,
                attribute: r.sociodemographics[attribute] * factor})
            for r in ds.respondents)
        return replace(ds, respondents=respondents)
    j = None
    for alt in ds.alternatives:
        if alt.label == alternative:
            j = alt.id
    k = ds.attribute_names.index(attribute)
    respondents = []
    for r in ds.respondents:
        tasks = []
        for t in r.tasks:
            attrs = t.attributes.copy()
            attrs[j, k] = attrs[j, k] * factor
            tasks.append(replace(t, attributes=attrs))
        respondents.append(replace(r, tasks=tuple(tasks)))
    return replace(ds, respondents=tuple(respondents))


def _arc_elasticity(model, ds, attribute, alternative, rel_step=1e-3):
    j = list(model.spec.alternatives).index(alternative)
    _, P0 = _draw_probs(model, ds)
    ma, P_up = _draw_probs(model, _perturbed(ds, attribute, alternative,
                                             1.0 + rel_step))
    _, P_dn = _draw_probs(model, _perturbed(ds, attribute, alternative,
                                            1.0 - rel_step))
    avail = ma.avail[:, j]
    p0 = P0[avail, :, j].mean(axis=1)
    dp = P_up[avail, :, j].mean(axis=1) - P_dn[avail, :, j].mean(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        per_obs = np.where(p0 > 0, (dp / p0) / (2 * rel_step), 0.0)
    return float(np.mean(per_obs))


def _flip_value(ds, attribute, alternative, value):
    """Dataset with the dummy forced to `value` everywhere it enters."""
    if attribute in ds.sociodemo_names:
        respondents = tuple(
            replace(r, sociodemographics={**r.sociodemographics,
                                          attribute: float(value)})
            for r in ds.respondents)
        return replace(ds, respondents=respondents)
    j = None
    for alt in ds.alternatives:
        if alt.label == alternative:
            j = alt.id
    k = ds.attribute_names.index(attribute)
    respondents = []
    for r in ds.respondents:
        tasks = []
        for t in r.tasks:
            attrs = t.attributes.copy()
            attrs[j, k] = float(value)
            tasks.append(replace(t, attributes=attrs))
        respondents.append(replace(r, tasks=tuple(tasks)))
    return replace(ds, respondents=tuple(respondents))


def _dummy_effect(model, ds, attribute, alternative):
    j = list(model.spec.alternatives).index(alternative)
    ma, P1 = _draw_probs(model, _flip_value(ds, attribute, alternative, 1.0))
    _, P0 = _draw_probs(model, _flip_value(ds, attribute, alternative, 0.0))
    avail = ma.avail[:, j]
    diff = P1[avail, :, j].mean(axis=1) - P0[avail, :, j].mean(axis=1)
    return float(np.mean(diff))


def effects_table(model, ds, averaging="sample_average"):
    """EffectResults for every (attribute, alternative) pair in the model."""
    out = []
    seen = set()
    for term in model.spec.terms:
        for alt in term.alternatives:
            key = (term.attribute, alt)
            if key in seen:
                continue
            seen.add(key)
            if _is_dummy(ds, term.attribute, alt):
                out.append(marginal_effect(model, ds, term.attribute, alt,
                                           averaging))
            else:
                out.append(elasticity(model, ds, term.attribute, alt,
                                      averaging=averaging))
    return out
