"""Shared fixtures: small hand-built specs and synthetic datasets."""

import numpy as np

from iclv.data import Alternative, ChoiceDataset, ChoiceTask, Respondent, validate_dataset
from iclv.model import LatentDef, ModelSpec, UtilityTerm, build_parameters


def small_spec(with_latents=True):
    """Three alternatives, two attributes, optionally one latent with two indicators."""
    latents = ()
    indicators = ()
    if with_latents:
        latents = (LatentDef("comfort", regressors=("age", "income"),
                             alternatives=("car", "bike")),)
        indicators = (("Q1", "comfort"), ("Q2", "comfort"))
    return ModelSpec(
        alternatives=("car", "bike", "bus"),
        base="bus",
        terms=(UtilityTerm("beta.cost", "cost", ("car", "bike", "bus")),
               UtilityTerm("beta.time.car", "time", ("car",)),
               UtilityTerm("beta.age.bike", "age", ("bike",))),
        latents=latents,
        indicators=indicators,
    )


def random_dataset(spec, n_resp=25, n_tasks=3, seed=0, all_available=True):
    """Synthetic dataset with uniformly random choices (not model-generated)."""
    rng = np.random.default_rng(seed)
    J = len(spec.alternatives)
    alternatives = tuple(
        Alternative(j, lab, lab == spec.base) for j, lab in enumerate(spec.alternatives))
    attribute_names = ("cost", "time")
    respondents = []
    for i in range(n_resp):
        socio = {"age": float(rng.integers(0, 2)), "income": float(rng.integers(0, 2))}
        inds = {name: int(rng.integers(1, 6)) for name, _ in spec.indicators}
        tasks = []
        for t in range(n_tasks):
            attrs = np.column_stack([rng.uniform(0.5, 3.0, J), rng.uniform(5, 30, J)])
            if all_available:
                avail = np.ones(J, dtype=bool)
            else:
                avail = rng.random(J) < 0.8
                avail[rng.integers(0, J)] = True
                if avail.sum() < 2:
                    avail[(np.argmax(avail) + 1) % J] = True
            chosen = int(rng.choice(np.flatnonzero(avail)))
            tasks.append(ChoiceTask(i, t, attrs, avail, chosen))
        respondents.append(Respondent(i, socio, inds, tuple(tasks)))
    ds = ChoiceDataset(alternatives, tuple(respondents), attribute_names,
                       tuple(n for n, _ in spec.indicators), ("age", "income"))
    return validate_dataset(ds)


def random_params(spec, seed=0, scale=0.4):
    """Admissible random parameter vector: loadings near 1, spread thresholds."""
    rng = np.random.default_rng(seed)
    params = build_parameters(spec)
    values = params.values.copy()
    for i, name in enumerate(params.names):
        if not params.free[i]:
            continue
        if name.startswith("thr.") and name.endswith(".1"):
            values[i] = -1.2 + 0.2 * rng.standard_normal()
        elif name.startswith("thr."):
            values[i] = np.log(0.8) + 0.2 * rng.standard_normal()
        elif name.startswith("load."):
            values[i] = 0.8 + 0.3 * rng.standard_normal()
        else:
            values[i] = scale * rng.standard_normal()
    out = params.copy()
    out.values = values
    return out
