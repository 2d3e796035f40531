import numpy as np
import pytest

from iclv.draws import DrawPlan
from iclv.effects import (EffectResult, FittedModel, effects_table, elasticity,
                          marginal_effect, _draw_probs)
from iclv.model import ModelSpecError, build_parameters

from helpers import random_dataset, random_params, small_spec


def fitted(seed=0, with_latents=True, draws=32):
    spec = small_spec(with_latents)
    params = random_params(spec, seed=seed)
    return FittedModel(spec, params, DrawPlan(draws=draws, seed=seed))


def test_zero_coefficient_gives_zero_effects():
    spec = small_spec(with_latents=False)
    ds = random_dataset(spec, n_resp=20, n_tasks=2, seed=0)
    params = random_params(spec, seed=0).with_values({"beta.cost": 0.0})
    model = FittedModel(spec, params)
    res = elasticity(model, ds, "cost", "car")
    assert res.elasticity == 0.0
    assert marginal_effect(model, ds, "cost", "car").marginal_effect == 0.0


def test_single_observation_closed_form():
    # one observation with P = 0.5, x = 2, beta = -0.68 gives -0.68
    p, x, beta = 0.5, 2.0, -0.68
    assert beta * x * (1 - p) == pytest.approx(-0.68)
    # and the package's own form reduces to it with one draw
    from iclv.data import (Alternative, ChoiceDataset, ChoiceTask, Respondent,
                           validate_dataset)
    from iclv.model import ModelSpec, UtilityTerm
    spec = ModelSpec(alternatives=("a", "b"), base="b",
                     terms=(UtilityTerm("beta.x", "x", ("a",)),))
    params = build_parameters(spec).with_values({"beta.x": beta})
    # choose asc.a so that P(a) = 0.5 given beta * x
    params = params.with_values({"asc.a": -beta * x})
    ds = validate_dataset(ChoiceDataset(
        (Alternative(0, "a", False), Alternative(1, "b", True)),
        (Respondent(0, {}, {}, (ChoiceTask(0, 0, np.array([[x], [0.0]]),
                                           np.ones(2, dtype=bool), 0),)),),
        ("x",), (), ()))
    res = elasticity(FittedModel(spec, params), ds, "x", "a")
    assert res.elasticity == pytest.approx(-0.68, abs=1e-12)


@pytest.mark.parametrize("seed", range(12))
def test_analytic_vs_finite_difference_elasticity(seed):
    model = fitted(seed=seed)
    ds = random_dataset(model.spec, n_resp=15, n_tasks=2, seed=seed)
    analytic = elasticity(model, ds, "cost", "car").elasticity
    fd = elasticity(model, ds, "cost", "car",
                    method="finite_difference").elasticity
    if analytic == fd == 0.0:
        return
    assert abs(analytic - fd) / max(abs(fd), 1e-12) < 0.005


def test_dummy_marginal_effect_matches_two_pass_bruteforce():
    model = fitted(seed=3, with_latents=True)
    ds = random_dataset(model.spec, n_resp=18, n_tasks=2, seed=3)
    got = marginal_effect(model, ds, "age", "bike").marginal_effect

    # independent two-pass oracle over full probability evaluations
    from dataclasses import replace
    def mean_prob(value):
        respondents = tuple(
            replace(r, sociodemographics={**r.sociodemographics, "age": value})
            for r in ds.respondents)
        flipped = replace(ds, respondents=respondents)
        ma, P = _draw_probs(model, flipped)
        j = list(model.spec.alternatives).index("bike")
        return P[ma.avail[:, j], :, j].mean(axis=1)

    expect = float(np.mean(mean_prob(1.0) - mean_prob(0.0)))
    assert got == pytest.approx(expect, abs=1e-10)


def test_probability_changes_sum_to_zero_under_perturbation():
    model = fitted(seed=5, with_latents=False)
    ds = random_dataset(model.spec, n_resp=20, n_tasks=2, seed=5)
    from iclv.effects import _perturbed
    _, P0 = _draw_probs(model, ds)
    ma, P1 = _draw_probs(model, _perturbed(ds, "cost", "car", 1.01))
    delta = (P1 - P0).mean(axis=1)        # (T, J)
    np.testing.assert_allclose(delta.sum(axis=1), 0.0, atol=1e-10)


def test_dummy_flip_with_zero_coefficient_is_noop():
    spec = small_spec(with_latents=False)
    params = random_params(spec, seed=8).with_values({"beta.age.bike": 0.0})
    model = FittedModel(spec, params)
    ds = random_dataset(spec, n_resp=15, n_tasks=2, seed=8)
    assert marginal_effect(model, ds, "age", "bike").marginal_effect == 0.0


def test_elasticity_sign_matches_coefficient():
    model = fitted(seed=7, with_latents=False)
    ds = random_dataset(model.spec, n_resp=25, n_tasks=2, seed=7)
    res = elasticity(model, ds, "cost", "car")
    beta = model.params["beta.cost"]
    # positive attribute values: elasticity carries the coefficient's sign
    assert np.sign(res.elasticity) == np.sign(beta)


def test_dummy_attribute_rejected_by_elasticity():
    model = fitted(seed=1)
    ds = random_dataset(model.spec, n_resp=10, n_tasks=2, seed=1)
    with pytest.raises(ModelSpecError, match="dummy"):
        elasticity(model, ds, "age", "bike")


def test_absent_attribute_rejected():
    model = fitted(seed=1, with_latents=False)
    ds = random_dataset(model.spec, n_resp=10, n_tasks=2, seed=1)
    with pytest.raises(ModelSpecError, match="does not enter"):
        elasticity(model, ds, "time", "bike")


def test_at_means_labelled_and_computable():
    model = fitted(seed=9, with_latents=True)
    ds = random_dataset(model.spec, n_resp=15, n_tasks=2, seed=9)
    res = elasticity(model, ds, "cost", "car", averaging="at_means")
    assert res.averaging == "at_means"
    assert np.isfinite(res.elasticity)
    sample = elasticity(model, ds, "cost", "car")
    assert sample.averaging == "sample_average"


def test_effects_table_covers_model_terms():
    model = fitted(seed=2, with_latents=False)
    ds = random_dataset(model.spec, n_resp=12, n_tasks=2, seed=2)
    rows = effects_table(model, ds)
    keys = {(r.attribute, r.alternative) for r in rows}
    assert ("cost", "car") in keys and ("cost", "bus") in keys
    assert ("age", "bike") in keys
    for r in rows:
        if r.attribute == "age":
            assert r.elasticity is None
