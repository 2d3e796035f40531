import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from iclv.choice import (choice_loglik, choice_loglik_gradient,
                         logit_probabilities, systematic_utility)
from iclv.data import ChoiceTask
from iclv.model import build_parameters

from helpers import random_dataset, random_params, small_spec


def one_task(attrs=None):
    attrs = attrs if attrs is not None else np.array(
        [[1.0, 10.0], [2.0, 20.0], [0.5, 30.0]])
    return ChoiceTask(0, 0, attrs, np.ones(3, dtype=bool), 0)


def test_zero_parameters_give_zero_utility():
    spec = small_spec(with_latents=False)
    params = build_parameters(spec)
    V = systematic_utility(spec, params, one_task(), ("cost", "time"),
                           sociodemographics={"age": 1.0})
    np.testing.assert_array_equal(V, np.zeros(3))


def test_asc_only_utility():
    spec = small_spec(with_latents=False)
    params = build_parameters(spec).with_values({"asc.car": 2.32})
    V = systematic_utility(spec, params, one_task(), ("cost", "time"),
                           sociodemographics={"age": 0.0})
    np.testing.assert_allclose(V, [2.32, 0.0, 0.0])


def test_shared_latent_coefficient_adds_to_named_alternatives():
    spec = small_spec()
    params = build_parameters(spec).with_values({"lambda.comfort": 0.25})
    V = systematic_utility(spec, params, one_task(), ("cost", "time"),
                           latent_values=np.array([2.0]),
                           sociodemographics={"age": 0.0})
    np.testing.assert_allclose(V, [0.5, 0.5, 0.0])


def test_equal_utilities_give_uniform_probabilities():
    P = logit_probabilities(np.zeros(7), np.ones(7, dtype=bool))
    np.testing.assert_allclose(P, np.full(7, 1 / 7), atol=1e-15)


def test_two_alternative_closed_form():
    P = logit_probabilities(np.array([np.log(2.0), 0.0]), np.array([True, True]))
    np.testing.assert_allclose(P, [2 / 3, 1 / 3], atol=1e-15)


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=60, deadline=None)
def test_probability_simplex_and_shift_invariance(seed):
    rng = np.random.default_rng(seed)
    J = int(rng.integers(2, 9))
    V = rng.normal(scale=3, size=J)
    avail = rng.random(J) < 0.7
    if avail.sum() < 1:
        avail[0] = True
    P = logit_probabilities(V, avail)
    assert abs(P.sum() - 1.0) < 1e-12
    assert np.all(P >= 0) and np.all(P <= 1)
    assert np.all(P[~avail] == 0.0)
    np.testing.assert_allclose(P, logit_probabilities(V + 5.0, avail), atol=1e-12)


def test_overflow_safety():
    P = logit_probabilities(np.array([800.0, 799.0, -800.0]),
                            np.ones(3, dtype=bool))
    assert np.all(np.isfinite(P))
    assert abs(P.sum() - 1.0) < 1e-12


def test_iia_ratio_invariance():
    rng = np.random.default_rng(3)
    for _ in range(100):
        V = rng.normal(size=5)
        avail = np.ones(5, dtype=bool)
        P_full = logit_probabilities(V, avail)
        reduced = avail.copy()
        reduced[4] = False
        P_red = logit_probabilities(V, reduced)
        assert abs(P_full[0] / P_full[1] - P_red[0] / P_red[1]) < 1e-12


def test_no_available_alternative_raises():
    with pytest.raises(ValueError, match="no available"):
        logit_probabilities(np.zeros(3), np.zeros(3, dtype=bool))


def test_null_loglik_closed_form():
    spec = small_spec(with_latents=False)
    ds = random_dataset(spec, n_resp=20, n_tasks=4, seed=0)
    params = build_parameters(spec)
    ll = choice_loglik(spec, params, ds)
    assert ll == pytest.approx(-ds.n_tasks * np.log(3), abs=1e-9)


def test_single_task_half_probability():
    spec = small_spec(with_latents=False)
    ds = random_dataset(spec, n_resp=1, n_tasks=1, seed=1)
    # force a two-alternative task with equal utilities
    task = ds.respondents[0].tasks[0]
    avail = np.array([True, True, False])
    from iclv.data import ChoiceDataset, Respondent, validate_dataset
    t = ChoiceTask(task.respondent_id, task.task_id, task.attributes, avail, 0)
    r = ds.respondents[0]
    ds2 = validate_dataset(ChoiceDataset(
        ds.alternatives, (Respondent(r.id, r.sociodemographics, r.indicators, (t,)),),
        ds.attribute_names, ds.indicator_names, ds.sociodemo_names))
    params = build_parameters(spec)
    assert choice_loglik(spec, params, ds2) == pytest.approx(np.log(0.5), abs=1e-12)


def fd_choice_gradient(spec, params, ds, latents, h=1e-5):
    x0 = params.free_values()
    g = np.zeros_like(x0)
    for i in range(x0.size):
        up, dn = x0.copy(), x0.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (choice_loglik(spec, params.with_free_values(up), ds, latents)
                - choice_loglik(spec, params.with_free_values(dn), ds, latents)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_central_differences(seed):
    spec = small_spec()
    ds = random_dataset(spec, n_resp=8, n_tasks=2, seed=seed, all_available=False)
    params = random_params(spec, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    latents = rng.normal(size=(len(ds.respondents), 1))
    analytic = choice_loglik_gradient(spec, params, ds, latents)
    fd = fd_choice_gradient(spec, params, ds, latents)
    rel = np.abs(analytic - fd) / np.maximum(np.abs(fd), 1.0)
    assert rel.max() < 1e-6


def test_gradient_norm_shrinks_at_true_parameters():
    # law of large numbers: the score at the data-generating parameters
    # scales like sqrt(N), so the per-task norm goes to zero
    from iclv.simulate import TruthConfig, simulate_dataset
    from helpers import small_spec
    import iclv.presets  # noqa: F401  (ensures module import works)

    spec = small_spec(with_latents=False)
    truth = build_parameters(spec).with_values({
        "asc.car": 0.4, "asc.bike": -0.3, "beta.cost": -0.5,
        "beta.time.car": 0.05, "beta.age.bike": 0.3})
    cfg = TruthConfig(spec=spec, truth=truth, n_respondents=12_500,
                      tasks_per_respondent=4, seed=99)
    ds = simulate_dataset(cfg)
    g = choice_loglik_gradient(spec, truth, ds)
    assert np.linalg.norm(g) / ds.n_tasks < 0.01


def test_asc_gradient_zero_for_balanced_choices():
    # at zero parameters with every alternative chosen equally often and
    # symmetric attributes, the ASC scores cancel exactly
    from iclv.data import Alternative, ChoiceDataset, Respondent, validate_dataset
    spec = small_spec(with_latents=False)
    alts = tuple(Alternative(j, lab, lab == "bus")
                 for j, lab in enumerate(("car", "bike", "bus")))
    attrs = np.ones((3, 2))
    tasks = tuple(ChoiceTask(0, t, attrs, np.ones(3, dtype=bool), t % 3)
                  for t in range(6))
    ds = validate_dataset(ChoiceDataset(
        alts, (Respondent(0, {"age": 0.0, "income": 0.0}, {}, tasks),),
        ("cost", "time"), (), ("age", "income")))
    params = build_parameters(spec)
    grad = choice_loglik_gradient(spec, params, ds)
    names = params.free_names()
    for name in ("asc.car", "asc.bike"):
        assert abs(grad[names.index(name)]) < 1e-12


def test_concavity_along_random_segments():
    spec = small_spec()
    ds = random_dataset(spec, n_resp=10, n_tasks=2, seed=4)
    rng = np.random.default_rng(5)
    latents = rng.normal(size=(len(ds.respondents), 1))
    params = build_parameters(spec)
    n = params.n_free()
    for _ in range(50):
        x1 = rng.normal(scale=0.8, size=n)
        x2 = rng.normal(scale=0.8, size=n)
        f1 = choice_loglik(spec, params.with_free_values(x1), ds, latents)
        f2 = choice_loglik(spec, params.with_free_values(x2), ds, latents)
        fm = choice_loglik(spec, params.with_free_values(0.5 * (x1 + x2)), ds, latents)
        assert fm >= 0.5 * (f1 + f2) - 1e-9
