import numpy as np
import pytest
from scipy.special import ndtr

from iclv.latent import (indicator_loglik, ordered_probit_cell_logprob,
                         ordered_probit_probs, structural_eval)
from iclv.model import build_parameters

from helpers import small_spec


def test_structural_eval_arithmetic():
    spec = small_spec()
    params = build_parameters(spec)
    p = params.with_values({"struct.comfort.age": 0.0, "struct.comfort.income": 0.0})
    a = structural_eval(spec, p, {"age": 1.0, "income": 0.0}, np.array([0.7]))
    assert a[0] == pytest.approx(0.7)
    p = params.with_values({"struct.comfort.age": 0.5, "struct.comfort.income": 0.0})
    p.values[p.index("zeta.comfort")] = 1.0
    a = structural_eval(spec, p, {"age": 2.0, "income": 0.0}, np.array([0.0]))
    assert a[0] == pytest.approx(2.0)


def test_structural_eval_monte_carlo_moments():
    spec = small_spec()
    params = build_parameters(spec).with_values(
        {"struct.comfort.age": 0.4, "struct.comfort.income": -0.3})
    rng = np.random.default_rng(0)
    draws = rng.standard_normal((1, 1_000_000))
    a = structural_eval(spec, params, {"age": 1.0, "income": 1.0}, draws)
    mean = 0.4 * 1.0 - 0.3 * 1.0
    assert abs(a.mean() - mean) < 0.005
    assert abs(a.std() - 1.0) < 0.005


def test_ordered_probit_reference_cells():
    tau = np.array([-1.0, -0.3, 0.3, 1.0])
    probs = ordered_probit_probs(tau, gamma=0.0, loading=1.0, a=0.0)
    np.testing.assert_allclose(
        probs, [0.158655, 0.223434, 0.235822, 0.223434, 0.158655], atol=1e-6)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_ordered_probit_zero_loading_ignores_latent():
    tau = np.array([-0.5, 0.5])
    p1 = ordered_probit_probs(tau, 0.0, 0.0, a=-3.0)
    p2 = ordered_probit_probs(tau, 0.0, 0.0, a=4.0)
    np.testing.assert_allclose(p1, p2, atol=1e-15)


def test_ordered_probit_limit_mass_moves_to_top_category():
    tau = np.array([-1.0, 0.0, 1.0])
    probs = ordered_probit_probs(tau, 0.0, 1.0, a=40.0)
    assert probs[-1] == pytest.approx(1.0, abs=1e-12)


def test_ordered_probit_translation_consistency():
    tau = np.array([-1.0, 0.2, 1.4])
    rng = np.random.default_rng(1)
    for _ in range(50):
        a = rng.normal()
        gamma = rng.normal()
        beta = rng.uniform(0.2, 2.0)
        c = rng.normal()
        p1 = ordered_probit_probs(tau, gamma, beta, a)
        p2 = ordered_probit_probs(tau, gamma + c, beta, a - c / beta)
        np.testing.assert_allclose(p1, p2, atol=1e-12)


def test_ordered_probit_sums_to_one_many_parameterizations():
    rng = np.random.default_rng(2)
    for _ in range(2000):
        tau = np.sort(rng.normal(size=4) * 2)
        if np.any(np.diff(tau) <= 0):
            continue
        probs = ordered_probit_probs(tau, rng.normal(), rng.normal(), rng.normal())
        assert abs(probs.sum() - 1.0) < 1e-12
        assert np.all(probs > 0) and np.all(probs < 1)


def test_ordered_probit_rejects_non_monotone():
    with pytest.raises(ValueError, match="increasing"):
        ordered_probit_probs(np.array([0.5, -0.5]), 0.0, 1.0, 0.0)


def test_cell_logprob_matches_probs_and_is_stable():
    tau = np.array([-1.0, 0.0, 1.0])
    for cat in range(1, 5):
        lp = ordered_probit_cell_logprob(tau, 0.3, 0.8, 0.4, cat)
        p = ordered_probit_probs(tau, 0.3, 0.8, 0.4)[cat - 1]
        assert lp == pytest.approx(np.log(p), abs=1e-12)
    # far tail keeps a finite, accurate value: top category with the latent
    # 21 standard deviations below the last threshold
    lp = ordered_probit_cell_logprob(tau, 0.0, 1.0, -20.0, 4)
    assert np.isfinite(lp)
    assert lp == pytest.approx(np.log(ndtr(-21.0)), rel=1e-12)
    # interior far-tail cell against a direct difference of upper tails
    lp = ordered_probit_cell_logprob(tau, 0.0, 1.0, -18.0, 3)
    assert lp == pytest.approx(np.log(ndtr(-18.0) - ndtr(-19.0)), rel=1e-9)


def test_indicator_loglik_completeness():
    spec = small_spec()
    params = build_parameters(spec).with_values({
        "load.Q1": 0.9, "load.Q2": 0.7, "thr.Q1.1": -1.1, "thr.Q2.1": -0.9})
    a = np.array([0.3])
    total = 0.0
    for cat in range(1, 6):
        total += np.exp(indicator_loglik(spec, params, {"Q1": cat, "Q2": 3}, a))
    # summing over Q1's categories leaves P(Q2 = 3)
    from iclv.model import thresholds
    tau2 = thresholds(params, "Q2")
    expect = ordered_probit_probs(tau2, 0.0, 0.7, 0.3)[2]
    assert total == pytest.approx(expect, abs=1e-12)


def test_likelihood_dominance_at_true_loadings():
    # data simulated from a 3-factor structure scores higher on average at
    # the generating loadings than at loadings perturbed by +/-0.5
    from iclv.model import LatentDef, ModelSpec
    loadings = {"A1": 0.801, "A2": 0.691, "A3": 0.649}
    spec = ModelSpec(
        alternatives=("a", "b"), base="b",
        latents=(LatentDef("acc", regressors=(), alternatives=("a",)),),
        indicators=tuple((i, "acc") for i in loadings))
    truth = build_parameters(spec).with_values(
        {f"load.{i}": v for i, v in loadings.items()}
        | {f"thr.{i}.1": -1.2 for i in loadings})
    up = truth.with_values({f"load.{i}": v + 0.5 for i, v in loadings.items()})
    down = truth.with_values({f"load.{i}": v - 0.5 for i, v in loadings.items()})

    from iclv.latent import ordered_probit_probs as cells
    from iclv.model import thresholds
    rng = np.random.default_rng(77)
    means = {"truth": [], "up": [], "down": []}
    for _ in range(200):
        n = 60
        a = rng.standard_normal(n)
        total = {"truth": 0.0, "up": 0.0, "down": 0.0}
        for item, load in loadings.items():
            tau = thresholds(truth, item)
            probs = cells(tau, 0.0, load, a)
            cum = probs.cumsum(axis=1)
            u = rng.random(n)
            cats = 1 + (u[:, None] > cum[:, :-1]).sum(axis=1)
            for label, pv in (("truth", truth), ("up", up), ("down", down)):
                tau_p = thresholds(pv, item)
                lp = np.log(cells(tau_p, 0.0, pv[f"load.{item}"], a)
                            [np.arange(n), cats - 1])
                total[label] += lp.mean()
        for label in means:
            means[label].append(total[label] / len(loadings))
    assert np.mean(means["truth"]) >= np.mean(means["up"])
    assert np.mean(means["truth"]) >= np.mean(means["down"])


def test_indicator_loglik_halved_probability():
    spec = small_spec()
    params = build_parameters(spec).with_values({"load.Q1": 0.0, "thr.Q1.1": 0.0})
    # single indicator with P(cat 1) = 0.5: threshold at the latent mean
    one_ind = spec.__class__(
        alternatives=spec.alternatives, base=spec.base, terms=spec.terms,
        latents=spec.latents, indicators=(("Q1", "comfort"),))
    lp = indicator_loglik(one_ind, params, {"Q1": 1}, np.array([0.0]))
    assert lp == pytest.approx(np.log(0.5), abs=1e-12)
