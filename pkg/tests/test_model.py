import numpy as np
import pytest

from iclv.draws import DrawPlan
from iclv.model import (ModelFile, ModelSpec, ModelSpecError, OptimizerOptions,
                        build_parameters, parse_model_text, thresholds,
                        write_model_file, parse_model_file)

from helpers import small_spec

MODEL_TEXT = """
# comment line
[alternatives]
labels = car bike bus
base = bus

[utility]
beta.cost = cost @ car bike bus
beta.time.car = time @ car

[latents]
comfort = regressors: age income ; enters: car bike ; lambda: shared

[measurement]
Q1 = comfort
Q2 = comfort

[constraints]
load.Q1 = 1.0

[draws]
count = 64
sequence = halton
seed = 7

[optimizer]
max_iterations = 500
robust_se = true
"""


def test_parse_model_text():
    mf = parse_model_text(MODEL_TEXT)
    assert mf.spec.alternatives == ("car", "bike", "bus")
    assert mf.spec.base == "bus"
    assert mf.spec.terms[0].alternatives == ("car", "bike", "bus")
    assert mf.spec.latents[0].regressors == ("age", "income")
    assert mf.spec.indicators == (("Q1", "comfort"), ("Q2", "comfort"))
    assert mf.plan.draws == 64 and mf.plan.seed == 7
    assert mf.options.max_iterations == 500 and mf.options.robust_se
    params = build_parameters(mf.spec)
    assert params["load.Q1"] == 1.0
    assert not params.free[params.index("load.Q1")]


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ModelSpecError, match=r"<model>:3"):
        parse_model_text("\n[utility]\nbeta.cost cost @ car\n")
    with pytest.raises(ModelSpecError, match="before any"):
        parse_model_text("beta.cost = cost @ car\n")


def test_file_round_trip(tmp_path):
    mf = parse_model_text(MODEL_TEXT)
    write_model_file(mf, tmp_path / "model.spec")
    back = parse_model_file(tmp_path / "model.spec")
    assert back.spec == mf.spec
    assert back.plan == mf.plan
    assert back.options == mf.options


def test_parameter_layout_and_identification_defaults():
    spec = small_spec()
    params = build_parameters(spec)
    # base has no ASC
    assert "asc.bus" not in params
    assert "asc.car" in params and params["asc.car"] == 0.0
    # scales and intercepts fixed for identification
    for name in ("sigma.comfort", "zeta.comfort", "gamma.Q1", "gamma.Q2"):
        assert not params.free[params.index(name)]
    assert params["sigma.comfort"] == 1.0
    assert params.n_free() == len(params) - 4


def test_unknown_parameter_raises():
    params = build_parameters(small_spec())
    with pytest.raises(ModelSpecError, match="unknown parameter"):
        params.index("beta.nope")


def test_fix_and_free_vector_round_trip():
    params = build_parameters(small_spec())
    fixed = params.fix("lambda.*", 0.0)
    assert fixed["lambda.comfort"] == 0.0
    x = fixed.free_values()
    x2 = x + 1.0
    updated = fixed.with_free_values(x2)
    np.testing.assert_allclose(updated.free_values(), x2)
    assert updated["lambda.comfort"] == 0.0


def test_thresholds_monotone_for_any_parameters():
    spec = small_spec()
    rng = np.random.default_rng(0)
    params = build_parameters(spec)
    for _ in range(200):
        p = params.with_values({
            "thr.Q1.1": rng.normal() * 3,
            "thr.Q1.2": rng.normal() * 3,
            "thr.Q1.3": rng.normal() * 3,
            "thr.Q1.4": rng.normal() * 3,
        })
        tau = thresholds(p, "Q1")
        assert np.all(np.diff(tau) > 0)


def test_spec_validation():
    with pytest.raises(ModelSpecError, match="base"):
        ModelSpec(alternatives=("a", "b"), base="c")
    with pytest.raises(ModelSpecError, match="unknown alternative"):
        small_spec_bad()


def small_spec_bad():
    from iclv.model import UtilityTerm
    return ModelSpec(alternatives=("a", "b"), base="a",
                     terms=(UtilityTerm("beta.x", "x", ("zz",)),))
