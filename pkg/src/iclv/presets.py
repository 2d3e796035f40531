"""Bundled reference configuration: a seven-mode bike-share mode-shift model.

This is the package's worked example and the default simulation truth. Riders
who cannot find a shared bike choose among waiting in place, picking a bike up
on the way, picking one up on a detour, bus (the base), taxi, ride-hailing,
and walking. Three latent attitudes (accessibility, tangibles, social benefit
of bike sharing) enter the utilities of the three bike-related options and are
measured by ten Likert statements.

Scenario attributes follow a blocked 32-run near-orthogonal design. The
mapping from scenario levels to per-mode attribute values uses fixed travel
speeds (bike 250 m/min, bus 333 m/min, car 500 m/min, walking 75 m/min), a
small presented-time jitter so in-vehicle time is not collinear with other
distance-driven terms, two bus fare tiers, and ride-hailing fares expressed in
10-CNY units so one coefficient unit spans realistic fare variation.
"""

import numpy as np

from .design import AttributeDef, block_design, generate_design
from .draws import DrawPlan, inv_normal_cdf
from .model import (LatentDef, ModelFile, ModelSpec, OptimizerOptions,
                    UtilityTerm, build_parameters)
from .simulate import TruthConfig

MODES = ("wait_in_place", "pickup_on_way", "pickup_on_detour", "bus", "taxi",
         "ride_hailing", "walk")
BASE = "bus"
DBS_MODES = ("wait_in_place", "pickup_on_way", "pickup_on_detour")
ATTRIBUTES = ("weather", "purpose", "access_time", "in_time", "cost")

# metres per minute
SPEED = {"bike": 250.0, "bus": 333.0, "car": 500.0, "walk": 75.0}

SOCIODEMO_MARGINALS = {
    "gender": ((1.0, 0.0), (0.4682, 0.5318)),          # 1 = male
    "age": ((1.0, 0.0), (0.7786, 0.2214)),             # 1 = 35 or younger
    "education": ((1.0, 0.0), (0.0563, 0.9437)),       # 1 = high school or below
    "income": ((1.0, 0.0), (0.2414, 0.7586)),          # 1 = below 5000 CNY/month
    "use_bike_frequency": (tuple(float(v) for v in range(1, 8)),
                           (0.1959, 0.2695, 0.2269, 0.0681, 0.1561, 0.0145, 0.0690)),
    "use_bike_time": ((1.0, 2.0, 3.0, 4.0, 5.0),
                      (0.0744, 0.2740, 0.4210, 0.1833, 0.0472)),
}

# Likert marginal shares (percent) the measurement truth reproduces
INDICATOR_MARGINALS = {
    "A1": (0.91, 6.90, 23.41, 44.64, 24.13),
    "A2": (1.09, 4.72, 16.51, 52.45, 25.23),
    "A3": (1.27, 8.35, 23.95, 46.10, 20.33),
    "T1": (4.36, 18.51, 28.67, 33.03, 15.43),
    "T2": (2.54, 9.62, 23.23, 43.56, 21.05),
    "T3": (2.90, 17.97, 28.49, 36.12, 14.52),
    "T4": (1.81, 11.62, 21.77, 45.55, 19.24),
    "SB1": (0.30, 1.17, 6.15, 34.38, 57.90),
    "SB2": (0.36, 0.91, 9.80, 44.10, 44.83),
    "SB3": (0.544, 4.17, 15.06, 41.74, 38.48),
}

LOADINGS = {"A1": 0.801, "A2": 0.691, "A3": 0.649,
            "T1": 0.763, "T2": 0.702, "T3": 0.700, "T4": 0.616,
            "SB1": 0.785, "SB2": 0.694, "SB3": 0.580}

INDICATOR_LATENTS = {"A1": "accessibility", "A2": "accessibility",
                     "A3": "accessibility",
                     "T1": "tangibles", "T2": "tangibles", "T3": "tangibles",
                     "T4": "tangibles",
                     "SB1": "social_benefit", "SB2": "social_benefit",
                     "SB3": "social_benefit"}

STRUCTURAL_TRUTH = {
    "accessibility": {"gender": -0.15, "age": 0.25, "education": -0.20,
                      "income": 0.10},
    "tangibles": {"gender": 0.10, "age": 0.20, "education": -0.15,
                  "income": -0.25},
    "social_benefit": {"gender": -0.20, "age": 0.15, "education": -0.10,
                       "income": 0.20},
}

ASC_TRUTH = {"wait_in_place": -0.73, "pickup_on_way": -2.31,
             "pickup_on_detour": -5.98, "taxi": -3.27,
             "ride_hailing": -8.90, "walk": 2.32}

# (parameter, attribute, alternatives, truth value)
COEFFICIENT_TRUTH = (
    ("beta.education.wait_in_place", "education", ("wait_in_place",), 0.85),
    ("beta.income.pickup_on_way", "income", ("pickup_on_way",), 0.71),
    ("beta.gender.pickup_on_way", "gender", ("pickup_on_way",), 0.21),
    ("beta.gender.pickup_on_detour", "gender", ("pickup_on_detour",), -0.59),
    ("beta.bike_frequency.wait_in_place", "use_bike_frequency",
     ("wait_in_place",), 0.17),
    ("beta.bike_frequency.pickup_on_way", "use_bike_frequency",
     ("pickup_on_way",), 0.09),
    ("beta.bike_time.wait_in_place", "use_bike_time", ("wait_in_place",), 0.13),
    ("beta.bike_time.pickup_on_way", "use_bike_time", ("pickup_on_way",), 0.18),
    ("beta.bike_time.pickup_on_detour", "use_bike_time",
     ("pickup_on_detour",), 0.53),
    ("beta.purpose.pickup_on_way", "purpose", ("pickup_on_way",), 0.43),
    ("beta.purpose.pickup_on_detour", "purpose", ("pickup_on_detour",), -0.39),
    ("beta.weather.wait_in_place", "weather", ("wait_in_place",), -2.77),
    ("beta.weather.pickup_on_way", "weather", ("pickup_on_way",), -2.41),
    ("beta.weather.pickup_on_detour", "weather", ("pickup_on_detour",), -1.39),
    ("beta.weather.taxi", "weather", ("taxi",), 0.76),
    ("beta.weather.ride_hailing", "weather", ("ride_hailing",), 0.98),
    ("beta.weather.walk", "weather", ("walk",), -1.40),
    ("beta.access_time.wait_in_place", "access_time", ("wait_in_place",), -0.94),
    ("beta.access_time.pickup_on_way", "access_time", ("pickup_on_way",), -0.68),
    ("beta.access_time.taxi", "access_time", ("taxi",), -0.02),
    ("beta.access_time.bus", "access_time", ("bus",), -0.08),
    ("beta.access_time.ride_hailing", "access_time", ("ride_hailing",), -0.20),
    ("beta.in_time.wait_in_place", "in_time", ("wait_in_place",), 0.14),
    ("beta.in_time.pickup_on_way", "in_time", ("pickup_on_way",), 0.11),
    ("beta.in_time.pickup_on_detour", "in_time", ("pickup_on_detour",), 0.18),
    ("beta.in_time.bus", "in_time", ("bus",), 0.15),
    ("beta.in_time.taxi", "in_time", ("taxi",), 0.46),
    ("beta.in_time.walk", "in_time", ("walk",), -0.16),
    ("beta.cost.wait_in_place", "cost", ("wait_in_place",), -0.82),
    ("beta.cost.pickup_on_way", "cost", ("pickup_on_way",), -2.85),
    ("beta.cost.pickup_on_detour", "cost", ("pickup_on_detour",), -3.43),
    ("beta.cost.bus", "cost", ("bus",), -0.24),
    ("beta.cost.ride_hailing", "cost", ("ride_hailing",), -1.84),
)

LAMBDA_TRUTH = {"accessibility": 0.08, "tangibles": 0.25, "social_benefit": 0.02}

# t-statistics reported for the application the reference configuration
# mirrors; used to pick the coefficients recovery studies must get right
REFERENCE_T_STATS = {
    "asc.wait_in_place": -3.35, "asc.pickup_on_way": -4.61,
    "asc.pickup_on_detour": -8.21, "asc.taxi": -5.94,
    "asc.ride_hailing": -6.16, "asc.walk": 9.70,
    "beta.education.wait_in_place": 2.12, "beta.income.pickup_on_way": 2.20,
    "beta.gender.pickup_on_way": 1.75, "beta.gender.pickup_on_detour": -2.65,
    "beta.bike_frequency.wait_in_place": 4.77,
    "beta.bike_frequency.pickup_on_way": 2.52,
    "beta.bike_time.wait_in_place": 1.98, "beta.bike_time.pickup_on_way": 2.76,
    "beta.bike_time.pickup_on_detour": 4.74,
    "beta.purpose.pickup_on_way": 5.16, "beta.purpose.pickup_on_detour": -1.68,
    "beta.weather.wait_in_place": -14.81, "beta.weather.pickup_on_way": -14.77,
    "beta.weather.pickup_on_detour": -5.48, "beta.weather.taxi": 3.10,
    "beta.weather.ride_hailing": 4.17, "beta.weather.walk": -8.72,
    "beta.access_time.wait_in_place": -7.93,
    "beta.access_time.pickup_on_way": -8.24,
    "beta.access_time.taxi": -1.77, "beta.access_time.bus": -7.21,
    "beta.access_time.ride_hailing": -5.02,
    "beta.in_time.wait_in_place": 2.63, "beta.in_time.pickup_on_way": 2.05,
    "beta.in_time.pickup_on_detour": 2.27, "beta.in_time.bus": 3.19,
    "beta.in_time.taxi": 2.94, "beta.in_time.walk": -6.24,
    "beta.cost.wait_in_place": -1.80, "beta.cost.pickup_on_way": -6.55,
    "beta.cost.pickup_on_detour": -3.93, "beta.cost.bus": -3.55,
    "beta.cost.ride_hailing": -2.81,
    "lambda.accessibility": 1.69, "lambda.tangibles": 3.72,
    "lambda.social_benefit": 2.15,
}


def experiment_attributes():
    """The ten scenario attributes and their levels."""
    return (
        AttributeDef("weather", (0.0, 1.0)),                # 1 = rain
        AttributeDef("distance", (500.0, 1000.0, 1500.0, 2000.0)),
        AttributeDef("purpose", (1.0, 0.0)),                # 1 = commute
        AttributeDef("wait_bike", (1.0, 3.0, 5.0)),
        AttributeDef("walk_to_bike", (2.0, 4.0, 6.0)),
        AttributeDef("walk_detour", (2.0, 4.0, 6.0)),
        AttributeDef("wait_bus", (5.0, 10.0, 15.0)),
        AttributeDef("wait_taxi", (8.0, 15.0)),
        AttributeDef("wait_ride_hailing", (5.0, 10.0)),
        AttributeDef("cost_bike", (0.0, 1.5)),
    )


def reference_scenarios(runs=32, block_size=4, seed=20240901):
    design = generate_design(experiment_attributes(), runs, seed=seed)
    return block_design(design, block_size, seed=seed)


def reference_model(with_latents=True):
    """ModelSpec of the seven-mode model, with or without the latent block."""
    terms = tuple(UtilityTerm(name, attr, alts)
                  for name, attr, alts, _ in COEFFICIENT_TRUTH)
    latents, indicators = (), ()
    if with_latents:
        latents = tuple(
            LatentDef(name, regressors=("gender", "age", "education", "income"),
                      alternatives=DBS_MODES)
            for name in ("accessibility", "tangibles", "social_benefit"))
        indicators = tuple((ind, INDICATOR_LATENTS[ind])
                           for ind in LOADINGS)
    return ModelSpec(alternatives=MODES, base=BASE, terms=terms,
                     latents=latents, indicators=indicators)


def _latent_moments():
    """Mean and variance of each latent under the simulation truth."""
    out = {}
    for latent, coefs in STRUCTURAL_TRUTH.items():
        mean, var = 0.0, 1.0   # unit disturbance scale
        for z, beta in coefs.items():
            values, probs = SOCIODEMO_MARGINALS[z]
            values = np.asarray(values)
            probs = np.asarray(probs) / np.sum(probs)
            ez = float((values * probs).sum())
            vz = float(((values - ez) ** 2 * probs).sum())
            mean += beta * ez
            var += beta ** 2 * vz
        out[latent] = (mean, var)
    return out


def reference_truth(with_latents=True):
    """Ground-truth ParameterVector for the reference model.

    Measurement thresholds are placed so each indicator's simulated marginal
    distribution reproduces its target shares given the loading and the
    latent's moments.
    """
    spec = reference_model(with_latents)
    params = build_parameters(spec)
    values = {f"asc.{alt}": v for alt, v in ASC_TRUTH.items()}
    values.update({name: v for name, _, _, v in COEFFICIENT_TRUTH})
    if with_latents:
        moments = _latent_moments()
        for latent, coefs in STRUCTURAL_TRUTH.items():
            for z, beta in coefs.items():
                values[f"struct.{latent}.{z}"] = beta
        for name, lam in LAMBDA_TRUTH.items():
            values[f"lambda.{name}"] = lam
        for ind, load in LOADINGS.items():
            values[f"load.{ind}"] = load
            mean, var = moments[INDICATOR_LATENTS[ind]]
            shares = np.asarray(INDICATOR_MARGINALS[ind], dtype=float)
            shares = shares / shares.sum()
            cum = np.cumsum(shares)[:-1]
            scale = np.sqrt(load ** 2 * var + 1.0)
            tau = load * mean + scale * inv_normal_cdf(cum)
            values[f"thr.{ind}.1"] = float(tau[0])
            for x in range(2, 5):
                values[f"thr.{ind}.{x}"] = float(np.log(tau[x - 1] - tau[x - 2]))
    return params.with_values(values)


def reference_attribute_builder(rng, n_tasks, scenario_levels):
    """Scenario levels -> per-mode attribute matrix (n_tasks, 7, 5).

    Columns follow ATTRIBUTES. Presented in-vehicle times carry a +/-15%
    jitter and bus fares take one of two tiers so no attribute is collinear
    with another within an alternative.
    """
    if scenario_levels is None:
        raise ValueError("the reference builder needs scenario levels")
    lv = np.asarray(scenario_levels, dtype=float)
    if lv.shape != (n_tasks, 10):
        raise ValueError(f"expected scenario levels ({n_tasks}, 10), got {lv.shape}")
    weather, dist, purpose = lv[:, 0], lv[:, 1], lv[:, 2]
    attrs = np.zeros((n_tasks, len(MODES), len(ATTRIBUTES)))
    col = {name: k for k, name in enumerate(ATTRIBUTES)}
    mode = {name: j for j, name in enumerate(MODES)}

    attrs[:, :, col["weather"]] = weather[:, None]
    attrs[:, :, col["purpose"]] = purpose[:, None]

    access = attrs[:, :, col["access_time"]]
    access[:, mode["wait_in_place"]] = lv[:, 3]
    access[:, mode["pickup_on_way"]] = lv[:, 4]
    access[:, mode["pickup_on_detour"]] = lv[:, 5]
    access[:, mode["bus"]] = lv[:, 6]
    access[:, mode["taxi"]] = lv[:, 7]
    access[:, mode["ride_hailing"]] = lv[:, 8]

    jitter = rng.uniform(0.85, 1.15, size=(n_tasks, len(MODES)))
    in_time = attrs[:, :, col["in_time"]]
    for m in DBS_MODES:
        in_time[:, mode[m]] = dist / SPEED["bike"] * jitter[:, mode[m]]
    in_time[:, mode["bus"]] = dist / SPEED["bus"] * jitter[:, mode["bus"]]
    in_time[:, mode["taxi"]] = dist / SPEED["car"] * jitter[:, mode["taxi"]]
    in_time[:, mode["walk"]] = dist / SPEED["walk"] * jitter[:, mode["walk"]]

    cost = attrs[:, :, col["cost"]]
    for m in DBS_MODES:
        cost[:, mode[m]] = lv[:, 9]
    cost[:, mode["bus"]] = rng.choice([1.0, 2.0], size=n_tasks)
    # ride-hailing fares in 10-CNY units
    cost[:, mode["ride_hailing"]] = rng.choice([0.8, 1.0, 1.2, 1.5], size=n_tasks)
    return attrs


def reference_truth_config(n_respondents=551, tasks_per_respondent=4, seed=0,
                           with_latents=True):
    """TruthConfig for the bundled model at survey scale."""
    return TruthConfig(
        spec=reference_model(with_latents),
        truth=reference_truth(with_latents),
        n_respondents=n_respondents,
        tasks_per_respondent=tasks_per_respondent,
        seed=seed,
        sociodemo=dict(SOCIODEMO_MARGINALS),
        scenarios=reference_scenarios(),
        attribute_builder=reference_attribute_builder,
        attribute_names=ATTRIBUTES)


def reference_model_file(with_latents=True, draws=500, seed=0):
    """ModelFile (spec + draw plan + optimizer defaults) for the CLI."""
    return ModelFile(spec=reference_model(with_latents),
                     plan=DrawPlan(draws=draws, seed=seed),
                     options=OptimizerOptions())
