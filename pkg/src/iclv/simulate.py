"""Synthetic dataset generation from known parameters, and recovery studies.

The simulator is the oracle that stands in for unavailable survey data: it
draws socio-demographics from stated marginals, latent disturbances from the
structural model, indicator categories from the ordered-probit cells, and
choices by Gumbel-max utility, all driven by a single seed.
"""

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed

from . import kernel
from .data import (Alternative, ChoiceDataset, ChoiceTask, Respondent,
                   validate_dataset)
from .model import ModelSpecError, thresholds


@dataclass(frozen=True)
class TruthConfig:
    """Ground truth for a simulation: spec, parameters, and sampling scheme.

    sociodemo maps a variable to (values, probabilities); variables the spec
    references but the mapping omits default to a fair 0/1 coin. Task
    attributes come from attribute_builder(rng, n_tasks, scenario_levels) when
    given, else each attribute is drawn iid uniform from `attributes` ranges.
    scenarios (a ScenarioSet) assigns blocked design rows to respondents.
    """

    spec: object
    truth: object
    n_respondents: int
    tasks_per_respondent: int
    seed: int = 0
    sociodemo: dict = field(default_factory=dict)
    attributes: dict = field(default_factory=dict)
    attribute_builder: object = None
    scenarios: object = None
    attribute_names: tuple = ()

    def resolved_attribute_names(self):
        if self.attribute_names:
            return tuple(self.attribute_names)
        return self.spec.attribute_names()


def _check_admissible(cfg):
    params = cfg.truth
    for latent in cfg.spec.latents:
        if params[f"sigma.{latent.name}"] <= 0:
            raise ModelSpecError(f"sigma.{latent.name} must be positive")
    for ind, _ in cfg.spec.indicators:
        thresholds(params, ind, cfg.spec.n_categories)  # raises if degenerate


def _sample_sociodemo(cfg, rng):
    names = set()
    for latent in cfg.spec.latents:
        names.update(latent.regressors)
    attr_names = set(cfg.resolved_attribute_names())
    for term in cfg.spec.terms:
        if term.attribute not in attr_names:
            names.add(term.attribute)
    names = sorted(names)
    out = {}
    for name in names:
        if name in cfg.sociodemo:
            values, probs = cfg.sociodemo[name]
            probs = np.asarray(probs, dtype=float)
            out[name] = rng.choice(np.asarray(values, dtype=float),
                                   size=cfg.n_respondents, p=probs / probs.sum())
        else:
            out[name] = rng.integers(0, 2, size=cfg.n_respondents).astype(float)
    return tuple(names), out


def _task_attributes(cfg, rng, n_tasks, scenario_levels):
    names = cfg.resolved_attribute_names()
    J = len(cfg.spec.alternatives)
    if cfg.attribute_builder is not None:
        attrs = cfg.attribute_builder(rng, n_tasks, scenario_levels)
        attrs = np.asarray(attrs, dtype=float)
        if attrs.shape != (n_tasks, J, len(names)):
            raise ModelSpecError(
                f"attribute_builder returned shape {attrs.shape}, expected "
                f"({n_tasks}, {J}, {len(names)})")
        return attrs
    attrs = np.empty((n_tasks, J, len(names)))
    for k, name in enumerate(names):
        lo, hi = cfg.attributes.get(name, (0.0, 1.0))
        attrs[:, :, k] = rng.uniform(lo, hi, size=(n_tasks, J))
    return attrs


def _assign_scenarios(cfg, rng):
    """Per-task design rows: respondents cycle through shuffled blocks."""
    if cfg.scenarios is None:
        return None
    blocks = cfg.scenarios.blocks
    if blocks is None:
        blocks = [list(range(cfg.scenarios.runs.shape[0]))]
    order = rng.permutation(len(blocks))
    rows = np.empty((cfg.n_respondents, cfg.tasks_per_respondent), dtype=np.int64)
    for i in range(cfg.n_respondents):
        block = blocks[order[i % len(order)]]
        if len(block) < cfg.tasks_per_respondent:
            raise ModelSpecError(
                f"block size {len(block)} < tasks per respondent "
                f"{cfg.tasks_per_respondent}")
        rows[i] = rng.choice(block, size=cfg.tasks_per_respondent, replace=False)
    return rows


def simulate_dataset(cfg):
    """Generate a ChoiceDataset from the configured ground truth."""
    _check_admissible(cfg)
    rng = np.random.default_rng(cfg.seed)
    spec, params = cfg.spec, cfg.truth
    J = len(spec.alternatives)
    N, T = cfg.n_respondents, cfg.tasks_per_respondent
    attr_names = cfg.resolved_attribute_names()

    socio_names, socio = _sample_sociodemo(cfg, rng)
    scenario_rows = _assign_scenarios(cfg, rng)
    if scenario_rows is not None:
        levels = cfg.scenarios.level_values()[scenario_rows.ravel()]
    else:
        levels = None
    attrs = _task_attributes(cfg, rng, N * T, levels)

    L = len(spec.latents)
    phi = rng.standard_normal((N, L)) if L else np.zeros((N, 0))

    # indicators from ordered-probit cell probabilities
    latent_mean = np.zeros((N, L))
    for l, latent in enumerate(spec.latents):
        latent_mean[:, l] = params[f"zeta.{latent.name}"] + sum(
            params[f"struct.{latent.name}.{z}"] * socio[z]
            for z in latent.regressors)
        latent_mean[:, l] += params[f"sigma.{latent.name}"] * phi[:, l]
    a_values = latent_mean

    indicators = {}
    for ind, lat in spec.indicators:
        l = spec.latent_names.index(lat)
        tau = thresholds(params, ind, spec.n_categories)
        z = tau[None, :] - (params[f"gamma.{ind}"]
                            + params[f"load.{ind}"] * a_values[:, l])[:, None]
        from scipy.special import ndtr
        cum = ndtr(z)
        u = rng.random(N)
        indicators[ind] = 1 + (u[:, None] > cum).sum(axis=1)

    # provisional dataset to reuse the vectorized utility kernel
    alternatives = tuple(Alternative(j, lab, lab == spec.base)
                         for j, lab in enumerate(spec.alternatives))
    avail = np.ones(J, dtype=bool)
    respondents = []
    for i in range(N):
        tasks = tuple(
            ChoiceTask(i, t, attrs[i * T + t], avail, 0) for t in range(T))
        respondents.append(Respondent(
            i, {z: float(socio[z][i]) for z in socio_names},
            {ind: int(indicators[ind][i]) for ind, _ in spec.indicators},
            tasks))
    provisional = ChoiceDataset(alternatives, tuple(respondents), attr_names,
                                spec.indicator_names(), tuple(socio_names))

    ma = kernel.compile_model(spec, provisional, params)
    a = kernel.latent_values(ma, params.values,
                             phi.reshape(N, L, 1) if L else np.zeros((N, 0, 1)))
    V = kernel.utilities(ma, params.values, a)[:, 0, :]   # (T, J)

    gumbel = -np.log(-np.log(rng.random((N * T, J))))
    chosen = np.argmax(V + gumbel, axis=1)

    final = []
    for i, resp in enumerate(respondents):
        tasks = tuple(
            ChoiceTask(i, t.task_id, t.attributes, t.availability,
                       int(chosen[i * T + t.task_id]))
            for t in resp.tasks)
        final.append(Respondent(resp.id, resp.sociodemographics,
                                resp.indicators, tasks))
    return validate_dataset(ChoiceDataset(
        alternatives, tuple(final), attr_names, spec.indicator_names(),
        tuple(socio_names)))


@dataclass
class RecoveryReport:
    """Per-parameter recovery diagnostics over replications."""

    parameter_names: tuple
    truth: np.ndarray
    estimates: np.ndarray       # (n_ok, P)
    std_errors: np.ndarray      # (n_ok, P)
    converged: np.ndarray       # (n_ok,)
    n_replications: int
    n_failures: int
    failure_messages: tuple

    @property
    def bias(self):
        return self.estimates.mean(axis=0) - self.truth

    @property
    def rmse(self):
        return np.sqrt(((self.estimates - self.truth) ** 2).mean(axis=0))

    def coverage(self):
        """Share of replications with truth inside estimate +/- 2 SE, per parameter."""
        lo = self.estimates - 2 * self.std_errors
        hi = self.estimates + 2 * self.std_errors
        return ((self.truth >= lo) & (self.truth <= hi)).mean(axis=0)

    def sign_agreement(self):
        """Share of replications whose estimate matches the truth's sign."""
        return (np.sign(self.estimates) == np.sign(self.truth)).mean(axis=0)


def _one_replication(cfg, rep, plan, options):
    from .estimation import estimate
    cfg_rep = replace(cfg, seed=cfg.seed + rep)
    ds = simulate_dataset(cfg_rep)
    return estimate(cfg.spec, ds, plan, options)


def _study_fingerprint(cfg, plan, options):
    import hashlib
    h = hashlib.sha256()
    h.update(np.asarray(cfg.truth.values).tobytes())
    h.update(repr((cfg.truth.names, cfg.n_respondents, cfg.tasks_per_respondent,
                   cfg.seed, plan, options)).encode())
    return h.hexdigest()[:16]


def _run_or_load(cfg, rep, plan, options, cache_dir, fingerprint):
    """One replication, reusing an on-disk result when the study matches.

    Caching makes multi-hour studies restartable: a rerun with identical
    configuration picks up completed replications instead of recomputing
    them (the per-replication seeds make results identical either way).
    """
    from .estimation import load_result_kv
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"rep_{rep:03d}_{fingerprint}.kv"
        if path.exists():
            kv = load_result_kv(path)
            values = {k[len("param."):]: float(v) for k, v in kv.items()
                      if k.startswith("param.")}
            ses = {k[len("se."):]: float(v) for k, v in kv.items()
                   if k.startswith("se.")}
            return rep, (values, ses, kv.get("converged") == "true"), None
    try:
        res = _one_replication(cfg, rep, plan, options)
    except Exception as exc:  # noqa: BLE001  (failures are data here)
        return rep, None, f"replication {rep}: {exc}"
    if path is not None:
        tmp = path.with_suffix(".tmp")
        tmp.write_text(res.to_kv(), encoding="utf-8")
        tmp.replace(path)
    return rep, (res.params.to_dict(), res.std_errors_by_name, res.converged), None


def recovery_study(cfg, replications, plan, options=None, n_jobs=1,
                   cache_dir=None):
    """Simulate-and-estimate loop; estimation failures are counted, not fatal.

    cache_dir, when given, stores per-replication results so an interrupted
    study resumes where it stopped.
    """
    from .model import OptimizerOptions

    options = options or OptimizerOptions()
    if replications < 1:
        raise ValueError("replications must be >= 1")
    fingerprint = _study_fingerprint(cfg, plan, options)
    if cache_dir is not None:
        Path(cache_dir).mkdir(parents=True, exist_ok=True)

    results = Parallel(n_jobs=n_jobs)(
        delayed(_run_or_load)(cfg, rep, plan, options, cache_dir, fingerprint)
        for rep in range(replications))
    results.sort(key=lambda item: item[0])

    free = cfg.truth.free
    names = tuple(np.array(cfg.truth.names)[free])
    truth_vals = cfg.truth.values[free]
    estimates, ses, conv, failures = [], [], [], []
    for _, payload, err in results:
        if err is not None:
            failures.append(err)
            continue
        values, se_map, converged = payload
        estimates.append([values[n] for n in names])
        ses.append([se_map.get(n, np.nan) for n in names])
        conv.append(converged)
    if not estimates:
        raise RuntimeError("every replication failed: " + "; ".join(failures[:3]))
    return RecoveryReport(
        parameter_names=names, truth=truth_vals,
        estimates=np.array(estimates), std_errors=np.array(ses),
        converged=np.array(conv), n_replications=replications,
        n_failures=len(failures), failure_messages=tuple(failures))
