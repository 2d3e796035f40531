"""Maximum simulated likelihood estimation.

The joint likelihood of choices and indicator responses is maximized with
L-BFGS-B over the free parameters, using the analytic gradient from the
kernel. Convergence follows the documented contract: projected-gradient
max-norm below gradient_tol, or relative log-likelihood improvement below
relative_ll_tol. Standard errors come from a central finite-difference
Hessian of the analytic gradient; sandwich (robust) errors are optional.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernel
from .draws import DrawPlan, inv_normal_cdf, standard_normal_draws
from .model import OptimizerOptions, build_parameters

log = logging.getLogger(__name__)


def fit_stats(ll_final, ll_null, K, N):
    """(rho2, adj_rho2, bic) from final and null log likelihoods.

    rho2 = 1 - ll/ll0, adjusted version subtracts K from ll first,
    bic = -2 ll + K ln N.
    """
    if ll_null == 0:
        raise ValueError("null log-likelihood must be negative, got 0")
    if ll_null > 0:
        raise ValueError("null log-likelihood must be negative")
    if ll_final < ll_null - 1e-9:
        raise ValueError("final log-likelihood below the null value")
    rho2 = 1.0 - ll_final / ll_null
    adj_rho2 = 1.0 - (ll_final - K) / ll_null
    bic = -2.0 * ll_final + K * math.log(N)
    return rho2, adj_rho2, bic


def null_choice_loglik(ds):
    """Equal-shares choice log likelihood: -sum over tasks of ln(#available)."""
    return -sum(math.log(int(t.availability.sum())) for t in ds.tasks())


def indicator_marginal_loglik(ds, n_categories=5):
    """Maximized log likelihood of indicators under independent marginals."""
    total = 0.0
    N = len(ds.respondents)
    for name in ds.indicator_names:
        counts = np.zeros(n_categories)
        for resp in ds.respondents:
            counts[resp.indicators[name] - 1] += 1
        nz = counts > 0
        total += float((counts[nz] * np.log(counts[nz] / N)).sum())
    return total


def starting_values(spec, ds, params):
    """Documented warm start.

    ASCs come from smoothed log share ratios against the base; threshold
    bases and increments from the normal quantiles of smoothed empirical
    indicator marginals; loadings start at 1 (the all-zero point is a
    stationary saddle of the joint likelihood because flipping the sign of
    every latent draw is a symmetry there); everything else starts at 0.
    """
    out = params.copy()
    counts = np.zeros(len(spec.alternatives))
    alt_pos = {lab: j for j, lab in enumerate(spec.alternatives)}
    for task in ds.tasks():
        counts[task.chosen] += 1
    base_count = counts[alt_pos[spec.base]] + 0.5
    for alt in spec.alternatives:
        if alt == spec.base:
            continue
        name = f"asc.{alt}"
        i = out.index(name)
        if out.free[i]:
            out.values[i] = math.log((counts[alt_pos[alt]] + 0.5) / base_count)

    N = len(ds.respondents)
    for ind, _ in spec.indicators:
        cat_counts = np.zeros(spec.n_categories)
        for resp in ds.respondents:
            cat_counts[resp.indicators[ind] - 1] += 1
        probs = (cat_counts + 0.5) / (N + 0.5 * spec.n_categories)
        cum = np.cumsum(probs)[:-1]
        tau = inv_normal_cdf(np.clip(cum, 1e-10, 1 - 1e-10))
        updates = {f"thr.{ind}.1": float(tau[0])}
        for x in range(2, spec.n_categories):
            updates[f"thr.{ind}.{x}"] = float(np.log(tau[x - 1] - tau[x - 2]))
        for name, value in updates.items():
            i = out.index(name)
            if out.free[i]:
                out.values[i] = value
        i = out.index(f"load.{ind}")
        if out.free[i]:
            out.values[i] = 1.0
    return out


def canonicalize_latent_signs(spec, params):
    """Report the sign convention with non-negative mean loadings per latent.

    The joint likelihood is invariant to flipping a latent together with its
    loadings, utility coefficient, and structural coefficients, so this is a
    relabeling of the same maximum, not a different solution.
    """
    out = params.copy()
    flipped = []
    for latent in spec.latents:
        inds = spec.indicators_of(latent.name)
        if not inds:
            continue
        mean_load = np.mean([out[f"load.{i}"] for i in inds])
        if mean_load >= 0:
            continue
        flipped.append(latent.name)
        for ind in inds:
            out.values[out.index(f"load.{ind}")] *= -1
        for z in latent.regressors:
            out.values[out.index(f"struct.{latent.name}.{z}")] *= -1
        out.values[out.index(f"zeta.{latent.name}")] *= -1
        for pname, lname, _ in spec.lambda_params():
            if lname == latent.name:
                out.values[out.index(pname)] *= -1
    return out, tuple(flipped)


@dataclass
class EstimationResult:
    """Point estimates with uncertainty and fit diagnostics."""

    params: object                      # full ParameterVector at the optimum
    free_names: tuple
    std_errors: np.ndarray              # aligned with free_names
    t_stats: np.ndarray
    ll_final: float
    ll_null: float
    rho2: float
    adj_rho2: float
    bic: float
    n_observations: int
    n_tasks: int
    n_indicator_responses: int
    n_free_parameters: int
    converged: bool
    iterations: int
    gradient_norm: float
    draws: int
    sequence: str
    singular_params: tuple = ()
    flipped_latents: tuple = ()
    robust: bool = False
    ll_trace: tuple = ()

    @property
    def std_errors_by_name(self):
        return dict(zip(self.free_names, self.std_errors.tolist()))

    @property
    def t_stats_by_name(self):
        return dict(zip(self.free_names, self.t_stats.tolist()))

    def to_kv(self):
        """Flat machine-readable key = value text (no timestamps, stable order)."""
        lines = []
        for name in self.params.names:
            lines.append(f"param.{name} = {self.params[name]!r}")
        for name, se, t in zip(self.free_names, self.std_errors, self.t_stats):
            lines.append(f"se.{name} = {float(se)!r}")
            lines.append(f"t.{name} = {float(t)!r}")
        lines += [
            f"ll_final = {self.ll_final!r}",
            f"ll_null = {self.ll_null!r}",
            f"rho2 = {self.rho2!r}",
            f"adj_rho2 = {self.adj_rho2!r}",
            f"bic = {self.bic!r}",
            f"n_observations = {self.n_observations}",
            f"n_tasks = {self.n_tasks}",
            f"n_indicator_responses = {self.n_indicator_responses}",
            f"n_free_parameters = {self.n_free_parameters}",
            f"converged = {str(self.converged).lower()}",
            f"iterations = {self.iterations}",
            f"gradient_norm = {self.gradient_norm!r}",
            f"draws = {self.draws}",
            f"sequence = {self.sequence}",
            f"robust = {str(self.robust).lower()}",
        ]
        if self.singular_params:
            lines.append("singular_params = " + " ".join(self.singular_params))
        if self.flipped_latents:
            lines.append("flipped_latents = " + " ".join(self.flipped_latents))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_kv())


def load_result_kv(path):
    """Parse a key = value result file into a plain dict."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            key, value = (s.strip() for s in line.split("=", 1))
            out[key] = value
    return out


def simulated_loglik(spec, params, ds, plan):
    """Joint simulated log likelihood of choices and indicators.

    Per respondent, the latent disturbance is integrated by averaging the
    product of choice and indicator probabilities over the plan's draws; the
    average runs in log space through log-sum-exp.
    """
    ma = kernel.compile_model(spec, ds, params)
    draws = _draws_for(spec, ds, plan)
    return kernel.evaluate(ma, params.values, draws, want_grad=False,
                           unit=plan.unit).loglik


def simulated_loglik_gradient(spec, params, ds, plan):
    """Analytic gradient of simulated_loglik over the free parameters."""
    ma = kernel.compile_model(spec, ds, params)
    draws = _draws_for(spec, ds, plan)
    res = kernel.evaluate(ma, params.values, draws, unit=plan.unit)
    return res.grad[params.free]


def _draws_for(spec, ds, plan):
    L = len(spec.latents)
    if L == 0:
        return np.zeros((len(ds.respondents), 0, 1))
    return standard_normal_draws(plan, len(ds.respondents), L)


def _fd_hessian(ma, values, draws, free_idx, step, unit):
    n = free_idx.size
    H = np.zeros((n, n))
    for k, i in enumerate(free_idx):
        h = step * max(1.0, abs(values[i]))
        up, dn = values.copy(), values.copy()
        up[i] += h
        dn[i] -= h
        g_up = kernel.evaluate(ma, up, draws, unit=unit).grad[free_idx]
        g_dn = kernel.evaluate(ma, dn, draws, unit=unit).grad[free_idx]
        H[:, k] = (g_up - g_dn) / (2 * h)
    return 0.5 * (H + H.T)


def estimate(spec, ds, plan=None, options=None, start=None):
    """Maximize the joint simulated likelihood; returns an EstimationResult.

    start: optional mapping of parameter name to starting value, overriding
    the documented warm start.
    """
    plan = plan or DrawPlan()
    options = options or OptimizerOptions()
    params = build_parameters(spec)
    params = starting_values(spec, ds, params)
    if start:
        params = params.with_values(start)

    ma = kernel.compile_model(spec, ds, params)
    draws = _draws_for(spec, ds, plan)
    free_idx = np.flatnonzero(params.free)

    values = params.values.copy()
    evals = [0]

    def objective(x):
        values[free_idx] = x
        res = kernel.evaluate(ma, values, draws, unit=plan.unit)
        evals[0] += 1
        if evals[0] % 100 == 0:
            log.debug("evaluation %d: ll = %.6f", evals[0], res.loglik)
        return -res.loglik, -res.grad[free_idx]

    ll_trace = []
    callback = None
    if options.trace_ll:
        callback = lambda xk: ll_trace.append(-objective(xk)[0])  # noqa: E731

    opt = minimize(
        objective, params.values[free_idx], jac=True, method="L-BFGS-B",
        callback=callback,
        options={"maxiter": options.max_iterations,
                 "maxfun": 4 * options.max_iterations,
                 "ftol": options.relative_ll_tol,
                 "gtol": options.gradient_tol,
                 "maxcor": 20})

    values[free_idx] = opt.x
    final = params.with_free_values(opt.x)
    final, flipped = canonicalize_latent_signs(spec, final)
    res = kernel.evaluate(ma, final.values, draws, unit=plan.unit,
                          want_scores=options.robust_se)
    grad_norm = float(np.abs(res.grad[free_idx]).max()) if free_idx.size else 0.0
    converged = bool(opt.success or grad_norm < options.gradient_tol)

    singular = []
    if options.standard_errors:
        H = _fd_hessian(ma, final.values, draws, free_idx, options.hessian_step,
                        plan.unit)
        info = -H
        try:
            cov = np.linalg.inv(info)
            if not np.all(np.diag(cov) > 0):
                raise np.linalg.LinAlgError("non-positive variance")
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(info)
            diag = np.diag(cov)
            bad = (diag <= 0) | ~np.isfinite(diag)
            free_names = np.array(params.names)[free_idx]
            singular = list(free_names[bad])
            if not singular:
                # pinv succeeded but inv did not: flag the weakest directions
                eigvals, eigvecs = np.linalg.eigh(info)
                weak = np.abs(eigvals) < 1e-10 * max(1.0, np.abs(eigvals).max())
                for v in eigvecs[:, weak].T:
                    singular.append(free_names[int(np.argmax(np.abs(v)))])
            singular = sorted(set(singular))
        if options.robust_se:
            scores = res.scores[:, free_idx]
            B = scores.T @ scores
            cov = cov @ B @ cov
        diag = np.diag(cov).copy()
        se = np.sqrt(np.where(diag > 0, diag, np.nan))
    else:
        se = np.full(free_idx.size, np.nan)
    estimates = final.values[free_idx]
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(se > 0, estimates / se, np.nan)

    n_tasks = ds.n_tasks
    n_ind = len(ds.respondents) * len(spec.indicators)
    N = n_tasks if options.observation_unit == "tasks" else n_tasks + n_ind
    ll_null = null_choice_loglik(ds)
    if spec.indicators:
        ll_null += indicator_marginal_loglik(ds, spec.n_categories)
    K = free_idx.size
    # computed directly rather than through fit_stats: a run that stopped at
    # the iteration cap may sit below the null and should still be reported
    rho2 = 1.0 - res.loglik / ll_null
    adj_rho2 = 1.0 - (res.loglik - K) / ll_null
    bic = -2.0 * res.loglik + K * math.log(N)

    return EstimationResult(
        params=final, free_names=tuple(np.array(params.names)[free_idx]),
        std_errors=se, t_stats=t, ll_final=res.loglik, ll_null=ll_null,
        rho2=rho2, adj_rho2=adj_rho2, bic=bic, n_observations=N,
        n_tasks=n_tasks, n_indicator_responses=n_ind, n_free_parameters=K,
        converged=converged, iterations=int(opt.nit),
        gradient_norm=grad_norm, draws=plan.draws if spec.latents else 1,
        sequence=plan.sequence, singular_params=tuple(singular),
        flipped_latents=flipped, robust=options.robust_se,
        ll_trace=tuple(ll_trace))
