"""Vectorized joint likelihood of choices and indicators with analytic gradients.

The model is compiled once per (spec, dataset) pair into dense arrays; every
likelihood or gradient evaluation is then a fixed sequence of numpy
operations, so results are bitwise-deterministic and independent of any
parallelism in the caller. Draw-level integration uses log-sum-exp over the
draw axis; per-respondent sums run through an order-preserving segment sum.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from .model import ModelSpecError

_SQRT2PI = np.sqrt(2.0 * np.pi)
_P_FLOOR = 1e-300


@dataclass
class ModelArrays:
    """Dense evaluation arrays for one (spec, dataset) pair."""

    spec: object
    param_names: tuple
    n_resp: int
    n_tasks: int
    J: int
    # choice side
    X: np.ndarray            # (T, J, Pu) utility design, ASC columns first
    util_idx: np.ndarray     # (Pu,) global parameter indices
    avail: np.ndarray        # (T, J) bool
    chosen: np.ndarray       # (T,) int
    resp_of_task: np.ndarray  # (T,) int, non-decreasing
    resp_ptr: np.ndarray     # (n_resp + 1,) segment boundaries
    # latent side
    lam: tuple               # (global_idx, latent_index, member (J,)) triples
    z_mats: tuple            # per latent: (n_resp, n_regressors)
    struct_idx: tuple        # per latent: (n_regressors,) global indices
    zeta_idx: np.ndarray     # (L,)
    sigma_idx: np.ndarray    # (L,)
    # measurement side
    ind_cat: np.ndarray      # (n_resp, S) observed categories, 1-based
    ind_latent: np.ndarray   # (S,)
    load_idx: np.ndarray     # (S,)
    gamma_idx: np.ndarray    # (S,)
    thr1_idx: np.ndarray     # (S,)
    thrinc_idx: np.ndarray   # (S, X-2)
    n_categories: int = 5

    @property
    def n_latents(self):
        return len(self.z_mats)

    @property
    def n_params(self):
        return len(self.param_names)

    def index(self, name):
        return self.param_names.index(name)


def compile_model(spec, ds, params):
    """Build ModelArrays; tasks are ordered by respondent, then task id."""
    labels = ds.alternative_labels()
    if tuple(spec.alternatives) != labels:
        raise ModelSpecError(
            f"spec alternatives {spec.alternatives} do not match dataset {labels}")
    alt_pos = {lab: j for j, lab in enumerate(labels)}
    attr_pos = {name: k for k, name in enumerate(ds.attribute_names)}
    socio_names = set(ds.sociodemo_names)
    J = len(labels)

    tasks, resp_of_task, counts = [], [], []
    for i, resp in enumerate(ds.respondents):
        ordered = sorted(resp.tasks, key=lambda t: t.task_id)
        tasks.extend(ordered)
        resp_of_task.extend([i] * len(ordered))
        counts.append(len(ordered))
    T = len(tasks)
    resp_ptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)

    util_names, columns = [], []
    base_j = alt_pos[spec.base]
    for alt in spec.alternatives:
        if alt == spec.base:
            continue
        util_names.append(f"asc.{alt}")
        col = np.zeros(J)
        col[alt_pos[alt]] = 1.0
        columns.append(("asc", col))
    for term in spec.terms:
        if term.attribute not in attr_pos and term.attribute not in socio_names:
            raise ModelSpecError(
                f"term {term.param}: attribute '{term.attribute}' not in dataset")
        util_names.append(term.param)
        columns.append(("term", term))

    X = np.zeros((T, J, len(columns)))
    avail = np.zeros((T, J), dtype=bool)
    chosen = np.zeros(T, dtype=np.int64)
    for t, task in enumerate(tasks):
        avail[t] = task.availability
        chosen[t] = task.chosen
        resp = ds.respondents[resp_of_task[t]]
        for p, (kind, payload) in enumerate(columns):
            if kind == "asc":
                X[t, :, p] = payload
            else:
                if payload.attribute in attr_pos:
                    vals = task.attributes[:, attr_pos[payload.attribute]]
                else:
                    vals = np.full(J, resp.sociodemographics[payload.attribute])
                for alt in payload.alternatives:
                    X[t, alt_pos[alt], p] = vals[alt_pos[alt]]

    param_index = {n: i for i, n in enumerate(params.names)}
    util_idx = np.array([param_index[n] for n in util_names], dtype=np.int64)

    lam = []
    for pname, lname, alts in spec.lambda_params():
        member = np.zeros(J)
        for alt in alts:
            member[alt_pos[alt]] = 1.0
        lam.append((param_index[pname],
                    spec.latent_names.index(lname), member))

    z_mats, struct_idx = [], []
    for latent in spec.latents:
        for z in latent.regressors:
            if z not in socio_names:
                raise ModelSpecError(
                    f"latent {latent.name}: regressor '{z}' not in dataset")
        z_mats.append(np.array(
            [[r.sociodemographics[z] for z in latent.regressors]
             for r in ds.respondents], dtype=float))
        struct_idx.append(np.array(
            [param_index[f"struct.{latent.name}.{z}"] for z in latent.regressors],
            dtype=np.int64))
    zeta_idx = np.array([param_index[f"zeta.{l.name}"] for l in spec.latents],
                        dtype=np.int64)
    sigma_idx = np.array([param_index[f"sigma.{l.name}"] for l in spec.latents],
                         dtype=np.int64)

    S = len(spec.indicators)
    X_cat = spec.n_categories
    ind_cat = np.zeros((len(ds.respondents), S), dtype=np.int64)
    ind_latent = np.zeros(S, dtype=np.int64)
    load_idx = np.zeros(S, dtype=np.int64)
    gamma_idx = np.zeros(S, dtype=np.int64)
    thr1_idx = np.zeros(S, dtype=np.int64)
    thrinc_idx = np.zeros((S, max(X_cat - 2, 0)), dtype=np.int64)
    for s, (ind, lat) in enumerate(spec.indicators):
        if ind not in ds.indicator_names:
            raise ModelSpecError(f"indicator '{ind}' not in dataset")
        ind_cat[:, s] = [r.indicators[ind] for r in ds.respondents]
        ind_latent[s] = spec.latent_names.index(lat)
        load_idx[s] = param_index[f"load.{ind}"]
        gamma_idx[s] = param_index[f"gamma.{ind}"]
        thr1_idx[s] = param_index[f"thr.{ind}.1"]
        for x in range(2, X_cat):
            thrinc_idx[s, x - 2] = param_index[f"thr.{ind}.{x}"]

    return ModelArrays(
        spec=spec, param_names=params.names, n_resp=len(ds.respondents),
        n_tasks=T, J=J, X=X, util_idx=util_idx, avail=avail, chosen=chosen,
        resp_of_task=np.asarray(resp_of_task, dtype=np.int64), resp_ptr=resp_ptr,
        lam=tuple(lam), z_mats=tuple(z_mats), struct_idx=tuple(struct_idx),
        zeta_idx=zeta_idx, sigma_idx=sigma_idx, ind_cat=ind_cat,
        ind_latent=ind_latent, load_idx=load_idx, gamma_idx=gamma_idx,
        thr1_idx=thr1_idx, thrinc_idx=thrinc_idx, n_categories=X_cat)


def segment_sum(arr, ptr):
    """Order-preserving per-segment sum along axis 0; empty segments give 0."""
    counts = np.diff(ptr)
    if counts.size and counts.min() >= 1:
        return np.add.reduceat(arr, ptr[:-1], axis=0)
    cs = np.concatenate([np.zeros((1,) + arr.shape[1:]), np.cumsum(arr, axis=0)])
    return cs[ptr[1:]] - cs[ptr[:-1]]


def latent_values(ma, values, draws):
    """a[n, l, r] = zeta_l + Z_n . struct_l + sigma_l * draw."""
    L = ma.n_latents
    if L == 0:
        return np.zeros((ma.n_resp, 0, draws.shape[2] if draws.ndim == 3 else 1))
    mean = np.empty((ma.n_resp, L))
    for l in range(L):
        mean[:, l] = values[ma.zeta_idx[l]] + ma.z_mats[l] @ values[ma.struct_idx[l]]
    sigma = values[ma.sigma_idx]
    return mean[:, :, None] + sigma[None, :, None] * draws


def lambda_loadings(ma, values):
    """(L, J) combined latent-to-utility loadings."""
    lamload = np.zeros((ma.n_latents, ma.J))
    for idx, l, member in ma.lam:
        lamload[l] += values[idx] * member
    return lamload


def utilities(ma, values, a, mask_unavailable=True):
    """Systematic utilities (T, R, J) including latent terms.

    Unavailable alternatives are set to -inf unless mask_unavailable=False.
    """
    R = a.shape[2]
    fixed = ma.X @ values[ma.util_idx]                     # (T, J)
    if mask_unavailable:
        fixed[~ma.avail] = -np.inf
    if ma.lam:
        a_task = np.ascontiguousarray(a[ma.resp_of_task].transpose(0, 2, 1))
        V = np.matmul(a_task, lambda_loadings(ma, values))  # (T, R, J)
        V += fixed[:, None, :]
    else:
        V = np.broadcast_to(fixed[:, None, :], (ma.n_tasks, R, ma.J)).copy()
    return V


def choice_logprobs(ma, values, a, return_probs=False):
    """Per-draw log probability of each task's chosen alternative.

    Returns (logp_chosen (T, R), P (T, R, J) or None). Unavailable
    alternatives have probability exactly 0.
    """
    V = utilities(ma, values, a)
    vmax = V.max(axis=2, keepdims=True)
    np.subtract(V, vmax, out=V)
    E = np.exp(V)                                          # exp(-inf) flushes to 0
    denom = E.sum(axis=2)
    logp = (V[np.arange(ma.n_tasks), :, ma.chosen] - np.log(denom))
    P = None
    if return_probs:
        P = E
        P /= denom[:, :, None]
    return logp, P


def _threshold_bounds(ma, values, s):
    """tau_full with sentinels, per-respondent (lower, upper) and index arrays."""
    X_cat = ma.n_categories
    tau = np.empty(X_cat - 1)
    tau[0] = values[ma.thr1_idx[s]]
    for x in range(2, X_cat):
        tau[x - 1] = tau[x - 2] + np.exp(values[ma.thrinc_idx[s, x - 2]])
    tau_full = np.concatenate([[-np.inf], tau, [np.inf]])
    cat = ma.ind_cat[:, s]
    return tau, tau_full[cat - 1], tau_full[cat]


def measurement_logprobs(ma, values, a, return_parts=False):
    """Per-draw joint log probability of each respondent's indicator block.

    Returns (m (n_resp, R), parts). With return_parts, parts is a list of
    per-indicator gradient pieces used by evaluate().
    """
    R = a.shape[2]
    m = np.zeros((ma.n_resp, R))
    parts = [] if return_parts else None
    for s in range(ma.ind_latent.size):
        tau, lower, upper = _threshold_bounds(ma, values, s)
        load = values[ma.load_idx[s]]
        gamma = values[ma.gamma_idx[s]]
        mid = gamma + load * a[:, ma.ind_latent[s], :]          # (n_resp, R)
        z_lo = lower[:, None] - mid
        z_hi = upper[:, None] - mid
        # difference of CDFs taken on the side where both tails are small
        flip = (z_lo + z_hi) > 0
        zl = np.where(flip, -z_hi, z_lo)
        zh = np.where(flip, -z_lo, z_hi)
        P = ndtr(zh) - ndtr(zl)
        P = np.maximum(P, _P_FLOOR)
        m += np.log(P)
        if return_parts:
            pdf_lo = np.exp(-0.5 * np.square(np.where(np.isfinite(z_lo), z_lo, np.inf)))
            pdf_lo /= _SQRT2PI
            pdf_hi = np.exp(-0.5 * np.square(np.where(np.isfinite(z_hi), z_hi, np.inf)))
            pdf_hi /= _SQRT2PI
            parts.append((P, pdf_lo, pdf_hi))
    return m, parts


@dataclass
class EvalResult:
    loglik: float
    grad: np.ndarray = None     # gradient over the full parameter vector
    scores: np.ndarray = None   # per-respondent gradient contributions


def evaluate(ma, values, draws, want_grad=True, want_scores=False,
             unit="respondent"):
    """Simulated joint log likelihood, optionally with its analytic gradient.

    draws: (n_resp, L, R) standard normals; with R = 1 this is the
    deterministic joint likelihood at the given latent values.
    """
    values = np.asarray(values, dtype=float)
    a = latent_values(ma, values, draws)
    R = a.shape[2]
    need_probs = want_grad or want_scores
    c_task, P = choice_logprobs(ma, values, a, return_probs=need_probs)
    m, parts = measurement_logprobs(ma, values, a, return_parts=need_probs)

    if unit == "respondent":
        c = segment_sum(c_task, ma.resp_ptr)
        w = c + m                                    # (n_resp, R)
        wmax = w.max(axis=1, keepdims=True)
        lse = wmax[:, 0] + np.log(np.exp(w - wmax).sum(axis=1))
        sll = float(lse.sum() - ma.n_resp * np.log(R))
        if not need_probs:
            return EvalResult(sll)
        omega = np.exp(w - lse[:, None])             # (n_resp, R) softmax weights
        omega_task = omega[ma.resp_of_task]
    elif unit == "task":
        # choices and indicators integrated separately (no panel correlation)
        cmax = c_task.max(axis=1, keepdims=True)
        c_lse = cmax[:, 0] + np.log(np.exp(c_task - cmax).sum(axis=1))
        mmax = m.max(axis=1, keepdims=True)
        m_lse = mmax[:, 0] + np.log(np.exp(m - mmax).sum(axis=1))
        sll = float(c_lse.sum() + m_lse.sum()
                    - (ma.n_tasks + ma.n_resp) * np.log(R))
        if not need_probs:
            return EvalResult(sll)
        omega_task = np.exp(c_task - c_lse[:, None])  # (T, R)
        omega = np.exp(m - m_lse[:, None])            # (n_resp, R), measurement only
    else:
        raise ValueError(f"unknown integration unit: {unit!r}")

    scores = np.zeros((ma.n_resp, ma.n_params))

    # choice residuals: one-hot minus probabilities (zero where unavailable),
    # weighted by the draw weights of the relevant integral
    resid = P                                         # (T, R, J), reused in place
    np.negative(resid, out=resid)
    resid[np.arange(ma.n_tasks), :, ma.chosen] += 1.0
    resid *= omega_task[:, :, None]

    # utility coefficients: the design does not vary over draws, so the draw
    # sum factorizes through the linear contraction
    resid_sum = resid.sum(axis=1)                     # (T, J)
    scores[:, ma.util_idx] += segment_sum(
        np.einsum("tj,tjp->tp", resid_sum, ma.X, optimize=True), ma.resp_ptr)

    # latent-to-utility coefficients and the residual pathway into each
    # latent (for structural parameters): one contraction over the residual
    # tensor covers both
    if ma.lam:
        lamload = lambda_loadings(ma, values)
        M = np.column_stack([member for _, _, member in ma.lam]
                            + [lamload[l] for l in range(ma.n_latents)])
        mixed = segment_sum(resid @ M, ma.resp_ptr)     # (n_resp, R, K)
        for k, (idx, l, _) in enumerate(ma.lam):
            scores[:, idx] += (mixed[:, :, k] * a[:, l, :]).sum(axis=1)
        dc_da = mixed[:, :, len(ma.lam):].transpose(0, 2, 1)
    else:
        dc_da = np.zeros((ma.n_resp, ma.n_latents, R))

    # measurement parameters and their pathway into each latent
    dm_da = np.zeros((ma.n_resp, ma.n_latents, R))
    for s in range(ma.ind_latent.size):
        P_s, pdf_lo, pdf_hi = parts[s]
        l = ma.ind_latent[s]
        load = values[ma.load_idx[s]]
        diff = (pdf_hi - pdf_lo) / P_s
        wdiff = omega * diff
        scores[:, ma.gamma_idx[s]] += -wdiff.sum(axis=1)
        scores[:, ma.load_idx[s]] += -(wdiff * a[:, l, :]).sum(axis=1)
        dm_da[:, l, :] += -load * diff

        cat = ma.ind_cat[:, s]
        fin_hi = (cat <= ma.n_categories - 1).astype(float)[:, None]
        fin_lo = (cat >= 2).astype(float)[:, None]
        w_hi = omega * pdf_hi / P_s
        w_lo = omega * pdf_lo / P_s
        scores[:, ma.thr1_idx[s]] += (w_hi * fin_hi - w_lo * fin_lo).sum(axis=1)
        for x in range(2, ma.n_categories):
            inc = np.exp(values[ma.thrinc_idx[s, x - 2]])
            hi_has = ((cat >= x) & (cat <= ma.n_categories - 1)).astype(float)[:, None]
            lo_has = (cat - 1 >= x).astype(float)[:, None]
            scores[:, ma.thrinc_idx[s, x - 2]] += (
                inc * (w_hi * hi_has - w_lo * lo_has)).sum(axis=1)

    # structural parameters through da/dtheta; dc_da already carries the
    # choice-side weights, the measurement side picks up its own here
    da_total = dc_da + omega[:, None, :] * dm_da
    for l in range(ma.n_latents):
        wda = da_total[:, l, :].sum(axis=1)          # (n_resp,)
        scores[:, ma.zeta_idx[l]] += wda
        scores[np.ix_(np.arange(ma.n_resp), ma.struct_idx[l])] += \
            wda[:, None] * ma.z_mats[l]
        scores[:, ma.sigma_idx[l]] += (da_total[:, l, :] * draws[:, l, :]).sum(axis=1)

    grad = scores.sum(axis=0)
    return EvalResult(sll, grad, scores if want_scores else None)
