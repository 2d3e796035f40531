"""Reliability and validity toolkit for the Likert indicator block.

Cronbach's alpha for internal consistency, the Kaiser-Meyer-Olkin sampling
adequacy measure from anti-image partial correlations, and exploratory factor
analysis by principal components on the Pearson correlation matrix with
varimax rotation. Likert responses are treated as interval-scaled.
"""

from dataclasses import dataclass

import numpy as np


class PsychometricsError(ValueError):
    """Raised for degenerate inputs (zero variance, singular correlations)."""


@dataclass(frozen=True)
class ItemBlock:
    """N x S response matrix with item names and scale membership."""

    responses: np.ndarray
    item_names: tuple
    scales: dict = None          # scale name -> tuple of item names

    def __post_init__(self):
        r = np.asarray(self.responses, dtype=float)
        if r.ndim != 2 or r.shape[0] < 2 or r.shape[1] < 2:
            raise PsychometricsError("need at least a 2 x 2 response matrix")
        if r.shape[1] != len(self.item_names):
            raise PsychometricsError("item names do not match matrix width")
        if not np.all(np.isfinite(r)):
            raise PsychometricsError("missing or non-finite responses")

    def columns(self, items):
        idx = [self.item_names.index(i) for i in items]
        return np.asarray(self.responses, dtype=float)[:, idx]


def item_block_from_dataset(ds, scales=None):
    mat = np.array([[r.indicators[name] for name in ds.indicator_names]
                    for r in ds.respondents], dtype=float)
    return ItemBlock(mat, tuple(ds.indicator_names), scales)


def cronbach_alpha(block, scale=None):
    """alpha = k/(k-1) * (1 - sum of item variances / variance of the sum)."""
    items = tuple(scale) if scale is not None else block.item_names
    if len(items) < 2:
        raise PsychometricsError("a scale needs at least 2 items")
    X = block.columns(items)
    k = X.shape[1]
    item_vars = X.var(axis=0, ddof=1)
    total_var = X.sum(axis=1).var(ddof=1)
    if total_var == 0:
        raise PsychometricsError("zero total variance in the scale")
    return float(k / (k - 1) * (1.0 - item_vars.sum() / total_var))


def _correlation(X):
    sd = X.std(axis=0, ddof=1)
    if np.any(sd == 0):
        raise PsychometricsError("an item has zero variance")
    Z = (X - X.mean(axis=0)) / sd
    return Z.T @ Z / (X.shape[0] - 1)


def kmo(block):
    """(overall, per-item) Kaiser-Meyer-Olkin sampling adequacy.

    Compares squared correlations against squared anti-image partial
    correlations computed from the inverse correlation matrix.
    """
    X = block.columns(block.item_names)
    corr = _correlation(X)
    S = corr.shape[0]
    try:
        inv = np.linalg.inv(corr)
    except np.linalg.LinAlgError:
        raise PsychometricsError("singular correlation matrix") from None
    d = np.sqrt(np.outer(np.diag(inv), np.diag(inv)))
    partial = -inv / d

    off = ~np.eye(S, dtype=bool)
    r2 = corr[off] ** 2
    q2 = partial[off] ** 2
    denom = r2.sum() + q2.sum()
    if np.abs(corr[off]).max() < 1e-12:
        raise PsychometricsError(
            "degenerate correlation structure: all off-diagonal correlations "
            "are zero")
    overall = float(r2.sum() / denom)

    per_item = np.empty(S)
    for i in range(S):
        mask = np.ones(S, dtype=bool)
        mask[i] = False
        ri = corr[i, mask] ** 2
        qi = partial[i, mask] ** 2
        di = ri.sum() + qi.sum()
        per_item[i] = np.nan if di == 0 else ri.sum() / di
    return overall, per_item


def varimax(loadings, max_iter=500, tol=1e-10):
    """Orthogonal varimax rotation (SVD-based iterations)."""
    A = np.asarray(loadings, dtype=float).copy()
    p, m = A.shape
    if m < 2:
        return A, np.eye(m)
    T = np.eye(m)
    d_old = 0.0
    for _ in range(max_iter):
        L = A @ T
        target = L ** 3 - L @ np.diag(np.diag(L.T @ L)) / p
        U, s, Vt = np.linalg.svd(A.T @ target)
        T = U @ Vt
        d_new = s.sum()
        if d_new <= d_old * (1 + tol):
            break
        d_old = d_new
    return A @ T, T


@dataclass(frozen=True)
class EfaResult:
    loadings: np.ndarray          # S x n_factors, varimax-rotated
    explained_variance: np.ndarray
    communalities: np.ndarray
    item_names: tuple

    def dominant_factor(self):
        return np.argmax(np.abs(self.loadings), axis=1)


def efa(block, n_factors):
    """Principal-component extraction with varimax rotation.

    Loadings are sign-normalized so each factor's largest-magnitude loading
    is positive.
    """
    X = block.columns(block.item_names)
    S = X.shape[1]
    if not (1 <= n_factors <= S):
        raise PsychometricsError(f"n_factors must be in 1..{S}")
    corr = _correlation(X)
    eigvals, eigvecs = np.linalg.eigh(corr)
    if eigvals.min() < -1e-8:
        raise PsychometricsError("correlation matrix is not positive semidefinite")
    order = np.argsort(eigvals)[::-1][:n_factors]
    vals = np.maximum(eigvals[order], 0.0)
    loadings = eigvecs[:, order] * np.sqrt(vals)
    rotated, _ = varimax(loadings)
    for f in range(rotated.shape[1]):
        top = np.argmax(np.abs(rotated[:, f]))
        if rotated[top, f] < 0:
            rotated[:, f] *= -1
    explained = (rotated ** 2).sum(axis=0) / S
    communalities = (rotated ** 2).sum(axis=1)
    return EfaResult(rotated, explained, communalities, block.item_names)


def simulate_factor_items(loadings_by_item, n_obs, rng, n_categories=5):
    """Likert items generated from an orthogonal-factor structure.

    loadings_by_item: mapping item -> (factor index, loading). Each item is
    loading * factor + sqrt(1 - loading^2) * noise, discretized into
    n_categories by equal-probability thresholds.
    """
    items = list(loadings_by_item)
    n_factors = 1 + max(f for f, _ in loadings_by_item.values())
    F = rng.standard_normal((n_obs, n_factors))
    X = np.empty((n_obs, len(items)))
    for k, item in enumerate(items):
        f, load = loadings_by_item[item]
        latent = load * F[:, f] + np.sqrt(max(1 - load ** 2, 0.0)) \
            * rng.standard_normal(n_obs)
        cuts = np.quantile(latent, np.linspace(0, 1, n_categories + 1)[1:-1])
        X[:, k] = 1 + np.searchsorted(cuts, latent)
    return ItemBlock(X, tuple(items))
