"""Near-orthogonal main-effects designs for mixed-level choice experiments.

Designs are searched under a lexicographic objective: first per-attribute
level balance, then the maximum absolute pairwise correlation between
effect-coded main-effect columns of different attributes. Small problems run
a row-exchange search over the full factorial; larger ones run a seeded
within-column swap heuristic from balanced starts, which preserves balance by
construction. Exact orthogonality is reported, never assumed: with 32 runs
and 3-level attributes some residual correlation is unavoidable.
"""

import itertools
from dataclasses import dataclass

import numpy as np


class DesignError(ValueError):
    """Raised for infeasible design requests."""


@dataclass(frozen=True)
class AttributeDef:
    name: str
    levels: tuple

    def __post_init__(self):
        if len(self.levels) < 2:
            raise DesignError(f"attribute {self.name}: needs at least 2 levels")
        if len(set(self.levels)) != len(self.levels):
            raise DesignError(f"attribute {self.name}: duplicate levels")


@dataclass(frozen=True)
class ScenarioSet:
    runs: np.ndarray            # (R, A) level indices
    attribute_defs: tuple
    blocks: tuple = None        # tuple of tuples of run indices, or None

    def __post_init__(self):
        runs = np.asarray(self.runs)
        for a, attr in enumerate(self.attribute_defs):
            if runs[:, a].min() < 0 or runs[:, a].max() >= len(attr.levels):
                raise DesignError(f"attribute {attr.name}: level index out of range")
        if self.blocks is not None:
            sizes = {len(b) for b in self.blocks}
            if len(sizes) != 1:
                raise DesignError("blocks must have equal size")

    @property
    def n_runs(self):
        return self.runs.shape[0]

    def level_values(self):
        """Runs as level values (float); labeled levels fall back to indices."""
        out = np.empty(self.runs.shape, dtype=float)
        for a, attr in enumerate(self.attribute_defs):
            try:
                vals = np.array([float(v) for v in attr.levels])
            except (TypeError, ValueError):
                vals = np.arange(len(attr.levels), dtype=float)
            out[:, a] = vals[self.runs[:, a]]
        return out


def effect_coded(runs, attribute_defs):
    """Sum-to-zero coding: L-1 columns per attribute, grouped by attribute."""
    blocks, owners = [], []
    for a, attr in enumerate(attribute_defs):
        L = len(attr.levels)
        cols = np.zeros((runs.shape[0], L - 1))
        for j in range(L - 1):
            cols[runs[:, a] == j, j] = 1.0
            cols[runs[:, a] == L - 1, j] = -1.0
        blocks.append(cols)
        owners.extend([a] * (L - 1))
    return np.hstack(blocks), np.array(owners)


def _objective(runs, attribute_defs):
    """(imbalance beyond the feasible floor, max |corr|, mean corr^2)."""
    R = runs.shape[0]
    imbalance = 0
    for a, attr in enumerate(attribute_defs):
        counts = np.bincount(runs[:, a], minlength=len(attr.levels))
        floor = 0 if R % len(attr.levels) == 0 else 1
        imbalance += max(0, int(counts.max() - counts.min()) - floor)
    coded, owners = effect_coded(runs, attribute_defs)
    centered = coded - coded.mean(axis=0)
    sd = centered.std(axis=0)
    sd[sd == 0] = np.inf     # constant column: correlation treated as 1 below
    corr = (centered / sd).T @ (centered / sd) / R
    cross = np.abs(corr[np.not_equal.outer(owners, owners)])
    degenerate = np.isinf(sd).any()
    max_corr = 1.0 if degenerate else (float(cross.max()) if cross.size else 0.0)
    mean_sq = float((cross ** 2).mean()) if cross.size else 0.0
    return imbalance, max_corr, mean_sq


def _balanced_start(attribute_defs, runs, rng):
    cols = []
    for attr in attribute_defs:
        L = len(attr.levels)
        reps = np.tile(np.arange(L), runs // L + 1)[:runs]
        rng.shuffle(reps)
        cols.append(reps)
    return np.column_stack(cols).astype(np.int64)


def _column_swap_search(design, attribute_defs, rng, passes=60):
    best = _objective(design, attribute_defs)
    R, A = design.shape
    for _ in range(passes):
        improved = False
        order = rng.permutation(A * 40)
        for code in order:
            a = int(code) % A
            i, j = rng.integers(0, R, size=2)
            if design[i, a] == design[j, a]:
                continue
            design[i, a], design[j, a] = design[j, a], design[i, a]
            cand = _objective(design, attribute_defs)
            if cand < best:
                best = cand
                improved = True
            else:
                design[i, a], design[j, a] = design[j, a], design[i, a]
        if not improved:
            break
    return design, best


def _row_exchange_search(design, full, attribute_defs, rng, passes=60):
    best = _objective(design, attribute_defs)
    R = design.shape[0]
    for _ in range(passes):
        improved = False
        for _ in range(R * 20):
            i = int(rng.integers(0, R))
            candidate = full[int(rng.integers(0, full.shape[0]))]
            saved = design[i].copy()
            design[i] = candidate
            cand = _objective(design, attribute_defs)
            if cand < best:
                best = cand
                improved = True
            else:
                design[i] = saved
        if not improved:
            break
    return design, best


def generate_design(attribute_defs, runs, seed=0, restarts=10):
    """Near-orthogonal main-effects design with `runs` rows; deterministic per seed."""
    attribute_defs = tuple(attribute_defs)
    levels = [len(a.levels) for a in attribute_defs]
    if runs < max(levels):
        raise DesignError(
            f"infeasible run count {runs}: largest attribute has {max(levels)} levels")
    if runs < len(attribute_defs) + 1:
        raise DesignError(
            f"infeasible run count {runs}: need at least {len(attribute_defs) + 1} "
            "runs for main effects")

    full_size = int(np.prod(levels))
    if runs == full_size:
        full = np.array(list(itertools.product(*(range(L) for L in levels))),
                        dtype=np.int64)
        return ScenarioSet(full, attribute_defs)
    if runs > full_size:
        raise DesignError(
            f"run count {runs} exceeds the full factorial ({full_size})")

    rng = np.random.default_rng(seed)
    full = None
    if full_size <= 512:
        full = np.array(list(itertools.product(*(range(L) for L in levels))),
                        dtype=np.int64)

    best_design, best_obj = None, None
    for _ in range(restarts):
        if full is not None:
            start = full[rng.choice(full_size, size=runs, replace=False)].copy()
            design, obj = _row_exchange_search(start, full, attribute_defs, rng)
        else:
            start = _balanced_start(attribute_defs, runs, rng)
            design, obj = _column_swap_search(start, attribute_defs, rng)
        if best_obj is None or obj < best_obj:
            best_design, best_obj = design.copy(), obj
    return ScenarioSet(best_design, attribute_defs)


@dataclass(frozen=True)
class DesignReport:
    level_counts: dict          # attribute name -> tuple of counts
    max_abs_correlation: float
    d_efficiency: float
    imbalance: int


def orthogonality_report(design):
    """Level counts, max |pairwise effect-coded correlation|, D-efficiency."""
    runs = design.runs
    counts = {}
    for a, attr in enumerate(design.attribute_defs):
        counts[attr.name] = tuple(
            int(c) for c in np.bincount(runs[:, a], minlength=len(attr.levels)))
    imbalance, max_corr, _ = _objective(runs, design.attribute_defs)
    coded, _ = effect_coded(runs, design.attribute_defs)
    X = np.hstack([np.ones((runs.shape[0], 1)), coded])
    M = X.T @ X / runs.shape[0]
    sign, logdet = np.linalg.slogdet(M)
    d_eff = float(np.exp(logdet / X.shape[1])) if sign > 0 else 0.0
    return DesignReport(level_counts=counts, max_abs_correlation=max_corr,
                        d_efficiency=d_eff, imbalance=imbalance)


def block_design(design, block_size, seed=0, passes=40):
    """Partition runs into equal blocks balancing level exposure per block.

    The partition minimizes the squared deviation of within-block level counts
    from their proportional share, by seeded pairwise swaps between blocks.
    """
    R = design.n_runs
    if R % block_size != 0:
        raise DesignError(f"{R} runs cannot form equal blocks of {block_size}")
    n_blocks = R // block_size
    rng = np.random.default_rng(seed)
    assignment = np.repeat(np.arange(n_blocks), block_size)
    rng.shuffle(assignment)

    levels = [len(a.levels) for a in design.attribute_defs]

    def cost(assign):
        total = 0.0
        for a, L in enumerate(levels):
            overall = np.bincount(design.runs[:, a], minlength=L) / R
            for b in range(n_blocks):
                counts = np.bincount(design.runs[assign == b, a], minlength=L)
                total += float(((counts - block_size * overall) ** 2).sum())
        return total

    best = cost(assignment)
    for _ in range(passes):
        improved = False
        for _ in range(R * 8):
            i, j = rng.integers(0, R, size=2)
            if assignment[i] == assignment[j]:
                continue
            assignment[i], assignment[j] = assignment[j], assignment[i]
            cand = cost(assignment)
            if cand < best - 1e-12:
                best = cand
                improved = True
            else:
                assignment[i], assignment[j] = assignment[j], assignment[i]
        if not improved:
            break
    blocks = tuple(tuple(int(r) for r in np.flatnonzero(assignment == b))
                   for b in range(n_blocks))
    return ScenarioSet(design.runs, design.attribute_defs, blocks)
