"""Quasi-Monte-Carlo and pseudo-random draw generation for simulated likelihood.

Halton sequences (one prime base per latent dimension, initial points skipped)
are the default integration scheme; a seeded pseudo-random plan is available
for variance diagnostics. Uniform draws are mapped to standard normals through
a rational approximation of the inverse normal CDF refined with one Halley
step, which keeps the absolute error far below 1e-9 across (0, 1).
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47)

# Acklam's rational approximation of the inverse normal CDF.
_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
      1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
      6.680131188771972e+01, -1.328068155288572e+01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
      -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
      3.754408661907416e+00)
_P_LOW = 0.02425


def is_prime(n):
    if n < 2:
        return False
    for d in range(2, int(n ** 0.5) + 1):
        if n % d == 0:
            return False
    return True


def halton_sequence(base, count, skip=0):
    """Radical-inverse (Halton) sequence for a prime base.

    Returns `count` points in (0, 1), starting at index `skip + 1` of the
    sequence (index 0, which is 0.0, is never emitted).
    """
    if not is_prime(base):
        raise ValueError(f"Halton base must be prime, got {base}")
    if count < 1:
        raise ValueError("count must be >= 1")
    indices = np.arange(skip + 1, skip + count + 1, dtype=np.int64)
    out = np.zeros(count)
    factor = 1.0 / base
    while indices.any():
        out += factor * (indices % base)
        indices //= base
        factor /= base
    return out


def inv_normal_cdf(p):
    """Inverse CDF of the standard normal distribution.

    Accepts scalars or arrays with entries strictly inside (0, 1).
    """
    p_arr = np.asarray(p, dtype=float)
    if np.any(p_arr <= 0.0) or np.any(p_arr >= 1.0):
        raise ValueError("p must lie strictly inside (0, 1)")

    # work on the lower half and mirror, so refinement never hits the
    # cancellation in ndtr(x) - p near p = 1
    flip = p_arr > 0.5
    q_arr = np.where(flip, 1.0 - p_arr, p_arr)

    x = np.empty_like(q_arr)
    tail = q_arr < _P_LOW
    if tail.any():
        q = np.sqrt(-2.0 * np.log(q_arr[tail]))
        x[tail] = _tail_poly(q)
    if (~tail).any():
        q = q_arr[~tail] - 0.5
        r = q * q
        num = ((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]
        den = ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        x[~tail] = q * num / den

    # Two Halley steps against the forward CDF.
    for _ in range(2):
        err = ndtr(x) - q_arr
        u = err * np.sqrt(2.0 * np.pi) * np.exp(0.5 * x * x)
        x = x - u / (1.0 + 0.5 * x * u)

    x = np.where(flip, -x, x)
    return float(x) if np.isscalar(p) or np.ndim(p) == 0 else x


def _tail_poly(q):
    num = ((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]
    den = (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
    return num / den


@dataclass(frozen=True)
class DrawPlan:
    """How latent disturbances are integrated out of the likelihood.

    draws:    points per integration unit per latent dimension.
    sequence: "halton" (default) or "pseudo".
    seed:     shifts Halton points (Cranley-Patterson rotation) or seeds the
              pseudo-random generator.
    skip:     leading Halton points discarded before use.
    unit:     "respondent" shares one draw block across a respondent's tasks
              (panel integration); "task" redraws per choice task.
    """

    draws: int = 500
    sequence: str = "halton"
    seed: int = 0
    skip: int = 10
    unit: str = "respondent"

    def __post_init__(self):
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        if self.sequence not in ("halton", "pseudo"):
            raise ValueError(f"unknown sequence type: {self.sequence!r}")
        if self.unit not in ("respondent", "task"):
            raise ValueError(f"unknown integration unit: {self.unit!r}")

    def bases(self, n_dims):
        if n_dims > len(PRIMES):
            raise ValueError(f"at most {len(PRIMES)} latent dimensions supported")
        return PRIMES[:n_dims]


def standard_normal_draws(plan, n_units, n_dims):
    """Standard-normal draw array of shape (n_units, n_dims, plan.draws).

    Unit u receives the contiguous Halton block [u*R, (u+1)*R) of each
    dimension's sequence, so values do not depend on how many units are
    evaluated together or in which order.
    """
    if n_dims == 0:
        return np.zeros((n_units, 0, plan.draws))
    rng = np.random.default_rng(plan.seed)
    if plan.sequence == "pseudo":
        return rng.standard_normal((n_units, n_dims, plan.draws))
    shifts = rng.random(n_dims)
    total = n_units * plan.draws
    draws = np.empty((n_units, n_dims, plan.draws))
    for d, base in enumerate(plan.bases(n_dims)):
        u = halton_sequence(base, total, skip=plan.skip)
        u = (u + shifts[d]) % 1.0
        np.clip(u, 1e-12, 1.0 - 1e-12, out=u)
        draws[:, d, :] = inv_normal_cdf(u).reshape(n_units, plan.draws)
    return draws
