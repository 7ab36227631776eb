"""Renyi-DP accounting for the subsampled Gaussian training mechanism.

A training run of ``steps`` noisy updates, each Poisson-subsampling the data
with ratio q and adding Gaussian noise with multiplier sigma to clipped
unit-sensitivity gradient sums, satisfies (alpha, eps)-Renyi-DP with

    eps(alpha) = steps * max( D_alpha(mix || N(0, s^2)),
                              D_alpha(N(0, s^2) || mix) )

where mix = (1-q) N(0, s^2) + q N(1, s^2). Group guarantees over datasets
differing in up to r examples follow from the same expression with the
sampling ratio replaced by the effective ratio 1 - (1-q)^r, which is what
makes per-radius certification cheap.

Forward direction: exact binomial expansion in log space for integer
orders, adaptive quadrature for fractional ones. Reverse direction: always
adaptive quadrature (the binomial expansion does not apply to negative
powers of the mixture); it is dominated by the forward term but computed
regardless so the returned value is a max of both.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import log_moment_int
from ._quadrature import log_mixture_moment

# Integer orders 2..64 plus a few fractional ones for small-epsilon regimes.
DEFAULT_ORDERS = (1.25, 1.5, 1.75) + tuple(float(a) for a in range(2, 65))

_INT_TOL = 1e-9


@dataclass(frozen=True)
class PrivacyParams:
    """Subsampled-Gaussian training hyperparameters."""

    q: float
    sigma: float
    steps: int
    clip: float

    def __post_init__(self):
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must be in (0,1], got {self.q}")
        if self.sigma <= 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.clip <= 0.0:
            raise ValueError(f"clip must be > 0, got {self.clip}")


@dataclass(frozen=True)
class GroupRadius:
    """Symmetric-difference budget; 0 means the unattacked dataset."""

    r: int

    def __post_init__(self):
        if self.r < 0:
            raise ValueError(f"radius must be >= 0, got {self.r}")


@dataclass(frozen=True)
class RdpCurve:
    """Per-order Renyi-DP guarantee of a composed mechanism."""

    orders: tuple
    epsilons: tuple
    steps: int

    def __post_init__(self):
        if len(self.orders) == 0 or len(self.orders) != len(self.epsilons):
            raise ValueError("orders and epsilons must be equal-length and nonempty")
        arr = np.asarray(self.orders, dtype=float)
        if not (np.all(arr > 1.0) and np.all(np.diff(arr) > 0.0)):
            raise ValueError("orders must be strictly increasing and all > 1")
        eps = np.asarray(self.epsilons, dtype=float)
        if np.any(eps < 0.0) or np.any(np.isnan(eps)):
            raise ValueError("epsilons must be >= 0 (or +inf)")


def effective_ratio(q: float, r: int) -> float:
    """Sampling ratio seen by a group of r examples: 1 - (1-q)^r.

    Poisson sampling touches at least one of r examples with exactly this
    probability, which is why a radius-r guarantee is the radius-1 guarantee
    at the inflated ratio. Evaluated via expm1/log1p to keep small-q
    accuracy.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0,1], got {q}")
    if r < 1:
        raise ValueError(f"r must be >= 1, got {r}")
    if q == 1.0:
        return 1.0
    if r == 1:
        return q
    return -math.expm1(r * math.log1p(-q))


def _is_integer_order(alpha: float) -> bool:
    return abs(alpha - round(alpha)) <= _INT_TOL and round(alpha) >= 2


@lru_cache(maxsize=65536)
def _step_epsilons_cached(q: float, sigma: float, orders: tuple) -> tuple:
    """Per-step eps for every order, max over both divergence directions."""
    arr = np.asarray(orders, dtype=float)
    if q == 0.0:
        return tuple(0.0 for _ in orders)
    if q == 1.0:
        return tuple(float(a) / (2.0 * sigma * sigma) for a in arr)

    eps = np.empty(arr.shape[0])
    rounded = np.round(arr)
    is_int = (np.abs(arr - rounded) <= _INT_TOL) & (rounded >= 2.0)
    if is_int.any():
        eps[is_int] = log_moment_int(
            rounded[is_int].astype(np.int64), q, sigma) / (arr[is_int] - 1.0)
    # One adaptive pass covers the fractional forward moments and every
    # reverse moment (powers 1 - alpha).
    n_frac = int((~is_int).sum())
    quad_powers = np.concatenate([arr[~is_int], 1.0 - arr])
    logm = log_mixture_moment(q, sigma, quad_powers)
    if n_frac:
        eps[~is_int] = logm[:n_frac] / (arr[~is_int] - 1.0)
    reverse = logm[n_frac:] / (arr - 1.0)
    return tuple(np.maximum(eps, reverse))


def rdp_step_epsilon(q: float, sigma: float, alpha: float) -> float:
    """One-step Renyi-DP bound of the subsampled Gaussian mechanism.

    Integer orders use the exact log-space binomial expansion of the
    forward moment; fractional orders use adaptive quadrature (absolute
    tolerance 1e-12 on the peak-normalised integrand). Endpoints: q=0 gives
    0, q=1 gives the plain Gaussian value alpha/(2 sigma^2).
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must be in [0,1], got {q}")
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    if alpha <= 1.0:
        raise ValueError(f"alpha must be > 1, got {alpha}")
    return _step_epsilons_cached(float(q), float(sigma), (float(alpha),))[0]


def group_rdp_curve(params: PrivacyParams, radius, orders=DEFAULT_ORDERS) -> RdpCurve:
    """Composed Renyi-DP curve against datasets differing in <= radius points.

    Per order: steps * one-step eps at the effective ratio. radius=1 is the
    plain (ungrouped) curve.
    """
    r = radius.r if isinstance(radius, GroupRadius) else int(radius)
    q_eff = effective_ratio(params.q, r)
    step_eps = _step_epsilons_cached(q_eff, float(params.sigma), tuple(float(a) for a in orders))
    return RdpCurve(
        orders=tuple(float(a) for a in orders),
        epsilons=tuple(params.steps * e for e in step_eps),
        steps=params.steps,
    )


def subset_adjusted_steps(steps: int, subset_size: int, full_size: int) -> int:
    """Composition count for an instance trained on a sub-dataset.

    Steps are counted as-is; the accounting adjustment for sub-training
    lives entirely in the rescaled ratio (see subset_effective_ratio).
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    if not 1 <= subset_size <= full_size:
        raise ValueError(
            f"need 1 <= subset_size <= full_size, got {subset_size}/{full_size}")
    return steps


def subset_effective_ratio(q: float, subset_size: int, full_size: int) -> float:
    """Per-step sampling ratio against the full dataset when training on a
    uniform sub-dataset of the given size: q * subset_size / full_size."""
    if not 0.0 < q <= 1.0:
        raise ValueError(f"q must be in (0,1], got {q}")
    if not 1 <= subset_size <= full_size:
        raise ValueError(
            f"need 1 <= subset_size <= full_size, got {subset_size}/{full_size}")
    return q * subset_size / full_size


def rdp_to_adp(curve: RdpCurve, delta: float) -> tuple:
    """Tightest (epsilon, delta)-DP implied by the curve:
    min over orders of eps(alpha) + log(1/delta) / (alpha - 1)."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0,1), got {delta}")
    log_inv = math.log(1.0 / delta)
    best = math.inf
    for a, e in zip(curve.orders, curve.epsilons):
        if math.isinf(e):
            continue
        best = min(best, e + log_inv / (a - 1.0))
    if math.isinf(best):
        raise ValueError("every order has infinite epsilon; no ADP guarantee")
    return best, delta
