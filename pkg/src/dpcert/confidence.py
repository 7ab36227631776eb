"""Simultaneous confidence bounds on ensemble outputs.

Votes (most-frequent-label inference) get one-sided Clopper-Pearson bounds;
probability scores (expected-softmax inference) get Hoeffding or empirical
Bernstein intervals. All bounds Bonferroni-split the failure budget eta
across the L labels so the lower bound of the top label and the upper
bounds of every rival hold simultaneously with probability at least 1-eta.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import betainc


@dataclass(frozen=True)
class VoteTable:
    """Per-sample label counts from P ensemble instances."""

    sample_ids: tuple
    counts: np.ndarray  # (n_samples, L) ints, each row summing to instances
    instances: int

    def __post_init__(self):
        counts = np.asarray(self.counts)
        if counts.ndim != 2 or counts.shape[0] != len(self.sample_ids):
            raise ValueError("counts must be (n_samples, L) aligned with sample_ids")
        if np.any(counts < 0):
            raise ValueError("vote counts must be >= 0")
        if np.any(counts.sum(axis=1) != self.instances):
            raise ValueError(f"every row must sum to instances={self.instances}")


@dataclass(frozen=True)
class ScoreTable:
    """Per-sample, per-instance class-score rows in [0,1] summing to 1."""

    sample_ids: tuple
    scores: np.ndarray  # (n_samples, P, L)

    def __post_init__(self):
        s = np.asarray(self.scores)
        if s.ndim != 3 or s.shape[0] != len(self.sample_ids):
            raise ValueError("scores must be (n_samples, P, L) aligned with sample_ids")
        if np.any(s < 0.0) or np.any(s > 1.0):
            raise ValueError("scores must lie in [0,1]")
        if np.any(np.abs(s.sum(axis=2) - 1.0) > 1e-6):
            raise ValueError("each instance score row must sum to 1 within 1e-6")


@dataclass(frozen=True)
class ConfidenceBounds:
    """Lower bound on the top label and upper bound on its strongest rival."""

    top_label: int
    p_lower: float
    rival_label: int
    p_upper: float
    eta: float

    def __post_init__(self):
        if self.top_label == self.rival_label:
            raise ValueError("top and rival labels must differ")
        if not (0.0 <= self.p_lower <= 1.0 and 0.0 <= self.p_upper <= 1.0):
            raise ValueError("bounds must lie in [0,1]")
        if not 0.0 < self.eta < 1.0:
            raise ValueError(f"eta must be in (0,1), got {self.eta}")


def beta_quantile(p: float, a: float, b: float, tol: float = 1e-10) -> float:
    """Quantile of Beta(a,b) by bisection on the regularised incomplete
    beta function, avoiding any statistics library's interval conventions."""
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if betainc(a, b, mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _top_two_by_count(counts: np.ndarray):
    # stable argsort of negated counts: ties broken by lowest label index
    order = np.argsort(-counts, kind="stable")
    return int(order[0]), int(order[1])


def simuem_bounds(counts, eta: float) -> ConfidenceBounds:
    """Clopper-Pearson bounds for the two most frequent labels.

    One-sided levels eta/L per label: the top label's lower bound is the
    Beta(n1, P-n1+1) quantile at eta/L, the runner-up's upper bound the
    Beta(n2+1, P-n2) quantile at 1-eta/L.
    """
    counts = np.asarray(counts, dtype=np.int64)
    if counts.ndim != 1 or counts.shape[0] < 2:
        raise ValueError("counts must be a 1-d vector over at least 2 labels")
    if np.any(counts < 0):
        raise ValueError("vote counts must be >= 0")
    total = int(counts.sum())
    if total < 1:
        raise ValueError("need at least one vote")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0,1), got {eta}")

    gamma = eta / counts.shape[0]
    top, rival = _top_two_by_count(counts)
    n1, n2 = int(counts[top]), int(counts[rival])
    p_lower = 0.0 if n1 == 0 else beta_quantile(gamma, n1, total - n1 + 1)
    p_upper = 1.0 if n2 == total else beta_quantile(1.0 - gamma, n2 + 1, total - n2)
    return ConfidenceBounds(top, p_lower, rival, p_upper, eta)


def hoeffding_half_width(eta: float, n_labels: int, instances: int) -> float:
    """Two-sided Hoeffding half width at per-label budget eta/L:
    sqrt(log(2L/eta) / (2P))."""
    return float(np.sqrt(np.log(2.0 * n_labels / eta) / (2.0 * instances)))


def bernstein_half_width(variance: float, eta: float, n_labels: int,
                         instances: int) -> float:
    """Empirical Bernstein half width:
    sqrt(2 V log(2L/eta) / P) + 7 log(2L/eta) / (3 (P-1))."""
    log_term = np.log(2.0 * n_labels / eta)
    return float(np.sqrt(2.0 * variance * log_term / instances)
                 + 7.0 * log_term / (3.0 * (instances - 1)))


def _score_bounds(means, half_widths, eta):
    lowers = np.clip(means - half_widths, 0.0, 1.0)
    uppers = np.clip(means + half_widths, 0.0, 1.0)
    top = int(np.argmax(means))
    rival_uppers = uppers.copy()
    rival_uppers[top] = -1.0
    rival = int(np.argmax(rival_uppers))  # max upper bound among rivals
    return ConfidenceBounds(top, float(lowers[top]), rival,
                            float(uppers[rival]), eta)


def hoeffding_bounds(scores, eta: float) -> ConfidenceBounds:
    """Hoeffding intervals on expected scores; rival is the label with the
    largest upper bound among non-top labels."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError("scores must be (P, L) with at least 2 labels")
    if scores.shape[0] < 1:
        raise ValueError("need at least one instance")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0,1), got {eta}")
    P, L = scores.shape
    hw = hoeffding_half_width(eta, L, P)
    return _score_bounds(scores.mean(axis=0), np.full(L, hw), eta)


def empirical_bernstein_bounds(scores, eta: float) -> ConfidenceBounds:
    """Variance-adaptive intervals on expected scores; needs P >= 2."""
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise ValueError("scores must be (P, L) with at least 2 labels")
    if scores.shape[0] < 2:
        raise ValueError("empirical Bernstein needs at least 2 instances")
    if not 0.0 < eta < 1.0:
        raise ValueError(f"eta must be in (0,1), got {eta}")
    P, L = scores.shape
    variances = scores.var(axis=0, ddof=1)
    hw = np.array([bernstein_half_width(v, eta, L, P) for v in variances])
    return _score_bounds(scores.mean(axis=0), hw, eta)
