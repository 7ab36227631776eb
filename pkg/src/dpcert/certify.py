"""Per-sample certified radii and aggregate accuracy curves.

For one test sample the confidence bounds are fixed; the certification
condition holds at radius r iff it holds for the privacy curve at the
effective group ratio of r. Since epsilon grows with r and the condition
only gets harder as epsilon grows, the predicate "certified at r" is
monotone in r, and the largest certified radius is found by binary search
over integers. A sample whose bounds cannot even separate top from rival at
radius 0 is ABSTAIN.
"""

import logging
from dataclasses import dataclass
from enum import Enum

from .accountant import DEFAULT_ORDERS, PrivacyParams, group_rdp_curve, rdp_to_adp
from .bounds import (BoundFamily, BoundKind, CertCondition,
                     best_condition_over_orders, certified_at)
from .confidence import (ConfidenceBounds, ScoreTable, VoteTable,
                         empirical_bernstein_bounds, hoeffding_bounds,
                         simuem_bounds)

logger = logging.getLogger(__name__)


class Method(Enum):
    ADP_MULTINOMIAL = "adp-multinomial"
    RDP_MULTINOMIAL = "rdp-multinomial"
    ADP_SCORES = "adp-scores"
    RDP_SCORES = "rdp-scores"

    @property
    def is_rdp(self) -> bool:
        return self in (Method.RDP_MULTINOMIAL, Method.RDP_SCORES)

    @property
    def uses_scores(self) -> bool:
        return self in (Method.ADP_SCORES, Method.RDP_SCORES)


@dataclass(frozen=True)
class Certificate:
    """Prediction plus certified radius; radius None means ABSTAIN."""

    sample_id: str
    predicted_label: int
    radius: int | None
    eta: float
    method: Method

    @property
    def abstain(self) -> bool:
        return self.radius is None


@dataclass(frozen=True)
class CertifiedAccuracyCurve:
    radii: tuple
    accuracy: tuple

    def __post_init__(self):
        if len(self.radii) != len(self.accuracy) or len(self.radii) == 0:
            raise ValueError("radii and accuracy must be equal-length, nonempty")
        if any(b > a for a, b in zip(self.accuracy, self.accuracy[1:])):
            raise ValueError("certified accuracy must be nonincreasing in radius")


def certified_at_radius(bounds: ConfidenceBounds, params: PrivacyParams,
                        method: Method, delta: float | None, r: int,
                        orders=DEFAULT_ORDERS) -> bool:
    """Certification predicate at one radius. Radius 0 only requires the
    bounds to separate top from rival strictly."""
    if r == 0:
        return bounds.p_lower > bounds.p_upper
    curve = group_rdp_curve(params, r, orders)
    if method.is_rdp:
        cond = best_condition_over_orders(bounds.p_lower, bounds.p_upper, curve)
    else:
        if delta is None:
            raise ValueError("ADP methods need a delta")
        eps, d = rdp_to_adp(curve, delta)
        fam = BoundFamily(BoundKind.ADP, eps, d)
        cond = CertCondition(bounds.p_lower, bounds.p_upper, fam, fam)
    return certified_at(cond)


def certify_sample(bounds: ConfidenceBounds, params: PrivacyParams,
                   method: Method, delta: float | None, r_max: int,
                   orders=DEFAULT_ORDERS, sample_id: str = "") -> Certificate:
    """Largest certified radius in [0, r_max] by binary search; ABSTAIN when
    even radius 0 fails."""
    if r_max < 0:
        raise ValueError(f"r_max must be >= 0, got {r_max}")

    def pred(r: int) -> bool:
        return certified_at_radius(bounds, params, method, delta, r, orders)

    if not pred(0):
        return Certificate(sample_id, bounds.top_label, None, bounds.eta, method)
    if r_max == 0 or pred(r_max):
        radius = r_max
    else:
        lo, hi = 0, r_max  # invariant: pred(lo) holds, pred(hi) fails
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if pred(mid):
                lo = mid
            else:
                hi = mid
        radius = lo
    if not pred(radius):  # monotone-search sanity check, cached and cheap
        raise AssertionError("certified radius failed its own predicate")
    return Certificate(sample_id, bounds.top_label, radius, bounds.eta, method)


def certify_dataset(table, params: PrivacyParams, method: Method, eta: float,
                    delta: float | None, r_max: int, orders=DEFAULT_ORDERS,
                    score_bound: str = "hoeffding") -> list:
    """Certificates for every sample of a vote or score table. Samples are
    independent; a failing sample is logged and skipped rather than
    aborting the batch."""
    if method.uses_scores:
        if not isinstance(table, ScoreTable):
            raise TypeError(f"{method.value} needs a ScoreTable")
        if score_bound == "hoeffding":
            bound_fn = hoeffding_bounds
        elif score_bound == "bernstein":
            bound_fn = empirical_bernstein_bounds
        else:
            raise ValueError(f"unknown score bound {score_bound!r}")
        rows = table.scores
    else:
        if not isinstance(table, VoteTable):
            raise TypeError(f"{method.value} needs a VoteTable")
        bound_fn = simuem_bounds
        rows = table.counts

    certs = []
    for sample_id, row in zip(table.sample_ids, rows):
        try:
            bounds = bound_fn(row, eta)
            certs.append(certify_sample(bounds, params, method, delta, r_max,
                                        orders, sample_id=str(sample_id)))
        except Exception:
            logger.warning("certification failed for sample %s", sample_id,
                           exc_info=True)
    return certs


def certified_accuracy_curve(certs, truth) -> CertifiedAccuracyCurve:
    """Fraction of samples both correct and certified to at least each
    radius. ABSTAIN fails every radius, including 0."""
    if not certs:
        raise ValueError("no certificates")
    truth = dict(truth)
    missing = [c.sample_id for c in certs if c.sample_id not in truth]
    if missing:
        raise ValueError(f"no ground truth for sample ids {missing[:5]}")
    certified = [c for c in certs
                 if not c.abstain and c.predicted_label == truth[c.sample_id]]
    max_r = max((c.radius for c in certified), default=0)
    radii = range(0, max_r + 2) if certified else range(0, 1)
    n = len(certs)
    accuracy = tuple(
        sum(1 for c in certified if c.radius >= r) / n for r in radii)
    return CertifiedAccuracyCurve(tuple(radii), accuracy)


def summary_stats(certs, truth=None):
    """(lower-median, max) of certified radii over non-abstaining
    certificates, restricted to correctly predicted samples when ground
    truth is supplied. Returns None when nothing qualifies."""
    if not certs:
        raise ValueError("no certificates")
    radii = []
    lookup = dict(truth) if truth is not None else None
    for c in certs:
        if c.abstain:
            continue
        if lookup is not None and c.predicted_label != lookup.get(c.sample_id):
            continue
        radii.append(c.radius)
    if not radii:
        return None
    radii.sort()
    return radii[(len(radii) - 1) // 2], radii[-1]
