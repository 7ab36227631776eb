"""Outcome-bound algebra for certification conditions.

A privacy guarantee induces a strictly increasing function K bounding how
much any output probability (or bounded expected score) can grow between
datasets within the attack radius:

    approximate DP:  K(x) = e^eps * x + delta
    Renyi DP:        K(x) = (e^eps * x)^((alpha-1)/alpha)

A prediction is certified when the K-inverse-deflated lower confidence
bound of the top label strictly exceeds the K-inflated upper confidence
bound of its strongest rival. The two sides may use bound functions from
different Renyi orders of the same curve, since every order is a valid
guarantee on its own; picking the best order per side independently gives
the tightest condition.
"""

import math
from dataclasses import dataclass
from enum import Enum


class BoundKind(Enum):
    ADP = "adp"
    RDP = "rdp"


def _exp(x: float) -> float:
    # math.exp raises on large finite arguments; saturate to +inf instead
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


@dataclass(frozen=True)
class BoundFamily:
    """One bound function K: ADP carries (eps, delta), RDP carries (eps, alpha)."""

    kind: BoundKind
    epsilon: float
    second: float  # delta for ADP, alpha for RDP

    def __post_init__(self):
        if self.epsilon < 0.0 or math.isnan(self.epsilon):
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.kind is BoundKind.ADP and not 0.0 <= self.second < 1.0:
            raise ValueError(f"delta must be in [0,1), got {self.second}")
        if self.kind is BoundKind.RDP and self.second <= 1.0:
            raise ValueError(f"alpha must be > 1, got {self.second}")


@dataclass(frozen=True)
class CertCondition:
    """Certification inequality inputs: confidence bounds plus the bound
    family applied to each side."""

    p_lower: float
    p_upper: float
    lower_bound_fn: BoundFamily
    upper_bound_fn: BoundFamily

    def __post_init__(self):
        if not 0.0 <= self.p_lower <= 1.0:
            raise ValueError(f"p_lower must be in [0,1], got {self.p_lower}")
        if not 0.0 <= self.p_upper <= 1.0:
            raise ValueError(f"p_upper must be in [0,1], got {self.p_upper}")


def k_forward(b: BoundFamily, x: float) -> float:
    """K(x) on [0,1]. Strictly increasing in x."""
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must be in [0,1], got {x}")
    if b.kind is BoundKind.ADP:
        if x == 0.0:
            return b.second
        return _exp(b.epsilon) * x + b.second
    # (e^eps x)^((a-1)/a), evaluated in log space so huge eps cannot
    # overflow before the root is taken
    if x == 0.0:
        return 0.0
    a = b.second
    return _exp((a - 1.0) / a * (b.epsilon + math.log(x)))


def k_inverse(b: BoundFamily, y: float) -> float:
    """Exact inverse of k_forward on [0,1]; ADP clamps at 0 below delta."""
    if y < 0.0:
        raise ValueError(f"y must be >= 0, got {y}")
    if b.kind is BoundKind.ADP:
        return max(0.0, _exp(-b.epsilon) * (y - b.second))
    if y == 0.0:
        return 0.0
    a = b.second
    return _exp(-b.epsilon + a / (a - 1.0) * math.log(y))


def certified_at(cond: CertCondition) -> bool:
    """True iff the deflated top lower bound strictly beats the inflated
    rival upper bound. Ties are not certified."""
    return k_inverse(cond.lower_bound_fn, cond.p_lower) > k_forward(
        cond.upper_bound_fn, cond.p_upper)


def best_condition_over_orders(p_lower: float, p_upper: float, curve) -> CertCondition:
    """Tightest RDP condition over a curve: the order maximising the
    deflated lower bound and, independently, the order minimising the
    inflated upper bound."""
    if len(curve.orders) == 0:
        raise ValueError("empty curve")
    best_lo = best_up = None
    best_lo_fam = best_up_fam = None
    for a, e in zip(curve.orders, curve.epsilons):
        fam = BoundFamily(BoundKind.RDP, e, a)
        lo = k_inverse(fam, p_lower)
        if best_lo is None or lo > best_lo:
            best_lo, best_lo_fam = lo, fam
        up = k_forward(fam, p_upper)
        if best_up is None or up < best_up:
            best_up, best_up_fam = up, fam
    return CertCondition(p_lower, p_upper, best_lo_fam, best_up_fam)
