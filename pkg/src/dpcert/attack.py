"""Brute-force poisoning oracle for empirical certificate validation.

Enumerates every dataset within a symmetric-difference budget of the clean
training set (deletions cost 1, insertions from a labelled candidate pool
cost 1, modifying one example costs 2 since it swaps two elements of the
symmetric difference), retrains a fresh randomised ensemble per neighbor
and flags test points whose estimated prediction changes. The oracle can
only refute a certificate, never confirm one: flips are Monte-Carlo
estimates, so acceptance thresholds must include sampling slack on top of
the certificate's eta.
"""

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .training import Dataset, train_ensemble, infer

OPERATIONS = ("insert", "delete", "modify")


@dataclass(frozen=True)
class NeighborSpec:
    """Attack surface: budget, allowed edit kinds and the insertion pool."""

    radius: int
    operations: tuple
    pool: Dataset | None = None

    def __post_init__(self):
        if self.radius < 1:
            raise ValueError(f"radius must be >= 1, got {self.radius}")
        ops = tuple(self.operations)
        if not ops or any(o not in OPERATIONS for o in ops):
            raise ValueError(f"operations must be a nonempty subset of {OPERATIONS}")
        object.__setattr__(self, "operations", ops)


@dataclass(frozen=True)
class FlipReport:
    sample_id: str
    certified_radius: int | None
    tested_radius: int
    trials: int
    flip_count: int
    neighbor_count: int

    def __post_init__(self):
        if self.certified_radius is not None and self.tested_radius > self.certified_radius:
            raise ValueError("tested radius exceeds the certified radius")

    @property
    def flip_frequency(self) -> float:
        return self.flip_count / self.neighbor_count


def _count_pairs(spec: NeighborSpec):
    """Reachable (deletions, insertions) count pairs within the budget.

    Pure deletions need 'delete', pure insertions 'insert'; 'modify' couples
    one deletion with one insertion at total cost 2, so with only 'modify'
    the counts must match.
    """
    can_del = "delete" in spec.operations
    can_ins = "insert" in spec.operations
    can_mod = "modify" in spec.operations
    pairs = []
    for d in range(spec.radius + 1):
        for i in range(spec.radius + 1 - d):
            if d > 0 and not can_del and not (can_mod and i >= 1):
                continue
            if i > 0 and not can_ins and not (can_mod and d >= 1):
                continue
            if not can_del and d > i:   # extra deletions need 'delete'
                continue
            if not can_ins and i > d:   # extra insertions need 'insert'
                continue
            pairs.append((d, i))
    return pairs


def count_neighbors(data: Dataset, spec: NeighborSpec) -> int:
    """Closed-form enumeration size, including the unmodified dataset."""
    pool_n = spec.pool.n if spec.pool is not None else 0
    pairs = _count_pairs(spec)
    total = sum(math.comb(data.n, d) * math.comb(pool_n, i) for d, i in pairs)
    if (data.n, 0) in pairs:
        total -= 1  # deleting everything leaves nothing to train on
    return total


def enumerate_neighbors(data: Dataset, spec: NeighborSpec, cap: int = 100_000):
    """Yields every dataset within the budget, the unmodified one first.

    Raises before yielding anything when the closed-form count exceeds cap.
    """
    total = count_neighbors(data, spec)
    if total > cap:
        raise ValueError(
            f"neighbor enumeration would produce {total} datasets (cap {cap})")
    X, y = data.features, data.labels
    if spec.pool is not None:
        if spec.pool.n_features != data.n_features:
            raise ValueError("pool feature width does not match the dataset")
        pool_X, pool_y = spec.pool.features, spec.pool.labels
    pairs = sorted(_count_pairs(spec), key=lambda p: (p[0] + p[1], p[0]))
    for d, i in pairs:
        for del_idx in combinations(range(data.n), d):
            keep = np.setdiff1d(np.arange(data.n), del_idx)
            if keep.size == 0 and i == 0:
                continue  # empty dataset is not a trainable neighbor
            for ins_idx in combinations(range(spec.pool.n if spec.pool else 0), i):
                parts_X = [X[keep]]
                parts_y = [y[keep]]
                if i:
                    sel = np.asarray(ins_idx)
                    parts_X.append(pool_X[sel])
                    parts_y.append(pool_y[sel])
                yield Dataset(np.vstack(parts_X), np.concatenate(parts_y),
                              data.n_classes)


def _estimate_argmax(dataset: Dataset, params, trials: int, seed: int,
                     x: np.ndarray, inference: str, **train_kw) -> int:
    ens = train_ensemble(dataset, params, instances=trials, seed=seed, **train_kw)
    votes, scores = infer(ens, x)
    if inference == "multinomial":
        return int(np.argmax(votes))
    if inference == "scores":
        return int(np.argmax(scores.mean(axis=0)))
    raise ValueError(f"unknown inference rule {inference!r}")


def empirical_flip_check(data: Dataset, spec: NeighborSpec, params,
                         x: np.ndarray, trials: int, seed: int = 0,
                         sample_id: str = "0",
                         certified_radius: int | None = None,
                         inference: str = "multinomial",
                         cap: int = 100_000, **train_kw) -> FlipReport:
    """Retrains `trials` instances per neighbor and counts estimated
    prediction changes against the clean dataset's estimate.

    The clean reference uses the first enumerated neighbor (the dataset
    itself), so a trivial enumeration can never report a flip.
    """
    if trials < 30:
        raise ValueError(f"need at least 30 trials, got {trials}")
    flips = 0
    neighbor_count = 0
    clean_label = None
    master = np.random.SeedSequence(seed).spawn(count_neighbors(data, spec))
    for idx, neighbor in enumerate(enumerate_neighbors(data, spec, cap=cap)):
        child = int.from_bytes(
            master[idx].generate_state(4, np.uint32).tobytes(), "little")
        label = _estimate_argmax(neighbor, params, trials, child, x,
                                 inference, **train_kw)
        if clean_label is None:
            clean_label = label
        elif label != clean_label:
            flips += 1
        neighbor_count += 1
    return FlipReport(sample_id, certified_radius, spec.radius, trials,
                      flips, neighbor_count)
