"""Pointwise certified robustness against data poisoning for ensembles of
differentially private learners: privacy accounting, bound algebra,
confidence intervals, certification, a desk-scale noisy trainer, and a
brute-force attack oracle."""

__version__ = "0.1.0"

from .accountant import (DEFAULT_ORDERS, GroupRadius, PrivacyParams, RdpCurve,
                         effective_ratio, group_rdp_curve, rdp_step_epsilon,
                         rdp_to_adp, subset_adjusted_steps,
                         subset_effective_ratio)
from .bounds import (BoundFamily, BoundKind, CertCondition,
                     best_condition_over_orders, certified_at, k_forward,
                     k_inverse)
from .certify import (Certificate, CertifiedAccuracyCurve, Method,
                      certified_accuracy_curve, certify_dataset,
                      certify_sample, summary_stats)
from .confidence import (ConfidenceBounds, ScoreTable, VoteTable,
                         empirical_bernstein_bounds, hoeffding_bounds,
                         simuem_bounds)
from .config import RunConfig, parse_config, serialize_config
from .training import (Dataset, Ensemble, ModelInstance, clip_gradient,
                       infer, infer_dataset, sgm_step, train_ensemble)
from .attack import (FlipReport, NeighborSpec, count_neighbors,
                     empirical_flip_check, enumerate_neighbors)

__all__ = [name for name in dir() if not name.startswith("_")]
