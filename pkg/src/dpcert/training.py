"""Desk-scale noisy ensemble trainer.

Each of P instances runs the same training process independently: every
update Poisson-samples examples with ratio q, clips each per-example
cross-entropy gradient to l2 norm C, sums, adds N(0, (sigma*C)^2) noise per
coordinate, divides by the expected batch size q*n, and applies the
optimiser. Dividing clipped gradients' sum after noising keeps the
mechanism's sensitivity at C so sigma is a plain noise multiplier, which is
exactly what the accountant assumes.

Randomness: one 64-bit master seed is split into per-instance child seeds
(numpy SeedSequence spawning), so results do not depend on execution order
or worker count. Per instance the draw order is fixed: optional subset
indices, parameter init, then per step an inclusion-uniform row and a noise
row. Rerunning with the same seed is bit-identical on a given backend.
"""

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .confidence import ScoreTable, VoteTable

ARCHITECTURES = ("logistic", "mlp")

DEFAULT_LR = 0.01
DEFAULT_HIDDEN = 32
DEFAULT_OPTIMIZER = "adam"

_OPT_IDS = {"sgd": _kernels.OPT_SGD, "adam": _kernels.OPT_ADAM}


@dataclass(frozen=True)
class Dataset:
    """Labelled feature matrix; labels must cover [0, n_classes)."""

    features: np.ndarray  # (n, m) float
    labels: np.ndarray    # (n,) int
    n_classes: int

    def __post_init__(self):
        X = np.asarray(self.features, dtype=float)
        y = np.asarray(self.labels)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("features must be a nonempty (n, m) matrix")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if y.shape != (X.shape[0],):
            raise ValueError("labels must be a vector aligned with features")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if np.any(y < 0) or np.any(y >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")
        object.__setattr__(self, "features", X)
        object.__setattr__(self, "labels", np.asarray(y, dtype=np.int64))

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class ModelInstance:
    parameters: np.ndarray
    architecture: str
    seed: int

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")


@dataclass(frozen=True)
class Ensemble:
    instances: list
    params: object  # PrivacyParams
    architecture: str
    n_features: int
    n_classes: int
    hidden: int
    master_seed: int
    subset_size: int | None = None
    lr: float = DEFAULT_LR
    optimizer: str = DEFAULT_OPTIMIZER
    train_size: int | None = None
    errors: list = field(default_factory=list)

    def __post_init__(self):
        dim = param_dim(self.architecture, self.n_features, self.n_classes,
                        self.hidden)
        for inst in self.instances:
            if inst.architecture != self.architecture:
                raise ValueError("all instances must share one architecture")
            if inst.parameters.shape != (dim,):
                raise ValueError("instance parameter count does not match shape")

    def __len__(self) -> int:
        return len(self.instances)


def param_dim(architecture: str, n_features: int, n_classes: int,
              hidden: int = DEFAULT_HIDDEN) -> int:
    if architecture == "logistic":
        return (n_features + 1) * n_classes
    if architecture == "mlp":
        return n_features * hidden + hidden + hidden * n_classes + n_classes
    raise ValueError(f"unknown architecture {architecture!r}")


def clip_gradient(g: np.ndarray, clip: float) -> np.ndarray:
    """g scaled to l2 norm at most clip; zero and short vectors unchanged."""
    if clip <= 0.0:
        raise ValueError(f"clip must be > 0, got {clip}")
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm <= clip:
        return g.copy()
    return g * (clip / norm)


def init_params(architecture: str, n_features: int, n_classes: int,
                hidden: int, rng: np.random.Generator) -> np.ndarray:
    """Logistic starts at zero; the MLP draws fan-in-scaled normal weights
    (zero biases) so hidden units are not symmetric."""
    dim = param_dim(architecture, n_features, n_classes, hidden)
    if architecture == "logistic":
        return np.zeros(dim)
    params = np.zeros(dim)
    o1 = n_features * hidden
    o2 = o1 + hidden
    o3 = o2 + hidden * n_classes
    params[:o1] = rng.standard_normal(o1) / np.sqrt(n_features)
    params[o2:o3] = rng.standard_normal(hidden * n_classes) / np.sqrt(hidden)
    return params


@dataclass
class TrainState:
    """Mutable optimiser state threaded through single-step updates."""

    params: np.ndarray
    momentum: np.ndarray
    velocity: np.ndarray
    step: int
    architecture: str
    n_classes: int
    hidden: int

    @classmethod
    def fresh(cls, params0, architecture, n_classes, hidden=DEFAULT_HIDDEN):
        p = np.asarray(params0, dtype=float).copy()
        return cls(p, np.zeros_like(p), np.zeros_like(p), 0,
                   architecture, n_classes, hidden)


def sgm_step(state: TrainState, data: Dataset, params, rng,
             lr: float = DEFAULT_LR, optimizer: str = DEFAULT_OPTIMIZER) -> TrainState:
    """One noisy update in place (and returned). Draws the inclusion
    uniforms then the noise vector from rng; an empty sampled batch still
    applies the noise-only update."""
    opt = _OPT_IDS[optimizer]
    mask = rng.random(data.n) < params.q
    noise = rng.standard_normal(state.params.shape[0])
    state.step += 1
    if state.architecture == "logistic":
        _kernels.logreg_step_numpy(
            state.params, state.momentum, state.velocity, state.step,
            data.features, data.labels, state.n_classes, mask, noise,
            params.q, params.clip, params.sigma * params.clip, lr, opt)
    else:
        _kernels.mlp_step_numpy(
            state.params, state.momentum, state.velocity, state.step,
            data.features, data.labels, state.n_classes, state.hidden,
            mask, noise,
            params.q, params.clip, params.sigma * params.clip, lr, opt)
    return state


def derive_instance_seeds(master_seed: int, count: int) -> list:
    """Child seeds from one master seed via SeedSequence spawning; stable
    under any execution order."""
    children = np.random.SeedSequence(master_seed).spawn(count)
    return [int.from_bytes(c.generate_state(4, np.uint32).tobytes(), "little")
            for c in children]


def _train_one(data: Dataset, params, architecture, hidden, lr, optimizer,
               subset_size, seed: int) -> ModelInstance:
    rng = np.random.default_rng(seed)
    X, y = data.features, data.labels
    if subset_size is not None:
        if not 1 <= subset_size <= data.n:
            raise ValueError(f"subset_size must be in [1, {data.n}]")
        idx = np.sort(rng.choice(data.n, size=subset_size, replace=False))
        X, y = X[idx], y[idx]
    dim = param_dim(architecture, data.n_features, data.n_classes, hidden)
    params0 = init_params(architecture, data.n_features, data.n_classes,
                          hidden, rng)
    # interleaved per-step draws, matching what a loop of sgm_step calls
    # on the same generator would consume
    uniforms = np.empty((params.steps, X.shape[0]))
    normals = np.empty((params.steps, dim))
    for t in range(params.steps):
        uniforms[t] = rng.random(X.shape[0])
        normals[t] = rng.standard_normal(dim)
    opt = _OPT_IDS[optimizer]
    noise_std = params.sigma * params.clip
    if architecture == "logistic":
        out = _kernels.train_logreg(X, y, data.n_classes, params0, uniforms,
                                    normals, params.q, params.clip, noise_std,
                                    lr, opt)
    else:
        out = _kernels.train_mlp(X, y, data.n_classes, hidden, params0,
                                 uniforms, normals, params.q, params.clip,
                                 noise_std, lr, opt)
    return ModelInstance(out, architecture, seed)


def train_ensemble(data: Dataset, params, instances: int,
                   subset_size: int | None = None, seed: int = 0,
                   architecture: str = "logistic", hidden: int = DEFAULT_HIDDEN,
                   lr: float = DEFAULT_LR,
                   optimizer: str = DEFAULT_OPTIMIZER) -> Ensemble:
    """P independently seeded instances. A numerically failing instance is
    recorded in ensemble.errors without aborting the others."""
    if instances < 1:
        raise ValueError(f"need at least one instance, got {instances}")
    if architecture not in ARCHITECTURES:
        raise ValueError(f"unknown architecture {architecture!r}")
    if optimizer not in _OPT_IDS:
        raise ValueError(f"unknown optimizer {optimizer!r}")
    trained, errors = [], []
    for i, child_seed in enumerate(derive_instance_seeds(seed, instances)):
        try:
            trained.append(_train_one(data, params, architecture, hidden, lr,
                                      optimizer, subset_size, child_seed))
        except Exception as exc:
            errors.append((i, repr(exc)))
    if not trained:
        raise RuntimeError(f"all {instances} instances failed: {errors}")
    return Ensemble(trained, params, architecture, data.n_features,
                    data.n_classes, hidden, seed, subset_size, lr, optimizer,
                    data.n, errors)


def _forward_scores(instance: ModelInstance, X: np.ndarray, n_classes: int,
                    hidden: int) -> np.ndarray:
    m = X.shape[1]
    p = instance.parameters
    if instance.architecture == "logistic":
        Z = X @ p[: m * n_classes].reshape(m, n_classes) + p[m * n_classes:]
    else:
        H = hidden
        o1, o2, o3 = m * H, m * H + H, m * H + H + H * n_classes
        A = np.maximum(X @ p[:o1].reshape(m, H) + p[o1:o2], 0.0)
        Z = A @ p[o2:o3].reshape(H, n_classes) + p[o3:]
    return _kernels._softmax_rows(Z)


def infer(ensemble: Ensemble, x: np.ndarray):
    """Votes and softmax scores of every instance on one input.

    Returns (counts, scores): counts is the (L,) vote histogram over
    instance argmaxes (ties to the lowest label), scores the (P, L) matrix
    of per-instance class scores.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (ensemble.n_features,):
        raise ValueError(
            f"expected feature vector of length {ensemble.n_features}, got {x.shape}")
    scores = np.vstack([
        _forward_scores(inst, x[None, :], ensemble.n_classes, ensemble.hidden)
        for inst in ensemble.instances])
    votes = np.bincount(scores.argmax(axis=1), minlength=ensemble.n_classes)
    return votes, scores


def infer_dataset(ensemble: Ensemble, X: np.ndarray, sample_ids=None):
    """(VoteTable, ScoreTable) over a test matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != ensemble.n_features:
        raise ValueError(f"expected (n, {ensemble.n_features}) test matrix")
    if sample_ids is None:
        sample_ids = tuple(str(i) for i in range(X.shape[0]))
    per_instance = np.stack([
        _forward_scores(inst, X, ensemble.n_classes, ensemble.hidden)
        for inst in ensemble.instances])            # (P, n, L)
    scores = per_instance.transpose(1, 0, 2).copy()  # (n, P, L)
    votes = np.stack([
        np.bincount(s.argmax(axis=1), minlength=ensemble.n_classes)
        for s in scores])
    return (VoteTable(tuple(sample_ids), votes, len(ensemble)),
            ScoreTable(tuple(sample_ids), scores))
