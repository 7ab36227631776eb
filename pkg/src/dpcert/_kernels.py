"""Hot numeric kernels, in numba and pure-numpy builds.

Two inner loops dominate runtime: the integer-order log-moment sum of the
privacy accountant (evaluated for every order at every probed radius during
certification) and the per-example gradient loop of the noisy trainer (the
attack oracle retrains thousands of micro models). Each kernel exists as a
``*_numpy`` function and, when numba is active, an equivalent ``*_numba``
function; the unsuffixed name dispatches to the active backend.

The trainer kernels consume pre-drawn randomness (per-step inclusion
uniforms and noise normals) so that a given seed produces the same model on
either backend up to float summation order.
"""

import math

import numpy as np
from scipy.special import gammaln

from .backend import using_numba

# optimiser ids shared by both builds
OPT_SGD = 0
OPT_ADAM = 1

_ADAM_B1 = 0.9
_ADAM_B2 = 0.999
_ADAM_EPS = 1e-8


# ---------------------------------------------------------------------------
# accountant kernel: integer-order mixture moment
#
# log E_{z~N(0,s^2)}[ ((1-q) + q e^{(2z-1)/(2s^2)})^a ]
#   = logsumexp_k [ log C(a,k) + k log q + (a-k) log(1-q) + k(k-1)/(2s^2) ]
# ---------------------------------------------------------------------------

def log_moment_int_numpy(alphas: np.ndarray, q: float, sigma: float) -> np.ndarray:
    """Closed-form log moment for an array of integer orders, q in (0,1)."""
    alphas = np.asarray(alphas, dtype=np.int64)
    amax = int(alphas.max())
    k = np.arange(amax + 1, dtype=np.float64)
    a = alphas[:, None].astype(np.float64)
    terms = (
        gammaln(a + 1.0)
        - gammaln(k[None, :] + 1.0)
        - gammaln(a - k[None, :] + 1.0)
        + k[None, :] * math.log(q)
        + (a - k[None, :]) * math.log1p(-q)
        + k[None, :] * (k[None, :] - 1.0) / (2.0 * sigma * sigma)
    )
    terms = np.where(k[None, :] <= a, terms, -np.inf)
    peak = terms.max(axis=1, keepdims=True)
    return (peak + np.log(np.exp(terms - peak).sum(axis=1, keepdims=True)))[:, 0]


if using_numba():
    from numba import njit

    @njit(cache=True)
    def _log_moment_int_kernel(alphas, q, sigma):  # pragma: no cover - jitted
        out = np.empty(alphas.shape[0])
        log_q = math.log(q)
        log_1q = math.log1p(-q)
        inv2s2 = 1.0 / (2.0 * sigma * sigma)
        for i in range(alphas.shape[0]):
            a = alphas[i]
            la = math.lgamma(a + 1.0)
            peak = -np.inf
            terms = np.empty(a + 1)
            for k in range(a + 1):
                t = (
                    la
                    - math.lgamma(k + 1.0)
                    - math.lgamma(a - k + 1.0)
                    + k * log_q
                    + (a - k) * log_1q
                    + k * (k - 1.0) * inv2s2
                )
                terms[k] = t
                if t > peak:
                    peak = t
            acc = 0.0
            for k in range(a + 1):
                acc += math.exp(terms[k] - peak)
            out[i] = peak + math.log(acc)
        return out

    def log_moment_int_numba(alphas: np.ndarray, q: float, sigma: float) -> np.ndarray:
        return _log_moment_int_kernel(
            np.ascontiguousarray(alphas, dtype=np.int64), float(q), float(sigma)
        )

    log_moment_int = log_moment_int_numba
else:
    log_moment_int_numba = None
    log_moment_int = log_moment_int_numpy


# ---------------------------------------------------------------------------
# trainer kernels
#
# One instance = `steps` noisy updates. Step t: Poisson-select examples with
# uniforms[t] < q, per-example softmax cross-entropy gradient, clip each to
# l2 norm <= clip, sum, add N(0, noise_std^2) per coordinate, divide by the
# expected batch size q*n, apply SGD or Adam.
#
# Flat parameter layouts:
#   logistic: W (m,L) row-major, then b (L)
#   mlp:      W1 (m,H), b1 (H), W2 (H,L), b2 (L)
# ---------------------------------------------------------------------------

def _softmax_rows(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _adam_update(params, grad, m, v, t, lr):
    m *= _ADAM_B1
    m += (1.0 - _ADAM_B1) * grad
    v *= _ADAM_B2
    v += (1.0 - _ADAM_B2) * grad * grad
    mhat = m / (1.0 - _ADAM_B1 ** t)
    vhat = v / (1.0 - _ADAM_B2 ** t)
    params -= lr * mhat / (np.sqrt(vhat) + _ADAM_EPS)


def logreg_grad_sum_numpy(W, b, Xb, yb, clip):
    """Clipped per-example gradient sum for softmax regression.

    Returns (gW, gb). Per-example gradient of the cross-entropy loss is the
    outer product x d^T with d = softmax(xW+b) - onehot(y), so its squared
    norm factors as (1 + |x|^2) |d|^2.
    """
    D = _softmax_rows(Xb @ W + b)
    D[np.arange(Xb.shape[0]), yb] -= 1.0
    norms = np.sqrt((1.0 + (Xb * Xb).sum(axis=1)) * (D * D).sum(axis=1))
    factor = np.ones_like(norms)
    over = norms > clip
    factor[over] = clip / norms[over]
    Df = D * factor[:, None]
    return Xb.T @ Df, Df.sum(axis=0)


def mlp_grad_sum_numpy(W1, b1, W2, b2, Xb, yb, clip):
    """Clipped per-example gradient sum for the one-hidden-layer relu MLP."""
    A1 = Xb @ W1 + b1
    H1 = np.maximum(A1, 0.0)
    D = _softmax_rows(H1 @ W2 + b2)
    D[np.arange(Xb.shape[0]), yb] -= 1.0
    dH = (D @ W2.T) * (A1 > 0.0)
    norms = np.sqrt(
        (1.0 + (H1 * H1).sum(axis=1)) * (D * D).sum(axis=1)
        + (1.0 + (Xb * Xb).sum(axis=1)) * (dH * dH).sum(axis=1)
    )
    factor = np.ones_like(norms)
    over = norms > clip
    factor[over] = clip / norms[over]
    Df = D * factor[:, None]
    dHf = dH * factor[:, None]
    return Xb.T @ dHf, dHf.sum(axis=0), H1.T @ Df, Df.sum(axis=0)


def logreg_step_numpy(params, mom, vel, t, X, y, n_classes, mask, noise,
                      q, clip, noise_std, lr, optimizer):
    """One noisy update in place; t is the 1-based update index (Adam bias
    correction)."""
    n, m = X.shape
    L = n_classes
    grad = np.zeros_like(params)
    if mask.any():
        W = params[: m * L].reshape(m, L)
        b = params[m * L:]
        gW, gb = logreg_grad_sum_numpy(W, b, X[mask], y[mask], clip)
        grad[: m * L] = gW.ravel()
        grad[m * L:] = gb
    grad += noise_std * noise
    grad *= 1.0 / (q * n)
    if optimizer == OPT_ADAM:
        _adam_update(params, grad, mom, vel, t, lr)
    else:
        params -= lr * grad


def mlp_step_numpy(params, mom, vel, t, X, y, n_classes, hidden, mask, noise,
                   q, clip, noise_std, lr, optimizer):
    n, m = X.shape
    L, H = n_classes, hidden
    o1, o2, o3 = m * H, m * H + H, m * H + H + H * L
    grad = np.zeros_like(params)
    if mask.any():
        W1 = params[:o1].reshape(m, H)
        b1 = params[o1:o2]
        W2 = params[o2:o3].reshape(H, L)
        b2 = params[o3:]
        gW1, gb1, gW2, gb2 = mlp_grad_sum_numpy(
            W1, b1, W2, b2, X[mask], y[mask], clip)
        grad[:o1] = gW1.ravel()
        grad[o1:o2] = gb1
        grad[o2:o3] = gW2.ravel()
        grad[o3:] = gb2
    grad += noise_std * noise
    grad *= 1.0 / (q * n)
    if optimizer == OPT_ADAM:
        _adam_update(params, grad, mom, vel, t, lr)
    else:
        params -= lr * grad


def train_logreg_numpy(X, y, n_classes, params0, uniforms, normals,
                       q, clip, noise_std, lr, optimizer):
    params = params0.copy()
    mom = np.zeros_like(params)
    vel = np.zeros_like(params)
    for t in range(uniforms.shape[0]):
        logreg_step_numpy(params, mom, vel, t + 1, X, y, n_classes,
                          uniforms[t] < q, normals[t],
                          q, clip, noise_std, lr, optimizer)
    return params


def train_mlp_numpy(X, y, n_classes, hidden, params0, uniforms, normals,
                    q, clip, noise_std, lr, optimizer):
    params = params0.copy()
    mom = np.zeros_like(params)
    vel = np.zeros_like(params)
    for t in range(uniforms.shape[0]):
        mlp_step_numpy(params, mom, vel, t + 1, X, y, n_classes, hidden,
                       uniforms[t] < q, normals[t],
                       q, clip, noise_std, lr, optimizer)
    return params


if using_numba():

    @njit(cache=True)
    def _train_logreg_kernel(X, y, L, params0, uniforms, normals,
                             q, clip, noise_std, lr, optimizer):  # pragma: no cover
        n, m = X.shape
        dim = params0.shape[0]
        params = params0.copy()
        mom = np.zeros(dim)
        vel = np.zeros(dim)
        grad = np.empty(dim)
        z = np.empty(L)
        scale = 1.0 / (q * n)
        for t in range(uniforms.shape[0]):
            for j in range(dim):
                grad[j] = 0.0
            for e in range(n):
                if uniforms[t, e] >= q:
                    continue
                x2 = 0.0
                for f in range(m):
                    x2 += X[e, f] * X[e, f]
                zmax = -np.inf
                for c in range(L):
                    acc = params[m * L + c]
                    for f in range(m):
                        acc += X[e, f] * params[f * L + c]
                    z[c] = acc
                    if acc > zmax:
                        zmax = acc
                zsum = 0.0
                for c in range(L):
                    z[c] = math.exp(z[c] - zmax)
                    zsum += z[c]
                d2 = 0.0
                for c in range(L):
                    z[c] /= zsum
                    if c == y[e]:
                        z[c] -= 1.0
                    d2 += z[c] * z[c]
                norm = math.sqrt((1.0 + x2) * d2)
                factor = 1.0
                if norm > clip:
                    factor = clip / norm
                for c in range(L):
                    dc = factor * z[c]
                    for f in range(m):
                        grad[f * L + c] += X[e, f] * dc
                    grad[m * L + c] += dc
            for j in range(dim):
                grad[j] = (grad[j] + noise_std * normals[t, j]) * scale
            if optimizer == OPT_ADAM:
                bc1 = 1.0 - _ADAM_B1 ** (t + 1)
                bc2 = 1.0 - _ADAM_B2 ** (t + 1)
                for j in range(dim):
                    mom[j] = _ADAM_B1 * mom[j] + (1.0 - _ADAM_B1) * grad[j]
                    vel[j] = _ADAM_B2 * vel[j] + (1.0 - _ADAM_B2) * grad[j] * grad[j]
                    params[j] -= lr * (mom[j] / bc1) / (math.sqrt(vel[j] / bc2) + _ADAM_EPS)
            else:
                for j in range(dim):
                    params[j] -= lr * grad[j]
        return params

    @njit(cache=True)
    def _train_mlp_kernel(X, y, L, H, params0, uniforms, normals,
                          q, clip, noise_std, lr, optimizer):  # pragma: no cover
        n, m = X.shape
        dim = params0.shape[0]
        o1 = m * H
        o2 = o1 + H
        o3 = o2 + H * L
        params = params0.copy()
        mom = np.zeros(dim)
        vel = np.zeros(dim)
        grad = np.empty(dim)
        a1 = np.empty(H)
        h1 = np.empty(H)
        z = np.empty(L)
        dh = np.empty(H)
        scale = 1.0 / (q * n)
        for t in range(uniforms.shape[0]):
            for j in range(dim):
                grad[j] = 0.0
            for e in range(n):
                if uniforms[t, e] >= q:
                    continue
                x2 = 0.0
                for f in range(m):
                    x2 += X[e, f] * X[e, f]
                h2 = 0.0
                for u in range(H):
                    acc = params[o1 + u]
                    for f in range(m):
                        acc += X[e, f] * params[f * H + u]
                    a1[u] = acc
                    h1[u] = acc if acc > 0.0 else 0.0
                    h2 += h1[u] * h1[u]
                zmax = -np.inf
                for c in range(L):
                    acc = params[o3 + c]
                    for u in range(H):
                        acc += h1[u] * params[o2 + u * L + c]
                    z[c] = acc
                    if acc > zmax:
                        zmax = acc
                zsum = 0.0
                for c in range(L):
                    z[c] = math.exp(z[c] - zmax)
                    zsum += z[c]
                d2 = 0.0
                for c in range(L):
                    z[c] /= zsum
                    if c == y[e]:
                        z[c] -= 1.0
                    d2 += z[c] * z[c]
                dh2 = 0.0
                for u in range(H):
                    acc = 0.0
                    if a1[u] > 0.0:
                        for c in range(L):
                            acc += z[c] * params[o2 + u * L + c]
                    dh[u] = acc
                    dh2 += acc * acc
                norm = math.sqrt((1.0 + h2) * d2 + (1.0 + x2) * dh2)
                factor = 1.0
                if norm > clip:
                    factor = clip / norm
                for u in range(H):
                    du = factor * dh[u]
                    for f in range(m):
                        grad[f * H + u] += X[e, f] * du
                    grad[o1 + u] += du
                for c in range(L):
                    dc = factor * z[c]
                    for u in range(H):
                        grad[o2 + u * L + c] += h1[u] * dc
                    grad[o3 + c] += dc
            for j in range(dim):
                grad[j] = (grad[j] + noise_std * normals[t, j]) * scale
            if optimizer == OPT_ADAM:
                bc1 = 1.0 - _ADAM_B1 ** (t + 1)
                bc2 = 1.0 - _ADAM_B2 ** (t + 1)
                for j in range(dim):
                    mom[j] = _ADAM_B1 * mom[j] + (1.0 - _ADAM_B1) * grad[j]
                    vel[j] = _ADAM_B2 * vel[j] + (1.0 - _ADAM_B2) * grad[j] * grad[j]
                    params[j] -= lr * (mom[j] / bc1) / (math.sqrt(vel[j] / bc2) + _ADAM_EPS)
            else:
                for j in range(dim):
                    params[j] -= lr * grad[j]
        return params

    def train_logreg_numba(X, y, n_classes, params0, uniforms, normals,
                           q, clip, noise_std, lr, optimizer):
        return _train_logreg_kernel(
            np.ascontiguousarray(X), np.ascontiguousarray(y, dtype=np.int64),
            n_classes, np.ascontiguousarray(params0),
            np.ascontiguousarray(uniforms), np.ascontiguousarray(normals),
            float(q), float(clip), float(noise_std), float(lr), int(optimizer))

    def train_mlp_numba(X, y, n_classes, hidden, params0, uniforms, normals,
                        q, clip, noise_std, lr, optimizer):
        return _train_mlp_kernel(
            np.ascontiguousarray(X), np.ascontiguousarray(y, dtype=np.int64),
            n_classes, hidden, np.ascontiguousarray(params0),
            np.ascontiguousarray(uniforms), np.ascontiguousarray(normals),
            float(q), float(clip), float(noise_std), float(lr), int(optimizer))

    train_logreg = train_logreg_numba
    train_mlp = train_mlp_numba
else:
    train_logreg_numba = None
    train_mlp_numba = None
    train_logreg = train_logreg_numpy
    train_mlp = train_mlp_numpy
