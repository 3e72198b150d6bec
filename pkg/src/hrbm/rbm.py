"""Classification RBM: energy, exact class posterior, Gibbs conditionals and CD-1.

Shapes: ``W`` is (n, d), ``b`` (d,), ``c`` (n,), ``d_bias`` (K,), ``U`` (n, K).
Batched functions take ``X`` of shape (B, d) and integer labels ``y`` of shape (B,).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, fields

import numpy as np
from scipy.special import expit, log_softmax, logsumexp

MAX_ENUM_DIM = 14


@dataclass
class RbmParams:
    W: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d_bias: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        n, d = self.W.shape
        K = self.d_bias.shape[0]
        if self.b.shape != (d,) or self.c.shape != (n,) or self.U.shape != (n, K):
            raise ValueError(
                f"inconsistent shapes: W{self.W.shape} b{self.b.shape} c{self.c.shape} "
                f"d_bias{self.d_bias.shape} U{self.U.shape}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        """(n_hidden, n_visible, n_classes)."""
        return self.W.shape[0], self.W.shape[1], self.d_bias.shape[0]

    @classmethod
    def zeros(cls, n: int, d: int, K: int):
        return cls(np.zeros((n, d)), np.zeros(d), np.zeros(n), np.zeros(K), np.zeros((n, K)))

    def blocks(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def copy(self):
        return type(self)(**{k: v.copy() for k, v in self.blocks().items()})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.blocks().values())


class GradientSet(RbmParams):
    """Per-block gradient of the log-likelihood (ascent orientation)."""


def init_params(n: int, d: int, K: int, rng: np.random.Generator, scale: float = 0.01) -> RbmParams:
    """W and the per-class label weights ~ N(0, scale^2); biases zero.

    W is drawn first, then U as K per-class rows, so a star-tree edge
    parameterization drawn as (K, n) consumes the stream identically.
    """
    W = rng.normal(0.0, scale, size=(n, d))
    U = rng.normal(0.0, scale, size=(K, n)).T.copy()
    return RbmParams(W, np.zeros(d), np.zeros(n), np.zeros(K), U)


def _onehot(y, K: int) -> np.ndarray:
    y = np.asarray(y)
    out = np.zeros(y.shape + (K,))
    np.put_along_axis(out, y[..., None], 1.0, axis=-1)
    return out


def energy(params: RbmParams, y: int, x, h) -> float:
    x = np.asarray(x, dtype=float)
    h = np.asarray(h, dtype=float)
    n, d, K = params.shape
    if x.shape != (d,) or h.shape != (n,):
        raise ValueError(f"expected x of shape ({d},) and h of shape ({n},)")
    return float(
        -h @ params.W @ x - params.b @ x - params.c @ h - params.d_bias[y] - h @ params.U[:, y]
    )


def class_log_scores(params: RbmParams, X) -> np.ndarray:
    """Unnormalized log p(y|x): d_y + sum_j softplus(c_j + U_jy + W_j.x), shape (B, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pre = X @ params.W.T + params.c
    act = pre[:, :, None] + params.U[None, :, :]
    return params.d_bias + np.logaddexp(0.0, act).sum(axis=1)


def class_posterior(params: RbmParams, X) -> np.ndarray:
    """Exact p(y|x); one row per input (a 1-D input gives a 1-D result)."""
    X = np.asarray(X, dtype=float)
    out = np.exp(log_softmax(class_log_scores(params, X), axis=1))
    return out[0] if X.ndim == 1 else out


def predict(params: RbmParams, X) -> np.ndarray:
    """Argmax of the class posterior; ties go to the lowest class index."""
    return np.argmax(class_log_scores(params, X), axis=1)


def hidden_given_xy(params: RbmParams, X, y) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return expit(X @ params.W.T + params.c + params.U[:, y].T)


def hidden_given_x(params: RbmParams, X) -> np.ndarray:
    """E[h | x], marginalizing the label with the exact class posterior."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    post = class_posterior(params, X)
    pre = X @ params.W.T + params.c
    return np.einsum("bk,bjk->bj", post, expit(pre[:, :, None] + params.U[None]))


def visible_given_h(params: RbmParams, h) -> np.ndarray:
    return expit(np.asarray(h, dtype=float) @ params.W + params.b)


def label_given_h(params: RbmParams, h) -> np.ndarray:
    logits = np.asarray(h, dtype=float) @ params.U + params.d_bias
    return np.exp(log_softmax(logits, axis=-1))


def cd1_statistics(params: RbmParams, X, y, rng: np.random.Generator):
    """One Gibbs step from the data; returns (gradient, reconstructed visible means)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    B = X.shape[0]
    n, d, K = params.shape
    Y = _onehot(y, K)

    h0 = expit(X @ params.W.T + params.c + Y @ params.U.T)
    h_sample = (rng.random(h0.shape) < h0).astype(float)
    v1 = visible_given_h(params, h_sample)
    y1 = label_given_h(params, h_sample)
    h1 = expit(v1 @ params.W.T + params.c + y1 @ params.U.T)

    grad = GradientSet(
        W=(h0.T @ X - h1.T @ v1) / B,
        b=(X - v1).mean(axis=0),
        c=(h0 - h1).mean(axis=0),
        d_bias=(Y - y1).mean(axis=0),
        U=(h0.T @ Y - h1.T @ y1) / B,
    )
    return grad, v1


def cd1_gradient(params: RbmParams, X, y, rng: np.random.Generator) -> GradientSet:
    """CD-1 estimate of the log-likelihood gradient, averaged over the batch.

    The positive phase uses exact hidden means; the negative phase samples h
    once, reconstructs visible means and the label distribution, then takes
    hidden means again.
    """
    return cd1_statistics(params, X, y, rng)[0]


def apply_gradient(params: RbmParams, grads: RbmParams, lr: float) -> RbmParams:
    """Gradient ascent step on every block; returns new parameters."""
    if lr < 0:
        raise ValueError("learning rate must be nonnegative")
    if not grads.is_finite():
        bad = [k for k, v in grads.blocks().items() if not np.all(np.isfinite(v))]
        raise FloatingPointError(f"non-finite gradient in blocks {bad}")
    g = grads.blocks()
    return RbmParams(**{k: v + lr * g[k] for k, v in params.blocks().items()})


# ---------------------------------------------------------------------------
# exact oracles for small models


def _check_enumerable(params: RbmParams):
    n, d, _ = params.shape
    if n > MAX_ENUM_DIM or d > MAX_ENUM_DIM:
        raise ValueError(f"n={n}, d={d} too large for exact enumeration (max {MAX_ENUM_DIM})")


def all_binary(dim: int) -> np.ndarray:
    return np.array(list(itertools.product((0.0, 1.0), repeat=dim))).reshape(-1, dim)


def log_unnormalized(params: RbmParams, X, y) -> np.ndarray:
    """log sum_h exp(-E(y, x, h)) with h summed in closed form."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    pre = X @ params.W.T + params.c + params.U[:, y].T
    return X @ params.b + params.d_bias[y] + np.logaddexp(0.0, pre).sum(axis=1)


def log_partition(params: RbmParams) -> float:
    _check_enumerable(params)
    n, d, K = params.shape
    Xs = all_binary(d)
    terms = [log_unnormalized(params, Xs, np.full(len(Xs), k)) for k in range(K)]
    return float(logsumexp(np.concatenate(terms)))


def exact_joint_loglik(params: RbmParams, x, y: int) -> float:
    """log p(x, y) by enumerating every binary visible vector and label."""
    _check_enumerable(params)
    return float(log_unnormalized(params, x, np.atleast_1d(y))[0] - log_partition(params))


def _sufficient_stats(params: RbmParams, X, y, weights) -> GradientSet:
    K = params.shape[2]
    Y = _onehot(y, K)
    H = hidden_given_xy(params, X, y)
    w = weights[:, None]
    return GradientSet(
        W=(w * H).T @ X, b=weights @ X, c=weights @ H, d_bias=weights @ Y, U=(w * H).T @ Y
    )


def exact_gradient(params: RbmParams, X, y) -> GradientSet:
    """Gradient of the mean exact log p(x, y): data expectation minus model expectation."""
    _check_enumerable(params)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.atleast_1d(y)
    n, d, K = params.shape
    data = _sufficient_stats(params, X, y, np.full(len(X), 1.0 / len(X)))

    Xs = all_binary(d)
    Xall = np.tile(Xs, (K, 1))
    yall = np.repeat(np.arange(K), len(Xs))
    logp = log_unnormalized(params, Xall, yall)
    model = _sufficient_stats(params, Xall, yall, np.exp(logp - logsumexp(logp)))
    m = model.blocks()
    return GradientSet(**{k: v - m[k] for k, v in data.blocks().items()})
