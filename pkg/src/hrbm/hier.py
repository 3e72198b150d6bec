"""Hierarchical correlated prior over class labels.

Each tree edge carries one length-n vector. The label weights of class k are
the sum of the edge vectors on the root-to-leaf path of k, so classes that
share ancestors share parameters. An orthogonality penalty pushes each edge
vector away from the vectors of the edges above it.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .config import EpochRecord, RunMetrics, TrainConfig
from .rbm import RbmParams, apply_gradient, cd1_statistics, predict
from .taxonomy import TaxonomyTree, ancestor_pairs, indicator_matrix, path_edges

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass
class EdgeParams:
    A: np.ndarray  # (m, n), row e is the vector of edge e
    indicator: np.ndarray  # (m, K) 0/1 path indicator
    C: float = 0.0
    penalty_mode: str = "abs"
    paths: Optional[np.ndarray] = None  # (K, max depth) edge ids root->leaf, -1 padded

    def __post_init__(self):
        if self.A.shape[0] != self.indicator.shape[0]:
            raise ValueError(f"{self.A.shape[0]} edge rows but indicator has {self.indicator.shape[0]} edges")
        if self.paths is None:
            # without a tree, sum each path in edge-index order
            cols = [np.flatnonzero(self.indicator[:, k]) for k in range(self.indicator.shape[1])]
            self.paths = _pad(cols)

    @classmethod
    def for_tree(cls, tree: TaxonomyTree, A: np.ndarray, C: float = 0.0, penalty_mode: str = "abs"):
        paths = _pad([path_edges(tree, k) for k in range(tree.num_classes)])
        return cls(np.asarray(A, dtype=float), indicator_matrix(tree), C, penalty_mode, paths)

    def with_A(self, A: np.ndarray) -> "EdgeParams":
        return EdgeParams(A, self.indicator, self.C, self.penalty_mode, self.paths)


def _pad(paths) -> np.ndarray:
    width = max((len(p) for p in paths), default=0)
    out = np.full((len(paths), width), -1, dtype=int)
    for k, p in enumerate(paths):
        out[k, : len(p)] = p
    return out


def compose_U(edges: EdgeParams) -> np.ndarray:
    """Path sums: column k is the sum of the edge rows on class k's path, shape (n, K).

    Terms are added root first, one tree level at a time, so the result does
    not depend on how a matrix product would order the additions.
    """
    A, paths = edges.A, edges.paths
    U = np.zeros((A.shape[1], paths.shape[0]))
    for level in range(paths.shape[1]):
        cols = np.flatnonzero(paths[:, level] >= 0)
        U[:, cols] += A[paths[cols, level]].T
    return U


def _pair_arrays(pairs):
    pairs = np.asarray(list(pairs), dtype=int).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1]


def orthogonal_penalty(edges: EdgeParams, pairs) -> float:
    child, anc = _pair_arrays(pairs)
    if child.size == 0:
        return 0.0
    dots = np.einsum("ij,ij->i", edges.A[child], edges.A[anc])
    if edges.penalty_mode == "raw":
        return float(dots.sum())
    if edges.penalty_mode == "abs":
        return float(np.abs(dots).sum())
    if edges.penalty_mode == "squared":
        return float((dots**2).sum())
    raise ValueError(f"unknown penalty mode {edges.penalty_mode!r}")


def penalty_gradient(edges: EdgeParams, pairs, partial: bool = False) -> np.ndarray:
    """Gradient of ``orthogonal_penalty`` w.r.t. the edge rows.

    With ``partial=True`` only the child side of each pair is kept, i.e. edge
    v receives sum over its ancestors mu of a_mu (scaled per mode), and the
    ancestor side gets nothing.
    """
    A = edges.A
    grad = np.zeros_like(A)
    child, anc = _pair_arrays(pairs)
    if child.size == 0:
        return grad
    dots = np.einsum("ij,ij->i", A[child], A[anc])
    if edges.penalty_mode == "raw":
        scale = np.ones_like(dots)
    elif edges.penalty_mode == "abs":
        scale = np.sign(dots)
    elif edges.penalty_mode == "squared":
        scale = 2.0 * dots
    else:
        raise ValueError(f"unknown penalty mode {edges.penalty_mode!r}")
    np.add.at(grad, child, scale[:, None] * A[anc])
    if not partial:
        np.add.at(grad, anc, scale[:, None] * A[child])
    return grad


def hier_gradient(grad_U: np.ndarray, edges: EdgeParams, pairs, partial: bool = False) -> np.ndarray:
    """Route an ascent gradient on U to the edge rows and subtract the weighted penalty gradient."""
    n, K = grad_U.shape
    if edges.indicator.shape[1] != K or edges.A.shape[1] != n:
        raise ValueError(f"grad_U shape {grad_U.shape} does not match edge parameters {edges.A.shape}")
    routed = edges.indicator @ grad_U.T
    return routed - edges.C * penalty_gradient(edges, pairs, partial)


# ---------------------------------------------------------------------------
# training


def make_batches(num_examples: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffle once and cut into consecutive batches."""
    perm = rng.permutation(num_examples)
    return [perm[i : i + batch_size] for i in range(0, num_examples, batch_size)]


def fit_cd(
    params: RbmParams,
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    rng: np.random.Generator,
    step: Callable[[RbmParams, RbmParams], RbmParams],
    penalty: Callable[[], float] = lambda: 0.0,
    on_epoch: Optional[Callable[[int, RbmParams], None]] = None,
) -> tuple[RbmParams, RunMetrics]:
    """CD-1 mini-batch loop shared by the flat and hierarchical trainers.

    ``step(params, grad)`` returns the updated parameters for one batch.
    """
    start = time.perf_counter()
    metrics = RunMetrics(config=config.to_dict())
    batches = make_batches(len(X), config.batch_size, rng)
    for epoch in range(1, config.epochs + 1):
        sq_err = 0.0
        for i, idx in enumerate(batches):
            grad, recon = cd1_statistics(params, X[idx], y[idx], rng)
            sq_err += float(((X[idx] - recon) ** 2).sum())
            try:
                params = step(params, grad)
            except FloatingPointError as exc:
                raise TrainingError(f"epoch {epoch}, batch {i}: {exc}") from exc
            if not params.is_finite():
                raise TrainingError(f"epoch {epoch}, batch {i}: parameters became non-finite")
        record = EpochRecord(
            epoch=epoch,
            recon_error=sq_err / X.size,
            penalty=penalty(),
            train_error=float(np.mean(predict(params, X) != y)),
        )
        metrics.epochs.append(record)
        log.info("epoch %d recon %.5f penalty %.5g train_err %.4f", epoch, record.recon_error, record.penalty, record.train_error)
        if on_epoch is not None:
            on_epoch(epoch, params)
    metrics.seconds = time.perf_counter() - start
    return params, metrics


def check_labels(y: np.ndarray, tree: TaxonomyTree):
    if len(y) and (y.min() < 0 or y.max() >= tree.num_classes):
        raise ValueError(f"labels outside the tree's {tree.num_classes} classes")


def train_hcrbm(
    X: np.ndarray,
    y: np.ndarray,
    tree: TaxonomyTree,
    config: TrainConfig,
    rng: np.random.Generator,
    on_epoch: Optional[Callable[[int, RbmParams], None]] = None,
) -> tuple[RbmParams, EdgeParams, RunMetrics]:
    """Train the hierarchical-prior RBM.

    Per batch: CD-1 gradient, direct update of W, b, c and d_bias, the U
    gradient routed to the edge vectors (minus the weighted penalty gradient),
    an edge update, then U recomposed from the edges.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    check_labels(y, tree)
    n, d, K = config.n_hidden, X.shape[1], tree.num_classes
    W = rng.normal(0.0, 0.01, size=(n, d))
    edges = EdgeParams.for_tree(tree, rng.normal(0.0, 0.01, size=(tree.num_edges, n)), config.C, config.penalty)
    pairs = ancestor_pairs(tree)
    params = RbmParams(W, np.zeros(d), np.zeros(n), np.zeros(K), compose_U(edges))
    state = {"edges": edges}

    def step(p: RbmParams, grad: RbmParams) -> RbmParams:
        e = state["edges"]
        if not np.all(np.isfinite(grad.U)):
            raise FloatingPointError("non-finite gradient in block U")
        new = apply_gradient(p, grad, config.lr)
        grad_A = hier_gradient(grad.U, e, pairs, partial=config.paper_partial_grad)
        e = e.with_A(e.A + config.lr * grad_A)
        state["edges"] = e
        new.U = compose_U(e)
        return new

    params, metrics = fit_cd(
        params, X, y, config, rng, step,
        penalty=lambda: orthogonal_penalty(state["edges"], pairs),
        on_epoch=on_epoch,
    )
    return params, state["edges"], metrics
