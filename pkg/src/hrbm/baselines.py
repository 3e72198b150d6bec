"""Comparison systems: flat classification RBM, top-down RBM cascades, MNL and corrMNL."""
from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import log_softmax

from .config import EpochRecord, RunMetrics, TrainConfig
from .hier import EdgeParams, check_labels, compose_U, fit_cd, hier_gradient, make_batches
from .rbm import RbmParams, apply_gradient, class_posterior, hidden_given_x, init_params
from .taxonomy import TaxonomyTree

log = logging.getLogger(__name__)

# d_bias given to a child that never occurs in a node's training data; exp() underflows to 0.
ABSENT_CLASS_BIAS = -1.0e4


def _num_classes(y, K):
    return int(K) if K is not None else int(np.max(y)) + 1


def train_flat_rbm(
    X, y, config: TrainConfig, rng: np.random.Generator, K: Optional[int] = None,
    on_epoch: Optional[Callable[[int, RbmParams], None]] = None,
) -> tuple[RbmParams, RunMetrics]:
    """Classification RBM with an unconstrained U, trained by CD-1."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    params = init_params(config.n_hidden, X.shape[1], _num_classes(y, K), rng)
    return fit_cd(params, X, y, config, rng, lambda p, g: apply_gradient(p, g, config.lr), on_epoch=on_epoch)


# ---------------------------------------------------------------------------
# top-down cascades


@dataclass
class CascadeNode:
    node: int
    children: tuple[int, ...]
    params: Optional[RbmParams] = None  # None when the node has a single child

    def child_proba(self, X) -> np.ndarray:
        if self.params is None:
            return np.ones((len(X), len(self.children)))
        return class_posterior(self.params, X)


@dataclass
class Cascade:
    tree: TaxonomyTree
    nodes: dict[int, CascadeNode] = field(default_factory=dict)
    projected: bool = False  # HHRBM: children consume the parent's hidden means

    def __len__(self):
        return len(self.nodes)


def _child_index_of_class(tree: TaxonomyTree, node: int) -> np.ndarray:
    """For each class, which child subtree of ``node`` contains it (-1 if none)."""
    out = np.full(tree.num_classes, -1)
    for i, child in enumerate(tree.children[node]):
        out[list(tree.classes_under(child))] = i
    return out


def _train_node(X, local_y, n_children, n_hidden, config, rng, name):
    present = np.bincount(local_y, minlength=n_children) > 0
    if not present.any():
        warnings.warn(f"node {name!r}: no training examples; classifier left untrained")
        return RbmParams.zeros(n_hidden, X.shape[1], n_children)
    params, _ = train_flat_rbm(X, local_y, config.replace(hidden=n_hidden), rng, K=n_children)
    if not present.all():
        warnings.warn(f"node {name!r}: child subtrees {np.flatnonzero(~present).tolist()} have no examples")
        params.d_bias[~present] = ABSENT_CLASS_BIAS
    return params


def _fit_cascade(X, y, tree, config, rng, widths=None) -> Cascade:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    check_labels(y, tree)
    if not tree.internal_nodes:
        raise ValueError("tree has no internal node")
    cascade = Cascade(tree, projected=widths is not None)
    inputs = {tree.root: (X, y)}
    for node in tree.internal_nodes:
        Xn, yn = inputs[node]
        children = tree.children[node]
        if len(children) == 1:
            cascade.nodes[node] = CascadeNode(node, children)
            inputs[children[0]] = (Xn, yn)
            continue
        which = _child_index_of_class(tree, node)[yn]
        keep = which >= 0
        Xn, yn, which = Xn[keep], yn[keep], which[keep]
        width = config.n_hidden if widths is None else int(widths[min(tree.depth[node], len(widths) - 1)])
        params = _train_node(Xn, which, len(children), width, config, rng, tree.names[node])
        cascade.nodes[node] = CascadeNode(node, children, params)
        rep = hidden_given_x(params, Xn) if cascade.projected else Xn
        for i, child in enumerate(children):
            inputs[child] = (rep[which == i], yn[which == i])
    return cascade


def train_cascade(X, y, tree: TaxonomyTree, config: TrainConfig, rng: np.random.Generator, mode: str = "soft") -> Cascade:
    """One classification RBM per internal node, trained on the examples below it.

    Each node's labels say which child subtree holds the example's leaf. ``mode``
    only affects inference and is accepted for symmetry with ``cascade_predict``.
    """
    if mode not in ("hard", "soft"):
        raise ValueError(f"unknown cascade mode {mode!r}")
    return _fit_cascade(X, y, tree, config, rng)


def train_hhrbm(X, y, tree: TaxonomyTree, config: TrainConfig, rng: np.random.Generator) -> Cascade:
    """Cascade whose non-root nodes train on their parent's hidden means E[h|x].

    ``config.hidden`` gives one width per tree level; deeper levels reuse the last.
    """
    widths = config.hidden if isinstance(config.hidden, tuple) else (config.hidden,)
    return _fit_cascade(X, y, tree, config, rng, widths=widths)


def _node_inputs(cascade: Cascade, X):
    """Yield (node, input, child probabilities) in preorder."""
    tree = cascade.tree
    reps = {tree.root: X}
    for v in tree.internal_nodes:
        cn = cascade.nodes[v]
        Xv = reps[v]
        proba = cn.child_proba(Xv)
        rep = hidden_given_x(cn.params, Xv) if cascade.projected and cn.params is not None else Xv
        for child in cn.children:
            reps[child] = rep
        yield v, proba


def cascade_scores(cascade: Cascade, X) -> np.ndarray:
    """Soft scores: product of child-selection probabilities along each class path, shape (B, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    tree = cascade.tree
    reach = {tree.root: np.ones(len(X))}
    for v, proba in _node_inputs(cascade, X):
        for i, child in enumerate(tree.children[v]):
            reach[child] = reach[v] * proba[:, i]
    return np.stack([reach[leaf] for leaf in tree.leaf_of_class], axis=1)


def cascade_route(cascade: Cascade, X) -> tuple[np.ndarray, np.ndarray]:
    """Hard routing: follow the argmax child from the root. Returns (class, nodes visited below root)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    tree = cascade.tree
    at = np.full(len(X), tree.root)
    steps = np.zeros(len(X), dtype=int)
    for v, proba in _node_inputs(cascade, X):
        here = at == v
        at[here] = np.asarray(tree.children[v])[np.argmax(proba[here], axis=1)]
        steps[here] += 1
    return np.array([tree.class_of_leaf[int(v)] for v in at], dtype=int), steps


def cascade_predict(cascade: Cascade, X, mode: str = "soft") -> np.ndarray:
    if mode == "soft":
        return np.argmax(cascade_scores(cascade, X), axis=1)
    if mode == "hard":
        return cascade_route(cascade, X)[0]
    raise ValueError(f"unknown cascade mode {mode!r}")


# ---------------------------------------------------------------------------
# multinomial logit


@dataclass
class LinearLogit:
    coef: np.ndarray  # (d, K)
    bias: np.ndarray  # (K,)
    edges: Optional[EdgeParams] = None  # corrMNL: coef == compose_U(edges)

    def scores(self, X) -> np.ndarray:
        return np.atleast_2d(np.asarray(X, dtype=float)) @ self.coef + self.bias

    def posterior(self, X) -> np.ndarray:
        return np.exp(log_softmax(self.scores(X), axis=1))

    def predict(self, X) -> np.ndarray:
        return np.argmax(self.scores(X), axis=1)


def mnl_loglik(coef, bias, X, y) -> float:
    """Mean conditional log-likelihood."""
    logp = log_softmax(np.asarray(X, dtype=float) @ coef + bias, axis=1)
    return float(logp[np.arange(len(y)), y].mean())


def mnl_gradient(coef, bias, X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    p = np.exp(log_softmax(X @ coef + bias, axis=1))
    p[np.arange(len(y)), y] -= 1.0
    return -(X.T @ p) / len(y), -p.mean(axis=0)


def _fit_logit(model: LinearLogit, X, y, config, rng, on_epoch):
    start = time.perf_counter()
    metrics = RunMetrics(config=config.to_dict())
    batches = make_batches(len(X), config.batch_size, rng)
    for epoch in range(1, config.epochs + 1):
        for idx in batches:
            g_coef, g_bias = mnl_gradient(model.coef, model.bias, X[idx], y[idx])
            if model.edges is None:
                model.coef = model.coef + config.lr * g_coef
            else:
                grad_A = hier_gradient(g_coef, model.edges, ())
                model.edges = model.edges.with_A(model.edges.A + config.lr * grad_A)
                model.coef = compose_U(model.edges)
            model.bias = model.bias + config.lr * g_bias
        metrics.epochs.append(
            EpochRecord(epoch=epoch, recon_error=None, penalty=0.0, train_error=float(np.mean(model.predict(X) != y)))
        )
        if on_epoch is not None:
            on_epoch(epoch, model)
    metrics.seconds = time.perf_counter() - start
    return model, metrics


def train_mnl(X, y, config: TrainConfig, rng: np.random.Generator, K: Optional[int] = None, on_epoch=None):
    """Softmax regression by mini-batch gradient ascent, zero-initialized."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    K = _num_classes(y, K)
    model = LinearLogit(np.zeros((X.shape[1], K)), np.zeros(K))
    return _fit_logit(model, X, y, config, rng, on_epoch)


def corrmnl_gradient(edges: EdgeParams, bias, X, y) -> tuple[np.ndarray, np.ndarray]:
    """Gradient of the mean conditional log-likelihood w.r.t. the edge rows and the bias."""
    g_coef, g_bias = mnl_gradient(compose_U(edges), bias, X, y)
    return edges.indicator @ g_coef.T, g_bias


def train_corrmnl(X, y, tree: TaxonomyTree, config: TrainConfig, rng: np.random.Generator, on_epoch=None):
    """MNL whose class coefficients are path sums of per-edge d-vectors (no penalty)."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    check_labels(y, tree)
    edges = EdgeParams.for_tree(tree, np.zeros((tree.num_edges, X.shape[1])), C=0.0)
    model = LinearLogit(compose_U(edges), np.zeros(tree.num_classes), edges)
    return _fit_logit(model, X, y, config, rng, on_epoch)
