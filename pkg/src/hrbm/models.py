"""Uniform train / predict / save entry points over every model variant."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import checkpoint
from .baselines import (
    Cascade,
    LinearLogit,
    cascade_predict,
    train_cascade,
    train_corrmnl,
    train_flat_rbm,
    train_hhrbm,
    train_mnl,
)
from .config import HIERARCHICAL, RunMetrics, TrainConfig
from .hier import EdgeParams, train_hcrbm
from .rbm import RbmParams, predict
from .taxonomy import TaxonomyTree


@dataclass
class TrainedModel:
    variant: str
    model: Any  # RbmParams, Cascade or LinearLogit
    metrics: RunMetrics
    edges: Optional[EdgeParams] = None
    tree: Optional[TaxonomyTree] = None

    def predict(self, X) -> np.ndarray:
        return predict_with(self.variant, self.model, X)

    def save(self, path):
        save_model(self, path)


def train_variant(X, y, K: int, config: TrainConfig, tree: Optional[TaxonomyTree] = None, rng=None) -> TrainedModel:
    """Dispatch to the trainer named by ``config.variant``."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    v = config.variant
    if v in HIERARCHICAL:
        if tree is None:
            raise ValueError(f"variant {v!r} needs a taxonomy (--tree)")
        if tree.num_classes != K:
            raise ValueError(f"taxonomy has {tree.num_classes} classes but the data has {K}")
    elif tree is not None:
        warnings.warn(f"variant {v!r} ignores the taxonomy")
        tree = None

    if v == "rbm":
        params, metrics = train_flat_rbm(X, y, config, rng, K=K)
        return TrainedModel(v, params, metrics)
    if v == "hrbm":
        params, edges, metrics = train_hcrbm(X, y, tree, config, rng)
        return TrainedModel(v, params, metrics, edges, tree)
    if v == "mnl":
        model, metrics = train_mnl(X, y, config, rng, K=K)
        return TrainedModel(v, model, metrics)
    if v == "corrmnl":
        model, metrics = train_corrmnl(X, y, tree, config, rng)
        return TrainedModel(v, model, metrics, model.edges, tree)
    if v in ("cascade-hard", "cascade-soft"):
        cascade = train_cascade(X, y, tree, config, rng, mode=v.split("-")[1])
    else:
        cascade = train_hhrbm(X, y, tree, config, rng)
    metrics = RunMetrics(config=config.to_dict())
    return TrainedModel(v, cascade, metrics, tree=tree)


def predict_with(variant: str, model, X) -> np.ndarray:
    if isinstance(model, RbmParams):
        return predict(model, X)
    if isinstance(model, LinearLogit):
        return model.predict(X)
    if isinstance(model, Cascade):
        return cascade_predict(model, X, mode="hard" if variant == "cascade-hard" else "soft")
    raise TypeError(f"unsupported model type {type(model).__name__}")


def input_dim(model) -> int:
    if isinstance(model, RbmParams):
        return model.shape[1]
    if isinstance(model, LinearLogit):
        return model.coef.shape[0]
    root = model.nodes[model.tree.root]
    return root.params.shape[1] if root.params is not None else -1


def num_classes(model) -> int:
    if isinstance(model, RbmParams):
        return model.shape[2]
    if isinstance(model, LinearLogit):
        return model.coef.shape[1]
    return model.tree.num_classes


def save_model(trained: TrainedModel, path):
    path = Path(path)
    if isinstance(trained.model, RbmParams):
        path.write_bytes(checkpoint.dumps_rbm(trained.model, trained.edges, trained.tree))
    elif isinstance(trained.model, LinearLogit):
        checkpoint.save_logit(trained.model, path, trained.tree)
    else:
        checkpoint.save_cascade(trained.model, path, trained.variant)


def load_model(path) -> tuple[str, Any]:
    return checkpoint.load_any(path)
