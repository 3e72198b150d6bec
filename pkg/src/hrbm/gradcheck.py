"""Finite-difference checks of the exact likelihood gradient and the penalty gradient."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .hier import EdgeParams, hier_gradient, orthogonal_penalty, penalty_gradient
from .rbm import MAX_ENUM_DIM, RbmParams, exact_gradient, exact_joint_loglik
from .taxonomy import ancestor_pairs, parse_tree, path_edges

LOGLIK_STEP, LOGLIK_TOL = 1e-5, 1e-6
PENALTY_STEP, PENALTY_TOL = 1e-6, 1e-8
GRADCHECK_MAX_DIM = 4

CHECK_TREE = """[edges]
r -> a
a -> b
b -> l1
b -> l2
a -> l3
r -> l4
[classes]
l1 = 0
l2 = 1
l3 = 2
l4 = 3
"""
CHAIN3 = "[edges]\nr -> a\na -> b\nb -> leaf\n[classes]\nleaf = 0\n"


@dataclass
class GradcheckReport:
    errors: dict[str, float] = field(default_factory=dict)
    tolerances: dict[str, float] = field(default_factory=dict)

    @property
    def failed(self) -> list[str]:
        return [k for k, e in self.errors.items() if not e <= self.tolerances[k]]

    @property
    def passed(self) -> bool:
        return not self.failed

    def lines(self) -> list[str]:
        return [
            f"{name:<24} max_abs_err={err:.3e} tol={self.tolerances[name]:.0e} {'PASS' if err <= self.tolerances[name] else 'FAIL'}"
            for name, err in self.errors.items()
        ]


def central_difference(f, x: np.ndarray, step: float) -> np.ndarray:
    """Numerical gradient of scalar ``f`` w.r.t. array ``x`` (modified in place, then restored)."""
    grad = np.zeros_like(x)
    for i in np.ndindex(x.shape):
        old = x[i]
        x[i] = old + step
        up = f()
        x[i] = old - step
        down = f()
        x[i] = old
        grad[i] = (up - down) / (2 * step)
    return grad


def random_params(n: int, d: int, K: int, rng: np.random.Generator, scale: float = 0.5) -> RbmParams:
    return RbmParams(
        rng.normal(0, scale, (n, d)), rng.normal(0, scale, d), rng.normal(0, scale, n),
        rng.normal(0, scale, K), rng.normal(0, scale, (n, K)),
    )


def loglik_errors(params: RbmParams, X, y, flip_block: Optional[str] = None) -> dict[str, float]:
    """Max |analytic - numerical| per block for the mean exact log p(x, y)."""
    analytic = exact_gradient(params, X, y).blocks()
    if flip_block is not None:
        analytic[flip_block] = -analytic[flip_block]

    def f():
        return np.mean([exact_joint_loglik(params, x, k) for x, k in zip(X, y)])

    out = {}
    for name, block in params.blocks().items():
        numeric = central_difference(f, block, LOGLIK_STEP)
        out[name] = float(np.max(np.abs(numeric - analytic[name])))
    return out


def penalty_errors(edges: EdgeParams, pairs) -> float:
    analytic = penalty_gradient(edges, pairs)
    numeric = central_difference(lambda: orthogonal_penalty(edges, pairs), edges.A, PENALTY_STEP)
    return float(np.max(np.abs(numeric - analytic)))


def partial_gradient_error(C: float, rng: np.random.Generator) -> float:
    """On a 3-edge chain, the one-sided raw-mode term must equal C * sum of ancestor rows exactly."""
    tree = parse_tree(CHAIN3)
    edges = EdgeParams.for_tree(tree, rng.normal(size=(3, 5)), C=C, penalty_mode="raw")
    pairs = ancestor_pairs(tree)
    got = -hier_gradient(np.zeros((5, 1)), edges, pairs, partial=True)
    expected = np.zeros_like(edges.A)
    path = path_edges(tree, 0)
    for depth, e in enumerate(path):
        acc = np.zeros(edges.A.shape[1])
        for mu in path[:depth]:
            acc = acc + edges.A[mu]
        expected[e] = C * acc
    return float(np.max(np.abs(got - expected)))


def run_gradcheck(n: int = 3, d: int = 4, K: int = 3, seed: int = 1, flip_block: Optional[str] = None) -> GradcheckReport:
    if max(n, d) > GRADCHECK_MAX_DIM or K > 2**GRADCHECK_MAX_DIM:
        raise ValueError(f"dims n={n}, d={d} too large; gradcheck supports n, d <= {GRADCHECK_MAX_DIM}")
    assert GRADCHECK_MAX_DIM <= MAX_ENUM_DIM
    rng = np.random.default_rng(seed)
    report = GradcheckReport()
    params = random_params(n, d, K, rng)
    X = (rng.random((3, d)) < 0.5).astype(float)
    y = rng.integers(0, K, size=3)
    for name, err in loglik_errors(params, X, y, flip_block).items():
        report.errors[f"loglik/{name}"] = err
        report.tolerances[f"loglik/{name}"] = LOGLIK_TOL

    tree = parse_tree(CHECK_TREE)
    pairs = ancestor_pairs(tree)
    for mode in ("raw", "abs", "squared"):
        A = rng.normal(0.0, 0.5, size=(tree.num_edges, 5))
        report.errors[f"penalty/{mode}"] = penalty_errors(EdgeParams.for_tree(tree, A, 1.0, mode), pairs)
        report.tolerances[f"penalty/{mode}"] = PENALTY_TOL
    report.errors["penalty/raw-partial"] = partial_gradient_error(0.1, rng)
    report.tolerances["penalty/raw-partial"] = 0.0
    return report
