import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hrbm.baselines import train_flat_rbm
from hrbm.config import TrainConfig
from hrbm.hier import (
    EdgeParams,
    TrainingError,
    compose_U,
    hier_gradient,
    make_batches,
    orthogonal_penalty,
    penalty_gradient,
    train_hcrbm,
)
from hrbm.gradcheck import central_difference
from hrbm.rbm import predict
from hrbm.taxonomy import ancestor_pairs, flat_tree, parse_tree, path_edges

from conftest import random_tree_text, separable_toy, tree_texts

TWO_CHAIN = "[edges]\nr -> a\na -> leaf\n[classes]\nleaf = 0\n"
CHAIN3 = "[edges]\nr -> a\na -> b\nb -> leaf\n[classes]\nleaf = 0\n"


def chain_edges(rows, mode="abs", C=1.0, text=TWO_CHAIN):
    tree = parse_tree(text)
    return EdgeParams.for_tree(tree, np.array(rows, dtype=float), C, mode), ancestor_pairs(tree)


def path_sum_oracle(tree, A):
    U = np.zeros((A.shape[1], tree.num_classes))
    for k in range(tree.num_classes):
        for e in path_edges(tree, k):
            U[:, k] = U[:, k] + A[e]
    return U


# ---------------------------------------------------------------------------
# composition


def test_compose_star_is_relabeling():
    A = np.random.default_rng(0).normal(size=(4, 6))
    U = compose_U(EdgeParams.for_tree(flat_tree(4), A))
    np.testing.assert_array_equal(U, A.T)


def test_compose_five_class(five_class_text):
    tree = parse_tree(five_class_text)
    A = np.random.default_rng(1).normal(size=(7, 3))
    U = compose_U(EdgeParams.for_tree(tree, A))
    assert np.array_equal(U[:, 0], A[0] + A[2])
    assert np.array_equal(U[:, 3], A[1] + A[5])
    # classes under the same parent share the first-level edge
    np.testing.assert_allclose(U[:, 0] - A[2], U[:, 1] - A[3])


def test_compose_zero():
    tree = parse_tree(random_tree_text(np.random.default_rng(2), 10))
    assert not compose_U(EdgeParams.for_tree(tree, np.zeros((tree.num_edges, 5)))).any()


def test_edge_params_row_mismatch():
    with pytest.raises(ValueError):
        EdgeParams(np.zeros((3, 2)), np.eye(4))


@settings(max_examples=100, deadline=None)
@given(tree_texts(max_nodes=20), st.integers(0, 2**32 - 1))
def test_compose_matches_path_sum_exactly(text, seed):
    tree = parse_tree(text)
    A = np.random.default_rng(seed).normal(size=(tree.num_edges, 7))
    assert np.array_equal(compose_U(EdgeParams.for_tree(tree, A)), path_sum_oracle(tree, A))


# ---------------------------------------------------------------------------
# penalty


@pytest.mark.parametrize(
    "child, expected",
    [((1.0, 0.0), {"raw": 1.0, "abs": 1.0, "squared": 1.0}), ((-1.0, 0.0), {"raw": -1.0, "abs": 1.0, "squared": 1.0})],
)
def test_penalty_two_edge_chain(child, expected):
    for mode, value in expected.items():
        edges, pairs = chain_edges([(1.0, 0.0), child], mode)
        assert orthogonal_penalty(edges, pairs) == value


@pytest.mark.parametrize("mode", ["raw", "abs", "squared"])
def test_penalty_star_and_orthogonal_zero(mode):
    star = EdgeParams.for_tree(flat_tree(3), np.ones((3, 4)), 1.0, mode)
    assert orthogonal_penalty(star, ancestor_pairs(flat_tree(3))) == 0.0
    assert not penalty_gradient(star, ancestor_pairs(flat_tree(3))).any()
    edges, pairs = chain_edges([(1.0, 0.0), (0.0, 2.0)], mode)
    assert orthogonal_penalty(edges, pairs) == 0.0


def test_squared_gradient_zero_at_orthogonal():
    edges, pairs = chain_edges([(1.0, 0.0, 0.0), (0.0, 2.0, 0.0), (0.0, 0.0, 3.0)], "squared", text=CHAIN3)
    assert not penalty_gradient(edges, pairs).any()


def test_penalty_unknown_mode():
    edges, pairs = chain_edges([(1.0, 0.0), (1.0, 0.0)], "cubic")
    with pytest.raises(ValueError, match="cubic"):
        orthogonal_penalty(edges, pairs)


@pytest.mark.parametrize("mode", ["raw", "abs", "squared"])
@pytest.mark.parametrize("seed", range(10))
def test_penalty_gradient_finite_differences(mode, seed):
    rng = np.random.default_rng(seed)
    tree = parse_tree(random_tree_text(rng, int(rng.integers(3, 12))))
    pairs = ancestor_pairs(tree)
    A = rng.normal(0, 0.5, (tree.num_edges, 4))
    edges = EdgeParams.for_tree(tree, A, 1.0, mode)
    if mode == "abs" and pairs:
        # stay away from zero crossings: |dot| much larger than the step
        dots = [abs(A[c] @ A[a]) for c, a in pairs]
        if min(dots) < 1e-3:
            pytest.skip("sampled a near-orthogonal pair")
    numeric = central_difference(lambda: orthogonal_penalty(edges, pairs), edges.A, 1e-6)
    assert np.max(np.abs(numeric - penalty_gradient(edges, pairs)), initial=0.0) <= 1e-8


def test_partial_gradient_is_child_side_only():
    rng = np.random.default_rng(0)
    edges, pairs = chain_edges(rng.normal(size=(3, 5)), "raw", C=0.3, text=CHAIN3)
    A = edges.A
    got = penalty_gradient(edges, pairs, partial=True)
    np.testing.assert_array_equal(got[0], np.zeros(5))
    np.testing.assert_array_equal(got[1], A[0])
    np.testing.assert_array_equal(got[2], A[0] + A[1])
    full = penalty_gradient(edges, pairs)
    np.testing.assert_allclose(full[0], A[1] + A[2], rtol=1e-15)


# ---------------------------------------------------------------------------
# gradient routing


def test_hier_gradient_star_identity():
    g = np.random.default_rng(0).normal(size=(6, 4))
    edges = EdgeParams.for_tree(flat_tree(4), np.random.default_rng(1).normal(size=(4, 6)), C=0.0)
    np.testing.assert_array_equal(hier_gradient(g, edges, []), g.T)


def test_hier_gradient_five_class_shared_edge(five_class_text):
    tree = parse_tree(five_class_text)
    rng = np.random.default_rng(0)
    g = rng.normal(size=(3, 5))
    edges = EdgeParams.for_tree(tree, rng.normal(size=(7, 3)), C=0.0)
    out = hier_gradient(g, edges, ancestor_pairs(tree))
    # edge 0 (root -> n2) sits above classes 1 and 2 (indices 0, 1)
    np.testing.assert_allclose(out[0], g[:, 0] + g[:, 1], rtol=1e-15)
    np.testing.assert_allclose(out[1], g[:, 2] + g[:, 3] + g[:, 4], rtol=1e-15)
    np.testing.assert_array_equal(out[5], g[:, 3])


def test_hier_gradient_c0_independent_of_mode(five_class_text):
    tree = parse_tree(five_class_text)
    rng = np.random.default_rng(3)
    g, A = rng.normal(size=(3, 5)), rng.normal(size=(7, 3))
    outs = [hier_gradient(g, EdgeParams.for_tree(tree, A, 0.0, m), ancestor_pairs(tree)) for m in ("raw", "abs", "squared")]
    assert np.array_equal(outs[0], outs[1]) and np.array_equal(outs[1], outs[2])


def test_hier_gradient_shape_mismatch(five_class_text):
    tree = parse_tree(five_class_text)
    edges = EdgeParams.for_tree(tree, np.zeros((7, 3)))
    with pytest.raises(ValueError, match="shape"):
        hier_gradient(np.zeros((3, 4)), edges, ancestor_pairs(tree))


# ---------------------------------------------------------------------------
# penalty-only optimization


def penalty_descent(mode, steps, seed=0, lr=0.01):
    rng = np.random.default_rng(seed)
    edges, pairs = chain_edges(rng.normal(0, 0.3, (3, 8)), mode, C=1.0, text=CHAIN3)
    history = []
    for _ in range(steps):
        edges = edges.with_A(edges.A + lr * hier_gradient(np.zeros((8, 1)), edges, pairs))
        history.append(max(abs(edges.A[c] @ edges.A[a]) for c, a in pairs))
    return history


@pytest.mark.parametrize("seed", range(3))
def test_penalty_only_abs_reaches_orthogonality(seed):
    history = penalty_descent("abs", 10_000, seed)
    assert min(history) < 1e-3


@pytest.mark.parametrize("seed", range(3))
def test_penalty_only_squared_converges(seed):
    history = penalty_descent("squared", 10_000, seed)
    assert history[-1] < 1e-3


def test_raw_penalty_unbounded_below():
    a = np.array([1.0, 0.5, 0.0])
    values = []
    for t in (1.0, 10.0, 100.0, 1e4):
        edges, pairs = chain_edges([a, -t * a], "raw")
        values.append(orthogonal_penalty(edges, pairs))
    assert all(later < earlier for earlier, later in zip(values, values[1:]))
    assert values[-1] == pytest.approx(-1e4 * (a @ a))


# ---------------------------------------------------------------------------
# training


def small_config(**kw):
    base = dict(hidden=10, lr=0.1, C=0.0, epochs=5, batch_size=20, seed=1)
    base.update(kw)
    return TrainConfig(**base)


def toy_three_class(seed=0, n=500, d=12):
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 3, n)
    proto = rng.random((3, d))
    X = (rng.random((n, d)) < proto[y]).astype(float)
    return X, y


def test_make_batches_partition():
    batches = make_batches(23, 5, np.random.default_rng(0))
    assert [len(b) for b in batches] == [5, 5, 5, 5, 3]
    assert sorted(np.concatenate(batches).tolist()) == list(range(23))


@pytest.mark.parametrize("seed", [1, 2, 7])
def test_flat_tree_reduction(seed):
    X, y = toy_three_class()
    config = small_config(seed=seed)
    flat_trace, hier_trace = [], []
    flat, _ = train_flat_rbm(X, y, config, np.random.default_rng(seed), K=3,
                             on_epoch=lambda e, p: flat_trace.append(p.copy()))
    hier, edges, _ = train_hcrbm(X, y, flat_tree(3), config, np.random.default_rng(seed),
                                 on_epoch=lambda e, p: hier_trace.append(p.copy()))
    assert len(flat_trace) == len(hier_trace) == 5
    for pf, ph in zip(flat_trace, hier_trace):
        for name, block in pf.blocks().items():
            assert np.max(np.abs(block - ph.blocks()[name])) <= 1e-12


def test_train_hcrbm_deterministic(five_class_text):
    tree = parse_tree(five_class_text)
    rng = np.random.default_rng(0)
    X = (rng.random((60, 6)) < 0.5).astype(float)
    y = rng.integers(0, 5, 60)
    config = small_config(C=0.1, epochs=3)
    p1, e1, m1 = train_hcrbm(X, y, tree, config, np.random.default_rng(4))
    p2, e2, m2 = train_hcrbm(X, y, tree, config, np.random.default_rng(4))
    for a, b in zip(p1.blocks().values(), p2.blocks().values()):
        assert np.array_equal(a, b)
    assert np.array_equal(e1.A, e2.A)
    assert [r.penalty for r in m1.epochs] == [r.penalty for r in m2.epochs]
    # the returned U is always the recomposed one
    assert np.array_equal(p1.U, compose_U(e1))
    assert [r.epoch for r in m1.epochs] == [1, 2, 3]


@pytest.mark.parametrize("partial", [False, True])
def test_train_hcrbm_u_is_composed(five_class_text, partial):
    tree = parse_tree(five_class_text)
    rng = np.random.default_rng(5)
    X = rng.random((40, 5))
    y = rng.integers(0, 5, 40)
    params, edges, _ = train_hcrbm(X, y, tree, small_config(C=0.5, epochs=2, paper_partial_grad=partial),
                                   np.random.default_rng(1))
    assert np.array_equal(params.U, compose_U(edges))


def test_train_hcrbm_label_outside_tree(five_class_text):
    with pytest.raises(ValueError, match="outside"):
        train_hcrbm(np.zeros((3, 2)), np.array([0, 1, 5]), parse_tree(five_class_text), small_config(), np.random.default_rng(0))


def test_train_hcrbm_divergence_aborts(monkeypatch):
    import hrbm.hier as hier_mod

    real = hier_mod.cd1_statistics

    def poisoned(params, X, y, rng):
        grad, recon = real(params, X, y, rng)
        grad.W[0, 0] = np.nan
        return grad, recon

    monkeypatch.setattr(hier_mod, "cd1_statistics", poisoned)
    X, y = separable_toy(0)
    with pytest.raises(TrainingError, match="epoch 1, batch 0"):
        train_hcrbm(X, y, flat_tree(2), small_config(), np.random.default_rng(0))


def test_train_hcrbm_separable_toy():
    X, y = separable_toy(0)
    params, _, metrics = train_hcrbm(X, y, flat_tree(2), small_config(epochs=20, batch_size=10), np.random.default_rng(1))
    assert np.mean(predict(params, X) != y) == 0.0
    assert metrics.epochs[-1].train_error == 0.0
