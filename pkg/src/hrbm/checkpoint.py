"""Model persistence.

RBM checkpoint (little-endian)::

    b"HRBM" | u32 version=1 | u32 n, d, K, m
    f64 W (n*d) | b (d) | c (n) | d_bias (K) | U (n*K)
    if m > 0:  f64 A (m*n) | u32 len | taxonomy text (UTF-8)

Cascades are directories holding one RBM checkpoint per classifier node, the
taxonomy file and a ``manifest`` of ``node_name = filename`` lines. Logit
models (MNL / corrMNL) are stored as ``.npz`` archives.
"""
from __future__ import annotations

import io
import struct
from pathlib import Path
from typing import Optional

import numpy as np

from .baselines import Cascade, CascadeNode, LinearLogit
from .hier import EdgeParams
from .rbm import RbmParams
from .taxonomy import TaxonomyTree, parse_tree, serialize_tree

MAGIC = b"HRBM"
VERSION = 1


class CheckpointError(ValueError):
    pass


def dumps_rbm(params: RbmParams, edges: Optional[EdgeParams] = None, tree: Optional[TaxonomyTree] = None) -> bytes:
    n, d, K = params.shape
    m = 0 if edges is None else edges.A.shape[0]
    if m and tree is None:
        raise ValueError("a hierarchical checkpoint needs its taxonomy")
    out = io.BytesIO()
    out.write(MAGIC + struct.pack("<5I", VERSION, n, d, K, m))
    for block in (params.W, params.b, params.c, params.d_bias, params.U):
        out.write(np.ascontiguousarray(block, dtype="<f8").tobytes())
    if m:
        out.write(np.ascontiguousarray(edges.A, dtype="<f8").tobytes())
        text = serialize_tree(tree).encode("utf-8")
        out.write(struct.pack("<I", len(text)) + text)
    return out.getvalue()


def loads_rbm(buf: bytes) -> tuple[RbmParams, Optional[EdgeParams], Optional[TaxonomyTree]]:
    if buf[:4] != MAGIC:
        raise CheckpointError("not an HRBM checkpoint (bad magic)")
    if len(buf) < 24:
        raise CheckpointError("truncated header")
    version, n, d, K, m = struct.unpack("<5I", buf[4:24])
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    pos = 24

    def take(count: int) -> np.ndarray:
        nonlocal pos
        end = pos + 8 * count
        if end > len(buf):
            raise CheckpointError("truncated parameter data")
        arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).astype(float)
        pos = end
        return arr

    params = RbmParams(
        take(n * d).reshape(n, d), take(d), take(n), take(K), take(n * K).reshape(n, K)
    )
    edges = tree = None
    if m:
        A = take(m * n).reshape(m, n)
        if pos + 4 > len(buf):
            raise CheckpointError("truncated taxonomy length")
        (length,) = struct.unpack("<I", buf[pos : pos + 4])
        text = buf[pos + 4 : pos + 4 + length]
        if len(text) != length:
            raise CheckpointError("truncated taxonomy text")
        pos += 4 + length
        tree = parse_tree(text.decode("utf-8"))
        if tree.num_edges != m or tree.num_classes != K:
            raise CheckpointError("taxonomy does not match parameter shapes")
        edges = EdgeParams.for_tree(tree, A)
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes")
    return params, edges, tree


def save_cascade(cascade: Cascade, directory, variant: str):
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    tree = cascade.tree
    (root / "taxonomy.tree").write_text(serialize_tree(tree), encoding="utf-8")
    (root / "variant").write_text(variant + "\n", encoding="utf-8")
    lines = []
    for v, node in cascade.nodes.items():
        if node.params is None:
            continue
        fname = f"node{v:03d}.hrbm"
        (root / fname).write_bytes(dumps_rbm(node.params))
        lines.append(f"{tree.names[v]} = {fname}")
    (root / "manifest").write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_cascade(directory) -> tuple[Cascade, str]:
    root = Path(directory)
    try:
        tree = parse_tree((root / "taxonomy.tree").read_text(encoding="utf-8"))
        variant = (root / "variant").read_text(encoding="utf-8").strip()
        manifest = (root / "manifest").read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise CheckpointError(f"incomplete cascade directory: {exc.filename}") from None
    files = {}
    for line in manifest.splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        name, _, fname = line.rpartition("=")
        files[name.strip()] = fname.strip()
    cascade = Cascade(tree, projected=variant == "hhrbm")
    for v in tree.internal_nodes:
        children = tree.children[v]
        params = None
        if len(children) > 1:
            fname = files.get(tree.names[v])
            if fname is None:
                raise CheckpointError(f"manifest has no classifier for node {tree.names[v]!r}")
            params, _, _ = loads_rbm((root / fname).read_bytes())
            if params.shape[2] != len(children):
                raise CheckpointError(f"node {tree.names[v]!r}: classifier has {params.shape[2]} classes, expected {len(children)}")
        cascade.nodes[v] = CascadeNode(v, children, params)
    return cascade, variant


def save_logit(model: LinearLogit, path, tree: Optional[TaxonomyTree] = None):
    arrays = {"coef": model.coef, "bias": model.bias}
    if model.edges is not None:
        arrays["A"] = model.edges.A
        arrays["taxonomy"] = np.frombuffer(serialize_tree(tree).encode("utf-8"), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_logit(path) -> LinearLogit:
    with np.load(path) as z:
        edges = None
        if "A" in z:
            tree = parse_tree(z["taxonomy"].tobytes().decode("utf-8"))
            edges = EdgeParams.for_tree(tree, z["A"])
        return LinearLogit(z["coef"], z["bias"], edges)


def load_any(path):
    """Load any checkpoint; returns (kind, model) with kind in {'rbm', 'cascade', 'logit'}."""
    path = Path(path)
    if path.is_dir():
        cascade, variant = load_cascade(path)
        return variant, cascade
    head = path.read_bytes()[:4]
    if head == MAGIC:
        params, edges, tree = loads_rbm(path.read_bytes())
        return ("hrbm" if edges is not None else "rbm"), params
    if head[:2] == b"PK":
        model = load_logit(path)
        return ("corrmnl" if model.edges is not None else "mnl"), model
    raise CheckpointError(f"{path}: unrecognized checkpoint format")
