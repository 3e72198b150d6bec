"""Label hierarchies: parsing, validation and path queries.

A taxonomy file has two sections::

    # comment
    [edges]
    root -> animals
    animals -> cat
    ...
    [classes]
    cat = 0
    ...

Edge indices follow their order of appearance under ``[edges]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from importlib import resources

import numpy as np


class TaxonomyError(ValueError):
    pass


@dataclass(frozen=True)
class TaxonomyTree:
    names: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    root: int
    class_of_leaf: dict[int, int]

    @property
    def num_nodes(self) -> int:
        return len(self.names)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @property
    def num_classes(self) -> int:
        return len(self.class_of_leaf)

    @cached_property
    def parent_edge(self) -> tuple[int, ...]:
        """Index of the edge entering each node (-1 for the root)."""
        out = [-1] * self.num_nodes
        for e, (_, child) in enumerate(self.edges):
            out[child] = e
        return tuple(out)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        """Children of each node, in edge order."""
        out: list[list[int]] = [[] for _ in self.names]
        for parent, child in self.edges:
            out[parent].append(child)
        return tuple(tuple(c) for c in out)

    @cached_property
    def leaf_of_class(self) -> tuple[int, ...]:
        out = [0] * self.num_classes
        for leaf, k in self.class_of_leaf.items():
            out[k] = leaf
        return tuple(out)

    @cached_property
    def depth(self) -> tuple[int, ...]:
        """Number of edges between the root and each node."""
        out = [0] * self.num_nodes
        for node in self.preorder:
            for child in self.children[node]:
                out[child] = out[node] + 1
        return tuple(out)

    @cached_property
    def preorder(self) -> tuple[int, ...]:
        order, stack = [], [self.root]
        while stack:
            node = stack.pop()
            order.append(node)
            stack.extend(reversed(self.children[node]))
        return tuple(order)

    @property
    def internal_nodes(self) -> tuple[int, ...]:
        """Non-leaf nodes in preorder."""
        return tuple(v for v in self.preorder if self.children[v])

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def classes_under(self, node: int) -> tuple[int, ...]:
        """Class indices of the leaves in the subtree rooted at ``node``."""
        out, stack = [], [node]
        while stack:
            v = stack.pop()
            if v in self.class_of_leaf:
                out.append(self.class_of_leaf[v])
            stack.extend(self.children[v])
        return tuple(sorted(out))

    def __hash__(self) -> int:
        return hash((self.names, self.edges, self.root, tuple(sorted(self.class_of_leaf.items()))))


def _check_name(name: str, lineno: int) -> str:
    if not name or any(ch.isspace() for ch in name) or "->" in name:
        raise TaxonomyError(f"line {lineno}: invalid node name {name!r}")
    return name


def parse_tree(text: str) -> TaxonomyTree:
    """Parse and validate taxonomy-file contents."""
    section = None
    edge_names: list[tuple[str, str]] = []
    class_lines: list[tuple[str, str, int]] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line in ("[edges]", "[classes]"):
            section = line
            continue
        if section == "[edges]":
            parts = line.split("->")
            if len(parts) != 2:
                raise TaxonomyError(f"line {lineno}: expected 'parent -> child', got {line!r}")
            edge_names.append((_check_name(parts[0].strip(), lineno), _check_name(parts[1].strip(), lineno)))
        elif section == "[classes]":
            name, sep, value = line.rpartition("=")
            if not sep:
                raise TaxonomyError(f"line {lineno}: expected 'leaf = class_index', got {line!r}")
            class_lines.append((_check_name(name.strip(), lineno), value.strip(), lineno))
        else:
            raise TaxonomyError(f"line {lineno}: content outside a section")
    if not edge_names:
        raise TaxonomyError("taxonomy has no edges")

    names: list[str] = []
    ids: dict[str, int] = {}

    def node_id(name: str) -> int:
        if name not in ids:
            ids[name] = len(names)
            names.append(name)
        return ids[name]

    edges = []
    parent: dict[int, int] = {}
    for p_name, c_name in edge_names:
        if p_name == c_name:
            raise TaxonomyError(f"cycle: {p_name!r} is its own parent")
        p, c = node_id(p_name), node_id(c_name)
        if c in parent:
            raise TaxonomyError(f"node {c_name!r} has more than one parent")
        parent[c] = p
        edges.append((p, c))

    for start in range(len(names)):
        seen, v = {start}, start
        while v in parent:
            v = parent[v]
            if v in seen:
                raise TaxonomyError(f"cycle through node {names[v]!r}")
            seen.add(v)
    roots = [v for v in range(len(names)) if v not in parent]
    if len(roots) != 1:
        raise TaxonomyError(f"expected exactly one root, found {len(roots)}: {[names[r] for r in roots]}")

    has_child = {p for p, _ in edges}
    leaves = [v for v in range(len(names)) if v not in has_child]
    class_of_leaf: dict[int, int] = {}
    for name, value, lineno in class_lines:
        if name not in ids:
            raise TaxonomyError(f"line {lineno}: unknown node {name!r}")
        v = ids[name]
        if v in has_child:
            raise TaxonomyError(f"line {lineno}: {name!r} is not a leaf")
        if v in class_of_leaf:
            raise TaxonomyError(f"line {lineno}: leaf {name!r} assigned a class twice")
        try:
            k = int(value)
        except ValueError:
            raise TaxonomyError(f"line {lineno}: class index {value!r} is not an integer") from None
        if k in class_of_leaf.values():
            raise TaxonomyError(f"line {lineno}: class index {k} assigned twice")
        class_of_leaf[v] = k
    missing = [names[v] for v in leaves if v not in class_of_leaf]
    if missing:
        raise TaxonomyError(f"leaves without a class: {missing}")
    if sorted(class_of_leaf.values()) != list(range(len(leaves))):
        raise TaxonomyError(f"class indices must be exactly 0..{len(leaves) - 1}")
    return TaxonomyTree(tuple(names), tuple(edges), roots[0], class_of_leaf)


def serialize_tree(tree: TaxonomyTree) -> str:
    """Canonical text form; ``parse_tree`` inverts it."""
    lines = ["[edges]"]
    lines += [f"{tree.names[p]} -> {tree.names[c]}" for p, c in tree.edges]
    lines.append("[classes]")
    lines += [f"{tree.names[leaf]} = {k}" for k, leaf in enumerate(tree.leaf_of_class)]
    return "\n".join(lines) + "\n"


def flat_tree(num_classes: int) -> TaxonomyTree:
    """Star tree: one root with a leaf per class, edges in class order."""
    lines = ["[edges]"] + [f"root -> c{k}" for k in range(num_classes)]
    lines += ["[classes]"] + [f"c{k} = {k}" for k in range(num_classes)]
    return parse_tree("\n".join(lines))


def load_tree(name_or_path: str) -> TaxonomyTree:
    """Read a taxonomy file, falling back to the bundled trees (``mnist.tree``, ...)."""
    from pathlib import Path

    path = Path(name_or_path)
    if path.is_file():
        return parse_tree(path.read_text(encoding="utf-8"))
    bundled = resources.files("hrbm") / "trees" / path.name
    if not path.suffix:
        bundled = resources.files("hrbm") / "trees" / f"{path.name}.tree"
    if bundled.is_file():
        return parse_tree(bundled.read_text(encoding="utf-8"))
    raise FileNotFoundError(name_or_path)


def path_edges(tree: TaxonomyTree, k: int) -> list[int]:
    """Edges from the root down to the leaf of class ``k``."""
    out = []
    v = tree.leaf_of_class[k]
    while v != tree.root:
        e = tree.parent_edge[v]
        out.append(e)
        v = tree.edges[e][0]
    return out[::-1]


def indicator_matrix(tree: TaxonomyTree) -> np.ndarray:
    """0/1 matrix of shape (M, K); entry [e, k] is 1 iff edge e lies on class k's root path."""
    P = np.zeros((tree.num_edges, tree.num_classes))
    for k in range(tree.num_classes):
        P[path_edges(tree, k), k] = 1.0
    P.flags.writeable = False
    return P


def ancestor_pairs(tree: TaxonomyTree) -> list[tuple[int, int]]:
    """Sorted (edge, ancestor_edge) pairs: every edge above ``edge`` on its root path."""
    pairs = []
    for e, (parent, _) in enumerate(tree.edges):
        v = parent
        while v != tree.root:
            a = tree.parent_edge[v]
            pairs.append((e, a))
            v = tree.edges[a][0]
    return sorted(pairs)
