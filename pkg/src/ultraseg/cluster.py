"""Agglomerative hierarchies over an ordered sequence of points.

Node ids follow the usual linkage-matrix convention: leaves are
``0 .. n-1`` in sequence order and the internal node created by the
``t``-th merge (0-based) has id ``n + t``. The left child of a
sequence-constrained merge is always the earlier segment.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError, ValidationError

CONSTRAINED_COMPLETE = "constrained-complete"
MEDIAN = "median"
LINKAGES = (CONSTRAINED_COMPLETE, MEDIAN)


@dataclass(frozen=True)
class Node:
    id: int
    left: int
    right: int
    height: float
    span: tuple[int, int] | None = None  # inclusive leaf interval


@dataclass(frozen=True, eq=False)
class Dendrogram:
    """Binary rooted tree with merge heights.

    ``nodes`` holds the ``n_leaves - 1`` internal nodes in merge order.
    ``span`` is set on a node only when its leaves form the contiguous
    interval ``lo .. hi`` with the left child preceding the right one.
    """

    n_leaves: int
    leaf_labels: tuple[str, ...]
    nodes: tuple[Node, ...]
    linkage: str = CONSTRAINED_COMPLETE

    def __post_init__(self):
        object.__setattr__(self, "leaf_labels", tuple(self.leaf_labels))
        object.__setattr__(self, "nodes", tuple(self.nodes))
        n = self.n_leaves
        if n < 2:
            raise DataError("a dendrogram needs at least 2 leaves")
        if len(self.leaf_labels) != n:
            raise DataError("leaf label count does not match n_leaves")
        if len(self.nodes) != n - 1:
            raise DataError(f"expected {n - 1} internal nodes, got {len(self.nodes)}")
        used = set()
        for t, node in enumerate(self.nodes):
            if node.id != n + t:
                raise DataError(f"internal node {t} has id {node.id}, expected {n + t}")
            for child in (node.left, node.right):
                if not 0 <= child < node.id or child in used:
                    raise DataError(f"node {node.id} has invalid child {child}")
                used.add(child)
            if not node.height >= 0:
                raise DataError(f"node {node.id} has negative height")

    @classmethod
    def from_merges(
        cls,
        merges: Sequence[tuple[int, int]],
        heights: Sequence[float],
        labels: Sequence[str] | None = None,
        linkage: str = CONSTRAINED_COMPLETE,
    ) -> "Dendrogram":
        """Build a tree from ``(left, right)`` id pairs in merge order."""
        n = len(merges) + 1
        if labels is None:
            labels = [str(i + 1) for i in range(n)]
        spans: dict[int, tuple[int, int] | None] = {i: (i, i) for i in range(n)}
        nodes = []
        for t, ((a, b), h) in enumerate(zip(merges, heights)):
            a, b = int(a), int(b)
            sa, sb = spans.get(a), spans.get(b)
            span = (sa[0], sb[1]) if sa and sb and sa[1] + 1 == sb[0] else None
            spans[n + t] = span
            nodes.append(Node(n + t, a, b, float(h), span))
        return cls(n, tuple(labels), tuple(nodes), linkage)

    @property
    def root(self) -> int:
        return self.nodes[-1].id

    def node(self, node_id: int) -> Node:
        return self.nodes[node_id - self.n_leaves]

    def is_leaf(self, node_id: int) -> bool:
        return node_id < self.n_leaves

    def height(self, node_id: int) -> float:
        return 0.0 if self.is_leaf(node_id) else self.node(node_id).height

    @property
    def is_constrained(self) -> bool:
        """True when every node spans a contiguous, left-to-right interval."""
        return all(node.span is not None for node in self.nodes)

    @property
    def is_monotone(self) -> bool:
        return all(
            node.height >= self.height(node.left) and node.height >= self.height(node.right)
            for node in self.nodes
        )

    def leaves(self, node_id: int) -> list[int]:
        """Leaf ids under ``node_id``, left subtree first."""
        out, stack = [], [node_id]
        while stack:
            cur = stack.pop()
            if self.is_leaf(cur):
                out.append(cur)
            else:
                node = self.node(cur)
                stack.append(node.right)
                stack.append(node.left)
        return out

    def parents(self) -> dict[int, int]:
        return {child: node.id for node in self.nodes for child in (node.left, node.right)}

    def merges(self) -> list[tuple[int, int, float]]:
        return [(node.left, node.right, node.height) for node in self.nodes]

    def to_json(self) -> str:
        doc = {
            "n_leaves": self.n_leaves,
            "linkage": self.linkage,
            "leaves": list(self.leaf_labels),
            "nodes": [
                {
                    "id": node.id,
                    "left": node.left,
                    "right": node.right,
                    "height": node.height,
                    "span": list(node.span) if node.span else None,
                }
                for node in self.nodes
            ],
            "root": self.root,
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "Dendrogram":
        try:
            doc = json.loads(text)
            nodes = sorted(doc["nodes"], key=lambda nd: nd["id"])
            tree = cls.from_merges(
                [(nd["left"], nd["right"]) for nd in nodes],
                [nd["height"] for nd in nodes],
                doc["leaves"],
                doc.get("linkage", CONSTRAINED_COMPLETE),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DataError):
                raise
            raise DataError(f"malformed dendrogram JSON: {exc}") from None
        if tree.n_leaves != doc["n_leaves"] or tree.root != doc.get("root", tree.root):
            raise DataError("dendrogram JSON is inconsistent")
        return tree

    def to_newick(self) -> str:
        """Newick string; branch length = parent height minus child height."""

        def render(node_id: int, parent_height: float) -> str:
            length = _fmt_float(parent_height - self.height(node_id))
            if self.is_leaf(node_id):
                return f"{_newick_label(self.leaf_labels[node_id])}:{length}"
            node = self.node(node_id)
            inner = ",".join(render(c, node.height) for c in (node.left, node.right))
            return f"({inner}):{length}"

        root = self.node(self.root)
        inner = ",".join(render(c, root.height) for c in (root.left, root.right))
        return f"({inner});\n"


_NEWICK_UNSAFE = re.compile(r"[\s(),:;\[\]']")


def _newick_label(label: str) -> str:
    if _NEWICK_UNSAFE.search(label) or not label:
        return "'" + label.replace("'", "''") + "'"
    return label


def _fmt_float(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class Partition:
    """Contiguous segments ``(lo, hi)`` (0-based, inclusive) in timeline order."""

    segments: tuple[tuple[int, int], ...]

    def __post_init__(self):
        segs = tuple((int(lo), int(hi)) for lo, hi in self.segments)
        object.__setattr__(self, "segments", segs)
        if not segs or segs[0][0] != 0:
            raise DataError("partition must start at leaf 0")
        for (lo, hi), nxt in zip(segs, segs[1:] + (None,)):
            if hi < lo:
                raise DataError(f"empty segment {lo}..{hi}")
            if nxt is not None and nxt[0] != hi + 1:
                raise DataError("partition segments must be disjoint and contiguous")

    @property
    def n(self) -> int:
        return self.segments[-1][1] + 1

    @classmethod
    def from_boundaries(cls, n: int, boundaries: Sequence[int]) -> "Partition":
        """Segments from 1-based positions after which a new segment starts."""
        cuts = [0, *sorted(boundaries), n]
        return cls(tuple((a, b - 1) for a, b in zip(cuts, cuts[1:])))

    def __len__(self):
        return len(self.segments)


def _as_points(points) -> np.ndarray:
    try:
        X = np.asarray(points, dtype=float)
    except ValueError:
        raise DataError("points must all have the same dimension") from None
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise DataError("points must be a sequence of vectors")
    if X.shape[0] < 2:
        raise DataError("clustering needs at least 2 points")
    if not np.all(np.isfinite(X)):
        raise DataError("points must be finite")
    return X


def _sq_dists(X: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - X[None, :, :]
    return np.sum(diff * diff, axis=-1)


def constrained_complete_link(points, labels: Sequence[str] | None = None) -> Dendrogram:
    """Sequence-constrained complete-link agglomeration.

    Only clusters adjacent in the sequence may merge; the distance between
    two clusters is the largest Euclidean distance across them. Among
    equally close adjacent pairs the leftmost merges first. Heights are
    non-decreasing because merging can only raise complete-link distances.
    """
    X = _as_points(points)
    n = len(X)
    # cluster-to-cluster complete-link distances, updated by max (Lance-Williams)
    D = np.full((2 * n - 1, 2 * n - 1), np.inf)
    D[:n, :n] = np.sqrt(_sq_dists(X))
    order = list(range(n))  # active cluster ids in sequence order
    merges, heights = [], []
    for t in range(n - 1):
        gaps = [D[order[p], order[p + 1]] for p in range(len(order) - 1)]
        p = int(np.argmin(gaps))  # first minimum is the leftmost pair
        a, b = order[p], order[p + 1]
        new = n + t
        D[new, :] = np.maximum(D[a, :], D[b, :])
        D[:, new] = D[new, :]
        D[new, new] = np.inf
        merges.append((a, b))
        heights.append(float(gaps[p]))
        order[p : p + 2] = [new]
    return Dendrogram.from_merges(merges, heights, labels, CONSTRAINED_COMPLETE)


def median_linkage(points, labels: Sequence[str] | None = None) -> Dendrogram:
    """Unconstrained median (Gower) agglomeration on squared distances.

    Uses the update ``d(k, i+j) = d(k,i)/2 + d(k,j)/2 - d(i,j)/4`` and
    reports heights as squared distances. Heights may invert. On ties the
    pair with the smallest, then next-smallest, cluster id wins; the smaller
    id becomes the left child.
    """
    X = _as_points(points)
    n = len(X)
    size = 2 * n - 1
    D = np.full((size, size), np.inf)
    D[:n, :n] = _sq_dists(X)
    active = np.zeros(size, dtype=bool)
    active[:n] = True
    merges, heights = [], []
    for t in range(n - 1):
        M = np.where(np.outer(active, active), D, np.inf)
        M[np.tril_indices(size)] = np.inf
        a, b = np.unravel_index(int(np.argmin(M)), M.shape)
        h = D[a, b]
        new = n + t
        row = 0.5 * D[a] + 0.5 * D[b] - 0.25 * h
        D[new, :] = row
        D[:, new] = row
        D[new, new] = np.inf
        active[[a, b]] = False
        active[new] = True
        merges.append((int(a), int(b)))
        heights.append(float(h))
    return Dendrogram.from_merges(merges, heights, labels, MEDIAN)


def cophenetic_matrix(tree: Dendrogram) -> np.ndarray:
    """Height of the lowest common ancestor for every leaf pair."""
    C = np.zeros((tree.n_leaves, tree.n_leaves))
    for node in tree.nodes:
        left, right = tree.leaves(node.left), tree.leaves(node.right)
        C[np.ix_(left, right)] = node.height
        C[np.ix_(right, left)] = node.height
    return C


def cut(tree: Dendrogram, k: int) -> Partition:
    """Partition into ``k`` contiguous segments.

    The ``k - 1`` highest internal nodes are removed; among equal heights
    the later merge goes first.
    """
    if not tree.is_constrained:
        raise ValidationError("cut needs a sequence-constrained tree")
    if not 1 <= k <= tree.n_leaves:
        raise ValidationError(f"k must be in 1..{tree.n_leaves}, got {k}")
    ranked = sorted(tree.nodes, key=lambda nd: (nd.height, nd.id), reverse=True)
    removed = {nd.id for nd in ranked[: k - 1]}
    if not removed:
        return Partition((tree.node(tree.root).span,))
    segments = []
    for node_id in removed:
        node = tree.node(node_id)
        for child in (node.left, node.right):
            if child in removed:
                continue
            span = (child, child) if tree.is_leaf(child) else tree.node(child).span
            segments.append(span)
    return Partition(tuple(sorted(segments)))
