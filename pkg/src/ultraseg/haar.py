"""Haar wavelet transform of data defined on the leaves of a dendrogram.

Each internal node ``q`` with child smooths ``a`` (left) and ``b`` (right)
gets smooth ``(a + b) / 2`` and detail ``(a - b) / 2``. Reading the tree
from the root, a left child is parent smooth plus detail and a right child
is parent smooth minus detail.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .cluster import Dendrogram
from .errors import DataError, ValidationError

MAGNITUDE = "magnitude"
SUBTREE_CLOSED = "subtree-closed"
POLICIES = (MAGNITUDE, SUBTREE_CLOSED)

SIGN_CONVENTION = "left = smooth + detail, right = smooth - detail"


@dataclass(frozen=True, eq=False)
class HaarDecomposition:
    """Root smooth plus one detail vector per internal node.

    ``details[t]`` belongs to the node created by merge ``t`` (id
    ``n_leaves + t``). ``kept`` lists the node ids whose details survived
    thresholding, or is ``None`` for an unthresholded transform.
    """

    tree: Dendrogram
    smooth_root: np.ndarray
    details: np.ndarray
    kept: tuple[int, ...] | None = None

    @property
    def dim(self) -> int:
        return self.smooth_root.shape[0]

    def detail(self, node_id: int) -> np.ndarray:
        return self.details[node_id - self.tree.n_leaves]

    def magnitudes(self) -> np.ndarray:
        """Euclidean norm of each detail (absolute value when 1-D)."""
        return np.sqrt(np.sum(self.details**2, axis=1))

    def to_csv(self, dim_labels: Sequence[str] | None = None) -> str:
        """One row per data dimension: smooth, then details newest first."""
        n = self.tree.n_leaves
        if dim_labels is None:
            dim_labels = [f"dim{c + 1}" for c in range(self.dim)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["dimension", f"s{n - 1}", *(f"d{t}" for t in range(n - 1, 0, -1))])
        for c, name in enumerate(dim_labels):
            writer.writerow(
                [name, repr(float(self.smooth_root[c]))]
                + [repr(float(self.details[t - 1, c])) for t in range(n - 1, 0, -1)]
            )
        return buf.getvalue()

    def to_json(self, dim_labels: Sequence[str] | None = None) -> str:
        doc = {
            "sign_convention": SIGN_CONVENTION,
            "detail_order": "merge order (d1 = first merge)",
            "dimensions": list(dim_labels) if dim_labels is not None else None,
            "smooth_root": [float(x) for x in self.smooth_root],
            "details": [
                {"node": self.tree.n_leaves + t, "d": [float(x) for x in row]}
                for t, row in enumerate(self.details)
            ],
        }
        return json.dumps(doc, indent=2) + "\n"


def _as_leaf_data(tree: Dendrogram, leaf_data) -> np.ndarray:
    X = np.asarray(leaf_data, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] != tree.n_leaves:
        raise DataError(
            f"leaf data has {X.shape[0] if X.ndim else 0} rows, tree has {tree.n_leaves} leaves"
        )
    return X


def forward(tree: Dendrogram, leaf_data) -> HaarDecomposition:
    X = _as_leaf_data(tree, leaf_data)
    n = tree.n_leaves
    smooth = np.empty((2 * n - 1, X.shape[1]))
    smooth[:n] = X
    details = np.empty((n - 1, X.shape[1]))
    for t, node in enumerate(tree.nodes):
        a, b = smooth[node.left], smooth[node.right]
        smooth[node.id] = (a + b) / 2
        details[t] = (a - b) / 2
    return HaarDecomposition(tree, smooth[tree.root].copy(), details)


def inverse(dec: HaarDecomposition) -> np.ndarray:
    """Reconstruct leaf data by summing signed details down every path."""
    tree = dec.tree
    n = tree.n_leaves
    smooth = np.empty((2 * n - 1, dec.dim))
    smooth[tree.root] = dec.smooth_root
    for t in range(n - 2, -1, -1):
        node = tree.nodes[t]
        smooth[node.left] = smooth[node.id] + dec.details[t]
        smooth[node.right] = smooth[node.id] - dec.details[t]
    return smooth[:n].copy()


def _rank_key(mags: np.ndarray, t: int):
    # larger magnitude first, then later merge first
    return (-mags[t], -t)


def threshold(dec: HaarDecomposition, keep: int, policy: str = MAGNITUDE) -> HaarDecomposition:
    """Zero all but ``keep`` detail vectors.

    ``magnitude`` keeps the largest details anywhere in the tree.
    ``subtree-closed`` grows the kept set from the root, each time taking
    the largest detail whose ancestors are all kept, so every zeroed
    subtree reconstructs to a constant.
    """
    n_details = dec.tree.n_leaves - 1
    if not 0 <= keep <= n_details:
        raise ValidationError(f"keep must be in 0..{n_details}, got {keep}")
    if policy not in POLICIES:
        raise ValidationError(f"unknown thresholding policy {policy!r}")
    mags = dec.magnitudes()
    n = dec.tree.n_leaves

    if policy == MAGNITUDE:
        ranked = sorted(range(n_details), key=lambda t: _rank_key(mags, t))
        chosen = ranked[:keep]
    else:
        chosen = []
        frontier = [dec.tree.root - n]
        while len(chosen) < keep:
            t = min(frontier, key=lambda t: _rank_key(mags, t))
            frontier.remove(t)
            chosen.append(t)
            node = dec.tree.nodes[t]
            frontier.extend(c - n for c in (node.left, node.right) if c >= n)

    details = np.zeros_like(dec.details)
    details[chosen] = dec.details[chosen]
    return replace(dec, details=details, kept=tuple(sorted(n + t for t in chosen)))
