"""Regressing an external signal on a hierarchy.

The signal is pushed through the dendrogram's Haar transform, small
details are zeroed and the inverse transform gives a piecewise-constant
fit. MSE is the mean over all points of the squared residual.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .cluster import Dendrogram, Partition
from .errors import DataError, ValidationError
from .haar import MAGNITUDE, forward, inverse, threshold
from .ingest import ExternalSignal

BREAK_TOL = 1e-9
MSE_NORMALIZATION = "mean over n points"


@dataclass(frozen=True, eq=False)
class PiecewiseFit:
    original: np.ndarray
    fitted: np.ndarray
    segments: tuple[tuple[int, int, float], ...]  # (start, end, value), 0-based inclusive
    mse: float
    kept: int | None = None
    labels: tuple[str, ...] = ()

    def to_csv(self) -> str:
        labels = self.labels or tuple(str(i + 1) for i in range(len(self.fitted)))
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", "original", "fitted"])
        for lab, s, f in zip(labels, self.original, self.fitted):
            writer.writerow([lab, repr(float(s)), repr(float(f))])
        return buf.getvalue()


def _values(signal) -> tuple[np.ndarray, tuple[str, ...]]:
    if isinstance(signal, ExternalSignal):
        return np.asarray(signal.values, dtype=float), signal.labels
    values = np.asarray(signal, dtype=float).reshape(-1)
    if values.size == 0:
        raise DataError("signal is empty")
    return values, ()


def _segments(fitted: np.ndarray) -> tuple[tuple[int, int, float], ...]:
    starts = [0, *(b for b in _change_points(fitted))]
    ends = [s - 1 for s in starts[1:]] + [len(fitted) - 1]
    return tuple(
        (lo, hi, float(np.mean(fitted[lo : hi + 1]))) for lo, hi in zip(starts, ends)
    )


def _change_points(fitted: np.ndarray) -> list[int]:
    # 0-based index of the first point of each new run
    return [int(i) + 1 for i in np.flatnonzero(np.abs(np.diff(fitted)) > BREAK_TOL)]


def _make_fit(values, fitted, kept, labels) -> PiecewiseFit:
    resid = fitted - values
    return PiecewiseFit(
        original=values,
        fitted=fitted,
        segments=_segments(fitted),
        mse=float(np.mean(resid * resid)),
        kept=kept,
        labels=labels,
    )


def _check_fold_inputs(tree: Dendrogram, signal):
    values, labels = _values(signal)
    if len(values) != tree.n_leaves:
        raise DataError(f"signal has {len(values)} points, tree has {tree.n_leaves} leaves")
    if labels and tuple(labels) != tree.leaf_labels:
        raise DataError("signal labels do not match the tree's leaf labels")
    if not tree.is_constrained:
        raise ValidationError("regression needs a sequence-constrained tree")
    return values, labels


def _reconstruct(dec, keep, policy, values):
    if keep == dec.tree.n_leaves - 1:
        # nothing is zeroed: the fit is the input itself, bit for bit
        return values.copy()
    return inverse(threshold(dec, keep, policy))[:, 0]


def fold_and_regress(tree: Dendrogram, signal, keep: int, policy: str = MAGNITUDE) -> PiecewiseFit:
    """Fit ``signal`` by keeping ``keep`` Haar details of it on ``tree``.

    ``signal`` is an :class:`ExternalSignal` (labels must match the tree's
    leaves) or a plain sequence of values in leaf order.
    """
    values, labels = _check_fold_inputs(tree, signal)
    dec = forward(tree, values)
    threshold(dec, keep, policy)  # validates keep and policy
    return _make_fit(values, _reconstruct(dec, keep, policy, values), keep, labels)


def mse_sweep(tree: Dendrogram, signal, policy: str = MAGNITUDE) -> list[tuple[int, float, PiecewiseFit]]:
    """Fits for every ``keep`` from 0 to ``n - 1``, in that order.

    MSE is reported as computed; it need not decrease with ``keep`` because
    the transform is not orthogonal on unbalanced trees.
    """
    values, labels = _check_fold_inputs(tree, signal)
    dec = forward(tree, values)
    out = []
    for keep in range(tree.n_leaves):
        fit = _make_fit(values, _reconstruct(dec, keep, policy, values), keep, labels)
        out.append((keep, fit.mse, fit))
    return out


def baseline_fit(partition: Partition, signal) -> PiecewiseFit:
    """Segment means: the least-squares constant-per-segment fit."""
    values, labels = _values(signal)
    if partition.n != len(values):
        raise DataError(f"partition covers {partition.n} points, signal has {len(values)}")
    fitted = np.empty_like(values)
    for lo, hi in partition.segments:
        fitted[lo : hi + 1] = np.mean(values[lo : hi + 1])
    return _make_fit(values, fitted, None, labels)


def extract_breakpoints(fit: PiecewiseFit | Sequence[float]) -> list[int]:
    """1-based positions ``i`` where the fit changes between ``i`` and ``i + 1``."""
    fitted = fit.fitted if isinstance(fit, PiecewiseFit) else np.asarray(fit, dtype=float)
    return _change_points(fitted)


def format_breakpoints(fit: PiecewiseFit | Sequence[float]) -> str:
    """Segments as ``"1 -- 8, 9 -- 12, 13 -- 15"`` (1-based, inclusive)."""
    fitted = fit.fitted if isinstance(fit, PiecewiseFit) else np.asarray(fit, dtype=float)
    cuts = [0, *_change_points(fitted), len(fitted)]
    return ", ".join(f"{a + 1} -- {b}" for a, b in zip(cuts, cuts[1:]))


def breakpoints_table(rows: Sequence[tuple[str, PiecewiseFit]]) -> str:
    """Plain-text table with one ``name | n_segments | segments`` row per fit."""
    lines = ["fit | segments | ranges"]
    for name, fit in rows:
        lines.append(f"{name} | {len(extract_breakpoints(fit)) + 1} | {format_breakpoints(fit)}")
    return "\n".join(lines) + "\n"


def sweep_csv(sweep: Sequence[tuple[int, float, PiecewiseFit]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["keep", "mse"])
    for keep, mse, _ in sweep:
        writer.writerow([keep, repr(float(mse))])
    return buf.getvalue()
