r"""Correspondence analysis of a contingency table.

Rows and columns are mapped into a common factor space in which the
Euclidean distance between two row points equals the :math:`\chi^2`
distance between the corresponding row profiles. Coordinates are
principal coordinates: ``F = D_r^{-1/2} U \Sigma`` and
``G = D_c^{-1/2} V \Sigma`` where ``U \Sigma V^T`` is the SVD of the
standardized residuals ``(f_ij - f_i f_j) / sqrt(f_i f_j)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError
from .ingest import ContingencyTable

EIGENVALUE_CUTOFF = 1e-12
TRANSITION_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class FrequencyModel:
    f: np.ndarray
    f_row: np.ndarray
    f_col: np.ndarray
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    @property
    def profiles_row(self) -> np.ndarray:
        """Row profiles ``f_ij / f_i``; each row sums to one."""
        return self.f / self.f_row[:, None]

    @property
    def profiles_col(self) -> np.ndarray:
        """Column profiles ``f_ij / f_j``, stored column-wise."""
        return self.f / self.f_col[None, :]


@dataclass(frozen=True, eq=False)
class FactorDecomposition:
    """Retained factors, ordered by decreasing eigenvalue.

    ``n_factors`` is the inherent dimensionality ``min(|I|, |J|) - 1``;
    ``eigenvalues`` may be shorter when trailing eigenvalues fall under
    :data:`EIGENVALUE_CUTOFF`.
    """

    eigenvalues: np.ndarray
    row_factors: np.ndarray  # (|I|, retained)
    col_factors: np.ndarray  # (|J|, retained)
    n_factors: int
    inertia_total: float
    row_labels: tuple[str, ...] = ()
    col_labels: tuple[str, ...] = ()

    @property
    def n_retained(self) -> int:
        return len(self.eigenvalues)

    def to_json(self) -> str:
        doc = {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "inertia_total": float(self.inertia_total),
            "n_factors": int(self.n_factors),
            "rows": [
                {"label": lab, "coords": [float(x) for x in row]}
                for lab, row in zip(self.row_labels, self.row_factors)
            ],
            "cols": [
                {"label": lab, "coords": [float(x) for x in col]}
                for lab, col in zip(self.col_labels, self.col_factors)
            ],
        }
        return json.dumps(doc, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "FactorDecomposition":
        try:
            doc = json.loads(text)
            rows, cols = doc["rows"], doc["cols"]
            eig = np.array(doc["eigenvalues"], dtype=float)
            r = len(eig)
            row_factors = np.array([row["coords"] for row in rows], dtype=float).reshape(len(rows), r)
            col_factors = np.array([col["coords"] for col in cols], dtype=float).reshape(len(cols), r)
            return cls(
                eigenvalues=eig,
                row_factors=row_factors,
                col_factors=col_factors,
                n_factors=int(doc.get("n_factors", min(len(rows), len(cols)) - 1)),
                inertia_total=float(doc["inertia_total"]),
                row_labels=tuple(row["label"] for row in rows),
                col_labels=tuple(col["label"] for col in cols),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"malformed factor JSON: {exc}") from None


def frequency_model(table: ContingencyTable | np.ndarray) -> FrequencyModel:
    """Relative frequencies, marginals and profiles of a table.

    A bare array is accepted as well as a :class:`ContingencyTable`.
    """
    if isinstance(table, ContingencyTable):
        k, rows, cols = table.k, table.row_labels, table.col_labels
    else:
        k = np.asarray(table, dtype=float)
        rows = tuple(str(i + 1) for i in range(k.shape[0]))
        cols = tuple(str(j + 1) for j in range(k.shape[1])) if k.ndim == 2 else ()
    if k.ndim != 2:
        raise DataError("contingency table must be two-dimensional")
    if np.any(k < 0) or not np.all(np.isfinite(k)):
        raise DataError("contingency table must be finite and nonnegative")
    total = k.sum()
    if total <= 0:
        raise DataError("contingency table has zero grand total")
    f = k / total
    f_row = f.sum(axis=1)
    f_col = f.sum(axis=0)
    if np.any(f_row <= 0):
        raise DataError("contingency table has a zero row; drop it first")
    if np.any(f_col <= 0):
        raise DataError("contingency table has a zero column; drop it first")
    return FrequencyModel(f, f_row, f_col, tuple(rows), tuple(cols))


def chi2_sq_distance(model: FrequencyModel, i: int, i2: int) -> float:
    """Squared chi-squared distance between row profiles ``i`` and ``i2``."""
    n = model.f.shape[0]
    if not (0 <= i < n and 0 <= i2 < n):
        raise IndexError(f"row index out of range for {n} rows")
    if i == i2:
        return 0.0
    diff = model.f[i] / model.f_row[i] - model.f[i2] / model.f_row[i2]
    return float(np.sum(diff * diff / model.f_col))


def total_inertia(model: FrequencyModel) -> float:
    expected = np.outer(model.f_row, model.f_col)
    return float(np.sum((model.f - expected) ** 2 / expected))


def _standardized_residuals(model: FrequencyModel) -> np.ndarray:
    expected = np.outer(model.f_row, model.f_col)
    return (model.f - expected) / np.sqrt(expected)


def factor_decomposition(model: FrequencyModel) -> FactorDecomposition:
    """Principal axes of inertia via SVD of the standardized residuals.

    Each factor's sign is fixed so that its largest-magnitude row
    coordinate is positive (first such row on ties).
    """
    n_rows, n_cols = model.f.shape
    if min(n_rows, n_cols) < 2:
        raise DataError("correspondence analysis needs at least 2 rows and 2 columns")
    S = _standardized_residuals(model)
    try:
        U, sv, Vt = np.linalg.svd(S, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD failed: {exc}") from None

    n_factors = min(n_rows, n_cols) - 1
    eig = sv**2
    retained = int(np.sum(eig[:n_factors] >= EIGENVALUE_CUTOFF))
    U = U[:, :retained]
    V = Vt[:retained].T
    sv = sv[:retained]

    F = U * sv / np.sqrt(model.f_row)[:, None]
    G = V * sv / np.sqrt(model.f_col)[:, None]
    for a in range(retained):
        mag = np.abs(F[:, a])
        # first row within round-off of the largest magnitude
        pivot = int(np.flatnonzero(mag >= mag.max() * (1 - 1e-9))[0])
        if F[pivot, a] < 0:
            F[:, a] = -F[:, a]
            G[:, a] = -G[:, a]

    return FactorDecomposition(
        eigenvalues=eig[:retained],
        row_factors=F,
        col_factors=G,
        n_factors=n_factors,
        inertia_total=total_inertia(model),
        row_labels=model.row_labels,
        col_labels=model.col_labels,
    )


@dataclass(frozen=True)
class TransitionReport:
    row_deviation: tuple[float, ...]
    col_deviation: tuple[float, ...]
    tol: float = TRANSITION_TOL

    @property
    def ok(self) -> bool:
        return all(d < self.tol for d in self.row_deviation + self.col_deviation)


def transition_consistency(dec: FactorDecomposition, model: FrequencyModel) -> TransitionReport:
    """Check the barycentric transition formulas factor by factor.

    Row coordinates must equal ``lambda^{-1/2}`` times the profile-weighted
    mean of column coordinates, and vice versa. Deviations are reported as
    the per-factor maximum absolute difference; nothing is raised.
    """
    scale = 1.0 / np.sqrt(dec.eigenvalues)
    F_from_G = (model.profiles_row @ dec.col_factors) * scale
    G_from_F = (model.profiles_col.T @ dec.row_factors) * scale
    row_dev = np.max(np.abs(F_from_G - dec.row_factors), axis=0) if dec.n_retained else []
    col_dev = np.max(np.abs(G_from_F - dec.col_factors), axis=0) if dec.n_retained else []
    return TransitionReport(
        tuple(float(x) for x in row_dev), tuple(float(x) for x in col_dev)
    )


def factor_sq_distances(dec: FactorDecomposition, dims: int | None = None) -> np.ndarray:
    """Squared Euclidean distances between row points in factor space."""
    F = dec.row_factors if dims is None else dec.row_factors[:, :dims]
    diff = F[:, None, :] - F[None, :, :]
    return np.sum(diff * diff, axis=-1)
