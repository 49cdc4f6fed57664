"""Event parsing, calendar aggregation and signal loading.

Events are read from a CSV with header ``date,<attr1>,...,<attrN>`` and
summed into a contingency table whose rows are calendar bins labelled
``YYYY-MM`` (monthly) or ``YYYY`` (yearly).
"""

from __future__ import annotations

import builtins
import csv
import datetime as dt
import io
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence, TextIO

import numpy as np

from .errors import DataError, ValidationError

logger = logging.getLogger(__name__)

GRANULARITIES = ("month", "year")


@dataclass(frozen=True)
class EventRecord:
    date: dt.date
    counts: tuple[float, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise DataError("event counts must be nonnegative")


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Nonnegative counts, rows are ordered time bins, columns attributes.

    ``dropped_rows`` and ``dropped_cols`` list labels removed because their
    marginal was zero.
    """

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    k: np.ndarray
    dropped_rows: tuple[str, ...] = ()
    dropped_cols: tuple[str, ...] = ()

    def __post_init__(self):
        k = np.array(self.k, dtype=float)
        k.setflags(write=False)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "row_labels", tuple(self.row_labels))
        object.__setattr__(self, "col_labels", tuple(self.col_labels))
        if k.ndim != 2 or k.shape != (len(self.row_labels), len(self.col_labels)):
            raise DataError(
                f"table shape {k.shape} does not match "
                f"{len(self.row_labels)} row and {len(self.col_labels)} column labels"
            )
        if not np.all(np.isfinite(k)) or np.any(k < 0):
            raise DataError("table entries must be finite and nonnegative")
        _check_increasing(self.row_labels, "row labels")
        if np.any(k.sum(axis=1) <= 0):
            raise DataError("table has a zero row")
        if np.any(k.sum(axis=0) <= 0):
            raise DataError("table has a zero column")

    @property
    def k_total(self) -> float:
        return float(self.k.sum())

    @property
    def shape(self) -> tuple[int, int]:
        return self.k.shape


@dataclass(frozen=True, eq=False)
class ExternalSignal:
    labels: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float).reshape(-1)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) == 0:
            raise DataError("signal is empty")
        if len(self.labels) != len(values):
            raise DataError("signal labels and values differ in length")
        if not np.all(np.isfinite(values)):
            raise DataError("signal has missing or non-finite values")
        _check_increasing(self.labels, "labels")

    def __len__(self):
        return len(self.labels)


def _label_key(labels: Sequence[str]):
    # Numeric labels ("1", "2", ..., "10") order numerically; anything else
    # (ISO bins included) orders as text.
    try:
        return [float(lab) for lab in labels]
    except ValueError:
        return list(labels)


def _check_increasing(labels: Sequence[str], what: str):
    keys = _label_key(labels)
    for a, b in zip(keys, keys[1:]):
        if not a < b:
            raise DataError(f"{what} not strictly increasing")


def _parse_count(text: str, lineno: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise DataError(
            f"line {lineno}: column {column!r}: non-numeric count {text!r}"
        ) from None
    if not math.isfinite(value) or value < 0:
        raise DataError(f"line {lineno}: column {column!r}: invalid count {text!r}")
    return value


def parse_events(source: TextIO | str, schema: Sequence[str] | None = None) -> list[EventRecord]:
    """Read dated event records from a CSV stream.

    Parameters
    ----------
    source : text stream or str
        CSV with header ``date,<attr1>,...``. A ``str`` is taken as the
        CSV content itself.
    schema : sequence of str, optional
        Expected attribute names. When omitted the header defines them.

    Returns
    -------
    list of EventRecord
        In file order.

    Raises
    ------
    DataError
        On empty input, malformed dates, negative or non-numeric counts,
        or rows with the wrong number of columns. Messages name the line.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header:
        raise DataError("no event records")
    header = [h.strip() for h in header]
    if header[0] != "date":
        raise DataError("line 1: first column must be 'date'")
    attrs = header[1:]
    if not attrs:
        raise DataError("line 1: no attribute columns")
    if schema is not None and list(schema) != attrs:
        raise DataError("line 1: header does not match the attribute schema")

    records = []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(
                f"line {lineno}: expected {len(header)} columns, got {len(row)}"
            )
        try:
            date = dt.date.fromisoformat(row[0].strip())
        except ValueError:
            raise DataError(f"line {lineno}: malformed date {row[0]!r}") from None
        counts = tuple(
            _parse_count(cell.strip(), lineno, name) for cell, name in zip(row[1:], attrs)
        )
        records.append(EventRecord(date, counts))
    if not records:
        raise DataError("no event records")
    return records


def serialize_events(events: Iterable[EventRecord], schema: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["date", *schema])
    for ev in events:
        writer.writerow([ev.date.isoformat(), *(_fmt(c) for c in ev.counts)])
    return buf.getvalue()


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 2**53 else repr(x)


def bin_label(date: dt.date, granularity: str) -> str:
    if granularity == "month":
        return f"{date.year:04d}-{date.month:02d}"
    if granularity == "year":
        return f"{date.year:04d}"
    raise ValidationError(f"unknown granularity {granularity!r}")


def _parse_label(label: str, granularity: str) -> tuple[int, int]:
    try:
        if granularity == "month":
            year, month = label.split("-")
            ym = (int(year), int(month))
            if not 1 <= ym[1] <= 12 or len(year) != 4 or len(month) != 2:
                raise ValueError
            return ym
        if len(label) != 4:
            raise ValueError
        return (int(label), 1)
    except ValueError:
        raise ValidationError(
            f"bad {granularity} label {label!r} (expected "
            f"{'YYYY-MM' if granularity == 'month' else 'YYYY'})"
        ) from None


def bin_labels(start: str, stop: str, granularity: str) -> list[str]:
    """All calendar bins from ``start`` to ``stop`` inclusive."""
    if granularity not in GRANULARITIES:
        raise ValidationError(f"unknown granularity {granularity!r}")
    y0, m0 = _parse_label(start, granularity)
    y1, m1 = _parse_label(stop, granularity)
    labels = []
    if granularity == "year":
        for y in range(y0, y1 + 1):
            labels.append(f"{y:04d}")
    else:
        y, m = y0, m0
        while (y, m) <= (y1, m1):
            labels.append(f"{y:04d}-{m:02d}")
            y, m = (y + 1, 1) if m == 12 else (y, m + 1)
    if not labels:
        raise ValidationError(f"empty range {start} .. {stop}")
    return labels


def drop_empty(row_labels, col_labels, k) -> ContingencyTable:
    """Remove zero rows and zero columns, logging a warning for each group."""
    k = np.asarray(k, dtype=float)
    row_labels = list(row_labels)
    col_labels = list(col_labels)
    if k.size == 0 or k.sum() <= 0:
        raise DataError("all rows are zero")
    rows = k.sum(axis=1) > 0
    cols = k.sum(axis=0) > 0
    dropped_rows = tuple(lab for lab, keep in zip(row_labels, rows) if not keep)
    dropped_cols = tuple(lab for lab, keep in zip(col_labels, cols) if not keep)
    if dropped_rows:
        logger.warning("dropping %d zero rows: %s", len(dropped_rows), ", ".join(dropped_rows))
    if dropped_cols:
        logger.warning(
            "dropping %d zero columns: %s", len(dropped_cols), ", ".join(dropped_cols)
        )
    return ContingencyTable(
        row_labels=[lab for lab, keep in zip(row_labels, rows) if keep],
        col_labels=[lab for lab, keep in zip(col_labels, cols) if keep],
        k=k[np.ix_(rows, cols)],
        dropped_rows=dropped_rows,
        dropped_cols=dropped_cols,
    )


def aggregate(
    events: Sequence[EventRecord],
    granularity: str,
    range: tuple[str, str] | None = None,
    schema: Sequence[str] | None = None,
) -> ContingencyTable:
    """Sum event counts into calendar bins.

    Events outside ``range`` are ignored. Empty bins and all-zero attributes
    are dropped (see :func:`drop_empty`). Without a ``range`` the bins run
    from the earliest to the latest event.
    """
    if granularity not in GRANULARITIES:
        raise ValidationError(f"unknown granularity {granularity!r}")
    if not events:
        raise DataError("no event records")
    width = len(events[0].counts)
    if any(len(ev.counts) != width for ev in events):
        raise DataError("events disagree on the number of attributes")
    if schema is None:
        schema = [f"a{j + 1}" for j in builtins.range(width)]
    elif len(schema) != width:
        raise DataError(f"schema has {len(schema)} attributes, events have {width}")

    if range is None:
        dates = [ev.date for ev in events]
        range = (bin_label(min(dates), granularity), bin_label(max(dates), granularity))
    labels = bin_labels(range[0], range[1], granularity)
    index = {lab: i for i, lab in enumerate(labels)}

    k = np.zeros((len(labels), width))
    for ev in events:
        i = index.get(bin_label(ev.date, granularity))
        if i is not None:
            k[i] += ev.counts
    return drop_empty(labels, schema, k)



def read_table(source: TextIO | str) -> ContingencyTable:
    """Read a table CSV (``label,<attr1>,...``). Zero rows/columns are dropped."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or header[0].strip() != "label" or len(header) < 2:
        raise DataError("line 1: table header must be 'label,<attr1>,...'")
    cols = [h.strip() for h in header[1:]]
    labels, rows = [], []
    for row in reader:
        lineno = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} columns, got {len(row)}")
        labels.append(row[0].strip())
        rows.append([_parse_count(c.strip(), lineno, name) for c, name in zip(row[1:], cols)])
    if not rows:
        raise DataError("table has no rows")
    _check_increasing(labels, "row labels")
    return drop_empty(labels, cols, np.array(rows))


def write_table(table: ContingencyTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", *table.col_labels])
    for lab, row in zip(table.row_labels, table.k):
        writer.writerow([lab, *(_fmt(x) for x in row)])
    return buf.getvalue()


def load_signal(source: TextIO | str) -> ExternalSignal:
    """Read a ``label,value`` CSV into an :class:`ExternalSignal`."""
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source)
    header = next(reader, None)
    if not header or [h.strip() for h in header] != ["label", "value"]:
        raise DataError("line 1: signal header must be 'label,value'")
    labels, values = [], []
    seen = set()
    for row in reader:
        lineno = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise DataError(f"line {lineno}: expected 2 columns, got {len(row)}")
        label = row[0].strip()
        if label in seen:
            raise DataError(f"line {lineno}: duplicate label {label!r}")
        seen.add(label)
        try:
            value = float(row[1])
        except ValueError:
            raise DataError(f"line {lineno}: non-numeric value {row[1]!r}") from None
        if not math.isfinite(value):
            raise DataError(f"line {lineno}: missing value")
        labels.append(label)
        values.append(value)
    if not labels:
        raise DataError("signal is empty")
    return ExternalSignal(labels, values)
