import datetime as dt
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultraseg.errors import DataError, ValidationError
from ultraseg.ingest import (
    ContingencyTable,
    EventRecord,
    aggregate,
    bin_labels,
    load_signal,
    parse_events,
    read_table,
    serialize_events,
    write_table,
)


def test_parse_events_header_only():
    with pytest.raises(DataError, match="no event records"):
        parse_events("date,a,b\n")


def test_parse_events_empty_stream():
    with pytest.raises(DataError, match="no event records"):
        parse_events(io.StringIO(""))


def test_parse_three_line_fixture(fixtures_dir):
    with open(fixtures_dir / "events_small.csv") as fh:
        events = parse_events(fh, ["killed", "injured"])
    assert [ev.date for ev in events] == [
        dt.date(2001, 3, 4),
        dt.date(2001, 3, 20),
        dt.date(2001, 5, 1),
    ]
    assert [ev.counts for ev in events] == [(1, 2), (3, 4), (0, 7)]


def test_negative_count_names_line_and_column():
    with pytest.raises(DataError, match=r"line 3: column 'b'"):
        parse_events("date,a,b\n2001-01-01,1,2\n2001-01-02,1,-1\n")


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("date,a\n2001-13-01,1\n", "line 2: malformed date"),
        ("date,a,b\n2001-01-01,1\n", "line 2: expected 3 columns"),
        ("date,a\n2001-01-01,x\n", "line 2: column 'a': non-numeric"),
    ],
)
def test_parse_errors(text, pattern):
    with pytest.raises(DataError, match=pattern):
        parse_events(text)


def test_schema_mismatch():
    with pytest.raises(DataError, match="schema"):
        parse_events("date,a,b\n2001-01-01,1,2\n", ["a", "c"])


def test_fractional_counts_accepted():
    (ev,) = parse_events("date,a\n2001-01-01,2.5\n")
    assert ev.counts == (2.5,)


def test_aggregate_same_month_adds():
    events = [
        EventRecord(dt.date(2000, 6, 1), (1, 2)),
        EventRecord(dt.date(2000, 6, 30), (3, 4)),
    ]
    table = aggregate(events, "month")
    assert table.row_labels == ("2000-06",)
    np.testing.assert_array_equal(table.k, [[4, 6]])


def _daily_events(start_year, stop_year, width=3):
    # one event on the 1st and 15th of every month, deterministic counts
    events = []
    for year in range(start_year, stop_year + 1):
        for month in range(1, 13):
            for day in (1, 15):
                c = (year * 7 + month * 3 + day) % 5
                events.append(EventRecord(dt.date(year, month, day), tuple(c + j for j in range(width))))
    return events


def test_monthly_1988_2004_has_204_rows():
    table = aggregate(_daily_events(1988, 2004), "month", ("1988-01", "2004-12"))
    assert table.shape[0] == 204
    assert table.row_labels[0] == "1988-01" and table.row_labels[-1] == "2004-12"


def test_yearly_1990_2004_has_15_rows_and_excludes_outside():
    events = _daily_events(1988, 2004)
    table = aggregate(events, "year", ("1990", "2004"))
    assert table.shape[0] == 15
    inside = sum(sum(ev.counts) for ev in events if 1990 <= ev.date.year <= 2004)
    assert table.k_total == inside


def test_empty_bins_dropped_with_warning(caplog):
    events = [
        EventRecord(dt.date(2000, 1, 5), (1, 0)),
        EventRecord(dt.date(2000, 3, 5), (2, 0)),
    ]
    table = aggregate(events, "month", ("2000-01", "2000-03"), ["a", "b"])
    assert table.row_labels == ("2000-01", "2000-03")
    assert table.dropped_rows == ("2000-02",)
    assert table.dropped_cols == ("b",)
    assert "dropping" in caplog.text


def test_aggregate_all_zero_is_error():
    events = [EventRecord(dt.date(2000, 1, 5), (0, 0))]
    with pytest.raises(DataError, match="all rows are zero"):
        aggregate(events, "year", ("2000", "2000"))


def test_range_errors():
    events = [EventRecord(dt.date(2000, 1, 5), (1,))]
    with pytest.raises(ValidationError, match="empty range"):
        aggregate(events, "year", ("2001", "2000"))
    with pytest.raises(ValidationError, match="bad month label"):
        aggregate(events, "month", ("2000", "2001"))


def test_bin_labels_month_rollover():
    assert bin_labels("1999-11", "2000-02", "month") == ["1999-11", "1999-12", "2000-01", "2000-02"]


event_lists = st.lists(
    st.builds(
        EventRecord,
        st.dates(dt.date(1995, 1, 1), dt.date(1999, 12, 31)),
        st.tuples(*[st.integers(0, 50).map(float)] * 3),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=60, deadline=None)
@given(event_lists, st.randoms(use_true_random=False))
def test_aggregate_conserves_mass_and_ignores_order(events, rnd):
    if sum(sum(ev.counts) for ev in events) == 0:
        return
    rng = ("1996", "1998")
    inside = [ev for ev in events if 1996 <= ev.date.year <= 1998]
    shuffled = list(events)
    rnd.shuffle(shuffled)
    try:
        table = aggregate(events, "year", rng, ["a", "b", "c"])
    except DataError:
        assert sum(sum(ev.counts) for ev in inside) == 0
        return
    assert table.k_total == sum(sum(ev.counts) for ev in inside)
    other = aggregate(shuffled, "year", rng, ["a", "b", "c"])
    np.testing.assert_array_equal(table.k, other.k)
    assert table.row_labels == other.row_labels


@settings(max_examples=60, deadline=None)
@given(event_lists)
def test_parse_serialize_round_trip(events):
    schema = ["a", "b", "c"]
    assert parse_events(serialize_events(events, schema), schema) == events


def test_load_signal_fixture():
    text = "label,value\n" + "".join(f"{y},{y - 1980.5}\n" for y in range(1990, 2005))
    sig = load_signal(text)
    assert len(sig) == 15
    assert sig.labels[0] == "1990"
    assert sig.values[-1] == 2004 - 1980.5


def test_load_signal_single_row():
    sig = load_signal("label,value\n2001,3.5\n")
    assert len(sig) == 1 and sig.values[0] == 3.5


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("label,value\n2001,1\n2000,2\n", "labels not strictly increasing"),
        ("label,value\n2001,1\n2001,2\n", "duplicate label"),
        ("label,value\n2001,abc\n", "non-numeric"),
        ("label,value\n", "empty"),
        ("label,value\n2001,\n", "non-numeric"),
    ],
)
def test_load_signal_errors(text, pattern):
    with pytest.raises(DataError, match=pattern):
        load_signal(text)


def test_numeric_labels_order_numerically():
    sig = load_signal("label,value\n9,1\n10,2\n")
    assert sig.labels == ("9", "10")


def test_table_csv_round_trip(fixtures_dir):
    table = read_table((fixtures_dir / "synthetic_table.csv").read_text())
    assert table.shape == (12, 6)
    again = read_table(write_table(table))
    np.testing.assert_array_equal(again.k, table.k)
    assert again.row_labels == table.row_labels
    assert again.col_labels == table.col_labels


def test_table_rejects_zero_row_directly():
    with pytest.raises(DataError, match="zero row"):
        ContingencyTable(["1", "2"], ["a", "b"], [[1, 1], [0, 0]])
