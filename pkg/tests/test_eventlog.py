import io
import random

import pytest

from overdx.errors import (
    EmptyInputError,
    MissingAttributesError,
    RowError,
    SchemaError,
    VocabularyError,
    XESParseError,
)
from overdx.eventlog import (
    CaseAttributes,
    CohortPolicy,
    EventLog,
    Trace,
    filter_cohort,
    filter_cohort_with_stats,
    parse_attributes_csv,
    parse_event_csv,
    parse_xes,
    variants,
    write_event_csv,
)

VOCAB = ("a", "b", "c", "x", "y", "z")


def csv_log(rows, header="case_id,activity,timestamp", **kw):
    text = header + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    kw.setdefault("vocabulary", VOCAB)
    return parse_event_csv(io.StringIO(text), **kw)


def attrs(case_id, y_true=1, y_pred=1, sofa=5, died=0):
    return CaseAttributes(case_id, y_true, y_pred, sofa, died, "home")


def trace_log(*seqs):
    return EventLog(
        tuple(Trace(f"c{i}", tuple(s)) for i, s in enumerate(seqs)), frozenset(VOCAB)
    )


def test_single_case_grouped_in_time_order():
    log = csv_log([
        ("1", "a", "2020-01-01T00:00:00"),
        ("1", "b", "2020-01-01T00:01:00"),
        ("1", "c", "2020-01-01T00:02:00"),
    ])
    assert len(log) == 1
    assert log.traces[0].activities == ("a", "b", "c")


def test_out_of_order_rows_sorted_by_timestamp():
    log = csv_log([
        ("1", "c", "2020-01-01T03:00:00Z"),
        ("1", "a", "2020-01-01T01:00:00Z"),
        ("1", "b", "2020-01-01T02:00:00Z"),
    ])
    assert log.traces[0].activities == ("a", "b", "c")


def test_equal_timestamps_keep_input_order():
    log = csv_log([
        ("1", "b", "2020-01-01T00:00:00"),
        ("1", "a", "2020-01-01T00:00:00"),
    ])
    assert log.traces[0].activities == ("b", "a")


def test_strict_vocabulary_error_names_line():
    with pytest.raises(VocabularyError) as err:
        csv_log([("1", "a", "2020-01-01T00:00:00"), ("1", "xyz", "2020-01-01T00:01:00")], strict=True)
    assert err.value.line == 3
    assert "xyz" in str(err.value)


def test_lenient_vocabulary_extends():
    log = csv_log([("1", "xyz", "2020-01-01T00:00:00")])
    assert "xyz" in log.vocabulary


def test_missing_column_is_schema_error():
    with pytest.raises(SchemaError):
        csv_log([("1", "a")], header="case_id,activity")


def test_column_map():
    log = csv_log([("1", "a", "2020-01-01T00:00:00")], header="stay,event,time",
                  column_map={"case_id": "stay", "activity": "event", "timestamp": "time"})
    assert log.traces[0].case_id == "1"


def test_bad_timestamp_reports_line():
    with pytest.raises(RowError) as err:
        csv_log([("1", "a", "2020-01-01T00:00:00"), ("1", "b", "yesterday")])
    assert err.value.line == 3


def test_empty_file():
    with pytest.raises(EmptyInputError, match="empty event log"):
        parse_event_csv(io.StringIO(""))


def test_header_only_gives_empty_log():
    assert len(csv_log([])) == 0


XES = """<?xml version="1.0" encoding="UTF-8"?>
<log xmlns="http://www.xes-standard.org/">
  <trace>
    <string key="concept:name" value="42"/>
    <event><string key="concept:name" value="b"/><date key="time:timestamp" value="2020-01-01T00:01:00.000+00:00"/></event>
    <event><string key="concept:name" value="a"/><date key="time:timestamp" value="2020-01-01T00:00:00.000+00:00"/></event>
    <event><string key="concept:name" value="c"/><date key="time:timestamp" value="2020-01-01T00:02:00.000+00:00"/></event>
  </trace>
</log>
"""


def test_xes_single_trace():
    log = parse_xes(io.BytesIO(XES.encode()), vocabulary=VOCAB)
    assert len(log) == 1
    assert log.traces[0].case_id == "42"
    assert log.traces[0].activities == ("a", "b", "c")


def test_xes_event_without_name():
    bad = XES.replace('<string key="concept:name" value="b"/>', "")
    with pytest.raises(XESParseError, match="concept:name"):
        parse_xes(io.BytesIO(bad.encode()), vocabulary=VOCAB)


def test_xes_empty_log():
    assert len(parse_xes(io.BytesIO(b"<log/>"))) == 0


def test_xes_malformed():
    with pytest.raises(XESParseError):
        parse_xes(io.BytesIO(b"<log><trace></log>"))


def test_misclassified_case_dropped():
    log = trace_log("abc", "abc")
    a = {"c0": attrs("c0", 1, 0), "c1": attrs("c1", 1, 1)}
    assert filter_cohort(log, a).case_ids == ["c1"]


def test_fewer_than_three_distinct_dropped():
    log = trace_log("abab", "abc")
    a = {"c0": attrs("c0"), "c1": attrs("c1")}
    assert filter_cohort(log, a).case_ids == ["c1"]


def test_cohort_stats_echo():
    log = trace_log("abc", "xyz", "ab", "abc")
    a = {"c0": attrs("c0", 1, 1), "c1": attrs("c1", 0, 0), "c2": attrs("c2"), "c3": attrs("c3", 0, 1)}
    _, stats = filter_cohort_with_stats(log, a)
    assert (stats.kept_positive, stats.kept_negative) == (1, 1)
    assert (stats.dropped_short, stats.dropped_misclassified) == (1, 1)


def test_missing_attributes_policy():
    log = trace_log("abc", "xyz")
    a = {"c0": attrs("c0")}
    assert filter_cohort(log, a).case_ids == ["c0"]
    with pytest.raises(MissingAttributesError, match="c1"):
        filter_cohort(log, a, CohortPolicy(missing_attrs="error"))


def test_filter_is_idempotent():
    rng = random.Random(3)
    seqs = ["".join(rng.choice("abcxyz") for _ in range(rng.randint(1, 6))) for _ in range(80)]
    log = trace_log(*seqs)
    a = {f"c{i}": attrs(f"c{i}", rng.randint(0, 1), rng.randint(0, 1)) for i in range(80)}
    once = filter_cohort(log, a)
    assert filter_cohort(once, a) == once


def test_variants_counting():
    vs = variants(trace_log("abc", "abc", "xyz"))
    assert [(v.activities, v.frequency) for v in vs] == [(("a", "b", "c"), 2), (("x", "y", "z"), 1)]
    assert vs[0].member_case_ids == {"c0", "c1"}


def test_variants_empty():
    assert variants(trace_log()) == []


def test_variants_tie_lexicographic():
    vs = variants(trace_log("xyz", "abc"))
    assert [v.activities for v in vs] == [("a", "b", "c"), ("x", "y", "z")]


def test_variants_invariant_under_shuffle():
    rng = random.Random(11)
    seqs = ["".join(rng.choice("abc") for _ in range(rng.randint(1, 4))) for _ in range(60)]
    ref = variants(trace_log(*seqs))
    traces = list(trace_log(*seqs).traces)
    rng.shuffle(traces)
    assert variants(EventLog(tuple(traces), frozenset(VOCAB))) == ref
    assert sum(v.frequency for v in ref) == 60


def test_csv_round_trip():
    rows = [("1", "a", "2020-01-01T00:00:00"), ("1", "b", "2020-01-01T00:05:00"),
            ("2", "c", "2020-01-02T10:00:00"), ("2", "x", "2020-01-02T09:00:00")]
    log = csv_log(rows)
    buf = io.StringIO()
    write_event_csv(log, buf)
    again = parse_event_csv(io.StringIO(buf.getvalue()), vocabulary=VOCAB)
    assert again == log


def test_attributes_validation():
    good = "case_id,y_true,y_pred,sofa_24h,died,discharge_location\n1,1,1,4,0,home\n"
    assert parse_attributes_csv(io.StringIO(good))["1"].sofa_24h == 4
    with pytest.raises(RowError):
        parse_attributes_csv(io.StringIO(good.replace(",4,", ",25,")))
    with pytest.raises(RowError, match="duplicate"):
        parse_attributes_csv(io.StringIO(good + "1,0,0,2,0,home\n"))
