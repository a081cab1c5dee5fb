import io
import random

import pytest

from overdx.actitrac import Cluster, ClusteringResult
from overdx.audit import (
    ClusterOutcomeSummary,
    FlagRule,
    flag_candidates,
    overdiagnosis_report,
    render_text,
    summarize_cluster,
    write_summary_csv,
)
from overdx.errors import ConfigError, MissingAttributesError
from overdx.eventlog import CaseAttributes, TraceVariant
from overdx.procmodel import mine
from overdx.stats import TestResult


def make_cluster(cid, case_ids, acts=("a", "b", "c")):
    v = TraceVariant(tuple(acts), len(case_ids), frozenset(case_ids))
    return Cluster(cid, (v,), mine([v]), 1.0)


def summary(n_pos, share, p_sofa, p_mort, cid=1):
    n_neg = round(n_pos / share) - n_pos if share else 10
    return ClusterOutcomeSummary(
        cid, n_pos, n_neg, share,
        TestResult(0.0, p_sofa, "exact"), TestResult(0.0, p_mort, "chi-square-yates"), {},
    )


def test_flag_examples():
    assert flag_candidates([summary(12, 0.3, 0.4, 0.6)]) == {1}
    assert flag_candidates([summary(9, 0.3, 0.9, 0.9)]) == set()
    assert flag_candidates([summary(30, 0.8, 0.9, 0.9)]) == set()


def test_flag_boundaries_strict():
    assert flag_candidates([summary(10, 0.5, 0.9, 0.9)]) == set()
    assert flag_candidates([summary(10, 0.25, 0.05, 0.9)]) == set()
    assert flag_candidates([summary(10, 0.25, 0.9, 0.9)]) == {1}


def test_rule_monotonicity():
    rng = random.Random(0)
    sums = [summary(rng.randint(0, 40), rng.choice([0.1, 0.3, 0.45, 0.6]), rng.random(), rng.random(), i)
            for i in range(200)]
    for lo, hi in [(0.01, 0.05), (0.05, 0.2)]:
        # the rule needs p > alpha, so a smaller alpha can only add clusters
        assert flag_candidates(sums, FlagRule(alpha=hi)) <= flag_candidates(sums, FlagRule(alpha=lo))
    for lo, hi in [(5, 10), (10, 20)]:
        assert flag_candidates(sums, FlagRule(min_pos=hi)) <= flag_candidates(sums, FlagRule(min_pos=lo))


def test_rule_validation():
    with pytest.raises(ConfigError):
        FlagRule(alpha=0)


def interleaved_attrs():
    # positives and negatives share every outcome value
    attrs = {}
    for i in range(24):
        y = i % 2
        attrs[f"p{i:02d}"] = CaseAttributes(f"p{i:02d}", y, y, i // 2 % 6, int(i // 2 % 4 == 0), "home")
    return attrs


def test_identical_outcomes_not_significant():
    attrs = interleaved_attrs()
    s = summarize_cluster(make_cluster(1, list(attrs)), attrs)
    assert s.n_pos == s.n_neg == 12
    assert s.sofa_test.statistic == 0 and s.sofa_test.p_value == 1.0
    assert s.mortality_test.statistic == 0 and s.mortality_test.p_value == 1.0
    assert sum(s.discharge_distribution["positive"].values()) == pytest.approx(1)


def test_negative_only_cluster():
    attrs = {f"n{i}": CaseAttributes(f"n{i}", 0, 0, 3, 0, "home") for i in range(5)}
    s = summarize_cluster(make_cluster(1, list(attrs)), attrs)
    assert s.pos_share == 0
    assert s.sofa_test is None and s.mortality_test is None
    assert flag_candidates([s], FlagRule(min_pos=0)) == set()


def test_missing_attributes_named():
    with pytest.raises(MissingAttributesError, match="ghost"):
        summarize_cluster(make_cluster(1, ["ghost"]), {})


def build_report(rule=FlagRule()):
    attrs = interleaved_attrs()
    sick = {}
    for i in range(30):
        sick[f"s{i:02d}"] = CaseAttributes(f"s{i:02d}", 1, 1, 12, 1, "died")
    for i in range(10):
        sick[f"t{i:02d}"] = CaseAttributes(f"t{i:02d}", 0, 0, 2, 0, "home")
    residual = {"r1": CaseAttributes("r1", 1, 1, 5, 0, "home"), "r2": CaseAttributes("r2", 0, 0, 5, 0, "home")}
    clusters = (make_cluster(1, list(attrs)), make_cluster(2, list(sick), "xyz"))
    res_v = TraceVariant(("a",), 2, frozenset(residual))
    all_attrs = {**attrs, **sick, **residual}
    return overdiagnosis_report(ClusteringResult(clusters, (res_v,)), all_attrs, rule), all_attrs


def test_report_counts():
    report, attrs = build_report(FlagRule(max_pos_share=0.6))
    assert report.flagged_cluster_ids == (1,)
    assert set(report.flagged_case_ids) == {c for c in attrs if c.startswith("p") and attrs[c].y_true}
    assert report.count == 12
    assert report.total_positive == 12 + 30 + 1
    assert report.rate == pytest.approx(12 / 43)
    assert "r1" not in report.flagged_case_ids


def test_report_nothing_flagged():
    report, _ = build_report(FlagRule(min_pos=100))
    assert report.count == 0 and report.rate == 0


def test_report_outputs():
    report, _ = build_report(FlagRule(max_pos_share=0.6))
    buf = io.StringIO()
    write_summary_csv(report, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3 and lines[0].startswith("cluster_id")
    assert "12 of 43" in render_text(report)
    assert report.as_dict()["rate_denominator"] == 43
