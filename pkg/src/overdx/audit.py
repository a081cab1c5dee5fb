"""Per-cluster outcome comparison and the overdiagnosis flagging rule.

True-positive cases that share a cluster with true negatives, and whose SOFA
scores and mortality cannot be told apart from those negatives, are reported
as potential overdiagnosis.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from statistics import median
from typing import IO, Mapping

from .actitrac import ClusteringResult
from .errors import ConfigError, InputError, MissingAttributesError
from .eventlog import CaseAttributes
from .stats import TestResult, two_proportion_test, wilcoxon_rank_sum


@dataclass(frozen=True)
class FlagRule:
    max_pos_share: float = 0.5
    min_pos: int = 10
    alpha: float = 0.05

    def __post_init__(self):
        if not 0 <= self.max_pos_share <= 1:
            raise ConfigError("max_pos_share must lie in [0, 1]")
        if self.min_pos < 0:
            raise ConfigError("min_pos must be non-negative")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ClusterOutcomeSummary:
    cluster_id: int
    n_pos: int
    n_neg: int
    pos_share: float
    sofa_test: TestResult | None
    mortality_test: TestResult | None
    discharge_distribution: Mapping[str, Mapping[str, float]]
    deaths_pos: int = 0
    deaths_neg: int = 0
    sofa_median_pos: float | None = None
    sofa_median_neg: float | None = None
    n_variants: int = 0

    @property
    def tests_applicable(self) -> bool:
        return self.sofa_test is not None and self.mortality_test is not None

    def as_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "n_variants": self.n_variants,
            "n_pos": self.n_pos,
            "n_neg": self.n_neg,
            "pos_share": self.pos_share,
            "deaths_pos": self.deaths_pos,
            "deaths_neg": self.deaths_neg,
            "sofa_median_pos": self.sofa_median_pos,
            "sofa_median_neg": self.sofa_median_neg,
            "sofa_test": self.sofa_test.as_dict() if self.sofa_test else None,
            "mortality_test": self.mortality_test.as_dict() if self.mortality_test else None,
            "discharge_distribution": {g: dict(d) for g, d in self.discharge_distribution.items()},
        }


@dataclass(frozen=True)
class OverdiagnosisReport:
    summaries: tuple[ClusterOutcomeSummary, ...]
    flagged_cluster_ids: tuple[int, ...]
    flagged_case_ids: tuple[str, ...]
    total_positive: int
    residual_pos: int = 0
    residual_neg: int = 0
    rule: FlagRule = field(default_factory=FlagRule)
    continuity: bool = True

    @property
    def count(self) -> int:
        return len(self.flagged_case_ids)

    @property
    def rate(self) -> float:
        return self.count / self.total_positive if self.total_positive else 0.0

    def as_dict(self) -> dict:
        return {
            "summaries": [s.as_dict() for s in self.summaries],
            "residual": {"n_pos": self.residual_pos, "n_neg": self.residual_neg},
            "flag_rule": {
                "max_pos_share": self.rule.max_pos_share,
                "min_pos": self.rule.min_pos,
                "alpha": self.rule.alpha,
                "proportion_test_continuity": self.continuity,
            },
            "flagged_cluster_ids": list(self.flagged_cluster_ids),
            "flagged_case_ids": list(self.flagged_case_ids),
            "count": self.count,
            "rate": self.rate,
            "rate_denominator": self.total_positive,
            "rate_denominator_definition": "true-positive cases in the clustering cohort (clusters and residual)",
        }


def _distribution(labels) -> dict[str, float]:
    counts = Counter(labels)
    total = sum(counts.values())
    return {k: counts[k] / total for k in sorted(counts)}


def summarize_cluster(
    cluster,
    attrs: Mapping[str, CaseAttributes],
    continuity: bool = True,
) -> ClusterOutcomeSummary:
    case_ids = cluster.case_ids
    missing = [c for c in case_ids if c not in attrs]
    if missing:
        raise MissingAttributesError(missing)
    pos = [attrs[c] for c in case_ids if attrs[c].y_true == 1]
    neg = [attrs[c] for c in case_ids if attrs[c].y_true == 0]
    total = len(pos) + len(neg)

    sofa_test = mort_test = None
    if pos and neg:
        sofa_test = wilcoxon_rank_sum([a.sofa_24h for a in pos], [a.sofa_24h for a in neg])
        mort_test = two_proportion_test(
            sum(a.died for a in pos), len(pos), sum(a.died for a in neg), len(neg), continuity
        )
    discharge = {}
    if pos:
        discharge["positive"] = _distribution(a.discharge_location for a in pos)
    if neg:
        discharge["negative"] = _distribution(a.discharge_location for a in neg)
    return ClusterOutcomeSummary(
        cluster_id=cluster.id,
        n_pos=len(pos),
        n_neg=len(neg),
        pos_share=len(pos) / total if total else 0.0,
        sofa_test=sofa_test,
        mortality_test=mort_test,
        discharge_distribution=discharge,
        deaths_pos=sum(a.died for a in pos),
        deaths_neg=sum(a.died for a in neg),
        sofa_median_pos=float(median(a.sofa_24h for a in pos)) if pos else None,
        sofa_median_neg=float(median(a.sofa_24h for a in neg)) if neg else None,
        n_variants=len(cluster.members),
    )


def is_flagged(s: ClusterOutcomeSummary, rule: FlagRule) -> bool:
    return (
        s.tests_applicable
        and s.pos_share < rule.max_pos_share
        and s.n_pos >= rule.min_pos
        and s.sofa_test.p_value > rule.alpha
        and s.mortality_test.p_value > rule.alpha
    )


def flag_candidates(summaries, rule: FlagRule = FlagRule()) -> set[int]:
    return {s.cluster_id for s in summaries if is_flagged(s, rule)}


def overdiagnosis_report(
    clustering: ClusteringResult,
    attrs: Mapping[str, CaseAttributes],
    rule: FlagRule = FlagRule(),
    continuity: bool = True,
) -> OverdiagnosisReport:
    """Summaries for every cluster, flagged clusters and the flagged TP cases.

    The rate's denominator counts every positive case in the clustering
    cohort, residual included.
    """
    summaries = tuple(summarize_cluster(cl, attrs, continuity) for cl in clustering.clusters)
    flagged = sorted(flag_candidates(summaries, rule))
    residual_ids = clustering.residual_case_ids
    missing = [c for c in residual_ids if c not in attrs]
    if missing:
        raise MissingAttributesError(missing)
    flagged_set = set(flagged)
    cases = []
    for cl in clustering.clusters:
        if cl.id in flagged_set:
            cases.extend(c for c in cl.case_ids if attrs[c].y_true == 1)
    res_pos = sum(attrs[c].y_true for c in residual_ids)
    total_pos = sum(s.n_pos for s in summaries) + res_pos
    if len(set(cases)) != len(cases):
        raise InputError("a case appears in more than one cluster")
    return OverdiagnosisReport(
        summaries=summaries,
        flagged_cluster_ids=tuple(flagged),
        flagged_case_ids=tuple(sorted(cases)),
        total_positive=total_pos,
        residual_pos=res_pos,
        residual_neg=len(residual_ids) - res_pos,
        rule=rule,
        continuity=continuity,
    )


SUMMARY_COLUMNS = (
    "cluster_id", "n_variants", "n_pos", "n_neg", "pos_share", "deaths_pos", "deaths_neg",
    "sofa_median_pos", "sofa_median_neg", "sofa_p", "sofa_method", "mortality_p",
    "mortality_method", "flagged",
)


def write_summary_csv(report: OverdiagnosisReport, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(SUMMARY_COLUMNS)
    flagged = set(report.flagged_cluster_ids)
    for s in report.summaries:
        out.writerow([
            s.cluster_id, s.n_variants, s.n_pos, s.n_neg, f"{s.pos_share:.6f}",
            s.deaths_pos, s.deaths_neg,
            "" if s.sofa_median_pos is None else s.sofa_median_pos,
            "" if s.sofa_median_neg is None else s.sofa_median_neg,
            "" if s.sofa_test is None else f"{s.sofa_test.p_value:.6g}",
            "" if s.sofa_test is None else s.sofa_test.method,
            "" if s.mortality_test is None else f"{s.mortality_test.p_value:.6g}",
            "" if s.mortality_test is None else s.mortality_test.method,
            int(s.cluster_id in flagged),
        ])


def _p(t: TestResult | None) -> str:
    return "n/a" if t is None else f"{t.p_value:.3g}"


def render_text(report: OverdiagnosisReport, n_clusters_residual_traces: int | None = None) -> str:
    lines = [
        "Overdiagnosis audit",
        "===================",
        f"clusters: {len(report.summaries)}"
        + (f", residual traces: {n_clusters_residual_traces}" if n_clusters_residual_traces is not None else ""),
        f"rule: positive share < {report.rule.max_pos_share:g}, positives >= {report.rule.min_pos}, "
        f"both p > {report.rule.alpha:g} (proportion test {'with' if report.continuity else 'without'} Yates correction)",
        "",
        f"{'cluster':>7} {'pos':>5} {'neg':>5} {'share':>6} {'sofa p':>9} {'death p':>9}  flag",
    ]
    flagged = set(report.flagged_cluster_ids)
    for s in report.summaries:
        lines.append(
            f"{s.cluster_id:>7} {s.n_pos:>5} {s.n_neg:>5} {s.pos_share:>6.2f} "
            f"{_p(s.sofa_test):>9} {_p(s.mortality_test):>9}  {'*' if s.cluster_id in flagged else ''}"
        )
    lines += [
        f"{'resid.':>7} {report.residual_pos:>5} {report.residual_neg:>5}",
        "",
        f"flagged clusters: {', '.join(map(str, report.flagged_cluster_ids)) or 'none'}",
        f"potential overdiagnosis: {report.count} of {report.total_positive} positive cases "
        f"({100 * report.rate:.1f}%)",
    ]
    return "\n".join(lines) + "\n"
