"""End-to-end audit: ingest -> variants -> cluster -> analyze -> report."""

from __future__ import annotations

import dataclasses
import json
import logging
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .actitrac import ClusteringResult, cluster, feature_vectors, result_from_assignments
from .audit import OverdiagnosisReport, overdiagnosis_report
from .classifier import import_predictions
from .config import RunConfig, file_digest
from .errors import EmptyInputError
from .eventlog import (
    CaseAttributes,
    CohortStats,
    EventLog,
    filter_cohort_with_stats,
    read_attributes,
    read_events,
    variants,
)
from .procmodel import DirectlyFollowsFitness

log = logging.getLogger(__name__)

SCHEMA_VERSION = "1"


@dataclass
class Cohort:
    event_log: EventLog
    attrs: dict[str, CaseAttributes]
    stats: CohortStats
    inputs: dict


def input_record(path) -> dict:
    return {"path": str(path), "sha256": file_digest(path)}


def apply_predictions(attrs, predictions) -> dict[str, CaseAttributes]:
    """Replace ``y_pred`` with imported predictions; cases without one are dropped."""
    out = {}
    missing = 0
    for cid, a in attrs.items():
        if cid not in predictions:
            missing += 1
            continue
        out[cid] = dataclasses.replace(a, y_pred=predictions[cid][1])
    if missing:
        log.warning("%d cases have no imported prediction and were dropped", missing)
    return out


def load_cohort(cfg: RunConfig, events, attrs, predictions=None) -> Cohort:
    event_log = read_events(events, vocabulary=cfg.vocabulary, strict=cfg.strict_vocab)
    if len(event_log) == 0:
        raise EmptyInputError("empty event log")
    case_attrs = read_attributes(attrs)
    inputs = {"events": input_record(events), "attrs": input_record(attrs)}
    if predictions:
        with open(predictions, newline="", encoding="utf-8") as fh:
            case_attrs = apply_predictions(case_attrs, import_predictions(fh))
        inputs["predictions"] = input_record(predictions)
    filtered, stats = filter_cohort_with_stats(event_log, case_attrs, cfg.cohort)
    if len(filtered) == 0:
        raise EmptyInputError("empty event log after cohort filtering")
    return Cohort(filtered, case_attrs, stats, inputs)


def cluster_cohort(cohort: Cohort, cfg: RunConfig, threads: int | None = None) -> ClusteringResult:
    vs = variants(cohort.event_log)
    vectors = None
    if cfg.clustering.sampling == "distance":
        vectors = feature_vectors(vs, cfg.clustering.normalize_vectors)
    return cluster(
        vs,
        cfg.clustering,
        DirectlyFollowsFitness(cfg.clustering.mining),
        vectors,
        threads=threads or cfg.threads,
    )


def clustering_from_assignments(cohort: Cohort, assignments, cfg: RunConfig) -> ClusteringResult:
    return result_from_assignments(
        cohort.event_log, assignments, DirectlyFollowsFitness(cfg.clustering.mining)
    )


def analyze(cohort: Cohort, clustering: ClusteringResult, cfg: RunConfig) -> OverdiagnosisReport:
    return overdiagnosis_report(clustering, cohort.attrs, cfg.flag_rule, cfg.continuity)


def config_echo(cfg: RunConfig) -> dict:
    doc = cfg.to_dict()
    # execution details; results do not depend on them
    doc.pop("threads")
    doc["paths"].pop("out", None)
    return doc


def clustering_summary(clustering: ClusteringResult) -> dict:
    return {
        "n_clusters": len(clustering.clusters),
        "n_traces": clustering.trace_count,
        "residual_traces": sum(v.frequency for v in clustering.residual),
        "residual_variants": len(clustering.residual),
        "clusters": [
            {
                "id": cl.id,
                "n_variants": len(cl.members),
                "n_traces": cl.trace_count,
                "fitness": cl.fitness,
            }
            for cl in clustering.clusters
        ],
    }


def report_document(
    cfg: RunConfig,
    cohort: Cohort,
    clustering: ClusteringResult,
    report: OverdiagnosisReport,
    generated_at: str | None = None,
) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "tool": {"name": "overdx", "version": __version__},
        "generated_at": generated_at,
        "config": config_echo(cfg),
        "inputs": cohort.inputs,
        "cohort": cohort.stats.as_dict(),
        "clustering": clustering_summary(clustering),
        "analysis": report.as_dict(),
    }


def dumps(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(doc: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(doc), encoding="utf-8")
    return path
