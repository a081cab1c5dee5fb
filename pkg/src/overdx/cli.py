"""Command line interface.

Exit codes: 0 success, 1 invalid input or configuration, 2 internal error.
Verbosity comes from the ``OVERDX_LOG`` environment variable (a logging
level name, default WARNING).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from . import pipeline
from .actitrac import read_assignments_csv, write_assignments_csv
from .audit import render_text, write_summary_csv
from .classifier import (
    BoostParams,
    TabularDataset,
    greedy_forward_select,
    metrics,
    out_of_fold_predictions,
    read_features_csv,
    write_features_csv,
    undersample,
    write_predictions_csv,
)
from .config import RunConfig
from .errors import ConfigError, InputError
from .eventlog import read_events, variants, write_attributes_csv, write_event_csv, write_variants_csv
from .procmodel import to_dot
from .repeats import build_basis, log_repeats, vector_matrix, write_basis_csv, write_vectors_csv
from .synth import SynthConfig, make_classification_cohort, write_cohort

log = logging.getLogger("overdx")

COMMANDS = ("ingest", "variants", "classify", "cluster", "analyze", "report", "synth", "export-dot")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--events", help="events CSV (case_id,activity,timestamp) or .xes file")
    common.add_argument("--attrs", help="case attributes CSV")
    common.add_argument("--predictions", help="external predictions CSV (case_id,score|y_pred)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--threads", type=int, help="worker threads for distance/fitness evaluation")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--emit-csv", action="store_true", help="also write per-cluster CSV tables")
    common.add_argument("--strict-vocab", action="store_true", help="reject activities outside the vocabulary")
    common.add_argument("--min-distinct", type=int, help="minimum distinct activities per trace (default 3)")

    p = argparse.ArgumentParser(prog="overdx", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"overdx {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="validate and filter the cohort")
    sub.add_parser("variants", parents=[common], help="list trace variants")
    c = sub.add_parser("classify", parents=[common], help="baseline classifier on a feature CSV")
    c.add_argument("--features", help="feature CSV (case_id,label,f1..fn)")
    sub.add_parser("cluster", parents=[common], help="active trace clustering")
    a = sub.add_parser("analyze", parents=[common], help="outcome tests on saved cluster assignments")
    a.add_argument("--assignments", help="case_id,cluster_id CSV from `cluster`")
    r = sub.add_parser("report", parents=[common], help="ingest, cluster and analyze in one go")
    s = sub.add_parser("synth", parents=[common], help="write a synthetic cohort and feature table")
    d = sub.add_parser("export-dot", parents=[common], help="write cluster process models as DOT")
    d.add_argument("--assignments", help="reuse saved assignments instead of re-clustering")
    d.add_argument("--cluster", default="all", help="cluster id or 'all'")
    for sp in (a, r):
        sp.add_argument("--timestamp", default="now",
                        help="report timestamp: 'now', 'none' or a fixed ISO-8601 string")
        sp.add_argument("--no-figures", action="store_true", help="skip PNG figures")
    s.add_argument("--synth-config", help="JSON overrides for the generator")
    return p


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    paths = dict(cfg.paths)
    for key in ("events", "attrs", "predictions", "out", "features", "assignments"):
        val = getattr(args, key, None)
        if val:
            paths[key] = val
    changes = {"paths": paths}
    if args.threads:
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        changes["threads"] = args.threads
    if args.strict_vocab:
        changes["strict_vocab"] = True
    if args.min_distinct is not None:
        if args.min_distinct < 0:
            raise ConfigError("--min-distinct must be >= 0")
        changes["cohort"] = dataclasses.replace(cfg.cohort, min_distinct=args.min_distinct)
    return dataclasses.replace(cfg, **changes)


def _need(cfg: RunConfig, *keys) -> list[str]:
    missing = [k for k in keys if not cfg.paths.get(k)]
    if missing:
        raise InputError("missing required input: " + ", ".join(f"--{k}" for k in missing))
    return [cfg.paths[k] for k in keys]


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.paths.get("out") or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _timestamp(arg: str) -> str | None:
    if arg == "none":
        return None
    if arg == "now":
        return datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    try:
        return datetime.fromisoformat(arg.replace("Z", "+00:00")).isoformat()
    except ValueError:
        raise InputError(f"bad --timestamp {arg!r}") from None


def _manifest(cfg, command, inputs, outputs, summary) -> dict:
    return {
        "schema_version": pipeline.SCHEMA_VERSION,
        "tool": {"name": "overdx", "version": __version__},
        "command": command,
        "config": pipeline.config_echo(cfg),
        "inputs": inputs,
        "outputs": sorted(str(o) for o in outputs),
        "summary": summary,
    }


def _write_dots(clustering, out: Path, which="all") -> list[Path]:
    paths = []
    clusters = clustering.clusters
    if which != "all":
        try:
            cid = int(which)
        except ValueError:
            raise InputError(f"--cluster must be an integer or 'all', got {which!r}") from None
        try:
            clusters = [clustering.cluster(cid)]
        except KeyError:
            raise InputError(f"no cluster {cid} (have {len(clustering.clusters)})") from None
    for cl in clusters:
        path = out / "models" / f"cluster_{cl.id}.dot"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(to_dot(cl.model, f"cluster {cl.id}"), encoding="utf-8")
        paths.append(path)
    return paths


def _cohort(cfg):
    events, attrs = _need(cfg, "events", "attrs")
    return pipeline.load_cohort(cfg, events, attrs, cfg.paths.get("predictions"))


def cmd_ingest(args, cfg):
    cohort = _cohort(cfg)
    out = _out(cfg)
    ev_path, at_path = out / "cohort_events.csv", out / "cohort_attrs.csv"
    with open(ev_path, "w", newline="", encoding="utf-8") as fh:
        write_event_csv(cohort.event_log, fh)
    kept = sorted(cohort.event_log.case_ids)
    with open(at_path, "w", newline="", encoding="utf-8") as fh:
        write_attributes_csv((cohort.attrs[c] for c in kept), fh)
    doc = _manifest(cfg, "ingest", cohort.inputs, [ev_path, at_path], cohort.stats.as_dict())
    pipeline.write_json(doc, out / "ingest.json")
    s = cohort.stats
    print(f"kept {s.n_kept} of {s.n_input} cases ({s.kept_positive} positive, {s.kept_negative} negative)")


def cmd_variants(args, cfg):
    if cfg.paths.get("attrs"):
        cohort = _cohort(cfg)
        event_log, inputs = cohort.event_log, cohort.inputs
    else:
        (events,) = _need(cfg, "events")
        event_log = read_events(events, vocabulary=cfg.vocabulary, strict=cfg.strict_vocab)
        inputs = {"events": pipeline.input_record(events)}
    vs = variants(event_log)
    out = _out(cfg)
    path = out / "variants.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_variants_csv(vs, fh)
    summary = {"n_traces": len(event_log), "n_variants": len(vs)}
    pipeline.write_json(_manifest(cfg, "variants", inputs, [path], summary), out / "variants.json")
    print(f"{len(vs)} variants over {len(event_log)} traces")


def cmd_classify(args, cfg):
    (features,) = _need(cfg, "features")
    with open(features, newline="", encoding="utf-8") as fh:
        ds = read_features_csv(fh)
    cs = cfg.classifier
    seed = args.seed if args.seed is not None else cs.seed
    params = BoostParams(n_rounds=cs.n_rounds, learning_rate=cs.learning_rate)
    k = min(cs.k, ds.X.shape[1])
    selected = greedy_forward_select(undersample(ds, seed), k, cs.folds, seed, params)
    chosen = ds.columns(selected)
    scores = out_of_fold_predictions(chosen, cs.folds, seed, params)
    m = metrics(scores, ds.y)
    out = _out(cfg)
    path = out / "predictions.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_predictions_csv(ds.case_ids, scores, fh)
    summary = {
        "selected_features": [ds.feature_names[i] for i in selected],
        "out_of_fold_metrics": m.as_dict(),
        "seed": seed,
    }
    inputs = {"features": pipeline.input_record(features)}
    pipeline.write_json(_manifest(cfg, "classify", inputs, [path], summary), out / "classify.json")
    print(f"AUROC {m.auroc:.3f}  MCC {m.mcc:.3f}  features: {', '.join(summary['selected_features'])}")


def cmd_cluster(args, cfg):
    cohort = _cohort(cfg)
    clustering = pipeline.cluster_cohort(cohort, cfg)
    out = _out(cfg)
    outputs = [_write_assignments(clustering, out)]
    outputs += _write_dots(clustering, out)
    if args.emit_csv:
        outputs += _write_feature_dump(cohort, out)
    summary = pipeline.clustering_summary(clustering)
    pipeline.write_json(_manifest(cfg, "cluster", cohort.inputs, outputs, summary), out / "cluster.json")
    print(f"{summary['n_clusters']} clusters, {summary['residual_traces']} residual traces")


def _write_assignments(clustering, out: Path) -> Path:
    path = out / "assignments.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_assignments_csv(clustering, fh)
    return path


def _write_feature_dump(cohort, out: Path) -> list[Path]:
    vs = variants(cohort.event_log)
    basis = build_basis(log_repeats(vs))
    b, v = out / "basis.csv", out / "vectors.csv"
    with open(b, "w", newline="", encoding="utf-8") as fh:
        write_basis_csv(basis, fh)
    with open(v, "w", newline="", encoding="utf-8") as fh:
        write_vectors_csv(vs, vector_matrix(vs, basis), fh)
    return [b, v]


def _emit_report(args, cfg, cohort, clustering, out: Path, extra_outputs=()):
    report = pipeline.analyze(cohort, clustering, cfg)
    doc = pipeline.report_document(cfg, cohort, clustering, report, _timestamp(args.timestamp))
    outputs = list(extra_outputs)
    outputs.append(pipeline.write_json(doc, out / "report.json"))
    txt = out / "report.txt"
    residual = sum(v.frequency for v in clustering.residual)
    txt.write_text(render_text(report, residual), encoding="utf-8")
    outputs.append(txt)
    if args.emit_csv:
        path = out / "clusters.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_summary_csv(report, fh)
        outputs.append(path)
    if not args.no_figures:
        from .plotting import plot_cluster_composition, plot_cluster_outcomes

        fig_dir = out / "figures"
        outputs.append(plot_cluster_composition(report, fig_dir / "cluster_composition.png"))
        by_id = {s.cluster_id: s for s in report.summaries}
        for cid in report.flagged_cluster_ids:
            cl = clustering.cluster(cid)
            outputs.append(plot_cluster_outcomes(
                by_id[cid], cohort.attrs, cl.case_ids, fig_dir / f"cluster_{cid}_outcomes.png"
            ))
    print(render_text(report, residual), end="")
    return report, outputs


def cmd_analyze(args, cfg):
    cohort = _cohort(cfg)
    (assign_path,) = _need(cfg, "assignments")
    with open(assign_path, newline="", encoding="utf-8") as fh:
        assignments = read_assignments_csv(fh)
    cohort.inputs["assignments"] = pipeline.input_record(assign_path)
    clustering = pipeline.clustering_from_assignments(cohort, assignments, cfg)
    _emit_report(args, cfg, cohort, clustering, _out(cfg))


def cmd_report(args, cfg):
    cohort = _cohort(cfg)
    clustering = pipeline.cluster_cohort(cohort, cfg)
    out = _out(cfg)
    extra = [_write_assignments(clustering, out)] + _write_dots(clustering, out)
    _emit_report(args, cfg, cohort, clustering, out, extra)


def cmd_synth(args, cfg):
    overrides = {}
    if args.synth_config:
        try:
            overrides = json.loads(Path(args.synth_config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read synth config: {exc}") from None
    if args.seed is not None:
        overrides["seed"] = args.seed
    scfg = SynthConfig.from_dict(overrides)
    out = _out(cfg)
    paths = write_cohort(out, scfg)
    case_ids, X, y = make_classification_cohort(seed=scfg.seed)
    ds = TabularDataset(case_ids, X, y, [f"f{j + 1}" for j in range(X.shape[1])])
    paths["features"] = out / "features.csv"
    with open(paths["features"], "w", newline="", encoding="utf-8") as fh:
        write_features_csv(ds, fh)
    print("wrote " + ", ".join(str(p) for p in paths.values()))


def cmd_export_dot(args, cfg):
    cohort = _cohort(cfg)
    if cfg.paths.get("assignments"):
        with open(cfg.paths["assignments"], newline="", encoding="utf-8") as fh:
            clustering = pipeline.clustering_from_assignments(cohort, read_assignments_csv(fh), cfg)
    else:
        clustering = pipeline.cluster_cohort(cohort, cfg)
    for path in _write_dots(clustering, _out(cfg), args.cluster):
        print(path)


HANDLERS = {
    "ingest": cmd_ingest,
    "variants": cmd_variants,
    "classify": cmd_classify,
    "cluster": cmd_cluster,
    "analyze": cmd_analyze,
    "report": cmd_report,
    "synth": cmd_synth,
    "export-dot": cmd_export_dot,
}


def main(argv=None) -> int:
    level = os.environ.get("OVERDX_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    args = _parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        HANDLERS[args.command](args, cfg)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal error")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
