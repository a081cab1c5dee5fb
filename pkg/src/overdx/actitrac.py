"""Active trace clustering over trace variants.

Clusters are grown one at a time from the most frequent unassigned variant:

1. selection: candidates from a window of the next most frequent variants
   are examined (nearest-first under distance sampling) and kept when the
   cluster still reaches the target fitness with them;
2. look-ahead: with the model frozen, any unassigned variant that replays
   at or above target on its own joins the cluster;
3. residual resolution: a cluster below the minimum size (or fitness) is
   dissolved, its seed goes to the residual pool and the rest become
   available again.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import IO, Mapping, Sequence

import numpy as np

from .errors import ConfigError, InputError
from .eventlog import TraceVariant, variant_sort_key
from .procmodel import DirectlyFollowsFitness, FitnessEvaluator, MiningParams, ProcessModel
from .repeats import build_basis, euclidean, log_repeats, vector_matrix

log = logging.getLogger(__name__)

RESIDUAL = "residual"


@dataclass(frozen=True)
class ClusteringConfig:
    target_fitness: float = 0.95
    max_clusters: int = 24
    min_cluster_size: int = 4
    window: float = 0.5
    sampling: str = "distance"
    cluster_distance: str = "mean"
    normalize_vectors: bool = False
    mining: MiningParams = field(default_factory=MiningParams)

    def __post_init__(self):
        if not 0 <= self.target_fitness <= 1:
            raise ConfigError("target_fitness must lie in [0, 1]")
        if self.max_clusters < 0:
            raise ConfigError("max_clusters must be non-negative")
        if self.min_cluster_size < 1:
            raise ConfigError("min_cluster_size must be positive")
        if not 0 < self.window <= 1:
            raise ConfigError("window must lie in (0, 1]")
        if self.sampling not in ("frequency", "distance"):
            raise ConfigError(f"unknown sampling strategy {self.sampling!r}")
        if self.cluster_distance not in ("mean", "medoid"):
            raise ConfigError(f"unknown cluster distance {self.cluster_distance!r}")


@dataclass(frozen=True)
class Cluster:
    id: int
    members: tuple[TraceVariant, ...]
    model: ProcessModel
    fitness: float

    @property
    def trace_count(self) -> int:
        return sum(v.frequency for v in self.members)

    @property
    def case_ids(self) -> list[str]:
        return sorted(c for v in self.members for c in v.member_case_ids)


@dataclass(frozen=True)
class ClusteringResult:
    clusters: tuple[Cluster, ...]
    residual: tuple[TraceVariant, ...]

    @property
    def residual_case_ids(self) -> list[str]:
        return sorted(c for v in self.residual for c in v.member_case_ids)

    @property
    def trace_count(self) -> int:
        return sum(c.trace_count for c in self.clusters) + sum(v.frequency for v in self.residual)

    def assignments(self) -> dict[str, int | str]:
        out: dict[str, int | str] = {}
        for cl in self.clusters:
            for cid in cl.case_ids:
                out[cid] = cl.id
        for cid in self.residual_case_ids:
            out[cid] = RESIDUAL
        return out

    def cluster(self, cluster_id: int) -> Cluster:
        for cl in self.clusters:
            if cl.id == cluster_id:
                return cl
        raise KeyError(cluster_id)


def feature_vectors(variants, normalize: bool = False) -> np.ndarray:
    basis = build_basis(log_repeats(variants))
    return vector_matrix(variants, basis, normalize)


class _Engine:
    def __init__(self, variants, config, evaluator, vectors, threads):
        self.V = variants
        self.cfg = config
        self.ev = evaluator
        self.X = [tuple(map(float, row)) for row in vectors] if vectors is not None else None
        self.pool = ThreadPoolExecutor(threads) if threads > 1 else None

    def _map(self, fn, items):
        if self.pool is None:
            return [fn(x) for x in items]
        return list(self.pool.map(fn, items))

    def _dist(self, i, j):
        return euclidean(self.X[i], self.X[j])

    def _next_candidate(self, pending, members, dsum):
        if self.cfg.sampling == "frequency":
            return pending[0]
        if self.cfg.cluster_distance == "medoid":
            medoid = min(
                members, key=lambda m: (sum(self._dist(m, o) for o in members), m)
            )
            scores = self._map(lambda c: self._dist(c, medoid), pending)
        else:
            scores = [dsum[c] / len(members) for c in pending]
        best = min(range(len(pending)), key=lambda k: (scores[k], pending[k]))
        return pending[best]

    def grow(self, unassigned: list[int]):
        cfg, ev, V = self.cfg, self.ev, self.V
        seed = unassigned[0]
        rest = unassigned[1:]
        window = rest[: math.ceil(cfg.window * len(rest))]

        members = [seed]
        model = ev.mine([V[seed]])
        pending = list(window)
        dsum = {}
        if cfg.sampling == "distance" and cfg.cluster_distance == "mean":
            dsum = dict(zip(pending, self._map(lambda c: self._dist(c, seed), pending)))

        while pending:
            cand = self._next_candidate(pending, members, dsum)
            pending.remove(cand)
            trial = [V[i] for i in members] + [V[cand]]
            if ev.log_fitness(trial, model) < cfg.target_fitness:
                continue
            tentative = ev.mine(trial)
            if ev.log_fitness(trial, tentative) < cfg.target_fitness:
                continue
            members.append(cand)
            model = tentative
            if dsum:
                for c, d in zip(pending, self._map(lambda c: self._dist(c, cand), pending)):
                    dsum[c] += d

        taken = set(members)
        others = [i for i in unassigned if i not in taken]
        fits = self._map(lambda i: ev.replay_fitness(V[i], model), others)
        members += [i for i, f in zip(others, fits) if f >= cfg.target_fitness]
        members.sort()
        return members, model

    def run(self) -> ClusteringResult:
        cfg, V = self.cfg, self.V
        unassigned = list(range(len(V)))
        residual: list[int] = []
        clusters: list[Cluster] = []
        try:
            while len(clusters) < cfg.max_clusters and unassigned:
                members, model = self.grow(unassigned)
                variants = [V[i] for i in members]
                size = sum(v.frequency for v in variants)
                fitness = self.ev.log_fitness(variants, model)
                if size < cfg.min_cluster_size or fitness < cfg.target_fitness:
                    log.debug("dissolving cluster seeded by %s (size %d, fitness %.3f)",
                              V[members[0]].activities, size, fitness)
                    residual.append(unassigned.pop(0))
                    continue
                clusters.append(Cluster(len(clusters) + 1, tuple(variants), model, fitness))
                taken = set(members)
                unassigned = [i for i in unassigned if i not in taken]
        finally:
            if self.pool is not None:
                self.pool.shutdown()
        rest = sorted(residual + unassigned)
        return ClusteringResult(tuple(clusters), tuple(V[i] for i in rest))


def cluster(
    variants: Sequence[TraceVariant],
    config: ClusteringConfig = ClusteringConfig(),
    fitness_evaluator: FitnessEvaluator | None = None,
    vectors=None,
    threads: int = 1,
) -> ClusteringResult:
    """Partition ``variants`` into fitness-bounded clusters plus a residual set.

    ``vectors`` are the per-variant feature rows used by distance sampling;
    when omitted they are computed from the log's maximal repeats.  Inputs
    not already in canonical order are sorted (vectors follow their rows).
    """
    variants = list(variants)
    if not variants:
        return ClusteringResult((), ())
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    order = sorted(range(len(variants)), key=lambda i: variant_sort_key(variants[i]))
    if vectors is not None:
        vectors = np.asarray(vectors, dtype=float)
        if vectors.shape[0] != len(variants):
            raise InputError("vectors are not aligned with variants")
        vectors = vectors[order]
    variants = [variants[i] for i in order]
    if vectors is None and config.sampling == "distance":
        vectors = feature_vectors(variants, config.normalize_vectors)
    evaluator = fitness_evaluator or DirectlyFollowsFitness(config.mining)
    return _Engine(variants, config, evaluator, vectors, threads).run()


def write_assignments_csv(result: ClusteringResult, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["case_id", "cluster_id"])
    for cl in result.clusters:
        for cid in cl.case_ids:
            out.writerow([cid, cl.id])
    for cid in result.residual_case_ids:
        out.writerow([cid, RESIDUAL])


def read_assignments_csv(reader: IO[str]) -> dict[str, int | str]:
    rdr = csv.DictReader(reader)
    if not rdr.fieldnames or not {"case_id", "cluster_id"} <= set(rdr.fieldnames):
        raise InputError("assignments file needs columns case_id,cluster_id")
    out: dict[str, int | str] = {}
    for row in rdr:
        cid = row["case_id"].strip()
        label = row["cluster_id"].strip()
        if cid in out:
            raise InputError(f"line {rdr.line_num}: duplicate case id {cid!r}")
        try:
            out[cid] = RESIDUAL if label == RESIDUAL else int(label)
        except ValueError:
            raise InputError(f"line {rdr.line_num}: bad cluster id {label!r}") from None
    return out


def result_from_assignments(
    event_log,
    assignments: Mapping[str, int | str],
    evaluator: FitnessEvaluator | None = None,
) -> ClusteringResult:
    """Rebuild a :class:`ClusteringResult` from a saved case -> cluster table."""
    from .eventlog import EventLog, variants as make_variants

    evaluator = evaluator or DirectlyFollowsFitness()
    missing = [t.case_id for t in event_log.traces if t.case_id not in assignments]
    if missing:
        raise InputError(f"{len(missing)} cases have no cluster assignment, e.g. {missing[0]!r}")
    groups: dict = {}
    for trace in event_log.traces:
        groups.setdefault(assignments[trace.case_id], []).append(trace)
    clusters = []
    for cid in sorted(k for k in groups if k != RESIDUAL):
        vs = make_variants(EventLog(tuple(groups[cid]), event_log.vocabulary))
        model = evaluator.mine(vs)
        clusters.append(Cluster(cid, tuple(vs), model, evaluator.log_fitness(vs, model)))
    residual = make_variants(EventLog(tuple(groups.get(RESIDUAL, ())), event_log.vocabulary))
    return ClusteringResult(tuple(clusters), tuple(residual))
