"""Directly-follows process models and replay fitness.

A model keeps the directly-follows pairs that survive dependency filtering,
plus the observed start and end activities.  Replaying a trace of length n
makes n + 1 checks: the first activity is a start, each consecutive pair is
an edge, the last activity is an end.  Fitness is the fraction that pass.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .errors import ConfigError, EmptyInputError


@dataclass(frozen=True)
class MiningParams:
    dependency_threshold: float = 0.5
    min_pair_observations: int = 1

    def __post_init__(self):
        if not 0 <= self.dependency_threshold < 1:
            raise ConfigError("dependency_threshold must lie in [0, 1)")
        if self.min_pair_observations < 1:
            raise ConfigError("min_pair_observations must be positive")


@dataclass(frozen=True)
class ProcessModel:
    edges: frozenset[tuple[str, str]]
    starts: frozenset[str]
    ends: frozenset[str]
    counts: Mapping[tuple[str, str], int] = field(default_factory=dict, compare=False)
    activity_counts: Mapping[str, int] = field(default_factory=dict, compare=False)

    def dependency(self, a: str, b: str) -> float:
        return dependency(self.counts, a, b)

    @property
    def activities(self) -> list[str]:
        acts = set(self.activity_counts) | self.starts | self.ends
        for a, b in self.edges:
            acts.update((a, b))
        return sorted(acts)


def dependency(counts: Mapping[tuple[str, str], int], a: str, b: str) -> float:
    ab = counts.get((a, b), 0)
    ba = counts.get((b, a), 0)
    return (ab - ba) / (ab + ba + 1)


def mine(variants, params: MiningParams = MiningParams()) -> ProcessModel:
    """Frequency-weighted directly-follows model with dependency filtering."""
    variants = list(variants)
    if not variants:
        raise EmptyInputError("cannot mine a model from no variants")
    counts: Counter = Counter()
    acts: Counter = Counter()
    starts, ends = set(), set()
    for v in variants:
        seq = v.activities
        if not seq:
            continue
        starts.add(seq[0])
        ends.add(seq[-1])
        for a in seq:
            acts[a] += v.frequency
        for pair in zip(seq, seq[1:]):
            counts[pair] += v.frequency
    edges = frozenset(
        pair
        for pair, c in counts.items()
        if c >= params.min_pair_observations
        and dependency(counts, *pair) >= params.dependency_threshold
    )
    return ProcessModel(edges, frozenset(starts), frozenset(ends), dict(counts), dict(acts))


def replay_fitness(variant, model: ProcessModel) -> float:
    seq = getattr(variant, "activities", variant)
    n = len(seq)
    if n == 0:
        raise ValueError("cannot replay an empty trace")
    passed = (seq[0] in model.starts) + (seq[-1] in model.ends)
    passed += sum(pair in model.edges for pair in zip(seq, seq[1:]))
    return passed / (n + 1)


def log_fitness(variants, model: ProcessModel) -> float:
    """Frequency-weighted mean replay fitness."""
    total = weight = 0.0
    for v in variants:
        total += v.frequency * replay_fitness(v, model)
        weight += v.frequency
    if weight == 0:
        raise EmptyInputError("log fitness of an empty variant set")
    return total / weight


class FitnessEvaluator(Protocol):
    def mine(self, variants) -> ProcessModel: ...
    def replay_fitness(self, variant, model) -> float: ...
    def log_fitness(self, variants, model) -> float: ...


class DirectlyFollowsFitness:
    """Default fitness evaluator used by the clustering engine."""

    def __init__(self, params: MiningParams = MiningParams()):
        self.params = params

    def mine(self, variants) -> ProcessModel:
        return mine(variants, self.params)

    def replay_fitness(self, variant, model) -> float:
        return replay_fitness(variant, model)

    def log_fitness(self, variants, model) -> float:
        return log_fitness(variants, model)


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(model: ProcessModel, name: str = "trajectory") -> str:
    """Graphviz rendering: activities as boxes, edges labelled ``count / dependency``."""
    lines = [f"digraph {_quote(name)} {{", "  rankdir=LR;", '  node [shape=box, style=rounded];']
    lines.append('  "__start__" [shape=circle, label="", width=0.2, style=filled, fillcolor=black];')
    lines.append('  "__end__" [shape=doublecircle, label="", width=0.2];')
    for act in model.activities:
        n = model.activity_counts.get(act)
        label = f"{act}\\n{n}" if n is not None else act
        lines.append(f"  {_quote(act)} [label={_quote(label)}];")
    for act in sorted(model.starts):
        lines.append(f'  "__start__" -> {_quote(act)};')
    for a, b in sorted(model.edges):
        c = model.counts.get((a, b), 0)
        lines.append(
            f"  {_quote(a)} -> {_quote(b)} [label={_quote(f'{c} / {model.dependency(a, b):.3f}')}];"
        )
    for act in sorted(model.ends):
        lines.append(f'  {_quote(act)} -> "__end__";')
    lines.append("}")
    return "\n".join(lines) + "\n"
