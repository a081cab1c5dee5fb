"""Seeded synthetic ICU cohorts with a planted overdiagnosed subgroup.

Each family of cases follows a linear treatment template (with optional
inserted steps) and carries its own share of sepsis-positive cases.  In the
planted family every positive case is overdiagnosed: its SOFA score and
death draw come from the negative outcome distribution.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .eventlog import DEFAULT_VOCABULARY, CaseAttributes, EventLog, Trace, write_attributes_csv, write_event_csv


@dataclass(frozen=True)
class FamilyTemplate:
    steps: tuple[str, ...]
    pos_share: float
    # (index to insert before, activity, probability)
    insertions: tuple[tuple[int, str, float], ...] = ()


@dataclass(frozen=True)
class OutcomeModel:
    sofa_neg: tuple[float, float] = (4.0, 2.0)
    sofa_pos: tuple[float, float] = (9.0, 3.0)
    death_neg: float = 0.08
    death_pos: float = 0.30
    discharge_neg: tuple[tuple[str, float], ...] = (
        ("home", 0.6), ("rehabilitation", 0.2), ("skilled nursing facility", 0.2),
    )
    discharge_pos: tuple[tuple[str, float], ...] = (
        ("home", 0.4), ("rehabilitation", 0.3), ("skilled nursing facility", 0.3),
    )


DEFAULT_FAMILIES = (
    FamilyTemplate(
        ("lactate", "fluids crystalloids", "norepinephrine", "vasopressin"),
        pos_share=0.0,
        insertions=((3, "epinephrine", 0.1),),
    ),
    FamilyTemplate(
        ("vancomycin", "piperacillin-tazobactam", "lactate", "fluids crystalloids"),
        pos_share=0.7,
        insertions=((2, "other antibiotics", 0.1),),
    ),
    FamilyTemplate(
        ("cefazolin", "dopamine", "dobutamine", "lactate"),
        pos_share=0.3,
        insertions=((3, "fluids crystalloids", 0.1),),
    ),
    FamilyTemplate(
        ("ceftriaxone", "cefepime", "other antibiotics", "norepinephrine"),
        pos_share=0.6,
        insertions=((1, "vancomycin", 0.1),),
    ),
)


@dataclass(frozen=True)
class SynthConfig:
    n_families: int = 4
    traces_per_family: int = 300
    family_templates: tuple[FamilyTemplate, ...] = DEFAULT_FAMILIES
    planted_family: int = 0
    n_tp_cases: int = 25
    noise_rate: float = 0.01
    outcomes: OutcomeModel = field(default_factory=OutcomeModel)
    seed: int = 0

    def __post_init__(self):
        if self.n_families < 1 or self.n_families > len(self.family_templates):
            raise ConfigError("n_families must be between 1 and the number of templates")
        if self.traces_per_family < 1:
            raise ConfigError("traces_per_family must be positive")
        if not 0 <= self.planted_family < self.n_families:
            raise ConfigError("planted_family out of range")
        if not 0 <= self.noise_rate <= 1:
            raise ConfigError("noise_rate must lie in [0, 1]")
        if not 0 <= self.n_tp_cases <= self.traces_per_family:
            raise ConfigError("n_tp_cases out of range")
        if 2 * self.n_tp_cases >= self.traces_per_family:
            raise ConfigError("planted family must stay negative-dominated")
        for t in self.family_templates:
            if not 0 <= t.pos_share <= 1 or any(not 0 <= p <= 1 for _, _, p in t.insertions):
                raise ConfigError("probabilities must lie in [0, 1]")

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        data = dict(data)
        if "family_templates" in data:
            data["family_templates"] = tuple(
                FamilyTemplate(
                    tuple(t["steps"]), t["pos_share"],
                    tuple(tuple(i) for i in t.get("insertions", ())),
                )
                for t in data["family_templates"]
            )
        if "outcomes" in data:
            o = dict(data["outcomes"])
            for k in ("sofa_neg", "sofa_pos"):
                if k in o:
                    o[k] = tuple(o[k])
            for k in ("discharge_neg", "discharge_pos"):
                if k in o:
                    o[k] = tuple(tuple(x) for x in o[k])
            data["outcomes"] = OutcomeModel(**o)
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PlantedTruth:
    family: dict[str, int]
    overdiagnosed_case_ids: frozenset[str]


START = datetime(2150, 1, 1)


def _template_trace(t: FamilyTemplate, rng) -> list[str]:
    steps = list(t.steps)
    # insert back to front so the indices refer to the template
    for idx, act, p in sorted(t.insertions, reverse=True):
        if rng.random() < p:
            steps.insert(idx, act)
    return steps


def _add_noise(steps: list[str], rng) -> list[str]:
    steps = list(steps)
    if rng.random() < 0.5 and len(steps) >= 2:
        i = int(rng.integers(len(steps) - 1))
        steps[i], steps[i + 1] = steps[i + 1], steps[i]
    else:
        act = DEFAULT_VOCABULARY[int(rng.integers(len(DEFAULT_VOCABULARY)))]
        steps.insert(int(rng.integers(len(steps) + 1)), act)
    return steps


def _sofa(mean_sd, rng) -> int:
    return int(np.clip(np.rint(rng.normal(*mean_sd)), 0, 24))


def _choice(options, rng) -> str:
    labels = [o[0] for o in options]
    probs = np.array([o[1] for o in options], dtype=float)
    return labels[int(rng.choice(len(labels), p=probs / probs.sum()))]


def generate(config: SynthConfig = SynthConfig()):
    """Return ``(event_log, attributes, truth)``; identical for identical configs."""
    rng = np.random.default_rng(config.seed)
    out = config.outcomes
    rows = []  # (family, y_true, planted, steps)
    for fam in range(config.n_families):
        tmpl = config.family_templates[fam]
        n = config.traces_per_family
        if fam == config.planted_family:
            labels = [1] * config.n_tp_cases + [0] * (n - config.n_tp_cases)
            planted = [True] * config.n_tp_cases + [False] * (n - config.n_tp_cases)
        else:
            n_pos = int(round(tmpl.pos_share * n))
            labels = [1] * n_pos + [0] * (n - n_pos)
            planted = [False] * n
        for y, p in zip(labels, planted):
            steps = _template_trace(tmpl, rng)
            if rng.random() < config.noise_rate:
                steps = _add_noise(steps, rng)
            rows.append((fam, y, p, steps))

    order = rng.permutation(len(rows))
    width = len(str(len(rows)))
    traces, attrs, family, overdx = [], {}, {}, set()
    for k, idx in enumerate(order):
        fam, y, is_planted, steps = rows[idx]
        case_id = f"c{k + 1:0{width}d}"
        t0 = START + timedelta(hours=int(k))
        gaps = np.cumsum(rng.integers(5, 120, size=len(steps)))
        stamps = tuple(t0 + timedelta(minutes=int(g)) for g in gaps)
        traces.append(Trace(case_id, tuple(steps), stamps))

        severe = y == 1 and not is_planted
        sofa = _sofa(out.sofa_pos if severe else out.sofa_neg, rng)
        died = int(rng.random() < (out.death_pos if severe else out.death_neg))
        where = "died" if died else _choice(out.discharge_pos if severe else out.discharge_neg, rng)
        attrs[case_id] = CaseAttributes(case_id, y, y, sofa, died, where)
        family[case_id] = fam
        if is_planted:
            overdx.add(case_id)

    event_log = EventLog(tuple(traces), frozenset(DEFAULT_VOCABULARY))
    return event_log, attrs, PlantedTruth(family, frozenset(overdx))


def write_truth_csv(truth: PlantedTruth, writer) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["case_id", "family", "overdiagnosed"])
    for cid in sorted(truth.family):
        out.writerow([cid, truth.family[cid], int(cid in truth.overdiagnosed_case_ids)])


def read_truth_csv(reader) -> PlantedTruth:
    rdr = csv.DictReader(reader)
    fam, od = {}, set()
    for row in rdr:
        fam[row["case_id"]] = int(row["family"])
        if row["overdiagnosed"] == "1":
            od.add(row["case_id"])
    return PlantedTruth(fam, frozenset(od))


def write_cohort(out_dir, config: SynthConfig = SynthConfig()) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    event_log, attrs, truth = generate(config)
    paths = {
        "events": out_dir / "events.csv",
        "attrs": out_dir / "attrs.csv",
        "truth": out_dir / "truth.csv",
        "config": out_dir / "synth_config.json",
    }
    with open(paths["events"], "w", newline="", encoding="utf-8") as fh:
        write_event_csv(event_log, fh)
    with open(paths["attrs"], "w", newline="", encoding="utf-8") as fh:
        write_attributes_csv((attrs[c] for c in sorted(attrs)), fh)
    with open(paths["truth"], "w", newline="", encoding="utf-8") as fh:
        write_truth_csv(truth, fh)
    paths["config"].write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    return paths


def make_classification_cohort(
    n_cases: int = 2000,
    pos_rate: float = 0.05,
    n_features: int = 20,
    informative: tuple[int, ...] = (0, 1, 2),
    shift: float = 2.0,
    seed: int = 0,
):
    """Gaussian tabular cohort where only ``informative`` columns depend on the label.

    Returns ``(case_ids, X, y)``; positives are shifted by ``shift`` standard
    deviations on each informative column.
    """
    rng = np.random.default_rng(seed)
    n_pos = int(round(pos_rate * n_cases))
    y = np.zeros(n_cases, dtype=int)
    y[rng.choice(n_cases, size=n_pos, replace=False)] = 1
    X = rng.normal(size=(n_cases, n_features))
    for j in informative:
        X[:, j] += shift * y
    width = len(str(n_cases))
    case_ids = [f"p{i + 1:0{width}d}" for i in range(n_cases)]
    return case_ids, X, y
