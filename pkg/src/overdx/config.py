"""Run configuration: JSON document validated against the shipped schema."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .actitrac import ClusteringConfig
from .audit import FlagRule
from .errors import ConfigError
from .eventlog import DEFAULT_VOCABULARY, CohortPolicy
from .procmodel import MiningParams


def load_schema(name: str) -> dict:
    return json.loads(resources.files("overdx").joinpath("schemas", name).read_text())


@dataclass(frozen=True)
class ClassifierSettings:
    k: int = 13
    folds: int = 5
    n_rounds: int = 200
    learning_rate: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class RunConfig:
    cohort: CohortPolicy = field(default_factory=CohortPolicy)
    strict_vocab: bool = False
    vocabulary: tuple[str, ...] = DEFAULT_VOCABULARY
    clustering: ClusteringConfig = field(default_factory=ClusteringConfig)
    flag_rule: FlagRule = field(default_factory=FlagRule)
    continuity: bool = True
    classifier: ClassifierSettings = field(default_factory=ClassifierSettings)
    paths: dict = field(default_factory=dict)
    threads: int = 1

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        try:
            jsonschema.validate(doc, load_schema("config.schema.json"))
        except jsonschema.ValidationError as exc:
            where = "/".join(map(str, exc.absolute_path)) or "<root>"
            raise ConfigError(f"config {where}: {exc.message}") from None
        cohort = dict(doc.get("cohort", {}))
        strict = cohort.pop("strict_vocab", False)
        vocab = tuple(cohort.pop("vocabulary", DEFAULT_VOCABULARY))
        flag = dict(doc.get("flag_rule", {}))
        continuity = flag.pop("continuity", True)
        mining = MiningParams(**doc.get("mining", {}))
        return cls(
            cohort=CohortPolicy(**cohort),
            strict_vocab=strict,
            vocabulary=vocab,
            clustering=ClusteringConfig(**doc.get("clustering", {}), mining=mining),
            flag_rule=FlagRule(**flag),
            continuity=continuity,
            classifier=ClassifierSettings(**doc.get("classifier", {})),
            paths=dict(doc.get("paths", {})),
            threads=doc.get("threads", 1),
        )

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        """Fully resolved configuration (round-trips through :meth:`from_dict`)."""
        clustering = asdict(self.clustering)
        mining = clustering.pop("mining")
        return {
            "cohort": {
                **asdict(self.cohort),
                "strict_vocab": self.strict_vocab,
                "vocabulary": list(self.vocabulary),
            },
            "clustering": clustering,
            "mining": mining,
            "flag_rule": {**asdict(self.flag_rule), "continuity": self.continuity},
            "classifier": asdict(self.classifier),
            "paths": dict(sorted(self.paths.items())),
            "threads": self.threads,
        }


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()
