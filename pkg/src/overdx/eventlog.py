"""Clinical event logs: parsing, cohort filtering and trace variants.

Events arrive pre-extracted as CSV (``case_id,activity,timestamp``) or as a
small XES subset.  Case-level attributes (ground truth, model prediction and
outcomes) come from a separate CSV.
"""

from __future__ import annotations

import csv
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Mapping, Sequence

from .errors import (
    EmptyInputError,
    InputError,
    MissingAttributesError,
    RowError,
    SchemaError,
    VocabularyError,
    XESParseError,
)

log = logging.getLogger(__name__)

DEFAULT_VOCABULARY = (
    "lactate",
    "fluids crystalloids",
    "norepinephrine",
    "epinephrine",
    "vasopressin",
    "dopamine",
    "dobutamine",
    "vancomycin",
    "other antibiotics",
    "cefepime",
    "piperacillin-tazobactam",
    "ceftriaxone",
    "cefazolin",
)

DEFAULT_COLUMNS = {"case_id": "case_id", "activity": "activity", "timestamp": "timestamp"}
ATTRIBUTE_COLUMNS = ("case_id", "y_true", "y_pred", "sofa_24h", "died", "discharge_location")


@dataclass(frozen=True)
class Event:
    case_id: str
    activity: str
    timestamp: datetime


@dataclass(frozen=True)
class Trace:
    case_id: str
    activities: tuple[str, ...]
    timestamps: tuple[datetime, ...] = ()

    def __len__(self):
        return len(self.activities)


@dataclass(frozen=True)
class CaseAttributes:
    case_id: str
    y_true: int
    y_pred: int
    sofa_24h: int
    died: int
    discharge_location: str = ""

    def __post_init__(self):
        for name in ("y_true", "y_pred", "died"):
            if getattr(self, name) not in (0, 1):
                raise InputError(f"case {self.case_id}: {name} must be 0 or 1")
        if not 0 <= self.sofa_24h <= 24:
            raise InputError(f"case {self.case_id}: sofa_24h must lie in [0, 24]")

    @property
    def is_correct(self) -> bool:
        return self.y_true == self.y_pred


@dataclass(frozen=True)
class TraceVariant:
    activities: tuple[str, ...]
    frequency: int
    member_case_ids: frozenset[str]

    def __post_init__(self):
        if self.frequency != len(self.member_case_ids) or self.frequency < 1:
            raise ValueError("variant frequency must equal its number of member cases")


@dataclass(frozen=True)
class EventLog:
    traces: tuple[Trace, ...]
    vocabulary: frozenset[str] = field(default_factory=lambda: frozenset(DEFAULT_VOCABULARY))

    def __post_init__(self):
        for trace in self.traces:
            unknown = set(trace.activities) - self.vocabulary
            if unknown:
                raise InputError(f"case {trace.case_id}: activities outside vocabulary: {sorted(unknown)}")

    def __len__(self):
        return len(self.traces)

    @property
    def case_ids(self) -> list[str]:
        return [t.case_id for t in self.traces]


@dataclass(frozen=True)
class CohortPolicy:
    min_distinct: int = 3
    correct_only: bool = True
    missing_attrs: str = "drop"  # or "error"


@dataclass(frozen=True)
class CohortStats:
    n_input: int
    n_kept: int
    kept_positive: int
    kept_negative: int
    dropped_misclassified: int
    dropped_short: int
    dropped_missing_attrs: int

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def parse_timestamp(text: str) -> datetime:
    """ISO-8601 to a naive UTC datetime truncated to whole seconds."""
    text = text.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is not None:
        ts = ts.astimezone(timezone.utc).replace(tzinfo=None)
    return ts.replace(microsecond=0)


def _build_log(events: Iterable[Event], vocabulary: frozenset[str]) -> EventLog:
    grouped: dict[str, list[tuple[datetime, int, str]]] = {}
    for order, ev in enumerate(events):
        grouped.setdefault(ev.case_id, []).append((ev.timestamp, order, ev.activity))
    traces = []
    for case_id, rows in grouped.items():
        rows.sort(key=lambda r: (r[0], r[1]))
        traces.append(
            Trace(case_id, tuple(r[2] for r in rows), tuple(r[0] for r in rows))
        )
    return EventLog(tuple(traces), vocabulary)


def _check_activity(activity, vocab, strict, line, extended):
    if activity in vocab or activity in extended:
        return
    if strict:
        raise VocabularyError(line, f"unknown activity {activity!r}")
    log.warning("line %d: activity %r not in vocabulary, adding it", line, activity)
    extended.add(activity)


def parse_event_csv(
    reader: IO[str],
    column_map: Mapping[str, str] | None = None,
    *,
    vocabulary: Iterable[str] | None = None,
    strict: bool = False,
    activity_map: Mapping[str, str] | None = None,
) -> EventLog:
    """Read an events CSV into an :class:`EventLog`.

    ``column_map`` maps the logical names ``case_id``, ``activity`` and
    ``timestamp`` to header names in the file.  ``activity_map`` renames raw
    activity labels before the vocabulary check.  Unknown activities raise
    :class:`VocabularyError` when ``strict``; otherwise they extend the
    vocabulary with a warning.
    """
    cols = dict(DEFAULT_COLUMNS)
    cols.update(column_map or {})
    vocab = frozenset(DEFAULT_VOCABULARY if vocabulary is None else vocabulary)
    activity_map = activity_map or {}

    rdr = csv.DictReader(reader)
    header = rdr.fieldnames or []
    if not header:
        raise EmptyInputError("empty event log")
    missing = [logical for logical, col in cols.items() if col not in header]
    if missing:
        raise SchemaError(f"events file lacks columns: {', '.join(cols[m] for m in missing)}")

    extended: set[str] = set()
    events = []
    for row in rdr:
        line = rdr.line_num
        case_id = (row[cols["case_id"]] or "").strip()
        activity = (row[cols["activity"]] or "").strip()
        activity = activity_map.get(activity, activity)
        if not case_id:
            raise RowError(line, "empty case id")
        if not activity:
            raise RowError(line, "empty activity")
        try:
            ts = parse_timestamp(row[cols["timestamp"]] or "")
        except ValueError:
            raise RowError(line, f"unparsable timestamp {row[cols['timestamp']]!r}") from None
        _check_activity(activity, vocab, strict, line, extended)
        events.append(Event(case_id, activity, ts))
    return _build_log(events, vocab | extended)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _keyed(elem, kind: str) -> dict[str, str]:
    return {
        child.get("key"): child.get("value")
        for child in elem
        if _local(child.tag) == kind and child.get("key") is not None
    }


def parse_xes(
    reader: IO,
    *,
    vocabulary: Iterable[str] | None = None,
    strict: bool = False,
) -> EventLog:
    """Parse the log/trace/event core of an XES document.

    Case ids come from the trace's ``concept:name`` (falling back to the trace
    position); events need ``concept:name`` and ``time:timestamp``.
    """
    vocab = frozenset(DEFAULT_VOCABULARY if vocabulary is None else vocabulary)
    try:
        root = ET.parse(reader).getroot()
    except ET.ParseError as exc:
        raise XESParseError(f"malformed XES: {exc}") from None
    if _local(root.tag) != "log":
        raise XESParseError(f"expected <log> root element, got <{_local(root.tag)}>")

    extended: set[str] = set()
    events = []
    for t_idx, trace in enumerate(c for c in root if _local(c.tag) == "trace"):
        case_id = _keyed(trace, "string").get("concept:name") or f"trace_{t_idx}"
        for e_idx, ev in enumerate(c for c in trace if _local(c.tag) == "event"):
            where = f"trace {case_id!r} event {e_idx}"
            name = _keyed(ev, "string").get("concept:name")
            if not name:
                raise XESParseError(f"{where}: missing concept:name")
            stamp = _keyed(ev, "date").get("time:timestamp")
            if stamp is None:
                raise XESParseError(f"{where}: missing time:timestamp")
            try:
                ts = parse_timestamp(stamp)
            except ValueError:
                raise XESParseError(f"{where}: bad timestamp {stamp!r}") from None
            if name not in vocab and name not in extended:
                if strict:
                    raise XESParseError(f"{where}: unknown activity {name!r}")
                log.warning("%s: activity %r not in vocabulary, adding it", where, name)
                extended.add(name)
            events.append(Event(case_id, name, ts))
    return _build_log(events, vocab | extended)


def read_events(path, **kwargs) -> EventLog:
    """Dispatch on file extension (``.xes`` or CSV)."""
    path = str(path)
    if path.lower().endswith(".xes"):
        with open(path, "rb") as fh:
            return parse_xes(fh, **kwargs)
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_event_csv(fh, **kwargs)


def write_event_csv(event_log: EventLog, writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["case_id", "activity", "timestamp"])
    for trace in event_log.traces:
        for act, ts in zip(trace.activities, trace.timestamps):
            out.writerow([trace.case_id, act, ts.isoformat()])


def parse_attributes_csv(reader: IO[str]) -> dict[str, CaseAttributes]:
    rdr = csv.DictReader(reader)
    header = rdr.fieldnames or []
    required = [c for c in ATTRIBUTE_COLUMNS if c != "discharge_location"]
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(f"attributes file lacks columns: {', '.join(missing)}")
    attrs: dict[str, CaseAttributes] = {}
    for row in rdr:
        line = rdr.line_num
        case_id = row["case_id"].strip()
        if case_id in attrs:
            raise RowError(line, f"duplicate case id {case_id!r}")
        try:
            attrs[case_id] = CaseAttributes(
                case_id=case_id,
                y_true=int(row["y_true"]),
                y_pred=int(row["y_pred"]),
                sofa_24h=int(row["sofa_24h"]),
                died=int(row["died"]),
                discharge_location=(row.get("discharge_location") or "").strip(),
            )
        except (ValueError, InputError) as exc:
            raise RowError(line, str(exc)) from None
    return attrs


def read_attributes(path) -> dict[str, CaseAttributes]:
    with open(path, newline="", encoding="utf-8") as fh:
        return parse_attributes_csv(fh)


def write_attributes_csv(attrs: Iterable[CaseAttributes], writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(ATTRIBUTE_COLUMNS)
    for a in attrs:
        out.writerow([a.case_id, a.y_true, a.y_pred, a.sofa_24h, a.died, a.discharge_location])


def filter_cohort_with_stats(
    event_log: EventLog,
    attrs: Mapping[str, CaseAttributes],
    policy: CohortPolicy = CohortPolicy(),
) -> tuple[EventLog, CohortStats]:
    missing = [t.case_id for t in event_log.traces if t.case_id not in attrs]
    if missing and policy.missing_attrs == "error":
        raise MissingAttributesError(missing)
    if missing:
        log.warning("dropping %d cases without attributes", len(missing))

    kept = []
    n_wrong = n_short = 0
    for trace in event_log.traces:
        a = attrs.get(trace.case_id)
        if a is None:
            continue
        if policy.correct_only and not a.is_correct:
            n_wrong += 1
        elif len(set(trace.activities)) < policy.min_distinct:
            n_short += 1
        else:
            kept.append(trace)
    n_pos = sum(attrs[t.case_id].y_true for t in kept)
    stats = CohortStats(
        n_input=len(event_log),
        n_kept=len(kept),
        kept_positive=n_pos,
        kept_negative=len(kept) - n_pos,
        dropped_misclassified=n_wrong,
        dropped_short=n_short,
        dropped_missing_attrs=len(missing),
    )
    log.info("cohort: %s", stats)
    return EventLog(tuple(kept), event_log.vocabulary), stats


def filter_cohort(
    event_log: EventLog,
    attrs: Mapping[str, CaseAttributes],
    policy: CohortPolicy = CohortPolicy(),
) -> EventLog:
    """Keep TP/TN cases whose trace holds at least ``policy.min_distinct`` distinct activities."""
    return filter_cohort_with_stats(event_log, attrs, policy)[0]


def variant_sort_key(v: TraceVariant):
    return (-v.frequency, v.activities)


def variants(event_log: EventLog) -> list[TraceVariant]:
    """Group traces by activity sequence.

    Output is in canonical order: frequency descending, then activity
    sequence ascending.
    """
    groups: dict[tuple[str, ...], list[str]] = {}
    for trace in event_log.traces:
        groups.setdefault(trace.activities, []).append(trace.case_id)
    out = [TraceVariant(acts, len(ids), frozenset(ids)) for acts, ids in groups.items()]
    out.sort(key=variant_sort_key)
    return out


def write_variants_csv(vs: Sequence[TraceVariant], writer: IO[str]) -> None:
    out = csv.writer(writer, lineterminator="\n")
    out.writerow(["rank", "frequency", "length", "activities"])
    for i, v in enumerate(vs, 1):
        out.writerow([i, v.frequency, len(v.activities), ";".join(v.activities)])
