"""Event-file parsing, preprocessing and cascade assembly.

Preprocessing rules: per (message, group) only the earliest adoption is kept,
messages seen in fewer than two distinct groups are dropped (and counted), and
adoptions are sorted by time with ties broken lexicographically by group id
(ties are flagged in the drop report, never silently reordered).

Canonical event schema, shared by CSV (RFC-4180) and JSONL files::

    message_id,group_id,timestamp,modality,content_type,forwarding_score

Additional columns/keys are preserved verbatim as per-event labels so the
analysis layer can stratify on arbitrary keys. The groups file is
``group_id,size[,member_ids]`` with ``;``-separated member ids.
"""

from __future__ import annotations

import csv
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field

from cascadekit.model import (
    AdoptionEvent,
    ContentType,
    Modality,
    parse_content_type,
    parse_modality,
)

REQUIRED_COLUMNS = (
    "message_id",
    "group_id",
    "timestamp",
    "modality",
    "content_type",
    "forwarding_score",
)

FORWARDING_BUCKETS = ("0", "1", "2", "3", "4", "5+")


class SchemaError(ValueError):
    """Fatal input problem: unreadable stream or missing required columns."""


@dataclass(frozen=True)
class RowError:
    line: int
    field: str
    message: str


@dataclass
class LoadReport:
    rows_read: int = 0
    events_loaded: int = 0
    row_errors: list[RowError] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "rows_read": self.rows_read,
            "events_loaded": self.events_loaded,
            "row_errors": [vars(e) for e in self.row_errors],
        }


@dataclass(frozen=True)
class Cascade:
    """Time-sorted first adoptions of one message across groups (>= 2 groups)."""

    message: str
    adoptions: tuple[tuple[str, float], ...]
    content: ContentType
    modality: Modality
    forwarding_score: int
    extra: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.adoptions) < 2:
            raise ValueError("a cascade needs adoptions in at least two groups")
        groups = [g for g, _ in self.adoptions]
        if len(set(groups)) != len(groups):
            raise ValueError("each group may appear at most once per cascade")
        times = [t for _, t in self.adoptions]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError("adoptions must be sorted by time")

    @property
    def groups(self) -> list[str]:
        return [g for g, _ in self.adoptions]

    @property
    def times(self) -> list[float]:
        return [t for _, t in self.adoptions]

    def forwarding_bucket(self) -> str:
        return str(self.forwarding_score) if self.forwarding_score < 5 else "5+"

    def label(self, key: str) -> str:
        if key == "content_type":
            return self.content.value
        if key == "modality":
            return self.modality.value
        if key == "forwarding_bucket":
            return self.forwarding_bucket()
        try:
            return self.extra[key]
        except KeyError:
            raise KeyError(f"cascade {self.message!r} has no label {key!r}") from None


@dataclass
class DropReport:
    events_in: int = 0
    duplicates_collapsed: int = 0
    single_group_dropped: int = 0
    label_conflicts: int = 0
    cascades_out: int = 0
    ties: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "events_in": self.events_in,
            "duplicates_collapsed": self.duplicates_collapsed,
            "single_group_dropped": self.single_group_dropped,
            "label_conflicts": self.label_conflicts,
            "cascades_out": self.cascades_out,
            "ties": self.ties,
        }


def _parse_row(row: dict, line: int, errors: list[RowError]) -> AdoptionEvent | None:
    try:
        time = float(row["timestamp"])
    except ValueError:
        errors.append(RowError(line, "timestamp", f"not a number: {row['timestamp']!r}"))
        return None
    try:
        modality = parse_modality(row["modality"])
    except ValueError as exc:
        errors.append(RowError(line, "modality", str(exc)))
        return None
    try:
        content = parse_content_type(row["content_type"])
    except ValueError as exc:
        errors.append(RowError(line, "content_type", str(exc)))
        return None
    try:
        score = int(row["forwarding_score"])
    except ValueError:
        errors.append(
            RowError(line, "forwarding_score", f"not an integer: {row['forwarding_score']!r}")
        )
        return None
    extra = {k: v for k, v in row.items() if k not in REQUIRED_COLUMNS and v is not None}
    try:
        return AdoptionEvent(
            message=row["message_id"],
            group=row["group_id"],
            time=time,
            modality=modality,
            content=content,
            forwarding_score=score,
            extra=extra,
        )
    except ValueError as exc:
        fld = "forwarding_score" if "forwarding_score" in str(exc) else "message_id/group_id/timestamp"
        errors.append(RowError(line, fld, str(exc)))
        return None


def load_events(stream, fmt: str = "csv") -> tuple[list[AdoptionEvent], LoadReport]:
    """Parse an event stream; malformed rows go to the report, not the floor."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if hasattr(stream, "read") and isinstance(stream.read(0), bytes):
        try:
            stream = io.TextIOWrapper(stream, encoding="utf-8")
        except Exception as exc:  # pragma: no cover - defensive
            raise SchemaError(f"stream is not readable as UTF-8: {exc}") from exc

    report = LoadReport()
    events: list[AdoptionEvent] = []
    if fmt == "csv":
        try:
            reader = csv.DictReader(stream)
            header = reader.fieldnames
        except UnicodeDecodeError as exc:
            raise SchemaError(f"stream does not decode as UTF-8: {exc}") from exc
        if header is None:
            raise SchemaError("empty CSV stream: header row required")
        missing = [c for c in REQUIRED_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing required columns: {', '.join(missing)}")
        try:
            for line, row in enumerate(reader, start=2):
                report.rows_read += 1
                if any(row.get(c) in (None, "") for c in REQUIRED_COLUMNS):
                    bad = [c for c in REQUIRED_COLUMNS if row.get(c) in (None, "")]
                    report.row_errors.append(RowError(line, bad[0], "missing value"))
                    continue
                ev = _parse_row(row, line, report.row_errors)
                if ev is not None:
                    events.append(ev)
        except UnicodeDecodeError as exc:
            raise SchemaError(f"stream does not decode as UTF-8: {exc}") from exc
    elif fmt == "jsonl":
        try:
            for line, raw in enumerate(stream, start=1):
                raw = raw.strip()
                if not raw:
                    continue
                report.rows_read += 1
                try:
                    obj = json.loads(raw)
                except json.JSONDecodeError as exc:
                    report.row_errors.append(RowError(line, "-", f"invalid JSON: {exc}"))
                    continue
                missing = [c for c in REQUIRED_COLUMNS if c not in obj]
                if missing:
                    report.row_errors.append(RowError(line, missing[0], "missing key"))
                    continue
                row = {k: str(v) for k, v in obj.items()}
                ev = _parse_row(row, line, report.row_errors)
                if ev is not None:
                    events.append(ev)
        except UnicodeDecodeError as exc:
            raise SchemaError(f"stream does not decode as UTF-8: {exc}") from exc
    else:
        raise ValueError(f"unknown format {fmt!r} (expected 'csv' or 'jsonl')")
    report.events_loaded = len(events)
    return events, report


def write_events_csv(events, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        extra_keys = sorted({k for ev in events for k in ev.extra})
        writer = csv.writer(fh)
        writer.writerow(list(REQUIRED_COLUMNS) + extra_keys)
        for ev in events:
            writer.writerow(
                [
                    ev.message,
                    ev.group,
                    repr(ev.time),
                    ev.modality.value,
                    ev.content.value,
                    ev.forwarding_score,
                ]
                + [ev.extra.get(k, "") for k in extra_keys]
            )


def build_cascades(events) -> tuple[list[Cascade], DropReport]:
    """Apply earliest-per-group dedup and the >= 2 distinct-groups rule."""
    report = DropReport(events_in=len(events))
    by_message: dict[str, dict[str, AdoptionEvent]] = defaultdict(dict)
    for ev in events:
        cur = by_message[ev.message].get(ev.group)
        if cur is None:
            by_message[ev.message][ev.group] = ev
        else:
            report.duplicates_collapsed += 1
            if (ev.time, ev.group) < (cur.time, cur.group):
                by_message[ev.message][ev.group] = ev

    cascades: list[Cascade] = []
    for message in sorted(by_message):
        firsts = by_message[message]
        if len(firsts) < 2:
            report.single_group_dropped += 1
            continue
        ordered = sorted(firsts.values(), key=lambda e: (e.time, e.group))
        for a, b in zip(ordered, ordered[1:]):
            if a.time == b.time:
                report.ties.append(
                    {"message": message, "time": a.time, "groups": [a.group, b.group]}
                )
        earliest = ordered[0]
        score = max(e.forwarding_score for e in ordered)
        if any(
            (e.content, e.modality) != (earliest.content, earliest.modality) for e in ordered
        ):
            report.label_conflicts += 1
        cascades.append(
            Cascade(
                message=message,
                adoptions=tuple((e.group, e.time) for e in ordered),
                content=earliest.content,
                modality=earliest.modality,
                forwarding_score=score,
                extra=dict(earliest.extra),
            )
        )
    report.cascades_out = len(cascades)
    return cascades, report


def cascades_to_events(cascades) -> list[AdoptionEvent]:
    """Flatten cascades back into adoption events (inverse of build_cascades)."""
    events = []
    for c in cascades:
        for group, time in c.adoptions:
            events.append(
                AdoptionEvent(
                    message=c.message,
                    group=group,
                    time=time,
                    modality=c.modality,
                    content=c.content,
                    forwarding_score=c.forwarding_score,
                    extra=dict(c.extra),
                )
            )
    return events


@dataclass
class GroupCatalog:
    """Group sizes plus (optionally partial) anonymized membership sets."""

    entries: dict[str, tuple[int, frozenset[str] | None]] = field(default_factory=dict)

    def add(self, group: str, size: int, members=None) -> None:
        if size < 1:
            raise ValueError(f"group {group!r} size must be >= 1")
        mem = frozenset(members) if members is not None else None
        if mem is not None and len(mem) > size:
            raise ValueError(f"group {group!r} has more donated members than its size")
        self.entries[group] = (size, mem)

    def size(self, group: str) -> int:
        return self.entries[group][0]

    def members(self, group: str) -> frozenset[str] | None:
        return self.entries[group][1]

    def __contains__(self, group: str) -> bool:
        return group in self.entries


def load_group_catalog(stream) -> GroupCatalog:
    catalog = GroupCatalog()
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or "group_id" not in reader.fieldnames or "size" not in reader.fieldnames:
        raise SchemaError("groups file needs columns group_id,size[,member_ids]")
    for line, row in enumerate(reader, start=2):
        try:
            size = int(row["size"])
        except ValueError:
            raise SchemaError(f"groups file line {line}: size {row['size']!r} is not an integer")
        raw_members = row.get("member_ids")
        members = None
        if raw_members:
            members = [m for m in raw_members.split(";") if m]
        catalog.add(row["group_id"], size, members)
    return catalog


@dataclass
class GroupOverlapNetwork:
    """Undirected group-group edges for pairs sharing at least one member."""

    edges: frozenset[frozenset[str]] = frozenset()

    def connected(self, g1: str, g2: str) -> bool:
        return g1 != g2 and frozenset((g1, g2)) in self.edges

    def neighbors(self, group: str) -> set[str]:
        out = set()
        for edge in self.edges:
            if group in edge:
                out.update(edge - {group})
        return out


def build_overlap_network(catalog: GroupCatalog) -> GroupOverlapNetwork:
    """Edge between two groups iff their donated member sets intersect."""
    with_members = {g: m for g, (_, m) in catalog.entries.items() if m}
    if len(with_members) < 2:
        raise ValueError("overlap network requires membership data for at least two groups")
    member_index: dict[str, list[str]] = defaultdict(list)
    for group in sorted(with_members):
        for member in with_members[group]:
            member_index[member].append(group)
    edges = set()
    for groups in member_index.values():
        for i, g1 in enumerate(groups):
            for g2 in groups[i + 1 :]:
                edges.add(frozenset((g1, g2)))
    return GroupOverlapNetwork(edges=frozenset(edges))


@dataclass
class DatasetSummary:
    """Distinct message / distinct group counts per label bucket."""

    modality: dict[str, tuple[int, int]]
    content: dict[str, tuple[int, int]]
    forwarding: dict[str, tuple[int, int]]

    def to_rows(self) -> list[tuple[str, str, int, int]]:
        rows = []
        for mod in Modality:
            rows.append(("modality", mod.value) + self.modality[mod.value])
        for ct in ContentType:
            rows.append(("content_type", ct.value) + self.content[ct.value])
        for bucket in FORWARDING_BUCKETS:
            rows.append(("forwarding_score", bucket) + self.forwarding[bucket])
        return rows


def summarize_dataset(events) -> DatasetSummary:
    def bucket(score: int) -> str:
        return str(score) if score < 5 else "5+"

    mod_msgs, mod_groups = defaultdict(set), defaultdict(set)
    ct_msgs, ct_groups = defaultdict(set), defaultdict(set)
    fs_msgs, fs_groups = defaultdict(set), defaultdict(set)
    score_by_message: dict[str, int] = {}
    for ev in events:
        mod_msgs[ev.modality.value].add(ev.message)
        mod_groups[ev.modality.value].add(ev.group)
        ct_msgs[ev.content.value].add(ev.message)
        ct_groups[ev.content.value].add(ev.group)
        score_by_message[ev.message] = max(score_by_message.get(ev.message, 0), ev.forwarding_score)
    for ev in events:
        key = bucket(score_by_message[ev.message])
        fs_msgs[key].add(ev.message)
        fs_groups[key].add(ev.group)

    return DatasetSummary(
        modality={m.value: (len(mod_msgs[m.value]), len(mod_groups[m.value])) for m in Modality},
        content={c.value: (len(ct_msgs[c.value]), len(ct_groups[c.value])) for c in ContentType},
        forwarding={b: (len(fs_msgs[b]), len(fs_groups[b])) for b in FORWARDING_BUCKETS},
    )
