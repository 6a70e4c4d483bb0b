"""Trace/event object model shared by every stage of the pipeline.

A :class:`TraceObject` records one fact observed in a source artifact; an
:class:`EventObject` re-expresses one or more traces as who/when/where/what/how
statements with provenance links back to the traces in ``etc.source``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from enum import Enum
from typing import Iterable, Mapping, Optional, Union

SCHEMA_VERSION = "1.0"


class Domain(str, Enum):
    """The six tagging domains; "why" is folded into ``etc``."""

    WHO = "who"
    WHEN = "when"
    WHERE = "where"
    WHAT = "what"
    HOW = "how"
    ETC = "etc"


# event fields that carry a value directly, in canonical order
EVENT_DOMAINS = (Domain.WHO, Domain.WHEN, Domain.WHERE, Domain.WHAT, Domain.HOW)


class Category(str, Enum):
    ARCHIVE = "archive"
    CALL = "call"
    CALENDAR = "calendar"
    CLOUD = "cloud"
    CONNECTION = "connection"
    DOCUMENT = "document"
    EMAIL = "email"
    EXCHANGE = "exchange"
    EXECUTABLE = "executable"
    FONT = "font"
    LOCATION = "location"
    MEDIA = "media"
    MEMORY = "memory"
    MESSAGE = "message"
    NETWORK = "network"
    PEOPLE = "people"
    SOCIAL = "social"
    STRING = "string"
    SYSTEM = "system"
    WEB = "web"


class Kind(str, Enum):
    TRACE = "trace"
    EVENT = "event"


class SourceFormat(str, Enum):
    TIMELINE_CSV = "timeline_csv"
    RELATIONAL_EXPORT = "relational_export"
    EVENTLOG_EXPORT = "eventlog_export"
    DELIMITED = "delimited"


# --------------------------------------------------------------------------
# timestamps

_TZ_NAMES = {"UTC": "+00:00", "GMT": "+00:00", "Z": "+00:00"}

_ISO_RE = re.compile(
    r"^(?P<date>\d{4}-\d{2}-\d{2})"
    r"(?:[T ](?P<time>\d{2}:\d{2}(?::\d{2}(?:\.\d{1,9})?)?))?"
    r"\s*(?P<tz>Z|[+-]\d{2}:?\d{2}|UTC|GMT)?$"
)
# log2timeline style MM/DD/YYYY
_US_RE = re.compile(
    r"^(?P<month>\d{1,2})/(?P<day>\d{1,2})/(?P<year>\d{4})"
    r"(?:\s+(?P<time>\d{1,2}:\d{2}(?::\d{2}(?:\.\d{1,6})?)?))?"
    r"\s*(?P<tz>Z|[+-]\d{2}:?\d{2}|UTC|GMT)?$"
)


def _norm_tz(tz: Optional[str]) -> Optional[str]:
    if tz is None:
        return None
    if tz in _TZ_NAMES:
        return _TZ_NAMES[tz]
    if ":" not in tz:
        tz = f"{tz[:3]}:{tz[3:]}"
    return tz


def _norm_time(t: str) -> str:
    hms, _, frac = t.partition(".")
    frac = frac[:6]
    parts = hms.split(":")
    while len(parts) < 3:
        parts.append("00")
    out = ":".join(p.zfill(2) for p in parts)
    return f"{out}.{frac}" if frac else out


@dataclass(frozen=True)
class Timestamp:
    """ISO-8601 instant or date, with the verbatim source string retained.

    ``value`` is either ``YYYY-MM-DD`` or ``YYYY-MM-DDTHH:MM:SS[.ffffff]``;
    the UTC offset, when known, lives in ``tz`` (e.g. ``+00:00``).
    """

    value: str
    tz: Optional[str] = None
    original: str = ""

    @classmethod
    def parse(cls, text: str) -> "Timestamp":
        """Parse ``text``; raise ValueError if it is not a recognised timestamp."""
        s = text.strip()
        m = _ISO_RE.match(s)
        if m:
            date = m.group("date")
        else:
            m = _US_RE.match(s)
            if not m:
                raise ValueError(f"unrecognised timestamp: {text!r}")
            date = f"{m.group('year')}-{int(m.group('month')):02d}-{int(m.group('day')):02d}"
        value = date
        if m.group("time"):
            value = f"{date}T{_norm_time(m.group('time'))}"
        ts = cls(value=value, tz=_norm_tz(m.group("tz")), original=text)
        try:
            ts.instant()  # range check (month 13, Feb 30, year-1 offsets)
        except OverflowError as exc:
            raise ValueError(f"timestamp out of range: {text!r}") from exc
        return ts

    @property
    def is_date_only(self) -> bool:
        return "T" not in self.value

    def instant(self) -> datetime:
        """Aware UTC datetime; date-only values are midnight, naive values UTC."""
        if self.is_date_only:
            dt = datetime.strptime(self.value, "%Y-%m-%d")
        else:
            fmt = "%Y-%m-%dT%H:%M:%S.%f" if "." in self.value else "%Y-%m-%dT%H:%M:%S"
            dt = datetime.strptime(self.value, fmt)
        offset = timedelta(0)
        if self.tz:
            sign = -1 if self.tz[0] == "-" else 1
            hh, mm = self.tz[1:].split(":")
            offset = sign * timedelta(hours=int(hh), minutes=int(mm))
        return dt.replace(tzinfo=timezone(offset)).astimezone(timezone.utc)

    def isoformat(self) -> str:
        return self.value + (self.tz or "")

    def __str__(self) -> str:
        return self.value


def parse_timestamp(text: str) -> Optional[Timestamp]:
    """Lenient wrapper around :meth:`Timestamp.parse`, returning None on failure."""
    try:
        return Timestamp.parse(text)
    except ValueError:
        return None


When = Union[Timestamp, str]
AttrValue = Union[str, int, Timestamp]


def when_sort_key(when: Optional[When]) -> tuple:
    """Total order: timestamps by instant, then unparsed strings, then missing."""
    if isinstance(when, Timestamp):
        return (0, when.instant(), when.value)
    if isinstance(when, str):
        return (1, when)
    return (2,)


def value_text(value: AttrValue) -> str:
    """String form used for matching and display."""
    if isinstance(value, Timestamp):
        return value.original or value.isoformat()
    return str(value)


# --------------------------------------------------------------------------
# objects


@dataclass(frozen=True)
class ObjectHeader:
    id: str
    kind: Kind
    category: Optional[Category] = None
    schema_version: str = SCHEMA_VERSION


@dataclass(frozen=True)
class SourceRef:
    path: str
    record_locator: str
    format: SourceFormat


@dataclass(frozen=True)
class Attribute:
    """A normalized value plus the domain it was tagged with at ingestion."""

    value: AttrValue
    domain: Optional[Domain] = None


@dataclass(frozen=True)
class TraceObject:
    header: ObjectHeader
    artifact_type: str
    source: SourceRef
    attributes: Mapping[str, Attribute] = field(default_factory=dict)
    raw: Mapping[str, Optional[str]] = field(default_factory=dict)
    extras: Mapping[str, str] = field(default_factory=dict)

    @property
    def id(self) -> str:
        return self.header.id

    @property
    def category(self) -> Optional[Category]:
        return self.header.category

    def values(self, domain: Domain) -> list[AttrValue]:
        return [a.value for a in self.attributes.values() if a.domain is domain]


@dataclass(frozen=True)
class EtcBlock:
    source: tuple[str, ...] = ()
    reason: Optional[str] = None
    extras: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EventObject:
    header: ObjectHeader
    who: Optional[str] = None
    when: Optional[When] = None
    where: Optional[str] = None
    what: Optional[str] = None
    how: Optional[str] = None
    etc: EtcBlock = field(default_factory=EtcBlock)

    @property
    def id(self) -> str:
        return self.header.id

    def get(self, domain: Domain) -> Optional[When]:
        if domain is Domain.ETC:
            raise ValueError("etc is not a scalar event field")
        return getattr(self, domain.value)


@dataclass(frozen=True)
class Metadata:
    case_name: Optional[str] = None
    created_at: Optional[str] = None
    tool_name: str = "forenorm"
    tool_version: Optional[str] = None


@dataclass(frozen=True)
class Collection:
    traces: tuple[TraceObject, ...] = ()
    events: tuple[EventObject, ...] = ()
    metadata: Metadata = field(default_factory=Metadata)

    def trace_index(self) -> dict[str, TraceObject]:
        return {t.id: t for t in self.traces}

    def resolve(self, event: EventObject) -> list[TraceObject]:
        index = self.trace_index()
        return [index[i] for i in event.etc.source if i in index]


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    object_id: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.object_id}: {self.code}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)

    def codes(self) -> list[str]:
        return [v.code for v in self.violations]


DANGLING = "dangling source reference"


def _check_timestamp(ts: Timestamp) -> bool:
    try:
        ts.instant()
    except (ValueError, TypeError, OverflowError):
        return False
    return True


def validate_collection(c: Collection) -> ValidationReport:
    """Collect every invariant violation in ``c``; an empty report means valid."""
    out: list[Violation] = []
    add = lambda oid, code, msg: out.append(Violation(oid, code, msg))  # noqa: E731

    seen: set[str] = set()
    for obj in (*c.traces, *c.events):
        oid = obj.header.id
        if not oid:
            add("<empty>", "empty id", "object header id is empty")
        elif oid in seen:
            add(oid, "duplicate id", "header id is not unique")
        seen.add(oid)

    trace_ids = {t.id for t in c.traces}
    event_ids = {e.id for e in c.events}

    for t in c.traces:
        if t.header.kind is not Kind.TRACE:
            add(t.id, "kind mismatch", "trace header kind is not 'trace'")
        if not isinstance(t.header.category, Category):
            add(t.id, "missing category", "trace carries no valid category")
        if not t.source.path:
            add(t.id, "empty source", "trace source path is empty")
        for key, attr in t.attributes.items():
            if isinstance(attr.value, Timestamp) and not _check_timestamp(attr.value):
                add(t.id, "bad timestamp", f"attribute {key!r} is not ISO-8601")

    for e in c.events:
        if e.header.kind is not Kind.EVENT:
            add(e.id, "kind mismatch", "event header kind is not 'event'")
        if e.header.category is not None and not isinstance(e.header.category, Category):
            add(e.id, "bad category", "event category is not a known category")
        if all(e.get(d) in (None, "") for d in EVENT_DOMAINS):
            add(e.id, "empty event", "no 5W1H domain is populated")
        if isinstance(e.when, Timestamp) and not _check_timestamp(e.when):
            add(e.id, "bad timestamp", "when is not ISO-8601")
        if not e.etc.source:
            add(e.id, "empty source", "etc.source lists no trace")
        if len(set(e.etc.source)) != len(e.etc.source):
            add(e.id, "duplicate source", "etc.source repeats an id")
        for ref in e.etc.source:
            if ref in trace_ids:
                continue
            if ref in event_ids:
                add(e.id, "event source", f"{ref!r} is an event; only traces may be sources")
            else:
                add(e.id, DANGLING, f"{ref!r} does not resolve to a trace")
    return ValidationReport(tuple(out))


# --------------------------------------------------------------------------
# rendering


def render_sentence(e: EventObject) -> str:
    """One-line reading of an event: ``<who> <how> at <when> in <where> on <what> by <ids>``.

    Clauses for missing domains are dropped, and a connective is only written
    when something precedes it.
    """
    parts: list[str] = []
    for value, joiner in ((e.who, None), (e.how, None), (e.when, "at"),
                          (e.where, "in"), (e.what, "on")):
        if value is None or value == "":
            continue
        text = str(value)
        parts.append(f"{joiner} {text}" if joiner and parts else text)
    parts.append("by " + ", ".join(e.etc.source))
    return " ".join(parts)


def iter_objects(c: Collection) -> Iterable[Union[TraceObject, EventObject]]:
    yield from c.traces
    yield from c.events
