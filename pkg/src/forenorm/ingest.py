"""Adapters converting tool outputs into trace objects under a mapping profile.

Every adapter keeps each source field verbatim in ``TraceObject.raw`` and
populates ``attributes`` only through the profile's field rules. Broken
records are skipped and reported in :attr:`IngestResult.skipped`; only
problems that make the whole input unusable (bad header, unreadable
database) are raised.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import re
import sqlite3
import tempfile
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field, replace
from enum import Enum
from importlib import resources
from typing import Iterable, Iterator, Optional, Sequence

from ._util import ByteSource, decode_text, load_document, read_bytes, source_name
from .errors import (
    DuplicateSourceKey,
    IngestError,
    MalformedDocument,
    MalformedHeader,
    MalformedRecord,
    ProfileSyntaxError,
    RowArityError,
    TableNotFound,
    UnknownCategory,
    UnknownDomain,
    UnreadableDatabase,
)
from .model import (
    Attribute,
    AttrValue,
    Category,
    Domain,
    Kind,
    ObjectHeader,
    SourceFormat,
    SourceRef,
    Timestamp,
    TraceObject,
)

log = logging.getLogger(__name__)

L2T_COLUMNS = (
    "date", "time", "timezone", "MACB", "source", "sourcetype", "type", "user",
    "host", "short", "desc", "version", "filename", "inode", "notes", "format",
    "extra",
)

ARTIFACT_TYPE_KEY = "ArtifactType"
ENCODING_FLAG = "encoding"
SQLITE_MAGIC = b"SQLite format 3\x00"


class ValueTransform(str, Enum):
    IDENTITY = "identity"
    TIMESTAMP_PARSE = "timestamp_parse"
    LOWERCASE = "lowercase"
    HEX_TO_INT = "hex_to_int"


@dataclass(frozen=True)
class FieldRule:
    """Map one source field to a normalized key, optionally tagged with a domain.

    ``source_key`` may join several columns with ``+`` (``date+time+timezone``),
    whose non-empty values are concatenated with single spaces, or list
    fallbacks with ``|`` (``time|TimeCreated``), the first non-empty one winning.
    """

    source_key: str
    normalized_key: str
    domain: Optional[Domain] = None
    value_transform: ValueTransform = ValueTransform.IDENTITY

    @property
    def columns(self) -> list[str]:
        return re.split(r"[+|]", self.source_key)

    def extract(self, raw: dict[str, Optional[str]]) -> Optional[str]:
        if "|" in self.source_key:
            return next((raw[c] for c in self.columns if raw.get(c)), None)
        if "+" in self.source_key:
            parts = [raw.get(c) for c in self.columns]
            return " ".join(p for p in parts if p) if parts[0] else None
        return raw.get(self.source_key)


@dataclass(frozen=True)
class MappingProfile:
    name: str
    artifact_type: str
    category: Category
    field_rules: tuple[FieldRule, ...]
    id_prefix: str = "trace"
    # record field naming the originating file; falls back to the input name
    source_key: Optional[str] = None
    table: Optional[str] = None

    def vocabulary(self) -> set[str]:
        return {ARTIFACT_TYPE_KEY} | {r.normalized_key for r in self.field_rules}

    def domain_of(self, normalized_key: str) -> Optional[Domain]:
        for r in self.field_rules:
            if r.normalized_key == normalized_key:
                return r.domain
        return None


# --------------------------------------------------------------------------
# profile loading


def profile_from_dict(doc: object) -> MappingProfile:
    if not isinstance(doc, dict):
        raise ProfileSyntaxError("profile must be a mapping")
    for k in ("name", "artifact_type", "category", "field_rules"):
        if k not in doc:
            raise ProfileSyntaxError(f"profile lacks required key {k!r}")
    try:
        category = Category(str(doc["category"]))
    except ValueError:
        raise UnknownCategory(f"unknown category {doc['category']!r}") from None
    if not isinstance(doc["field_rules"], list):
        raise ProfileSyntaxError("field_rules must be a list")

    rules: list[FieldRule] = []
    seen_src: set[str] = set()
    seen_norm: set[str] = {ARTIFACT_TYPE_KEY}
    for i, r in enumerate(doc["field_rules"]):
        if not isinstance(r, dict) or "source_key" not in r or "normalized_key" not in r:
            raise ProfileSyntaxError(f"field_rules[{i}] needs source_key and normalized_key")
        src, norm = str(r["source_key"]), str(r["normalized_key"])
        if src in seen_src:
            raise DuplicateSourceKey(f"source_key {src!r} has more than one rule")
        if norm in seen_norm:
            raise ProfileSyntaxError(f"normalized_key {norm!r} is produced twice")
        seen_src.add(src)
        seen_norm.add(norm)
        domain = None
        if r.get("domain") is not None:
            try:
                domain = Domain(str(r["domain"]))
            except ValueError:
                raise UnknownDomain(f"unknown domain {r['domain']!r}") from None
        try:
            transform = ValueTransform(r.get("value_transform") or "identity")
        except ValueError:
            raise ProfileSyntaxError(
                f"unknown value_transform {r.get('value_transform')!r}") from None
        rules.append(FieldRule(src, norm, domain, transform))

    return MappingProfile(
        name=str(doc["name"]),
        artifact_type=str(doc["artifact_type"]),
        category=category,
        field_rules=tuple(rules),
        id_prefix=str(doc.get("id_prefix") or "trace"),
        source_key=doc.get("source_key"),
        table=doc.get("table"),
    )


def load_profile(src: ByteSource) -> MappingProfile:
    """Parse and check a YAML/JSON mapping profile document."""
    try:
        doc = load_document(src)
    except Exception as exc:  # yaml.YAMLError and friends
        raise ProfileSyntaxError(str(exc)) from exc
    return profile_from_dict(doc)


def default_profile(name: str) -> MappingProfile:
    """Load one of the bundled profiles (``windows_eventlog``, ``call_log``, ``plaso_timeline``)."""
    ref = resources.files("forenorm.data.profiles").joinpath(f"{name}.yaml")
    return load_profile(ref.read_bytes())


def bundled_profiles() -> list[str]:
    root = resources.files("forenorm.data.profiles")
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


# --------------------------------------------------------------------------
# record -> trace


@dataclass
class IngestResult:
    traces: list[TraceObject] = field(default_factory=list)
    skipped: list[IngestError] = field(default_factory=list)
    records: int = 0

    def __iter__(self) -> Iterator[TraceObject]:
        return iter(self.traces)

    def __len__(self) -> int:
        return len(self.traces)

    def __getitem__(self, i):
        return self.traces[i]


_HEX_RE = re.compile(r"^(?:0[xX])?([0-9A-Fa-f]+)[hH]?$")


def _transform(value: str, how: ValueTransform) -> AttrValue:
    if how is ValueTransform.LOWERCASE:
        return value.lower()
    if how is ValueTransform.TIMESTAMP_PARSE:
        try:
            return Timestamp.parse(value)
        except ValueError:
            return value
    if how is ValueTransform.HEX_TO_INT:
        m = _HEX_RE.match(value.strip())
        return int(m.group(1), 16) if m else value
    return value


def map_fields(raw: dict[str, Optional[str]], profile: MappingProfile) -> dict[str, Attribute]:
    """Apply the profile's field rules to one record.

    NULL and empty source values produce no attribute.
    """
    attrs: dict[str, Attribute] = {ARTIFACT_TYPE_KEY: Attribute(profile.artifact_type)}
    for rule in profile.field_rules:
        value = rule.extract(raw)
        if value is None or value == "":
            continue
        attrs[rule.normalized_key] = Attribute(_transform(value, rule.value_transform), rule.domain)
    return attrs


class _TraceBuilder:
    def __init__(self, profile: MappingProfile, path: str, fmt: SourceFormat,
                 start: int, id_mode: str, lossy: bool):
        if id_mode not in ("sequential", "hash"):
            raise ValueError(f"unknown id_mode {id_mode!r}")
        self.profile = profile
        self.path = path
        self.fmt = fmt
        self.next = start
        self.id_mode = id_mode
        self.lossy = lossy
        self.result = IngestResult()

    def _make_id(self, locator: str, raw: dict) -> str:
        if self.id_mode == "hash":
            blob = json.dumps([self.path, self.fmt.value, locator, list(raw.items())],
                              ensure_ascii=False, separators=(",", ":"))
            return f"{self.profile.id_prefix}:{hashlib.sha256(blob.encode()).hexdigest()[:16]}"
        tid = f"{self.profile.id_prefix}{self.next}"
        self.next += 1
        return tid

    def add(self, locator: str, raw: dict[str, Optional[str]]) -> None:
        self.result.records += 1
        origin = self.path
        if self.profile.source_key and raw.get(self.profile.source_key):
            origin = raw[self.profile.source_key]
        extras = {}
        if self.lossy and any(v and "�" in v for v in raw.values()):
            extras[ENCODING_FLAG] = "utf-8-replaced"
        self.result.traces.append(TraceObject(
            header=ObjectHeader(self._make_id(locator, raw), Kind.TRACE, self.profile.category),
            artifact_type=self.profile.artifact_type,
            source=SourceRef(origin, locator, self.fmt),
            attributes=map_fields(raw, self.profile),
            raw=dict(raw),
            extras=extras,
        ))

    def skip(self, err: IngestError) -> None:
        self.result.records += 1
        err.path = err.path or self.path
        log.debug("skipped: %s", err)
        self.result.skipped.append(err)


# --------------------------------------------------------------------------
# delimited inputs


def _csv_rows(text: str, delimiter: str) -> Iterator[list[str]]:
    return csv.reader(io.StringIO(text, newline=""), delimiter=delimiter)


def _sniff_delimiter(text: str) -> str:
    head = text.split("\n", 1)[0]
    try:
        return csv.Sniffer().sniff(head, delimiters=",\t;|").delimiter
    except csv.Error:
        return ","


def _ingest_table_text(text: str, builder: _TraceBuilder, delimiter: str,
                       expect: Optional[Sequence[str]], row_error: type[IngestError]) -> None:
    rows = _csv_rows(text, delimiter)
    header = next(rows, None)
    if header is None:
        if expect is not None:
            raise MalformedHeader("input is empty; header line missing", path=builder.path)
        return
    if expect is not None and (len(header) != len(expect) or set(header) != set(expect)):
        missing = sorted(set(expect) - set(header))
        extra = sorted(set(header) - set(expect))
        raise MalformedHeader(f"column set mismatch (missing {missing}, unexpected {extra})",
                              path=builder.path)
    if len(set(header)) != len(header):
        raise MalformedHeader("duplicate column names in header", path=builder.path)
    n = 0
    for row in rows:
        if not row:
            continue  # blank line, not a record
        n += 1
        locator = f"row:{n}"
        if len(row) != len(header):
            builder.skip(row_error(f"{len(row)} fields, header has {len(header)}",
                                   locator=locator))
            continue
        builder.add(locator, dict(zip(header, row)))


def ingest_timeline_csv(data: ByteSource, profile: MappingProfile, *, path: Optional[str] = None,
                        start: int = 1, id_mode: str = "sequential") -> IngestResult:
    """Ingest a 17-column log2timeline (l2tcsv) export."""
    text, lossy = decode_text(read_bytes(data))
    b = _TraceBuilder(profile, path or source_name(data), SourceFormat.TIMELINE_CSV,
                      start, id_mode, lossy)
    _ingest_table_text(text, b, ",", L2T_COLUMNS, RowArityError)
    return b.result


def ingest_delimited(data: ByteSource, profile: MappingProfile, *, path: Optional[str] = None,
                     delimiter: Optional[str] = None, start: int = 1,
                     id_mode: str = "sequential") -> IngestResult:
    """Ingest any header-bearing delimited file; the delimiter is sniffed if not given."""
    text, lossy = decode_text(read_bytes(data))
    b = _TraceBuilder(profile, path or source_name(data), SourceFormat.DELIMITED,
                      start, id_mode, lossy)
    _ingest_table_text(text, b, delimiter or _sniff_delimiter(text), None, RowArityError)
    return b.result


# --------------------------------------------------------------------------
# event-log exports


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _flatten_windows(rec: ET.Element) -> dict[str, str]:
    """Flatten a Windows ``<Event><System/><EventData/></Event>`` record."""
    out: dict[str, str] = {}

    def put(k: str, v: str) -> None:
        if k in out:
            raise MalformedRecord(f"field {k!r} appears twice")
        out[k] = v

    for section in rec:
        sname = _local(section.tag)
        for el in section:
            tag = _local(el.tag)
            if sname in ("EventData", "UserData") and "Name" in el.attrib:
                put(el.attrib["Name"], el.text or "")
                continue
            text = (el.text or "").strip()
            if text or not el.attrib:
                put(tag, el.text or "")
            if len(el.attrib) == 1 and not text:
                put(tag, next(iter(el.attrib.values())))
            elif el.attrib:
                for a, v in el.attrib.items():
                    put(f"{tag}.{_local(a)}", v)
    return out


def _flatten_flat(rec: ET.Element) -> dict[str, str]:
    out: dict[str, str] = {}
    for el in rec:
        tag = _local(el.tag)
        if len(el):
            raise MalformedRecord(f"field {tag!r} has nested elements")
        if tag in out:
            raise MalformedRecord(f"field {tag!r} appears twice")
        out[tag] = el.text or ""
    return out


def xml_records(text: str) -> list[ET.Element]:
    root = ET.fromstring(text)
    if _local(root.tag) == "Event":
        return [root]
    return list(root)


def flatten_record(rec: ET.Element) -> dict[str, str]:
    children = {_local(c.tag) for c in rec}
    if "System" in children:
        fields = _flatten_windows(rec)
    else:
        fields = _flatten_flat(rec)
    if not fields:
        raise MalformedRecord("record has no fields")
    return fields


def ingest_eventlog_export(data: ByteSource, profile: MappingProfile, *, path: Optional[str] = None,
                           start: int = 1, id_mode: str = "sequential") -> IngestResult:
    """Ingest an event-log export in markup (XML) or delimited (CSV) form."""
    text, lossy = decode_text(read_bytes(data))
    b = _TraceBuilder(profile, path or source_name(data), SourceFormat.EVENTLOG_EXPORT,
                      start, id_mode, lossy)
    if text.lstrip().startswith("<"):
        try:
            records = xml_records(text)
        except ET.ParseError as exc:
            raise MalformedDocument(f"markup is not well-formed: {exc}", path=b.path) from exc
        for n, rec in enumerate(records, 1):
            try:
                b.add(f"record:{n}", flatten_record(rec))
            except MalformedRecord as err:
                err.locator = f"record:{n}"
                b.skip(err)
    elif text.strip():
        _ingest_table_text(text, b, _sniff_delimiter(text), None, MalformedRecord)
    return b.result


# --------------------------------------------------------------------------
# relational exports


@dataclass
class TableSnapshot:
    name: str
    columns: list[str]
    rows: list[tuple[str, list]]  # (locator suffix, values)


def _cell(v) -> Optional[str]:
    if v is None:
        return None
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (bytes, bytearray, memoryview)):
        return bytes(v).hex()
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _sqlite_table(data: bytes, table: str) -> TableSnapshot:
    fd, tmp = tempfile.mkstemp(suffix=".db")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        con = sqlite3.connect(f"file:{tmp}?mode=ro", uri=True)
        try:
            names = {r[0] for r in con.execute(
                "SELECT name FROM sqlite_master WHERE type IN ('table', 'view')")}
            if table not in names:
                raise TableNotFound(f"no table {table!r} (have {sorted(names)})")
            q = '"' + table.replace('"', '""') + '"'
            try:
                cur = con.execute(f"SELECT rowid, * FROM {q} ORDER BY rowid")
                with_rowid = True
            except sqlite3.OperationalError:
                cur = con.execute(f"SELECT * FROM {q}")
                with_rowid = False
            cols = [d[0] for d in cur.description]
            rows = []
            for i, r in enumerate(cur.fetchall(), 1):
                if with_rowid:
                    rows.append((str(r[0]), list(r[1:])))
                else:
                    rows.append((str(i), list(r)))
            if with_rowid:
                cols = cols[1:]
            return TableSnapshot(table, cols, rows)
        finally:
            con.close()
    except sqlite3.DatabaseError as exc:
        raise UnreadableDatabase(str(exc)) from exc
    finally:
        os.unlink(tmp)


def _json_table(data: bytes, table: str) -> TableSnapshot:
    text, _ = decode_text(data)
    try:
        doc = json.loads(text)
        tables = doc["tables"]
    except (ValueError, KeyError, TypeError) as exc:
        raise UnreadableDatabase(f"not a relational export: {exc}") from exc
    if table not in tables:
        raise TableNotFound(f"no table {table!r} (have {sorted(tables)})")
    t = tables[table]
    rows_in = t.get("rows", [])
    columns = t.get("columns")
    if columns is None:
        columns = list(rows_in[0]) if rows_in and isinstance(rows_in[0], dict) else []
    rows = []
    for i, r in enumerate(rows_in, 1):
        if isinstance(r, dict):
            values = [r.get(c) for c in columns]
        else:
            values = list(r)
        rows.append((str(i), values))
    return TableSnapshot(table, list(columns), rows)


def read_table(data: ByteSource, table: str) -> TableSnapshot:
    """Read one table from an SQLite database image or a JSON table export.

    The JSON form is ``{"tables": {name: {"columns": [...], "rows": [[...], ...]}}}``;
    rows may also be objects keyed by column name.
    """
    raw = read_bytes(data)
    if raw.startswith(SQLITE_MAGIC):
        return _sqlite_table(raw, table)
    return _json_table(raw, table)


def ingest_relational_export(data: ByteSource, table: Optional[str], profile: MappingProfile, *,
                             path: Optional[str] = None, start: int = 1,
                             id_mode: str = "sequential") -> IngestResult:
    """Ingest every row of ``table`` (default: the profile's ``table``)."""
    name = path or source_name(data)
    table = table or profile.table
    if not table:
        raise TableNotFound("no table given and profile names none", path=name)
    try:
        snap = read_table(data, table)
    except IngestError as err:
        err.path = name
        raise
    b = _TraceBuilder(profile, name, SourceFormat.RELATIONAL_EXPORT, start, id_mode, False)
    for suffix, values in snap.rows:
        locator = f"{snap.name}:{suffix}"
        if len(values) != len(snap.columns):
            b.skip(RowArityError(f"{len(values)} values for {len(snap.columns)} columns",
                                 locator=locator))
            continue
        b.add(locator, {c: _cell(v) for c, v in zip(snap.columns, values)})
    return b.result


# --------------------------------------------------------------------------
# merging


_ID_RE = re.compile(r"^([^:]*?)(\d+)$")


def merge_traces(batches: Iterable[Sequence[TraceObject]], start: int = 1) -> list[TraceObject]:
    """Concatenate independently ingested batches, renumbering sequential ids.

    Ids keep their prefix; the numeric part continues across batches.
    Content-hash ids are kept as they are.
    """
    out: list[TraceObject] = []
    n = start
    for batch in batches:
        for t in batch:
            m = _ID_RE.match(t.id)
            if m:
                t = replace(t, header=replace(t.header, id=f"{m.group(1)}{n}"))
                n += 1
            out.append(t)
    return out
