"""Canonical JSON-LD-style wire format and a best-effort STIX 2.1 bundle.

Keys are written in schema order (header, then who/when/where/what/how/etc),
compact separators, UTF-8, one trailing newline. Optional fields that are
unset are omitted rather than written as null.
"""

from __future__ import annotations

import json
import uuid
from typing import Any, Optional

from ._util import ByteSource, read_bytes
from .errors import DocumentSyntaxError, IntegrityError, InvalidCollection, SchemaError
from .model import (
    DANGLING,
    EVENT_DOMAINS,
    Attribute,
    Category,
    Collection,
    Domain,
    EtcBlock,
    EventObject,
    Kind,
    Metadata,
    ObjectHeader,
    SourceFormat,
    SourceRef,
    Timestamp,
    TraceObject,
    render_sentence,
    validate_collection,
)

CONTEXT = "urn:forenorm:5w1h:v1"
STIX_NAMESPACE = uuid.UUID("6f0c5a5e-8f55-4c1e-9a4b-5f0b0e7f5a31")


def _dumps(obj: Any) -> bytes:
    return (json.dumps(obj, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


# --------------------------------------------------------------------------
# encode


def _ts(ts: Timestamp) -> dict:
    d: dict[str, Any] = {"value": ts.value}
    if ts.tz is not None:
        d["tz"] = ts.tz
    d["original"] = ts.original
    return d


def _value(v) -> Any:
    return _ts(v) if isinstance(v, Timestamp) else v


def _header(h: ObjectHeader) -> dict:
    d: dict[str, Any] = {"id": h.id, "kind": h.kind.value}
    if h.category is not None:
        d["category"] = h.category.value
    d["schema_version"] = h.schema_version
    return d


def _trace(t: TraceObject) -> dict:
    d = _header(t.header)
    d["artifact_type"] = t.artifact_type
    d["source"] = {"path": t.source.path, "record_locator": t.source.record_locator,
                   "format": t.source.format.value}
    d["attributes"] = {
        k: {"domain": a.domain.value if a.domain else None, "value": _value(a.value)}
        for k, a in t.attributes.items()
    }
    d["raw"] = dict(t.raw)
    if t.extras:
        d["extras"] = dict(t.extras)
    return d


def _event(e: EventObject) -> dict:
    d = _header(e.header)
    for dom in EVENT_DOMAINS:
        v = e.get(dom)
        if v is not None:
            d[dom.value] = _value(v)
    etc: dict[str, Any] = {"source": list(e.etc.source)}
    if e.etc.reason is not None:
        etc["reason"] = e.etc.reason
    if e.etc.extras:
        etc["extras"] = dict(e.etc.extras)
    d["etc"] = etc
    return d


def _metadata(m: Metadata) -> dict:
    return {"case_name": m.case_name, "created_at": m.created_at,
            "tool": {"name": m.tool_name, "version": m.tool_version}}


def to_document(c: Collection) -> dict:
    return {
        "@context": CONTEXT,
        "metadata": _metadata(c.metadata),
        "objects": [*map(_trace, c.traces), *map(_event, c.events)],
    }


def serialize(c: Collection) -> bytes:
    """Canonical bytes for a valid collection; raises InvalidCollection otherwise."""
    report = validate_collection(c)
    if not report.ok:
        raise InvalidCollection(report)
    return _dumps(to_document(c))


# --------------------------------------------------------------------------
# decode


def _req(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise SchemaError(f"{where}: missing {key!r}")
    return d[key]


def _str_map(d: Any, where: str, nullable: bool = False) -> dict:
    if not isinstance(d, dict):
        raise SchemaError(f"{where}: expected an object")
    for k, v in d.items():
        if not (isinstance(v, str) or (nullable and v is None)):
            raise SchemaError(f"{where}.{k}: expected a string")
    return dict(d)


def _parse_ts(d: Any, where: str) -> Timestamp:
    if not isinstance(d, dict) or not isinstance(d.get("value"), str):
        raise SchemaError(f"{where}: malformed timestamp")
    ts = Timestamp(d["value"], d.get("tz"), d.get("original", ""))
    try:
        ts.instant()
    except (ValueError, TypeError, OverflowError):
        raise SchemaError(f"{where}: timestamp {ts.value!r} is not ISO-8601") from None
    return ts


def _parse_value(v: Any, where: str):
    if isinstance(v, dict):
        return _parse_ts(v, where)
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise SchemaError(f"{where}: unsupported value type {type(v).__name__}")
    return v


def _parse_header(o: dict, where: str) -> ObjectHeader:
    oid = _req(o, "id", where)
    if not isinstance(oid, str):
        raise SchemaError(f"{where}: id must be a string")
    try:
        kind = Kind(_req(o, "kind", where))
    except ValueError:
        raise SchemaError(f"{where}: unknown kind {o['kind']!r}") from None
    cat = None
    if o.get("category") is not None:
        try:
            cat = Category(o["category"])
        except ValueError:
            raise SchemaError(f"{where}: unknown category {o['category']!r}") from None
    return ObjectHeader(oid, kind, cat, str(o.get("schema_version", "")))


def _parse_trace(o: dict, h: ObjectHeader) -> TraceObject:
    w = h.id
    src = _req(o, "source", w)
    try:
        fmt = SourceFormat(_req(src, "format", f"{w}.source"))
    except ValueError:
        raise SchemaError(f"{w}.source: unknown format {src['format']!r}") from None
    attrs = {}
    raw_attrs = o.get("attributes", {})
    if not isinstance(raw_attrs, dict):
        raise SchemaError(f"{w}.attributes: expected an object")
    for k, a in raw_attrs.items():
        dom = _req(a, "domain", f"{w}.attributes.{k}")
        try:
            dom = Domain(dom) if dom is not None else None
        except ValueError:
            raise SchemaError(f"{w}.attributes.{k}: unknown domain {dom!r}") from None
        attrs[k] = Attribute(_parse_value(_req(a, "value", f"{w}.attributes.{k}"),
                                          f"{w}.attributes.{k}"), dom)
    return TraceObject(
        header=h,
        artifact_type=str(_req(o, "artifact_type", w)),
        source=SourceRef(str(_req(src, "path", f"{w}.source")),
                         str(_req(src, "record_locator", f"{w}.source")), fmt),
        attributes=attrs,
        raw=_str_map(o.get("raw", {}), f"{w}.raw", nullable=True),
        extras=_str_map(o.get("extras", {}), f"{w}.extras"),
    )


def _parse_event(o: dict, h: ObjectHeader) -> EventObject:
    w = h.id
    fields: dict[str, Any] = {}
    for dom in EVENT_DOMAINS:
        if o.get(dom.value) is None:
            continue
        v = o[dom.value]
        if dom is Domain.WHEN and isinstance(v, dict):
            fields["when"] = _parse_ts(v, f"{w}.when")
        elif isinstance(v, str):
            fields[dom.value] = v
        else:
            raise SchemaError(f"{w}.{dom.value}: expected a string")
    etc = _req(o, "etc", w)
    source = _req(etc, "source", f"{w}.etc")
    if not isinstance(source, list) or not all(isinstance(s, str) for s in source):
        raise SchemaError(f"{w}.etc.source: expected a list of ids")
    reason = etc.get("reason")
    return EventObject(
        header=h,
        etc=EtcBlock(tuple(source), reason, _str_map(etc.get("extras", {}), f"{w}.etc.extras")),
        **fields,
    )


def parse(doc: ByteSource) -> Collection:
    """Rebuild a collection from wire bytes, checking every invariant."""
    data = read_bytes(doc)
    try:
        top = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise DocumentSyntaxError(str(exc)) from exc
    if not isinstance(top, dict):
        raise SchemaError("document root must be an object")
    if top.get("@context") != CONTEXT:
        raise SchemaError(f"unknown @context {top.get('@context')!r}")
    meta = top.get("metadata") or {}
    tool = meta.get("tool") or {}
    metadata = Metadata(meta.get("case_name"), meta.get("created_at"),
                        tool.get("name", "forenorm"), tool.get("version"))
    objects = _req(top, "objects", "document")
    if not isinstance(objects, list):
        raise SchemaError("objects must be an array")

    traces, events = [], []
    for i, o in enumerate(objects):
        h = _parse_header(o, f"objects[{i}]")
        if h.kind is Kind.TRACE:
            traces.append(_parse_trace(o, h))
        else:
            events.append(_parse_event(o, h))
    c = Collection(tuple(traces), tuple(events), metadata)

    report = validate_collection(c)
    dangling = [v for v in report if v.code == DANGLING]
    if dangling:
        raise IntegrityError("; ".join(map(str, dangling)))
    if not report.ok:
        raise SchemaError("; ".join(map(str, report)))
    return c


# --------------------------------------------------------------------------
# STIX


def _stix_time(ts: Timestamp) -> str:
    return ts.instant().strftime("%Y-%m-%dT%H:%M:%S.%f")[:-3] + "Z"


def _stix_entry(e: EventObject, bundle_seed: str, default_time: str) -> dict:
    ident = uuid.uuid5(STIX_NAMESPACE, f"{bundle_seed}/{e.id}")
    stamp = _stix_time(e.when) if isinstance(e.when, Timestamp) else default_time
    entry: dict[str, Any] = {
        "type": "observed-data",
        "spec_version": "2.1",
        "id": f"observed-data--{ident}",
        "created": stamp,
        "modified": stamp,
        "first_observed": stamp,
        "last_observed": stamp,
        "number_observed": 1,
        "description": render_sentence(e),
    }
    block: dict[str, Any] = {}
    for dom in EVENT_DOMAINS:
        v = e.get(dom)
        block[dom.value] = v.isoformat() if isinstance(v, Timestamp) else v
    block["etc"] = {"source": list(e.etc.source), "reason": e.etc.reason}
    entry["x_5w1h"] = block
    return entry


def export_stix_bundle(c: Collection, created: Optional[str] = None) -> bytes:
    """Wrap each event as an observed-data entry carrying an ``x_5w1h`` block.

    This is a bridge for STIX consumers, not a conformant STIX producer:
    entries have no ``object_refs``. Ids are UUIDv5 over the canonical
    document, so the output is byte-stable.
    """
    report = validate_collection(c)
    if not report.ok:
        raise InvalidCollection(report)
    seed = uuid.uuid5(STIX_NAMESPACE, _dumps(to_document(c)).decode("utf-8"))
    default_time = created or c.metadata.created_at or "1970-01-01T00:00:00.000Z"
    bundle = {
        "type": "bundle",
        "id": f"bundle--{seed}",
        "objects": [_stix_entry(e, str(seed), default_time) for e in c.events],
    }
    return _dumps(bundle)
