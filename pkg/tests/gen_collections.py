"""Seeded random generators for collections, rules and filters."""

import random
import string

from forenorm.classify import FilterExpr
from forenorm.correlate import Condition, DerivationRule, EventTemplate
from forenorm.model import (
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
)

NAMES = ["Tom", "Jane", "Jaehyeok", "Jieon", "관리자", "Zoë"]
HOWS = ["logged on", "copied", "uploaded", "sent"]
PLACES = ["WS01", "PUBLIC-PC01", "E:\\"]
KEYS = ["user", "peer", "host", "item", "method", "stamp", "EventID", "note"]
KEY_DOMAIN = {"user": Domain.WHO, "peer": Domain.WHO, "host": Domain.WHERE, "item": Domain.WHAT,
              "method": Domain.HOW, "stamp": Domain.WHEN, "EventID": None, "note": Domain.ETC}


def rand_text(rng: random.Random, n: int = 8) -> str:
    alphabet = string.ascii_letters + string.digits + " _-:\\\"'é한"
    return "".join(rng.choice(alphabet) for _ in range(rng.randint(0, n)))


def rand_timestamp(rng: random.Random) -> Timestamp:
    day = rng.randint(1, 20)
    if rng.random() < 0.3:
        text = f"2020-02-{day:02d}"
    else:
        text = f"2020-02-{day:02d} {rng.randint(0, 23):02d}:{rng.randint(0, 59):02d}:{rng.randint(0, 59):02d}"
        if rng.random() < 0.3:
            text += rng.choice(["Z", "+09:00", "-05:00"])
    return Timestamp.parse(text)


def rand_value(rng: random.Random, key: str):
    if key == "stamp":
        return rand_timestamp(rng)
    if key == "EventID":
        return rng.choice(["4624", "4634", "4672", 4624, 17])
    if key in ("user", "peer"):
        return rng.choice(NAMES)
    if key == "host":
        return rng.choice(PLACES)
    if key == "method":
        return rng.choice(HOWS)
    return rand_text(rng)


def rand_trace(rng: random.Random, tid: str) -> TraceObject:
    keys = rng.sample(KEYS, rng.randint(0, len(KEYS)))
    attrs = {k: Attribute(rand_value(rng, k), KEY_DOMAIN[k]) for k in keys}
    raw = {}
    for k in keys:
        v = attrs[k].value
        raw[f"src_{k}"] = None if rng.random() < 0.1 else (v.original if isinstance(v, Timestamp) else str(v))
    extras = {"encoding": "utf-8-replaced"} if rng.random() < 0.1 else {}
    return TraceObject(
        header=ObjectHeader(tid, Kind.TRACE, rng.choice(list(Category))),
        artifact_type=rng.choice(["WinEventLog", "CallLog", "PlasoTimeline"]),
        source=SourceRef(rng.choice(["security.evtx", "call_log.db", "timeline.csv"]),
                         f"row:{rng.randint(1, 999)}", rng.choice(list(SourceFormat))),
        attributes=attrs,
        raw=raw,
        extras=extras,
    )


def rand_event(rng: random.Random, eid: str, trace_ids: list[str]) -> EventObject:
    fields = {}
    domains = rng.sample(["who", "when", "where", "what", "how"], rng.randint(1, 5))
    for d in domains:
        if d == "when":
            fields[d] = rand_timestamp(rng) if rng.random() < 0.8 else "sometime " + rand_text(rng, 4)
        elif d == "who":
            fields[d] = rng.choice(NAMES)
        elif d == "how":
            fields[d] = rng.choice(HOWS)
        elif d == "where":
            fields[d] = rng.choice(PLACES)
        else:
            fields[d] = rand_text(rng) or "x"
    sources = tuple(rng.sample(trace_ids, rng.randint(1, min(3, len(trace_ids)))))
    etc = EtcBlock(sources, rng.choice([None, "audit trail", "원인"]),
                   {"note": rand_text(rng)} if rng.random() < 0.3 else {})
    cat = rng.choice([None, None, rng.choice(list(Category))])
    return EventObject(header=ObjectHeader(eid, Kind.EVENT, cat), etc=etc, **fields)


def random_collection(rng: random.Random, max_objects: int = 50,
                      max_traces: int | None = None) -> Collection:
    total = rng.randint(0, max_objects)
    n_traces = rng.randint(1, total) if total else 0
    if max_traces is not None:
        n_traces = min(n_traces, max_traces)
    traces = [rand_trace(rng, f"trace{i + 1}") for i in range(n_traces)]
    ids = [t.id for t in traces]
    n_events = total - n_traces if ids else 0
    events = [rand_event(rng, f"event{i + 1}", ids) for i in range(n_events)]
    meta = Metadata(case_name=rng.choice([None, "ABC leak", "사건-1"]),
                    created_at=rng.choice([None, "2020-03-01T00:00:00Z"]),
                    tool_version=rng.choice([None, "0.1.0"]))
    return Collection(tuple(traces), tuple(events), meta)


def random_rule(rng: random.Random, i: int) -> DerivationRule:
    conds = []
    for _ in range(rng.randint(0, 2)):
        key = rng.choice(KEYS)
        op = rng.choice(["eq", "ne", "contains", "gt", "ge", "lt", "le"])
        if op in ("gt", "ge", "lt", "le"):
            value = rng.choice(["17", "4000", "4624"])
        else:
            value = str(rand_value(rng, key)) if key != "stamp" else "2020"
        conds.append(Condition(key, op, value))
    tpl = {}
    for d in rng.sample(["who", "when", "where", "what", "how"], rng.randint(1, 3)):
        tpl[d] = rng.choice([f"${rng.choice(KEYS)}", rng.choice(HOWS + NAMES)])
    return DerivationRule(f"r{i}", tuple(conds), EventTemplate(**tpl))


def random_filter(rng: random.Random) -> FilterExpr:
    kw = {}
    if rng.random() < 0.3:
        kw["categories"] = frozenset(rng.sample(list(Category), rng.randint(1, 6)))
    domains = {}
    for d in (Domain.WHO, Domain.WHERE, Domain.HOW, Domain.WHAT):
        if rng.random() < 0.25:
            if d is Domain.WHO:
                domains[d] = rng.choice(NAMES + ["J*", "*o*"])
            elif d is Domain.WHERE:
                domains[d] = rng.choice(PLACES + ["*PC*"])
            elif d is Domain.HOW:
                domains[d] = rng.choice(HOWS + ["*ed"])
            else:
                domains[d] = "*"
    kw["domains"] = domains
    if rng.random() < 0.4:
        kw["start"] = f"2020-02-{rng.randint(1, 10):02d}"
    if rng.random() < 0.4:
        kw["end"] = f"2020-02-{rng.randint(8, 20):02d}"
    return FilterExpr(**kw)
