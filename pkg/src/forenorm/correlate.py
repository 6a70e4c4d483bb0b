"""Derive event objects from traces and query them.

A derivation rule matches a single trace on a conjunction of attribute
conditions and fills an event template; ``$key`` in the template is replaced
by the matched trace's attribute of that normalized key.
"""

from __future__ import annotations

import logging
import operator
import re
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Mapping, Optional, Sequence

from ._util import ByteSource, load_document
from .errors import RuleSyntaxError, UnboundPlaceholder
from .model import (
    EVENT_DOMAINS,
    Collection,
    Domain,
    EtcBlock,
    EventObject,
    Kind,
    ObjectHeader,
    Timestamp,
    TraceObject,
    When,
    parse_timestamp,
    render_sentence,
    value_text,
    when_sort_key,
)

log = logging.getLogger(__name__)

_NUMERIC_OPS = {"gt": operator.gt, "ge": operator.ge, "lt": operator.lt, "le": operator.le}
OPS = ("eq", "ne", "contains", *_NUMERIC_OPS)


@dataclass(frozen=True)
class Condition:
    key: str
    op: str
    value: str

    def test(self, t: TraceObject) -> bool:
        attr = t.attributes.get(self.key)
        if attr is None:
            return False
        text = value_text(attr.value)
        if self.op == "eq":
            return text == self.value
        if self.op == "ne":
            return text != self.value
        if self.op == "contains":
            return self.value in text
        try:
            return _NUMERIC_OPS[self.op](float(text), float(self.value))
        except ValueError:
            return False


@dataclass(frozen=True)
class EventTemplate:
    """Per-domain expressions: a literal, or ``$key`` naming a trace attribute."""

    who: Optional[str] = None
    when: Optional[str] = None
    where: Optional[str] = None
    what: Optional[str] = None
    how: Optional[str] = None
    reason: Optional[str] = None

    def expressions(self) -> list[tuple[Domain, str]]:
        return [(d, getattr(self, d.value)) for d in EVENT_DOMAINS
                if getattr(self, d.value) is not None]

    def placeholders(self) -> list[str]:
        return [expr[1:] for _, expr in self.expressions() if _is_placeholder(expr)]


def _is_placeholder(expr: str) -> bool:
    return len(expr) > 1 and expr.startswith("$") and not expr.startswith("$$")


def _literal(expr: str) -> str:
    return expr[1:] if expr.startswith("$$") else expr


@dataclass(frozen=True)
class DerivationRule:
    name: str
    condition: tuple[Condition, ...]
    template: EventTemplate

    def matches(self, t: TraceObject) -> bool:
        return all(c.test(t) for c in self.condition)


def _as_str(v) -> Optional[str]:
    return None if v is None or v == "" else str(v)


def rules_from_doc(doc: object) -> list[DerivationRule]:
    if doc is None:
        return []
    if isinstance(doc, dict):
        doc = doc.get("rules", [])
    if not isinstance(doc, list):
        raise RuleSyntaxError("derivation rules must be a list")
    out = []
    for i, r in enumerate(doc):
        if not isinstance(r, dict) or "template" not in r:
            raise RuleSyntaxError(f"rule {i}: needs a template")
        name = str(r.get("name") or f"rule{i + 1}")
        conds = []
        for c in r.get("condition") or []:
            if not isinstance(c, dict) or "key" not in c:
                raise RuleSyntaxError(f"rule {name!r}: condition needs key/op/value")
            op = str(c.get("op", "eq"))
            if op not in OPS:
                raise RuleSyntaxError(f"rule {name!r}: unknown op {op!r}")
            conds.append(Condition(str(c["key"]), op, str(c.get("value", ""))))
        tpl = r["template"] or {}
        unknown = set(tpl) - {"who", "when", "where", "what", "how", "reason"}
        if unknown:
            raise RuleSyntaxError(f"rule {name!r}: unknown template keys {sorted(unknown)}")
        template = EventTemplate(**{k: _as_str(v) for k, v in tpl.items()})
        if not template.expressions():
            raise RuleSyntaxError(f"rule {name!r}: template sets no domain")
        out.append(DerivationRule(name, tuple(conds), template))
    return out


def load_rules(src: ByteSource) -> list[DerivationRule]:
    try:
        doc = load_document(src)
    except Exception as exc:
        raise RuleSyntaxError(str(exc)) from exc
    return rules_from_doc(doc)


def default_rules(name: str = "windows_logon") -> list[DerivationRule]:
    ref = resources.files("forenorm.data.rules").joinpath(f"{name}.yaml")
    return load_rules(ref.read_bytes())


# --------------------------------------------------------------------------
# derivation


@dataclass
class DerivationResult:
    collection: Collection
    created: int = 0
    skipped: list[UnboundPlaceholder] = field(default_factory=list)


_EVENT_ID = re.compile(r"^event(\d+)$")


def _bind(expr: str, t: TraceObject, domain: Domain, rule: str) -> When:
    if _is_placeholder(expr):
        key = expr[1:]
        attr = t.attributes.get(key)
        # empty counts as absent, as at ingestion
        if attr is None or value_text(attr.value) == "":
            raise UnboundPlaceholder(rule, t.id, key)
        value = attr.value
    else:
        value = _literal(expr)
    if domain is Domain.WHEN:
        if isinstance(value, Timestamp):
            return value
        text = str(value)
        return parse_timestamp(text) or text
    return value_text(value)


def instantiate(rule: DerivationRule, t: TraceObject, event_id: str) -> EventObject:
    """Build the event ``rule`` makes from ``t``; raises UnboundPlaceholder."""
    fields = {d.value: _bind(expr, t, d, rule.name) for d, expr in rule.template.expressions()}
    return EventObject(
        header=ObjectHeader(event_id, Kind.EVENT),
        etc=EtcBlock(source=(t.id,), reason=rule.template.reason),
        **fields,
    )


def derive_events(c: Collection, rules: Sequence[DerivationRule]) -> DerivationResult:
    """Append one event per matching (trace, rule) pair, in trace-major order."""
    taken = {t.id for t in c.traces} | {e.id for e in c.events}
    nums = [int(m.group(1)) for e in c.events if (m := _EVENT_ID.match(e.id))]
    n = max(nums, default=0) + 1

    new: list[EventObject] = []
    skipped: list[UnboundPlaceholder] = []
    for t in c.traces:
        for rule in rules:
            if not rule.matches(t):
                continue
            while f"event{n}" in taken:
                n += 1
            try:
                ev = instantiate(rule, t, f"event{n}")
            except UnboundPlaceholder as err:
                log.debug("skipped: %s", err)
                skipped.append(err)
                continue
            taken.add(ev.id)
            new.append(ev)
            n += 1
    out = replace(c, events=(*c.events, *new))
    return DerivationResult(out, len(new), skipped)


# --------------------------------------------------------------------------
# queries


def _domain_matches(e: EventObject, key: Domain, value: str) -> bool:
    if key is Domain.ETC:
        return e.etc.reason == value or value in e.etc.extras.values()
    v = e.get(key)
    if v is None:
        return False
    if isinstance(v, Timestamp):
        return value in (v.value, v.isoformat(), v.original)
    return v == value


def correlate(c: Collection, key: Domain, value: str) -> list[tuple[EventObject, list[TraceObject]]]:
    """Events whose ``key`` domain equals ``value``, with their source traces, by time."""
    key = Domain(key)
    hits = [e for e in c.events if _domain_matches(e, key, value)]
    hits.sort(key=lambda e: when_sort_key(e.when))
    return [(e, c.resolve(e)) for e in hits]


@dataclass(frozen=True)
class ProfileReport:
    subject: str
    events: tuple[EventObject, ...] = ()
    domain_summary: Mapping[Domain, int] = field(default_factory=dict)
    active_period: Optional[tuple[Timestamp, Timestamp]] = None

    def render(self) -> str:
        lines = [render_sentence(e) for e in self.events]
        lines.append(f"{len(self.events)} events for {self.subject}")
        if self.active_period:
            lo, hi = self.active_period
            lines.append(f"active period: {lo} .. {hi}")
        if self.events:
            lines.append("distinct values: " + ", ".join(
                f"{d.value}={n}" for d, n in self.domain_summary.items()))
        return "\n".join(lines) + "\n"


def profile_subject(c: Collection, subject: str) -> ProfileReport:
    events = sorted((e for e in c.events if e.who == subject),
                    key=lambda e: when_sort_key(e.when))
    summary = {}
    for d in EVENT_DOMAINS:
        summary[d] = len({value_text(e.get(d)) for e in events if e.get(d) is not None})
    stamps = sorted((e.when for e in events if isinstance(e.when, Timestamp)),
                    key=when_sort_key)
    period = (stamps[0], stamps[-1]) if stamps else None
    return ProfileReport(subject, tuple(events), summary, period)
