"""Category assignment, 5W1H projection and filtering.

Category rules are data (``data/category_rules.yaml``) because each tool
family names its artifacts differently; the code only evaluates them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from fnmatch import fnmatchcase
from importlib import resources
from typing import Iterable, Mapping, Optional, Sequence, Union

from ._util import ByteSource, load_document
from .errors import RuleSyntaxError
from .ingest import MappingProfile
from .model import (
    Category,
    Collection,
    Domain,
    EventObject,
    SourceFormat,
    Timestamp,
    TraceObject,
    value_text,
)


@dataclass(frozen=True)
class CategoryRule:
    category: Category
    priority: int = 0
    artifact_type: Optional[str] = None
    format: Optional[SourceFormat] = None
    has_keys: tuple[str, ...] = ()
    # normalized key -> regex searched in the attribute's text
    attributes: Mapping[str, str] = field(default_factory=dict)

    @property
    def is_catch_all(self) -> bool:
        return (self.artifact_type is None and self.format is None
                and not self.has_keys and not self.attributes)

    def matches(self, t: TraceObject) -> bool:
        if self.artifact_type is not None and t.artifact_type != self.artifact_type:
            return False
        if self.format is not None and t.source.format is not self.format:
            return False
        if any(k not in t.attributes for k in self.has_keys):
            return False
        for key, pattern in self.attributes.items():
            attr = t.attributes.get(key)
            if attr is None or not re.search(pattern, value_text(attr.value)):
                return False
        return True


def category_rules_from_doc(doc: object) -> list[CategoryRule]:
    if isinstance(doc, dict):
        doc = doc.get("rules")
    if not isinstance(doc, list):
        raise RuleSyntaxError("category rules must be a list (or a mapping with 'rules')")
    rules = []
    for i, r in enumerate(doc):
        if not isinstance(r, dict) or "category" not in r:
            raise RuleSyntaxError(f"rule {i}: needs 'category'")
        m = r.get("match") or {}
        try:
            cat = Category(r["category"])
            fmt = SourceFormat(m["format"]) if m.get("format") else None
        except ValueError as exc:
            raise RuleSyntaxError(f"rule {i}: {exc}") from None
        attrs = {str(k): str(v) for k, v in (m.get("attributes") or {}).items()}
        for pat in attrs.values():
            try:
                re.compile(pat)
            except re.error as exc:
                raise RuleSyntaxError(f"rule {i}: bad pattern {pat!r}: {exc}") from None
        rules.append(CategoryRule(
            category=cat,
            priority=int(r.get("priority", 0)),
            artifact_type=m.get("artifact_type"),
            format=fmt,
            has_keys=tuple(m.get("has_keys") or ()),
            attributes=attrs,
        ))
    if not any(r.is_catch_all for r in rules):
        raise RuleSyntaxError("rule set has no catch-all (empty match) rule")
    return rules


def load_category_rules(src: ByteSource) -> list[CategoryRule]:
    try:
        doc = load_document(src)
    except Exception as exc:
        raise RuleSyntaxError(str(exc)) from exc
    return category_rules_from_doc(doc)


def default_category_rules() -> list[CategoryRule]:
    ref = resources.files("forenorm.data").joinpath("category_rules.yaml")
    return load_category_rules(ref.read_bytes())


def classify(t: TraceObject, rules: Sequence[CategoryRule]) -> Category:
    """Category of the highest-priority matching rule (file order breaks ties)."""
    ordered = sorted(enumerate(rules), key=lambda p: (-p[1].priority, p[0]))
    for _, rule in ordered:
        if rule.matches(t):
            return rule.category
    return Category.STRING


def classify_collection(c: Collection, rules: Optional[Sequence[CategoryRule]] = None) -> Collection:
    """Return ``c`` with every trace's header category (re)assigned by ``rules``."""
    rules = default_category_rules() if rules is None else rules
    traces = tuple(
        replace(t, header=replace(t.header, category=classify(t, rules))) for t in c.traces
    )
    return replace(c, traces=traces)


DomainTagging = dict[Domain, list[tuple[str, object]]]


def tag_domains(t: TraceObject, profile: Optional[MappingProfile] = None) -> DomainTagging:
    """Group a trace's attributes by domain.

    With a profile, its rules decide the domain of each normalized key;
    otherwise the tag recorded at ingestion is used. Untagged fields land
    under ``etc``.
    """
    out: DomainTagging = {d: [] for d in Domain}
    for key, attr in t.attributes.items():
        domain = profile.domain_of(key) if profile is not None else attr.domain
        out[domain or Domain.ETC].append((key, attr.value))
    return out


# --------------------------------------------------------------------------
# filtering


TimeBound = Union[Timestamp, str, None]


def _bound(b: TimeBound) -> Optional[Timestamp]:
    if b is None or isinstance(b, Timestamp):
        return b
    return Timestamp.parse(b)


@dataclass(frozen=True)
class FilterExpr:
    """Conjunction of optional predicates; the empty filter matches everything.

    ``domains`` maps a domain to a glob pattern (``fnmatch``, case-sensitive);
    a plain string without wildcards is an exact match. ``start``/``end``
    bound ``when`` inclusively, date-only bounds meaning midnight UTC.
    """

    categories: Optional[frozenset[Category]] = None
    domains: Mapping[Domain, str] = field(default_factory=dict)
    start: TimeBound = None
    end: TimeBound = None

    def __post_init__(self):
        object.__setattr__(self, "start", _bound(self.start))
        object.__setattr__(self, "end", _bound(self.end))
        if self.categories is not None:
            object.__setattr__(self, "categories", frozenset(Category(c) for c in self.categories))
        object.__setattr__(self, "domains", {Domain(k): v for k, v in self.domains.items()})

    @property
    def is_empty(self) -> bool:
        return (self.categories is None and not self.domains
                and self.start is None and self.end is None)

    def _in_range(self, whens: Iterable[object]) -> bool:
        if self.start is None and self.end is None:
            return True
        for w in whens:
            if not isinstance(w, Timestamp):
                continue
            i = w.instant()
            if self.start is not None and i < self.start.instant():
                continue
            if self.end is not None and i > self.end.instant():
                continue
            return True
        return False

    def match_trace(self, t: TraceObject) -> bool:
        if self.categories is not None and t.category not in self.categories:
            return False
        for d, pat in self.domains.items():
            values = [a.value for a in t.attributes.values() if (a.domain or Domain.ETC) is d]
            if not any(fnmatchcase(value_text(v), pat) for v in values):
                return False
        return self._in_range(t.values(Domain.WHEN))

    def match_event(self, e: EventObject, sources: Sequence[TraceObject] = ()) -> bool:
        # events carry no category of their own; they inherit their traces'
        if self.categories is not None:
            cats = {e.header.category} if e.header.category else {t.category for t in sources}
            if not cats & self.categories:
                return False
        for d, pat in self.domains.items():
            if d is Domain.ETC:
                values = [*e.etc.extras.values(), *([e.etc.reason] if e.etc.reason else [])]
            else:
                v = e.get(d)
                values = [] if v is None else [v]
            if not any(fnmatchcase(value_text(v), pat) for v in values):
                return False
        return self._in_range([e.when])


@dataclass(frozen=True)
class Selection:
    """Result of :func:`filter_collection`: references into the source collection.

    A selection need not be referentially closed (an event may be kept while
    its traces are filtered out).
    """

    traces: tuple[TraceObject, ...] = ()
    events: tuple[EventObject, ...] = ()

    def __len__(self) -> int:
        return len(self.traces) + len(self.events)


def filter_collection(c: Collection, f: FilterExpr) -> Selection:
    index = c.trace_index()
    traces = tuple(t for t in c.traces if f.match_trace(t))
    events = tuple(
        e for e in c.events
        if f.match_event(e, [index[i] for i in e.etc.source if i in index])
    )
    return Selection(traces, events)

