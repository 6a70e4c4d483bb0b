import random

import pytest
from hypothesis import given, settings, strategies as st

from conftest import fixture_bytes
from gen_collections import random_collection, random_rule
from oracles import brute_force_derive
from forenorm.correlate import (
    Condition,
    DerivationRule,
    EventTemplate,
    correlate,
    default_rules,
    derive_events,
    load_rules,
    profile_subject,
)
from forenorm.errors import RuleSyntaxError, UnboundPlaceholder
from forenorm.model import Collection, Domain, Timestamp, render_sentence, validate_collection


def test_logon_event(logon_collection):
    (e,) = logon_collection.events
    assert e.id == "event1"
    assert (e.who, e.how, e.when) == ("Jaehyeok", "logged on", Timestamp.parse("2019-07-14"))
    assert e.etc.source == ("trace1",)
    assert render_sentence(e) == "Jaehyeok logged on at 2019-07-14 by trace1"


def test_unbound_placeholder_skipped(logon_traces):
    res = derive_events(logon_traces, load_rules(fixture_bytes("broken_rule.yaml")))
    assert res.created == 0
    (err,) = res.skipped
    assert isinstance(err, UnboundPlaceholder)
    assert (err.trace_id, err.key) == ("trace1", "TargetUserName")


def test_empty_rules(logon_traces):
    rules = load_rules(fixture_bytes("empty_rules.yaml"))
    assert rules == []
    res = derive_events(logon_traces, rules)
    assert res.collection == logon_traces and res.created == 0


def test_ids_continue(logon_collection):
    again = derive_events(logon_collection, default_rules())
    assert [e.id for e in again.collection.events] == ["event1", "event2"]


def test_dollar_escape(logon_traces):
    rule = DerivationRule("r", (), EventTemplate(how="$$5 fee"))
    (e,) = derive_events(logon_traces, [rule]).collection.events
    assert e.how == "$5 fee"


def test_numeric_ops(logon_traces):
    t = logon_traces.traces[0]
    assert Condition("EventID", "gt", "4000").test(t)
    assert not Condition("EventID", "lt", "100").test(t)
    assert not Condition("SubjectUserName", "gt", "1").test(t)
    assert Condition("SubjectUserName", "contains", "hye").test(t)


@pytest.mark.parametrize("doc", [
    b"- {condition: [{key: a}]}",
    b"- {template: {}}",
    b"- {template: {who: ''}}",
    b"- {template: {who: x, colour: red}}",
    b"- {condition: [{key: a, op: like, value: b}], template: {who: x}}",
    b"rules: 3",
    b"- [unclosed",
])
def test_rule_syntax_errors(doc):
    with pytest.raises(RuleSyntaxError):
        load_rules(doc)


def test_leak_subject(leak_collection):
    hits = correlate(leak_collection, Domain.WHO, "Tom")
    assert len(hits) == 4
    stamps = [e.when.instant() for e, _ in hits]
    assert stamps == sorted(stamps)
    assert [[t.id for t in ts] for _, ts in hits] == [["trace5"], ["trace7"], ["trace6"], ["trace4"]]


def test_profile_report(leak_collection):
    rep = profile_subject(leak_collection, "Tom")
    assert len(rep.events) == 4
    text = rep.render()
    assert "4 events for Tom" in text
    assert text.startswith("Tom copied to USB storage at")
    assert rep.active_period[0].instant() <= rep.active_period[1].instant()
    assert rep.domain_summary[Domain.WHO] == 1
    assert profile_subject(leak_collection, "Nobody").render() == "0 events for Nobody\n"


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force(seed):
    rng = random.Random(seed)
    c = random_collection(rng)
    c = Collection(c.traces, (), c.metadata)
    rules = [random_rule(rng, i) for i in range(rng.randint(0, 4))]
    expected = brute_force_derive(c.traces, rules)
    res = derive_events(c, rules)
    made = [x for x in expected if x is not None]
    assert res.created == len(made)
    assert len(res.skipped) == len(expected) - len(made)
    got = [(e.etc.source[0], {d: getattr(e, d) for d in ("who", "when", "where", "what", "how")
                              if getattr(e, d) is not None}) for e in res.collection.events]
    assert got == [(tid, fields) for tid, _, fields in made]
    assert [e.id for e in res.collection.events] == [f"event{i + 1}" for i in range(len(made))]
    assert validate_collection(res.collection).ok
