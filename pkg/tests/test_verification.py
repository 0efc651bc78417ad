from __future__ import annotations

import datetime as dt
import itertools
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roo.config import CollectionBasis, Config
from roo.nomenclature import parse_hs
from roo.valuation import Money
from roo.verification import (
    TERMINAL_STATES,
    DenialReason,
    Event,
    EventKind,
    EventLogError,
    IllegalTransition,
    NonMonotoneTimestamp,
    RateInversion,
    State,
    assess_duty,
    flag_priority,
    load_mfn_rates,
    next_states,
    open_case,
    reachable_states,
    render_event_log,
    replay_event_log,
    transition,
)

T0 = dt.datetime(2023, 3, 1, 9)


def at(hours: int) -> dt.datetime:
    return T0 + dt.timedelta(hours=hours)


def drive(*kinds, config=None):
    case = open_case("V", "C", T0, config=config)
    for n, kind in enumerate(kinds, 1):
        if isinstance(kind, tuple):
            kind, flag = kind
            case = transition(case, Event(kind, at(n), flag), config)
        else:
            case = transition(case, Event(kind, at(n)), config)
    return case


K = EventKind


def test_transition_examples():
    assert drive(K.REQUEST_VERIFICATION, K.REFUSE_CONSENT).state is State.DENIED_ADVERSE_CONCLUSION
    granted = drive(K.REQUEST_VERIFICATION, K.BEGIN_INVESTIGATION, (K.RETURN_FINDINGS, True), K.CLOSE)
    assert granted.state is State.GRANTED
    with pytest.raises(IllegalTransition) as info:
        transition(granted, Event(K.BEGIN_INVESTIGATION, at(10)))
    assert info.value.state is State.GRANTED


def test_denial_reasons():
    neg = drive(K.REQUEST_VERIFICATION, K.BEGIN_INVESTIGATION, (K.RETURN_FINDINGS, False), K.CLOSE)
    assert neg.denial_reason is DenialReason.NEGATIVE_FINDING
    adverse = drive(K.REQUEST_VERIFICATION, K.BEGIN_INVESTIGATION, K.MISSING_DOCUMENTATION)
    assert adverse.denial_reason is DenialReason.ADVERSE_CONCLUSION
    assert drive(K.REQUEST_VERIFICATION).denial_reason is None


def test_return_findings_needs_flag():
    with pytest.raises(ValueError):
        Event(K.RETURN_FINDINGS, T0)
    with pytest.raises(ValueError):
        Event(K.CLOSE, T0, True)


def test_exhaustive_model_check():
    # every state is reachable, terminals have no exits, and no event leads back into Filed
    for config in (Config(), Config(cross_border_missions=True)):
        assert reachable_states(config) == set(State)
        for s in TERMINAL_STATES:
            assert next_states(s, config) == {}
        for s in State:
            assert State.FILED not in next_states(s, config).values()
    # exhaustive walks up to length 6: once terminal, every further event is illegal
    events = [Event(k, T0, f) for k in EventKind for f in ((True, False) if k is K.RETURN_FINDINGS else (None,))]
    config = Config(cross_border_missions=True)
    for path in itertools.product(events, repeat=4):
        case = open_case("V", "C", T0)
        terminal_seen = False
        for ev in path:
            try:
                case = transition(case, ev, config)
            except IllegalTransition:
                break
            assert not terminal_seen
            terminal_seen = case.state.terminal


def test_cross_border_hook():
    under = drive(K.REQUEST_VERIFICATION, K.BEGIN_INVESTIGATION)
    with pytest.raises(IllegalTransition):
        transition(under, Event(K.NOTIFY_MISSION, at(9)))
    on = Config(cross_border_missions=True)
    visited = transition(under, Event(K.NOTIFY_MISSION, at(9)), on)
    assert visited.state is State.UNDER_INVESTIGATION and len(visited.missions) == 1


def test_timestamps_monotone():
    case = drive(K.REQUEST_VERIFICATION)
    with pytest.raises(NonMonotoneTimestamp):
        transition(case, Event(K.BEGIN_INVESTIGATION, T0 - dt.timedelta(seconds=1)))
    same = transition(case, Event(K.BEGIN_INVESTIGATION, case.last_timestamp))
    assert same.state is State.UNDER_INVESTIGATION


@settings(max_examples=300)
@given(st.lists(st.integers(0, 1000), min_size=1, max_size=6))
def test_history_timestamps_never_decrease(offsets):
    case = open_case("V", "C", T0)
    t = T0
    for off in offsets:
        nxt = T0 + dt.timedelta(minutes=off)
        events = next_states(case.state)
        if not events:
            break
        label = sorted(events)[0]
        kind = K(label.split("(")[0])
        flag = None if "(" not in label else label.endswith("(true)")
        try:
            case = transition(case, Event(kind, nxt, flag))
            t = nxt
        except NonMonotoneTimestamp:
            assert nxt < t
    stamps = [case.filed_at] + [e.at for e, _ in case.history]
    assert stamps == sorted(stamps)


def test_fixture_logs_replay(fixtures):
    logs = fixtures / "logs"
    assert replay_event_log((logs / "case_granted.jsonl").read_text())["V-1"].state is State.GRANTED
    adverse = replay_event_log((logs / "case_adverse.jsonl").read_text())["V-2"]
    assert adverse.state is State.DENIED_ADVERSE_CONCLUSION and adverse.priority_good
    negative = replay_event_log((logs / "case_negative.jsonl").read_text())["V-3"]
    assert negative.state is State.DENIED_NEGATIVE_FINDING and not negative.priority_good
    with pytest.raises(IllegalTransition):
        replay_event_log((logs / "case_illegal.jsonl").read_text())


def test_log_round_trip_is_byte_exact(fixtures):
    text = "".join(
        (fixtures / "logs" / name).read_text()
        for name in ("case_granted.jsonl", "case_adverse.jsonl", "case_negative.jsonl")
    )
    cases = replay_event_log(text)
    rendered = render_event_log(cases.values())
    assert render_event_log(replay_event_log(rendered).values()) == rendered
    single = (fixtures / "logs" / "case_granted.jsonl").read_text()
    assert render_event_log(replay_event_log(single).values()) == single


def test_log_errors():
    with pytest.raises(EventLogError):
        replay_event_log('{"at":"2023-01-01T00:00:00","case":"X","event":"Close"}\n')
    with pytest.raises(EventLogError):
        replay_event_log("not json\n")
    opened = '{"at":"2023-01-01T00:00:00","case":"X","event":"Open"}\n'
    with pytest.raises(EventLogError):
        replay_event_log(opened * 2)
    with pytest.raises(EventLogError):
        replay_event_log(opened + '{"at":"2023-01-02T00:00:00","case":"X","event":"Explode"}\n')


def test_durations():
    case = replay_event_log(
        '{"at":"2023-01-01T00:00:00","case":"X","event":"Open"}\n'
        '{"at":"2023-01-03T00:00:00","case":"X","event":"RequestVerification"}\n'
    )["X"]
    assert case.durations() == [(State.FILED, dt.timedelta(days=2))]


# -- duties -------------------------------------------------------------------


def test_duty_examples_from_rate_fixture():
    rates = load_mfn_rates()
    assert rates["EG"] == Decimal("16.8") and rates["AE"] == Decimal("4.7")
    value = Money.of(1000, "USD")
    assert str(assess_duty(value, rates["EG"], 0).amount_due.amount) == "168.0000"
    assert str(assess_duty(value, rates["AE"], 0).amount_due.amount) == "47.0000"
    assert assess_duty(value, rates["EG"], rates["EG"]).amount_due.amount == 0


def test_duty_basis_and_errors():
    value = Money.of(1000, "USD")
    assert assess_duty(value, 5, 0).collection_basis is CollectionBasis.FROM_DENIAL_DATE
    assert assess_duty(value, 5, 0, CollectionBasis.RETROACTIVE).collection_basis is CollectionBasis.RETROACTIVE
    with pytest.raises(RateInversion):
        assess_duty(value, 0, 5)
    with pytest.raises(ValueError):
        assess_duty(value, 101, 0)


rates = st.decimals(0, 100, places=1)


@settings(max_examples=1000)
@given(st.decimals(0, 10**6, places=1), st.integers(1, 20), rates, rates)
def test_duty_linear(value, k, a, b):
    mfn, pref = max(a, b), min(a, b)
    one = assess_duty(Money.of(value, "USD"), mfn, pref).amount_due.amount
    many = assess_duty(Money.of(value * k, "USD"), mfn, pref).amount_due.amount
    # exact at scale 4 because value and rates each carry one place
    assert many == one * k
    assert assess_duty(Money.of(value, "USD"), mfn, mfn).amount_due.amount == 0


def test_flag_priority():
    assert flag_priority(parse_hs("6110.20"))
    assert flag_priority(parse_hs("8504.40"))
    assert not flag_priority(parse_hs("9401.30"))
    assert flag_priority(parse_hs("0101.21")) and flag_priority(parse_hs("2402.20"))
    assert not flag_priority(parse_hs("2501.00"))
    assert flag_priority(parse_hs("9401.30"), Config(priority_chapters=frozenset({"94"})))
