"""Post-entry origin verification cases and duty-difference assessment.

A case moves through a small finite machine driven by events.  Cases are
immutable; :func:`transition` returns a new case with the event appended to
its history, and a case log (one JSON event per line) replays to the same
states bit for bit.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
from collections.abc import Iterable
from dataclasses import dataclass, replace
from decimal import Decimal
from enum import Enum
from importlib import resources
from typing import Any

from .config import CollectionBasis, Config
from .nomenclature import HsCode, parse_hs
from .valuation import Money, ValuationError, quantize, to_decimal

__all__ = [
    "State",
    "DenialReason",
    "EventKind",
    "Event",
    "VerificationCase",
    "IllegalTransition",
    "NonMonotoneTimestamp",
    "RateInversion",
    "EventLogError",
    "TERMINAL_STATES",
    "open_case",
    "transition",
    "next_states",
    "reachable_states",
    "parse_event_log",
    "render_event_log",
    "replay_event_log",
    "DutyAssessment",
    "assess_duty",
    "load_mfn_rates",
    "flag_priority",
]


class State(Enum):
    FILED = "Filed"
    REQUESTED = "Requested"
    UNDER_INVESTIGATION = "UnderInvestigation"
    FINDINGS_CONFIRMED = "FindingsReturned(confirmed)"
    FINDINGS_NOT_CONFIRMED = "FindingsReturned(not_confirmed)"
    GRANTED = "Granted"
    DENIED_NEGATIVE_FINDING = "Denied(NegativeFinding)"
    DENIED_ADVERSE_CONCLUSION = "Denied(AdverseConclusion)"

    @property
    def terminal(self) -> bool:
        return self in TERMINAL_STATES


TERMINAL_STATES = frozenset({State.GRANTED, State.DENIED_NEGATIVE_FINDING, State.DENIED_ADVERSE_CONCLUSION})


class DenialReason(Enum):
    NEGATIVE_FINDING = "NegativeFinding"
    ADVERSE_CONCLUSION = "AdverseConclusion"


class EventKind(Enum):
    REQUEST_VERIFICATION = "RequestVerification"
    BEGIN_INVESTIGATION = "BeginInvestigation"
    RETURN_FINDINGS = "ReturnFindings"
    REFUSE_CONSENT = "RefuseConsent"
    MISSING_DOCUMENTATION = "MissingDocumentation"
    CLOSE = "Close"
    # notification of a visit by the importing state's officials; only legal
    # when cross-border missions are enabled, and does not change the state
    NOTIFY_MISSION = "NotifyMission"


class IllegalTransition(Exception):
    def __init__(self, state: State, event: EventKind | str) -> None:
        name = event.value if isinstance(event, EventKind) else event
        super().__init__(f"event {name} is not legal in state {state.value}")
        self.state = state
        self.event = event


class NonMonotoneTimestamp(ValueError):
    pass


class RateInversion(ValueError):
    pass


class EventLogError(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    kind: EventKind
    at: dt.datetime
    confirmed: bool | None = None  # ReturnFindings only
    note: str = ""

    def __post_init__(self) -> None:
        if (self.kind is EventKind.RETURN_FINDINGS) != (self.confirmed is not None):
            raise ValueError("confirmed is required on ReturnFindings and only there")


# (state, event) -> next state; ReturnFindings depends on its flag and is
# handled separately
_TABLE: dict[tuple[State, EventKind], State] = {
    (State.FILED, EventKind.REQUEST_VERIFICATION): State.REQUESTED,
    (State.REQUESTED, EventKind.BEGIN_INVESTIGATION): State.UNDER_INVESTIGATION,
    (State.REQUESTED, EventKind.REFUSE_CONSENT): State.DENIED_ADVERSE_CONCLUSION,
    (State.REQUESTED, EventKind.MISSING_DOCUMENTATION): State.DENIED_ADVERSE_CONCLUSION,
    (State.UNDER_INVESTIGATION, EventKind.REFUSE_CONSENT): State.DENIED_ADVERSE_CONCLUSION,
    (State.UNDER_INVESTIGATION, EventKind.MISSING_DOCUMENTATION): State.DENIED_ADVERSE_CONCLUSION,
    (State.FINDINGS_CONFIRMED, EventKind.CLOSE): State.GRANTED,
    (State.FINDINGS_NOT_CONFIRMED, EventKind.CLOSE): State.DENIED_NEGATIVE_FINDING,
}


def _next(state: State, event: Event, config: Config) -> State:
    if event.kind is EventKind.RETURN_FINDINGS:
        if state is not State.UNDER_INVESTIGATION:
            raise IllegalTransition(state, event.kind)
        return State.FINDINGS_CONFIRMED if event.confirmed else State.FINDINGS_NOT_CONFIRMED
    if event.kind is EventKind.NOTIFY_MISSION:
        if not config.cross_border_missions or state is not State.UNDER_INVESTIGATION:
            raise IllegalTransition(state, event.kind)
        return state
    try:
        return _TABLE[(state, event.kind)]
    except KeyError:
        raise IllegalTransition(state, event.kind) from None


@dataclass(frozen=True)
class VerificationCase:
    id: str
    certificate_id: str
    state: State
    filed_at: dt.datetime
    history: tuple[tuple[Event, State], ...] = ()
    priority_good: bool = False
    hs_code: HsCode | None = None

    @property
    def last_timestamp(self) -> dt.datetime:
        return self.history[-1][0].at if self.history else self.filed_at

    @property
    def denial_reason(self) -> DenialReason | None:
        if self.state is State.DENIED_NEGATIVE_FINDING:
            return DenialReason.NEGATIVE_FINDING
        if self.state is State.DENIED_ADVERSE_CONCLUSION:
            return DenialReason.ADVERSE_CONCLUSION
        return None

    @property
    def missions(self) -> tuple[Event, ...]:
        return tuple(e for e, _ in self.history if e.kind is EventKind.NOTIFY_MISSION)

    def durations(self) -> list[tuple[State, dt.timedelta]]:
        """Time spent in each state passed through; no deadlines are enforced."""
        out = []
        state, since = State.FILED, self.filed_at
        for event, new_state in self.history:
            if new_state is not state:
                out.append((state, event.at - since))
                state, since = new_state, event.at
        return out


def open_case(
    case_id: str,
    certificate_id: str,
    filed_at: dt.datetime,
    hs_code: HsCode | None = None,
    config: Config | None = None,
) -> VerificationCase:
    config = config or Config()
    priority = hs_code is not None and flag_priority(hs_code, config)
    return VerificationCase(case_id, certificate_id, State.FILED, filed_at, (), priority, hs_code)


def transition(case: VerificationCase, event: Event, config: Config | None = None) -> VerificationCase:
    config = config or Config()
    if event.at < case.last_timestamp:
        raise NonMonotoneTimestamp(
            f"case {case.id}: event at {event.at.isoformat()} precedes {case.last_timestamp.isoformat()}"
        )
    new_state = _next(case.state, event, config)
    return replace(case, state=new_state, history=case.history + ((event, new_state),))


def next_states(state: State, config: Config | None = None) -> dict[str, State]:
    """Every legal event label from ``state`` and where it leads."""
    config = config or Config()
    epoch = dt.datetime(2000, 1, 1)
    out: dict[str, State] = {}
    for kind in EventKind:
        flags = (True, False) if kind is EventKind.RETURN_FINDINGS else (None,)
        for flag in flags:
            try:
                target = _next(state, Event(kind, epoch, flag), config)
            except IllegalTransition:
                continue
            label = kind.value if flag is None else f"{kind.value}({str(flag).lower()})"
            out[label] = target
    return out


def reachable_states(config: Config | None = None) -> set[State]:
    seen = {State.FILED}
    frontier = [State.FILED]
    while frontier:
        s = frontier.pop()
        for t in next_states(s, config).values():
            if t not in seen:
                seen.add(t)
                frontier.append(t)
    return seen


# ------------------------------------------------------------------ event log
#
# One JSON object per line.  An "Open" record starts a case; every other
# record names an event for an already open case.  Lines are rendered with
# sorted keys and no insignificant whitespace so logs round-trip exactly.


def _parse_ts(text: Any, lineno: int) -> dt.datetime:
    try:
        return dt.datetime.fromisoformat(str(text))
    except ValueError:
        raise EventLogError(f"line {lineno}: bad timestamp {text!r}") from None


def parse_event_log(text: str) -> list[dict]:
    records = []
    for lineno, line in enumerate(text.split("\n"), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise EventLogError(f"line {lineno}: {exc.msg}") from None
        if not isinstance(rec, dict) or "case" not in rec or "event" not in rec or "at" not in rec:
            raise EventLogError(f"line {lineno}: records need case, event and at")
        rec["_line"] = lineno
        records.append(rec)
    return records


def _case_open_record(case: VerificationCase) -> dict:
    rec: dict[str, Any] = {
        "at": case.filed_at.isoformat(),
        "case": case.id,
        "certificate": case.certificate_id,
        "event": "Open",
    }
    if case.hs_code is not None:
        rec["hs_code"] = str(case.hs_code)
    return rec


def _event_record(case_id: str, event: Event) -> dict:
    rec: dict[str, Any] = {"at": event.at.isoformat(), "case": case_id, "event": event.kind.value}
    if event.confirmed is not None:
        rec["confirmed"] = event.confirmed
    if event.note:
        rec["note"] = event.note
    return rec


def render_event_log(cases: Iterable[VerificationCase]) -> str:
    """Serialize cases back to a log, events in timestamp order (stable per case)."""
    records: list[tuple[dt.datetime, int, dict]] = []
    seq = 0
    for case in cases:
        records.append((case.filed_at, seq, _case_open_record(case)))
        seq += 1
        for event, _ in case.history:
            records.append((event.at, seq, _event_record(case.id, event)))
            seq += 1
    records.sort(key=lambda r: (r[0], r[1]))
    return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for _, _, r in records)


def replay_event_log(text: str, config: Config | None = None) -> dict[str, VerificationCase]:
    """Apply every record in order; raises on the first illegal or malformed one."""
    config = config or Config()
    cases: dict[str, VerificationCase] = {}
    for rec in parse_event_log(text):
        lineno = rec["_line"]
        case_id = str(rec["case"])
        at = _parse_ts(rec["at"], lineno)
        if rec["event"] == "Open":
            if case_id in cases:
                raise EventLogError(f"line {lineno}: case {case_id} opened twice")
            hs = parse_hs(rec["hs_code"]) if rec.get("hs_code") else None
            cases[case_id] = open_case(case_id, str(rec.get("certificate", "")), at, hs, config)
            continue
        if case_id not in cases:
            raise EventLogError(f"line {lineno}: case {case_id} was never opened")
        try:
            kind = EventKind(rec["event"])
        except ValueError:
            raise EventLogError(f"line {lineno}: unknown event {rec['event']!r}") from None
        confirmed = rec.get("confirmed")
        if kind is EventKind.RETURN_FINDINGS and not isinstance(confirmed, bool):
            raise EventLogError(f"line {lineno}: ReturnFindings needs a boolean confirmed")
        event = Event(kind, at, confirmed if kind is EventKind.RETURN_FINDINGS else None, str(rec.get("note", "")))
        cases[case_id] = transition(cases[case_id], event, config)
    return cases


# ---------------------------------------------------------------------- duties


@dataclass(frozen=True)
class DutyAssessment:
    customs_value: Money
    mfn_rate: Decimal
    preferential_rate: Decimal
    amount_due: Money
    collection_basis: CollectionBasis


def _rate(value: Any, name: str) -> Decimal:
    rate = to_decimal(value)
    if not Decimal(0) <= rate <= Decimal(100):
        raise ValueError(f"{name} must lie in [0, 100], got {rate}")
    return rate


def assess_duty(
    customs_value: Money,
    mfn_rate: Any,
    preferential_rate: Any,
    basis: CollectionBasis = CollectionBasis.FROM_DENIAL_DATE,
) -> DutyAssessment:
    """Duty owed when preference is denied: the gap between MFN and preferential rates."""
    mfn = _rate(mfn_rate, "mfn_rate")
    pref = _rate(preferential_rate, "preferential_rate")
    if mfn < pref:
        raise RateInversion(f"MFN rate {mfn} is below the preferential rate {pref}")
    if customs_value.is_negative():
        raise ValuationError("customs value must be non-negative")
    due = Money(quantize(customs_value.amount * (mfn - pref) / 100), customs_value.currency)
    return DutyAssessment(customs_value, mfn, pref, due, basis)


def load_mfn_rates(text: str | None = None) -> dict[str, Decimal]:
    """Country code -> simple average MFN rate in percent, from the shipped table by default."""
    if text is None:
        text = resources.files("roo").joinpath("data").joinpath("mfn_rates.csv").read_text(encoding="utf-8")
    rows = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    return {row["country"]: Decimal(row["mfn_rate"]) for row in csv.DictReader(io.StringIO("\n".join(rows)))}


def flag_priority(hs_code: HsCode, config: Config | None = None) -> bool:
    config = config or Config()
    return hs_code.chapter in config.priority_chapters
