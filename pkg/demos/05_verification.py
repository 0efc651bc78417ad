"""Post-entry verification of a certificate, and the duty owed if origin is denied."""

from __future__ import annotations

import datetime as dt

from roo.config import CollectionBasis, Config
from roo.nomenclature import parse_hs
from roo.valuation import Money
from roo.verification import (
    Event,
    EventKind,
    IllegalTransition,
    assess_duty,
    load_mfn_rates,
    next_states,
    open_case,
    render_event_log,
    replay_event_log,
    transition,
)

t = dt.datetime(2023, 3, 1, 9)
day = dt.timedelta(days=1)

# Cotton jumpers are on the priority list, so the case is flagged at filing.
case = open_case("V-7", "AE-2023-000117", t, parse_hs("6110.20"))
print(f"{case.id}: {case.state.value}, priority={case.priority_good}")

# The importing authority asks; the exporting authority investigates and reports.
for offset, event in (
    (1, Event(EventKind.REQUEST_VERIFICATION, t + 1 * day)),
    (20, Event(EventKind.BEGIN_INVESTIGATION, t + 20 * day)),
    (60, Event(EventKind.RETURN_FINDINGS, t + 60 * day, confirmed=False)),
    (62, Event(EventKind.CLOSE, t + 62 * day)),
):
    case = transition(case, event)
    print(f"  day {offset:>2}: {event.kind.value:<20} -> {case.state.value}")
for state, spent in case.durations():
    print(f"  {spent.days:>3} days in {state.value}")

# Closed cases stay closed.
try:
    transition(case, Event(EventKind.BEGIN_INVESTIGATION, t + 90 * day))
except IllegalTransition as exc:
    print("rejected:", exc)

# Visits by the importing state's officials are an opt-in extension.
print("from UnderInvestigation (default):", sorted(next_states(case.history[1][1])))
print("with cross-border missions:      ", sorted(next_states(case.history[1][1], Config(cross_border_missions=True))))

# The log is one JSON object per line and replays to the same state.
log = render_event_log([case])
print(log, end="")
print("replayed:", replay_event_log(log)["V-7"].state.value)

# Denial means paying the gap between the MFN rate and the preferential rate.
rates = load_mfn_rates()
value = Money.of(1000, "USD")
for country in ("EG", "AE", "TN"):
    a = assess_duty(value, rates[country], 0)
    print(f"{country}: MFN {a.mfn_rate}% on {value} -> {a.amount_due} due ({a.collection_basis.value})")
print("retroactive:", assess_duty(value, rates["EG"], 0, CollectionBasis.RETROACTIVE).collection_basis.value)
