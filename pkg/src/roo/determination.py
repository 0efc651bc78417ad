"""Origin determination for one good, with a replayable explanation trace.

Every check is a *kernel*: a pure function from a JSON-serializable input
record to a JSON-serializable outcome.  :func:`determine` builds the input
records from the bill of materials, runs the kernels and keeps both in the
trace, so :func:`replay` can re-run each step from the recorded inputs alone
and confirm the verdict without access to the original documents.
"""

from __future__ import annotations

import hashlib
import json
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, replace
from decimal import Decimal
from enum import Enum
from fractions import Fraction
from typing import Any

from .config import Config, CumulationMode, DisputedPolicy
from .nomenclature import HsCode, HsPattern, ShiftLevel, parse_hs, shift_satisfied
from .rulebook import (
    DEFAULT_WHOLLY_OBTAINED,
    FINISHING_MENU,
    GAFTA_MEMBERS,
    AllOf,
    AnyOf,
    OperationKind,
    OriginRule,
    Process,
    ProcessSpec,
    RuleCatalog,
    RuleEntry,
    RuleStatus,
    TariffShift,
    ThreeOperations,
    ValueContent,
    WhollyObtained,
    YarnForward,
    lookup_rule,
    render_rule,
)
from .valuation import (
    CostSheet,
    CurrencyMismatch,
    Method,
    Money,
    NegativeInput,
    NonOriginatingExceedsBasis,
    choose_most_favorable,
    money_sum,
    quantize,
)

__all__ = [
    "UNKNOWN",
    "DeterminationError",
    "BomError",
    "RouteError",
    "MissingInputClassification",
    "MissingExWorks",
    "MissingNetCost",
    "ReplayMismatch",
    "Vessel",
    "InputMaterial",
    "ProcessingOperation",
    "BillOfMaterials",
    "LegActivity",
    "RouteLeg",
    "ConsignmentRoute",
    "Insufficiency",
    "Verdict",
    "TraceStep",
    "Determination",
    "check_wholly_obtained",
    "check_vessel_nationality",
    "filter_insufficient",
    "apply_cumulation",
    "check_tariff_shift",
    "check_value_content",
    "check_process",
    "check_transport",
    "validate_bom",
    "determine",
    "replay",
]

UNKNOWN = "UNKNOWN"

TEXTILE_ROLES = frozenset({"fiber", "yarn", "fabric", "unprinted_fabric"})
TEXTILE_CHAPTERS = frozenset(f"{c}" for c in range(50, 61))


class DeterminationError(ValueError):
    pass


class BomError(DeterminationError):
    pass


class RouteError(DeterminationError):
    pass


class MissingInputClassification(DeterminationError):
    pass


class MissingExWorks(DeterminationError):
    pass


class MissingNetCost(DeterminationError):
    pass


class ReplayMismatch(DeterminationError):
    pass


def _country(code: str) -> str:
    if code == UNKNOWN or (len(code) == 2 and code.isascii() and code.isalpha() and code.isupper()):
        return code
    raise BomError(f"bad country code {code!r}")


@dataclass(frozen=True)
class Vessel:
    """Nationality attributes of a fishing vessel."""

    flag: str
    registration: str
    ownership: str


@dataclass(frozen=True)
class InputMaterial:
    value: Money
    hs_code: HsCode | None = None
    origin_country: str = UNKNOWN
    description: str = ""
    fungible_fraction: Fraction | None = None
    role: str = ""
    drawback: bool = False
    processed_in: str | None = None
    vessel: Vessel | None = None
    # set by apply_cumulation; None means not yet classified
    originating: bool | None = None

    def __post_init__(self) -> None:
        _country(self.origin_country)
        if self.value.is_negative():
            raise NegativeInput(f"input {self.description or self.hs_code} has negative value")
        if self.fungible_fraction is not None:
            frac = Fraction(self.fungible_fraction)
            if not 0 <= frac <= 1:
                raise BomError("fungible_fraction must lie in [0, 1]")
            object.__setattr__(self, "fungible_fraction", frac)


@dataclass(frozen=True)
class ProcessingOperation:
    kind: OperationKind
    country: str
    label: str = ""

    def __post_init__(self) -> None:
        _country(self.country)

    @property
    def insufficient(self) -> bool:
        return self.kind.insufficient


@dataclass(frozen=True)
class BillOfMaterials:
    finished_code: HsCode
    inputs: tuple[InputMaterial, ...]
    operations: tuple[ProcessingOperation, ...]
    final_value: Money
    exporter_country: str
    importer_country: str
    net_cost: Money | None = None
    ex_works: Money | None = None
    cost_sheet: CostSheet | None = None
    related_party: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "operations", tuple(self.operations))

    @property
    def currency(self) -> str:
        return self.final_value.currency

    @property
    def effective_net_cost(self) -> Money | None:
        if self.net_cost is not None:
            return self.net_cost
        return self.cost_sheet.net_cost() if self.cost_sheet else None

    @property
    def effective_ex_works(self) -> Money | None:
        if self.ex_works is not None:
            return self.ex_works
        return self.cost_sheet.ex_works() if self.cost_sheet else None


def validate_bom(bom: BillOfMaterials, members: Iterable[str] = GAFTA_MEMBERS) -> None:
    members = frozenset(members)
    if bom.final_value.amount <= 0:
        raise BomError("final value must be positive")
    for side, c in (("exporter", bom.exporter_country), ("importer", bom.importer_country)):
        if c not in members:
            raise BomError(f"{side} country {c} is not a member state")
    if bom.exporter_country == bom.importer_country:
        raise BomError("exporter and importer must differ")
    cur = bom.currency
    monies = [bom.net_cost, bom.ex_works] + [i.value for i in bom.inputs]
    if bom.cost_sheet is not None:
        monies.append(bom.cost_sheet.direct_labor)
    for m in monies:
        if m is not None and m.currency != cur:
            raise CurrencyMismatch(f"BOM mixes {cur} and {m.currency}")


class LegActivity(Enum):
    TRANSIT = "transit"
    CUSTOMS_SUPERVISED_TRANSIT = "customs_supervised_transit"
    EXHIBITION = "exhibition"
    FURTHER_PRODUCTION = "further_production"
    LOADING_UNLOADING = "loading_unloading"


# activities a third country may host without breaking direct transport
_NEUTRAL_ABROAD = frozenset(
    {LegActivity.CUSTOMS_SUPERVISED_TRANSIT, LegActivity.LOADING_UNLOADING, LegActivity.EXHIBITION}
)


@dataclass(frozen=True)
class RouteLeg:
    country: str
    activity: LegActivity

    def __post_init__(self) -> None:
        _country(self.country)


@dataclass(frozen=True)
class ConsignmentRoute:
    legs: tuple[RouteLeg, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "legs", tuple(self.legs))
        if len(self.legs) < 2:
            raise RouteError("a route needs at least an origin and a destination leg")

    @classmethod
    def direct(cls, exporter: str, importer: str) -> ConsignmentRoute:
        return cls(
            (RouteLeg(exporter, LegActivity.LOADING_UNLOADING), RouteLeg(importer, LegActivity.LOADING_UNLOADING))
        )


class Insufficiency(Enum):
    ALL_INSUFFICIENT = "AllInsufficient"
    HAS_SUFFICIENT = "HasSufficient"


class Verdict(Enum):
    ORIGINATING = "Originating"
    NON_ORIGINATING = "NonOriginating"


# ----------------------------------------------------------------- serialization


def _amt(m: Money | None) -> str | None:
    return None if m is None else str(m.amount)


def _rule_json(rule: OriginRule) -> str:
    return render_rule(rule)


def _canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _digest(obj: Any) -> str:
    return hashlib.sha256(_canonical(obj).encode("utf-8")).hexdigest()[:16]


def _round_half_up(value: Fraction) -> Decimal:
    """Round a non-negative exact fraction to scale 4, half-up."""
    scaled = value * 10000
    n = (scaled.numerator * 2 + scaled.denominator) // (scaled.denominator * 2)
    return Decimal(n).scaleb(-4)


# ----------------------------------------------------------------------- kernels
#
# Each kernel takes the record produced by the matching ``_*_inputs`` builder.


def _k_vessel(inp: dict) -> dict:
    members = set(inp["members"])
    ok = all(inp[k] in members for k in ("flag", "registration", "ownership"))
    return {"passed": ok}


def _effective_origin(item: dict, members: set[str]) -> str:
    vessel = item.get("vessel")
    if vessel is not None:
        ok = _k_vessel({**vessel, "members": sorted(members)})["passed"]
        return vessel["flag"] if ok else UNKNOWN
    return item["origin"]


def _k_wholly_obtained(inp: dict) -> dict:
    members = set(inp["members"])
    exporter = inp["exporter"]
    patterns = inp["categories"]

    def in_category(code: str | None) -> bool:
        return code is not None and any(code.startswith(p) for p in patterns)

    foreign = [
        i for i, item in enumerate(inp["inputs"]) if _effective_origin(item, members) != exporter
    ]
    category = in_category(inp["finished_code"]) or (
        bool(inp["inputs"]) and all(in_category(item["hs_code"]) for item in inp["inputs"])
    )
    return {"passed": category and not foreign, "in_category": category, "foreign_inputs": foreign}


def _k_insufficient(inp: dict) -> dict:
    members = set(inp["members"])
    member_ops = [kind for kind, country in inp["operations"] if country in members]
    sufficient = [k for k in member_ops if not OperationKind(k).insufficient]
    result = Insufficiency.HAS_SUFFICIENT if sufficient else Insufficiency.ALL_INSUFFICIENT
    exempt = inp["wholly_obtained_exempt"]
    return {
        "passed": result is Insufficiency.HAS_SUFFICIENT or exempt,
        "result": result.value,
        "exempt_wholly_obtained": exempt,
    }


def _k_cumulation(inp: dict) -> dict:
    members = set(inp["members"])
    full = inp["mode"] == CumulationMode.FULL.value
    pieces = []
    orig_total = Decimal(0)
    non_total = Decimal(0)
    for item in inp["inputs"]:
        value = Decimal(item["value"])
        if item["fungible_fraction"] is not None:
            frac = Fraction(item["fungible_fraction"])
            orig = _round_half_up(Fraction(value) * frac)
            non = value - orig
        else:
            origin = _effective_origin(item, members)
            originating = origin in members or (full and item.get("processed_in") in members)
            orig, non = (value, Decimal(0)) if originating else (Decimal(0), value)
        pieces.append([str(quantize(orig)), str(quantize(non))])
        orig_total += orig
        non_total += non
    return {
        "passed": True,
        "pieces": pieces,
        "originating_value": str(quantize(orig_total)),
        "non_originating_value": str(quantize(non_total)),
    }


def _k_value_content(inp: dict) -> dict:
    cur = inp["currency"]

    def money(key: str) -> Money | None:
        return None if inp[key] is None else Money.of(inp[key], cur)

    methods = [Method(m) for m in inp["methods"]]
    if inp["net_cost"] is None:
        if methods == [Method.NET_COST]:
            raise MissingNetCost("net-cost value content needs a net cost or a cost sheet")
        methods = [m for m in methods if m is not Method.NET_COST]
    try:
        method, pct = choose_most_favorable(
            money("net_cost"), money("final_value"), Money.of(inp["non_originating"], cur), methods
        )
    except NonOriginatingExceedsBasis:
        # non-originating content above every allowed basis: the rule cannot be met
        return {"passed": False, "method": None, "percentage": None}
    threshold = Decimal(inp["threshold"])
    return {"passed": pct >= threshold, "method": method.value, "percentage": str(pct)}


def _k_tariff_shift(inp: dict) -> dict:
    finished = parse_hs(inp["finished_code"])
    level = ShiftLevel[inp["level"]]
    shifted: list[bool | None] = []
    non_shifting = []
    non_shifting_value = Decimal(0)
    for i, item in enumerate(inp["inputs"]):
        if item["hs_code"] is None:
            if not item["originating"]:
                raise MissingInputClassification(f"non-originating input #{i} has no HS code")
            shifted.append(None)
            continue
        ok = shift_satisfied(parse_hs(item["hs_code"]), finished, level)
        shifted.append(ok)
        # originating inputs carry no shift obligation; recorded for the audit trail only
        if not ok and not item["originating"]:
            non_shifting.append(i)
            non_shifting_value += Decimal(item["value"])
    dm = inp["de_minimis"]
    if not non_shifting:
        passed = True
    elif dm is None:
        passed = False
    else:
        passed = non_shifting_value * 100 <= Decimal(dm) * Decimal(inp["final_value"])
    return {
        "passed": passed,
        "shifted": shifted,
        "non_shifting": non_shifting,
        "non_shifting_value": str(quantize(non_shifting_value)),
    }


def _k_process(inp: dict) -> dict:
    members = set(inp["members"])
    done = {kind for kind, country in inp["operations"] if country in members}
    spec = inp["spec"]
    if spec["kind"] == "three_ops":
        printing = OperationKind.PRINTING.value in done
        finishing = sorted(k for k in done if OperationKind(k) in FINISHING_MENU)
        ok = printing and len(finishing) >= 2
        out: dict[str, Any] = {"printing": printing, "finishing": finishing}
        cap = spec["cap"]
        if cap is not None:
            if inp["ex_works"] is None:
                raise MissingExWorks("fabric value cap requires an ex-works price")
            fabric = Decimal(inp["unprinted_fabric_value"])
            within = fabric * 100 <= Decimal(cap) * Decimal(inp["ex_works"])
            out["fabric_within_cap"] = within
            ok = ok and within
        out["passed"] = ok
        return out
    if spec["kind"] == "yarn_forward":
        spun = OperationKind.SPINNING.value in done
        failing = [
            i
            for i, t in enumerate(inp["textile_inputs"])
            if not (t["originating"] or (t["role"] == "fiber" and spun))
        ]
        return {"passed": not failing, "failing_inputs": failing, "cumulative_across_members": True}
    return {"passed": spec["stage"] in done}


def _k_transport(inp: dict) -> dict:
    members = set(inp["members"])
    offending = [
        i
        for i, (country, activity) in enumerate(inp["legs"])
        if country not in members and LegActivity(activity) not in _NEUTRAL_ABROAD
    ]
    return {"passed": not offending, "offending_legs": offending}


def _k_lookup(inp: dict) -> dict:
    use_fallback = inp["status"] == RuleStatus.DISPUTED.value and inp["policy"] == DisputedPolicy.USE_FALLBACK.value
    return {"passed": True, "applied_rule": inp["fallback_rule"] if use_fallback else inp["entry_rule"]}


_KERNELS: dict[str, Callable[[dict], dict]] = {
    "rule_lookup": _k_lookup,
    "wholly_obtained": _k_wholly_obtained,
    "insufficient_operations": _k_insufficient,
    "cumulation": _k_cumulation,
    "value_content": _k_value_content,
    "tariff_shift": _k_tariff_shift,
    "process": _k_process,
    "transport": _k_transport,
}

_CITATIONS = {
    "rule_lookup": "product-specific rule list",
    "wholly_obtained": "Rule 7 wholly obtained goods",
    "insufficient_operations": "art. 6.2 insufficient-operations override",
    "cumulation": "Rule 5 cumulation",
    "value_content": "Rule 3 value content",
    "tariff_shift": "change of tariff classification",
    "process": "specific process requirement",
    "all_of": "combined criteria",
    "any_of": "alternative criteria",
    "transport": "Rule 17 direct transport",
    "verdict": "overall determination",
}

_SHIFT_CITATIONS = {
    ShiftLevel.CHAPTER: "change of tariff chapter (CTC)",
    ShiftLevel.HEADING: "change of tariff heading (CTH)",
    ShiftLevel.SUBHEADING: "change of tariff subheading (CTSH)",
}


# ------------------------------------------------------------------ input builders


def _input_record(i: InputMaterial) -> dict:
    return {
        "hs_code": None if i.hs_code is None else i.hs_code.digits,
        "origin": i.origin_country,
        "value": str(i.value.amount),
        "fungible_fraction": None if i.fungible_fraction is None else str(i.fungible_fraction),
        "processed_in": i.processed_in,
        "vessel": None
        if i.vessel is None
        else {"flag": i.vessel.flag, "registration": i.vessel.registration, "ownership": i.vessel.ownership},
    }


def _wo_inputs(bom: BillOfMaterials, categories: Sequence[HsPattern], members: frozenset[str]) -> dict:
    return {
        "finished_code": bom.finished_code.digits,
        "exporter": bom.exporter_country,
        "categories": [p.digits for p in categories],
        "members": sorted(members),
        "inputs": [
            {"hs_code": r["hs_code"], "origin": r["origin"], "vessel": r["vessel"]}
            for r in map(_input_record, bom.inputs)
        ],
    }


def _ops(operations: Iterable[ProcessingOperation]) -> list[list[str]]:
    return [[op.kind.value, op.country] for op in operations]


def _cumulation_inputs(bom: BillOfMaterials, members: frozenset[str], mode: CumulationMode) -> dict:
    return {"mode": mode.value, "members": sorted(members), "inputs": [_input_record(i) for i in bom.inputs]}


def _classified(bom: BillOfMaterials, members: frozenset[str]) -> BillOfMaterials:
    if all(i.originating is not None for i in bom.inputs):
        return bom
    return apply_cumulation(bom, members)


def _non_originating(bom: BillOfMaterials) -> list[InputMaterial]:
    return [i for i in bom.inputs if not i.originating]


def _vc_inputs(bom: BillOfMaterials, rule: ValueContent) -> dict:
    vnm = money_sum((i.value for i in _non_originating(bom)), bom.currency)
    return {
        "currency": bom.currency,
        "net_cost": _amt(bom.effective_net_cost),
        "final_value": _amt(bom.final_value),
        "non_originating": _amt(vnm),
        "methods": sorted(m.value for m in rule.methods),
        "threshold": str(rule.threshold_pct),
    }


def _ts_inputs(bom: BillOfMaterials, rule: TariffShift) -> dict:
    return {
        "finished_code": bom.finished_code.digits,
        "level": rule.level.name,
        "de_minimis": None if rule.de_minimis_pct is None else str(rule.de_minimis_pct),
        "final_value": str(bom.final_value.amount),
        "inputs": [
            {
                "hs_code": None if i.hs_code is None else i.hs_code.digits,
                "value": str(i.value.amount),
                "originating": bool(i.originating),
            }
            for i in bom.inputs
        ],
    }


def _is_textile(i: InputMaterial) -> bool:
    return i.role in TEXTILE_ROLES or (i.hs_code is not None and i.hs_code.chapter in TEXTILE_CHAPTERS)


def _spec_record(spec: ProcessSpec) -> dict:
    if isinstance(spec, ThreeOperations):
        cap = spec.fabric_value_cap_pct
        return {"kind": "three_ops", "cap": None if cap is None else str(cap)}
    if isinstance(spec, YarnForward):
        return {"kind": "yarn_forward"}
    return {"kind": "stage", "stage": spec.stage}


def _process_inputs(bom: BillOfMaterials, spec: ProcessSpec, members: frozenset[str]) -> dict:
    rec: dict[str, Any] = {"spec": _spec_record(spec), "members": sorted(members), "operations": _ops(bom.operations)}
    if isinstance(spec, ThreeOperations):
        fabric = money_sum((i.value for i in bom.inputs if i.role == "unprinted_fabric"), bom.currency)
        rec["unprinted_fabric_value"] = str(fabric.amount)
        rec["ex_works"] = _amt(bom.effective_ex_works)
    elif isinstance(spec, YarnForward):
        rec["textile_inputs"] = [
            {"role": i.role, "originating": bool(i.originating)} for i in bom.inputs if _is_textile(i)
        ]
    return rec


def _transport_inputs(route: ConsignmentRoute, members: frozenset[str]) -> dict:
    return {"members": sorted(members), "legs": [[leg.country, leg.activity.value] for leg in route.legs]}


# -------------------------------------------------------------------- public checks


def check_vessel_nationality(
    flag: str, registration: str, ownership: str, members: Iterable[str] = GAFTA_MEMBERS
) -> bool:
    """Flag, registration and ownership must all belong to member states."""
    rec = {"flag": flag, "registration": registration, "ownership": ownership, "members": sorted(members)}
    return _k_vessel(rec)["passed"]


def check_wholly_obtained(
    bom: BillOfMaterials,
    categories: Sequence[HsPattern] = DEFAULT_WHOLLY_OBTAINED,
    members: Iterable[str] = GAFTA_MEMBERS,
) -> bool:
    """Strict test: every input from the exporting country, good in a listed category.

    Fish taken outside territorial waters count as the exporter's when the
    catching vessel passes :func:`check_vessel_nationality` and flies the
    exporter's flag.
    """
    return _k_wholly_obtained(_wo_inputs(bom, categories, frozenset(members)))["passed"]


def filter_insufficient(
    operations: Iterable[ProcessingOperation], members: Iterable[str] = GAFTA_MEMBERS
) -> Insufficiency:
    """Classify the producer's member-state operations, taken together."""
    rec = {"operations": _ops(operations), "members": sorted(members), "wholly_obtained_exempt": False}
    return Insufficiency(_k_insufficient(rec)["result"])


def apply_cumulation(
    bom: BillOfMaterials,
    members: Iterable[str] = GAFTA_MEMBERS,
    mode: CumulationMode = CumulationMode.MEMBER,
) -> BillOfMaterials:
    """Return a copy whose inputs are marked originating or not.

    Member-state inputs count as originating.  An input with a
    ``fungible_fraction`` is split into an originating and a non-originating
    piece in that proportion; a piece exists only if its share of the
    fraction is positive.
    """
    members = frozenset(members)
    outcome = _k_cumulation(_cumulation_inputs(bom, members, mode))
    inputs: list[InputMaterial] = []
    for item, (orig, non) in zip(bom.inputs, outcome["pieces"]):
        orig_d, non_d = Decimal(orig), Decimal(non)
        if item.fungible_fraction is None:
            inputs.append(replace(item, originating=_orig_flag(item, members, mode)))
            continue
        if item.fungible_fraction > 0:
            inputs.append(replace(item, value=Money(orig_d, bom.currency), originating=True))
        if item.fungible_fraction < 1:
            inputs.append(replace(item, value=Money(non_d, bom.currency), originating=False))
    return replace(bom, inputs=tuple(inputs))


def _orig_flag(item: InputMaterial, members: frozenset[str], mode: CumulationMode) -> bool:
    origin = _effective_origin(_input_record(item), set(members))
    return origin in members or (mode is CumulationMode.FULL and item.processed_in in members)


def check_tariff_shift(bom: BillOfMaterials, rule: TariffShift, members: Iterable[str] = GAFTA_MEMBERS) -> bool:
    """Every non-originating input must change classification at ``rule.level``.

    With a de-minimis allowance, non-shifting inputs pass when their total
    value is at most that percentage of the final value (inclusive).
    """
    bom = _classified(bom, frozenset(members))
    return _k_tariff_shift(_ts_inputs(bom, rule))["passed"]


def check_value_content(bom: BillOfMaterials, rule: ValueContent, members: Iterable[str] = GAFTA_MEMBERS) -> bool:
    bom = _classified(bom, frozenset(members))
    return _k_value_content(_vc_inputs(bom, rule))["passed"]


def check_process(bom: BillOfMaterials, spec: ProcessSpec, members: Iterable[str] = GAFTA_MEMBERS) -> bool:
    members = frozenset(members)
    bom = _classified(bom, members)
    return _k_process(_process_inputs(bom, spec, members))["passed"]


def check_transport(route: ConsignmentRoute, members: Iterable[str] = GAFTA_MEMBERS) -> bool:
    """Third-country legs may only be supervised transit, (un)loading or exhibition."""
    return _k_transport(_transport_inputs(route, frozenset(members)))["passed"]


# --------------------------------------------------------------------- determine


@dataclass(frozen=True)
class TraceStep:
    index: int
    check: str
    inputs: dict
    digest: str
    outcome: dict
    citation: str

    @property
    def passed(self) -> bool:
        return bool(self.outcome["passed"])

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "check": self.check,
            "citation": self.citation,
            "digest": self.digest,
            "inputs": self.inputs,
            "outcome": self.outcome,
        }

    @classmethod
    def from_dict(cls, d: dict) -> TraceStep:
        return cls(d["index"], d["check"], d["inputs"], d["digest"], d["outcome"], d["citation"])


@dataclass(frozen=True)
class Determination:
    verdict: Verdict
    rule_applied: RuleEntry
    evaluated_rule: OriginRule
    trace: tuple[TraceStep, ...]
    warnings: tuple[str, ...] = ()

    @property
    def originating(self) -> bool:
        return self.verdict is Verdict.ORIGINATING

    @property
    def value_content(self) -> tuple[Method, Decimal] | None:
        for step in self.trace:
            if step.check == "value_content" and step.outcome["method"] is not None:
                return Method(step.outcome["method"]), Decimal(step.outcome["percentage"])
        return None

    def steps(self, check: str) -> list[TraceStep]:
        return [s for s in self.trace if s.check == check]


class _Tracer:
    def __init__(self) -> None:
        self.steps: list[TraceStep] = []

    def record(self, check: str, inputs: dict, outcome: dict | None = None, citation: str | None = None) -> TraceStep:
        if outcome is None:
            outcome = _KERNELS[check](inputs)
        step = TraceStep(len(self.steps), check, inputs, _digest(inputs), outcome, citation or _CITATIONS[check])
        self.steps.append(step)
        return step


def _evaluate(rule: OriginRule, bom: BillOfMaterials, ctx: dict, tracer: _Tracer) -> TraceStep:
    if isinstance(rule, WhollyObtained):
        return tracer.record("wholly_obtained", ctx["wo_inputs"])
    if isinstance(rule, ValueContent):
        return tracer.record("value_content", _vc_inputs(bom, rule))
    if isinstance(rule, TariffShift):
        return tracer.record("tariff_shift", _ts_inputs(bom, rule), citation=_SHIFT_CITATIONS[rule.level])
    if isinstance(rule, Process):
        return tracer.record("process", _process_inputs(bom, rule.spec, ctx["members"]))
    if isinstance(rule, (AllOf, AnyOf)):
        # no short-circuit: every branch is evaluated and traced
        children = [_evaluate(r, bom, ctx, tracer) for r in rule.rules]
        check = "all_of" if isinstance(rule, AllOf) else "any_of"
        inputs = {"children": [c.index for c in children], "child_outcomes": [c.passed for c in children]}
        return tracer.record(check, inputs, _combine(check, inputs["child_outcomes"]))
    raise TypeError(f"not an origin rule: {rule!r}")


def _combine(check: str, outcomes: list[bool]) -> dict:
    return {"passed": all(outcomes) if check in ("all_of", "verdict") else any(outcomes)}


def determine(
    bom: BillOfMaterials,
    route: ConsignmentRoute | None,
    catalog: RuleCatalog,
    config: Config | None = None,
) -> Determination:
    """Decide whether ``bom`` qualifies as originating.

    The verdict is Originating iff the producer's operations are not all
    insufficient (wholly obtained goods are exempt only when
    ``config.exempt_wholly_obtained`` is set), the applicable rule is met
    after cumulation, and the consignment travelled directly.
    """
    config = config or Config()
    members = catalog.member_states
    validate_bom(bom, members)
    route = route or ConsignmentRoute.direct(bom.exporter_country, bom.importer_country)
    if route.legs[0].country != bom.exporter_country or route.legs[-1].country != bom.importer_country:
        raise RouteError("route must start in the exporting and end in the importing country")

    tracer = _Tracer()
    warnings: list[str] = []

    entry = lookup_rule(catalog, bom.finished_code)
    lookup = tracer.record(
        "rule_lookup",
        {
            "finished_code": bom.finished_code.digits,
            "pattern": entry.key,
            "status": entry.status.value,
            "policy": config.disputed_policy.value,
            "entry_rule": _rule_json(entry.rule),
            "fallback_rule": _rule_json(catalog.fallback),
        },
    )
    rule = entry.rule
    if entry.status is RuleStatus.DISPUTED:
        if lookup.outcome["applied_rule"] != lookup.inputs["entry_rule"]:
            rule = catalog.fallback
            warnings.append(
                f"rule for {entry.key} is disputed; general rule {_rule_json(rule)} applied pending agreement"
            )
        else:
            warnings.append(
                f"rule for {entry.key} is disputed; entry rule applied, general rule "
                f"{_rule_json(catalog.fallback)} is the negotiated default"
            )

    wo_inputs = _wo_inputs(bom, catalog.wholly_obtained, members)
    wo = tracer.record("wholly_obtained", wo_inputs)
    insufficiency = tracer.record(
        "insufficient_operations",
        {
            "operations": _ops(bom.operations),
            "members": sorted(members),
            "wholly_obtained_exempt": config.exempt_wholly_obtained and wo.passed,
        },
    )

    cum_inputs = _cumulation_inputs(bom, members, config.cumulation_mode)
    tracer.record("cumulation", cum_inputs)
    cumulated = apply_cumulation(bom, members, config.cumulation_mode)

    ctx = {"members": members, "wo_inputs": wo_inputs}
    rule_step = _evaluate(rule, cumulated, ctx, tracer)
    transport = tracer.record("transport", _transport_inputs(route, members))

    parts = [insufficiency, rule_step, transport]
    verdict_inputs = {"children": [s.index for s in parts], "child_outcomes": [s.passed for s in parts]}
    final = tracer.record("verdict", verdict_inputs, _combine("verdict", verdict_inputs["child_outcomes"]))

    if config.flag_drawback:
        for n, item in enumerate(bom.inputs):
            if item.drawback:
                label = item.description or (str(item.hs_code) if item.hs_code else f"#{n}")
                warnings.append(
                    f"input {label}: duty drawback claimed; drawback is prohibited on preferential exports "
                    "(art. 14), input ineligible for refund"
                )
    if bom.related_party:
        warnings.append("related-party sale: invoice values used without transfer-pricing adjustment")

    verdict = Verdict.ORIGINATING if final.passed else Verdict.NON_ORIGINATING
    return Determination(verdict, entry, rule, tuple(tracer.steps), tuple(warnings))


def replay(trace: Sequence[TraceStep]) -> Verdict:
    """Re-run every step from its recorded inputs and return the verdict.

    Raises :class:`ReplayMismatch` if any digest or outcome differs from the
    record, or if the trace does not end in a verdict step.
    """
    outcomes: dict[int, dict] = {}
    for step in trace:
        if _digest(step.inputs) != step.digest:
            raise ReplayMismatch(f"step {step.index} ({step.check}): inputs digest mismatch")
        if step.check in ("all_of", "any_of", "verdict"):
            child = [bool(outcomes[c]["passed"]) for c in step.inputs["children"]]
            if child != list(step.inputs["child_outcomes"]):
                raise ReplayMismatch(f"step {step.index} ({step.check}): child outcomes differ")
            again = _combine(step.check, child)
        else:
            again = _KERNELS[step.check](step.inputs)
        if again != step.outcome:
            raise ReplayMismatch(f"step {step.index} ({step.check}): recorded {step.outcome}, replayed {again}")
        outcomes[step.index] = again
    if not trace or trace[-1].check != "verdict":
        raise ReplayMismatch("trace does not end with a verdict step")
    return Verdict.ORIGINATING if trace[-1].outcome["passed"] else Verdict.NON_ORIGINATING
