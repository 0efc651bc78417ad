from __future__ import annotations

import dataclasses
from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from roo.config import Config, CumulationMode, DisputedPolicy
from roo.determination import (
    BomError,
    ConsignmentRoute,
    Insufficiency,
    LegActivity,
    MissingExWorks,
    MissingInputClassification,
    MissingNetCost,
    ReplayMismatch,
    RouteError,
    RouteLeg,
    TraceStep,
    Verdict,
    Vessel,
    apply_cumulation,
    check_process,
    check_tariff_shift,
    check_transport,
    check_value_content,
    check_vessel_nationality,
    check_wholly_obtained,
    determine,
    filter_insufficient,
    replay,
)
from roo.nomenclature import HsPattern, ShiftLevel
from roo.rulebook import (
    NamedStage,
    RuleCatalog,
    RuleEntry,
    RuleStatus,
    TariffShift,
    ThreeOperations,
    ValueContent,
    YarnForward,
    load_fixture_catalog,
    parse_rule,
)
from roo.valuation import CurrencyMismatch, Method, Money

from helpers import bom, item, op, usd

CATALOG = load_fixture_catalog()
VC40 = ValueContent(frozenset(Method), Decimal(40))
CTH = TariffShift(ShiftLevel.HEADING)


def catalog_with(pattern: str, rule, status=RuleStatus.AGREED) -> RuleCatalog:
    return RuleCatalog((RuleEntry(HsPattern(pattern), rule, status),))


def matchbox():
    return bom(
        "4819.60",
        [item(4, "4823.20", "MA"), item(2, "4819.60", "AE"), item(3, "3605.00", "AE")],
        [op("other", "AE"), op("printing", "AE"), op("assembly", "AE")],
        12,
        exporter="AE",
    )


# -- wholly obtained ----------------------------------------------------------


def test_wholly_obtained_examples():
    calf = bom("0102.29", [item(10, "0102.29", "JO")], [op("other")], 100)
    assert check_wholly_obtained(calf)
    wheat = bom("1001.99", [item(90, "1001.99", "JO"), item("0.01", "1209.99", "CN")], [op("other")], 100)
    assert not check_wholly_obtained(wheat)
    fish = bom(
        "0302.89",
        [item(50, "0302.89", "UNKNOWN", vessel=Vessel("JO", "JO", "JO"))],
        [op("freezing")],
        100,
    )
    assert check_wholly_obtained(fish)
    foreign_boat = dataclasses.replace(fish, inputs=(item(50, "0302.89", "UNKNOWN", vessel=Vessel("PA", "JO", "JO")),))
    assert not check_wholly_obtained(foreign_boat)


def test_wholly_obtained_needs_category():
    chairs = bom("9401.30", [item(10, "4407.10", "JO")], [op("assembly")], 100)
    assert not check_wholly_obtained(chairs)


@pytest.mark.parametrize(
    "flag, reg, owner, expected",
    [("JO", "JO", "JO", True), ("PA", "JO", "JO", False), ("JO", "JO", "GR", False), ("JO", "EG", "SA", True)],
)
def test_vessel_nationality(flag, reg, owner, expected):
    assert check_vessel_nationality(flag, reg, owner) is expected


# -- insufficient operations --------------------------------------------------


@pytest.mark.parametrize(
    "kinds, expected",
    [
        (["dilution_with_water"], Insufficiency.ALL_INSUFFICIENT),
        (["simple_packaging", "freezing"], Insufficiency.ALL_INSUFFICIENT),
        (["simple_packaging", "printing"], Insufficiency.HAS_SUFFICIENT),
        ([], Insufficiency.ALL_INSUFFICIENT),
    ],
)
def test_filter_insufficient(kinds, expected):
    assert filter_insufficient([op(k) for k in kinds]) is expected


def test_operations_abroad_do_not_count():
    assert filter_insufficient([op("printing", "TR"), op("simple_packaging")]) is Insufficiency.ALL_INSUFFICIENT


# -- cumulation ---------------------------------------------------------------


def test_cumulation_examples():
    b = bom("2009.89", [item(30, "0805.10", "JO"), item(50, "0805.10", "CN")], [op("other", "EG")], 200, exporter="EG", importer="SA")
    c = apply_cumulation(b)
    assert [(i.value, i.originating) for i in c.inputs] == [(usd(30), True), (usd(50), False)]
    split = apply_cumulation(bom("2009.89", [item(40, "0805.10", "CN", fungible_fraction=Fraction(1, 2))], [op("other")], 100))
    assert [(i.value, i.originating) for i in split.inputs] == [(usd(20), True), (usd(20), False)]


def test_full_cumulation_uses_processing_country():
    b = bom("5208.11", [item(40, "5205.11", "IN", processed_in="EG")], [op("weaving")], 100)
    assert not apply_cumulation(b).inputs[0].originating
    assert apply_cumulation(b, mode=CumulationMode.FULL).inputs[0].originating


def test_unknown_origin_is_non_originating():
    assert not apply_cumulation(bom("2009.89", [item(5, "0805.10", "UNKNOWN")], [op("other")], 10)).inputs[0].originating


# -- tariff shift -------------------------------------------------------------


def test_tariff_shift_examples():
    assert check_tariff_shift(matchbox(), CTH)
    dm = TariffShift(ShiftLevel.HEADING, Decimal(20))
    fifteen = bom("7326.90", [item(15, "7326.11", "CN"), item(10, "7208.10", "CN")], [op("assembly")], 100)
    assert check_tariff_shift(fifteen, dm)
    twentyfive = bom("7326.90", [item(25, "7326.11", "CN")], [op("assembly")], 100)
    assert not check_tariff_shift(twentyfive, dm)
    assert not check_tariff_shift(fifteen, CTH)


def test_de_minimis_boundary():
    dm = TariffShift(ShiftLevel.HEADING, Decimal(20))
    at = bom("7326.90", [item(20, "7326.11", "CN")], [op("assembly")], 100)
    over = bom("7326.90", [item("20.0001", "7326.11", "CN")], [op("assembly")], 100)
    assert check_tariff_shift(at, dm)
    assert not check_tariff_shift(over, dm)


def test_missing_classification():
    b = bom("4819.60", [item(4, None, "CN")], [op("assembly")], 12)
    with pytest.raises(MissingInputClassification):
        check_tariff_shift(b, CTH)
    # an originating input needs no code
    assert check_tariff_shift(bom("4819.60", [item(4, None, "EG")], [op("assembly")], 12), CTH)


# -- value content ------------------------------------------------------------


def test_value_content_examples():
    worked = bom("8504.40", [item(60, "8504.90", "CN")], [op("assembly")], 120, net_cost=usd(100))
    assert check_value_content(worked, VC40)
    assert check_value_content(worked, ValueContent(frozenset({Method.NET_COST}), Decimal(40)))
    assert not check_value_content(worked, ValueContent(frozenset({Method.NET_COST}), Decimal("40.0001")))
    heavy = bom("8504.40", [item(90, "8504.90", "CN")], [op("assembly")], 120, net_cost=usd(100))
    assert not check_value_content(heavy, VC40)


def test_value_content_missing_net_cost():
    no_nc = bom("8504.40", [item(60, "8504.90", "CN")], [op("assembly")], 120)
    assert check_value_content(no_nc, VC40)
    with pytest.raises(MissingNetCost):
        check_value_content(no_nc, ValueContent(frozenset({Method.NET_COST}), Decimal(40)))


def test_value_content_above_every_basis_fails():
    # inconsistent figures: more non-originating content than the net cost
    b = bom("8504.40", [item(60, "7326.90", "CN")], [op("assembly")], 120, net_cost=usd(50))
    nc_only = ValueContent(frozenset({Method.NET_COST}), Decimal(10))
    assert not check_value_content(b, nc_only)
    d = determine(b, None, catalog_with("8504", parse_rule("VC(net_cost, >=10) OR CTH")))
    assert d.originating and d.value_content is None
    step = d.steps("value_content")[0]
    assert step.outcome == {"passed": False, "method": None, "percentage": None}


# -- process ------------------------------------------------------------------


def silk(ops, fabric_origin="LB"):
    return bom("5007.20", [item(200, "5007.20", fabric_origin, role="unprinted_fabric")], [op(k) for k in ops], 500)


def test_three_operations():
    three = ThreeOperations()
    assert check_process(silk(["printing", "bleaching", "shrinking"]), three)
    assert check_process(silk(["printing", "bleaching", "shrinking"], fabric_origin="CN"), three)
    assert not check_process(silk(["printing", "bleaching"]), three)
    assert not check_process(silk(["bleaching", "shrinking", "napping"]), three)
    assert not check_process(silk(["printing", "bleaching", "bleaching"]), three)


def test_three_operations_fabric_cap():
    capped = ThreeOperations(Decimal("47.5"))
    ops = [op(k, "TN") for k in ("printing", "bleaching", "shrinking")]
    half = bom("5903.10", [item(50, "5208.11", "CN", role="unprinted_fabric")], ops, 100, exporter="TN", ex_works=usd(100))
    assert not check_process(half, capped)
    with pytest.raises(MissingExWorks):
        check_process(dataclasses.replace(half, ex_works=None), capped)


def test_yarn_forward():
    spun = bom("5604.90", [item(10, "5201.00", "IN", role="fiber")], [op("spinning"), op("weaving")], 50)
    assert check_process(spun, YarnForward())
    bought_yarn = bom("5604.90", [item(10, "5205.11", "IN", role="yarn")], [op("weaving")], 50)
    assert not check_process(bought_yarn, YarnForward())
    member_yarn = bom("5604.90", [item(10, "5205.11", "EG", role="yarn")], [op("weaving")], 50)
    assert check_process(member_yarn, YarnForward())


def test_named_stage():
    oil = bom("1509.10", [item(10, "1509.10", "TR")], [op("refinement", "TN")], 50, exporter="TN")
    assert check_process(oil, NamedStage("refinement"))
    assert not check_process(dataclasses.replace(oil, operations=(op("refinement", "TR"),)), NamedStage("refinement"))


# -- transport ----------------------------------------------------------------


def route(*legs):
    return ConsignmentRoute(tuple(RouteLeg(c, LegActivity(a)) for c, a in legs))


@pytest.mark.parametrize(
    "middle, expected",
    [("customs_supervised_transit", True), ("further_production", False), ("exhibition", True), ("transit", False)],
)
def test_transport(middle, expected):
    r = route(("JO", "loading_unloading"), ("TR", middle), ("EG", "loading_unloading"))
    assert check_transport(r) is expected


def test_route_must_match_bom():
    with pytest.raises(RouteError):
        determine(matchbox(), route(("JO", "loading_unloading"), ("EG", "loading_unloading")), CATALOG)
    with pytest.raises(RouteError):
        ConsignmentRoute((RouteLeg("JO", LegActivity.TRANSIT),))


# -- determine ----------------------------------------------------------------


def test_determine_matchbox():
    d = determine(matchbox(), None, CATALOG)
    assert d.verdict is Verdict.ORIGINATING
    assert d.rule_applied.key == "4819"
    (ts,) = d.steps("tariff_shift")
    assert ts.inputs["level"] == "HEADING" and ts.passed
    assert "CTH" in ts.citation


def test_determine_dilution():
    b = bom("2208.90", [item(60, "2208.90", "JO"), item(20, "7010.90", "CN")],
            [op("dilution_with_water"), op("simple_packaging")], 100, importer="SA")
    d = determine(b, None, CATALOG)
    assert d.verdict is Verdict.NON_ORIGINATING
    assert d.value_content == (Method.FINAL_VALUE, Decimal("80.0000"))
    (ins,) = d.steps("insufficient_operations")
    assert not ins.passed and ins.citation.startswith("art. 6.2")


def test_determine_worked_example_under_fallback():
    b = bom("9401.30", [item(60, "8504.90", "CN")], [op("assembly")], 120, net_cost=usd(100))
    d = determine(b, None, RuleCatalog())
    assert d.rule_applied.is_fallback and d.originating
    assert d.value_content == (Method.FINAL_VALUE, Decimal("50.0000"))


def test_disputed_policy():
    # 1601 is disputed with VC >= 50; fallback is VC >= 40
    b = bom("1601.00", [item(55, "0203.11", "CN")], [op("cooking"), op("other")], 100)
    use_fallback = determine(b, None, CATALOG)
    assert use_fallback.originating and "disputed" in use_fallback.warnings[0]
    use_entry = determine(b, None, CATALOG, Config(disputed_policy=DisputedPolicy.USE_ENTRY))
    assert not use_entry.originating and "disputed" in use_entry.warnings[0]


def test_drawback_and_related_party_warnings():
    b = bom("8504.40", [item(10, "8504.90", "CN", drawback=True, description="coil")], [op("assembly")], 120,
            related_party=True)
    d = determine(b, None, CATALOG)
    assert any("drawback" in w for w in d.warnings)
    assert any("related-party" in w for w in d.warnings)
    assert not any("drawback" in w for w in determine(b, None, CATALOG, Config(flag_drawback=False)).warnings)


def test_combined_rule_evaluates_every_branch():
    cat = catalog_with("29", parse_rule("CTH AND VC(any, >=40)"))
    b = bom("2915.21", [item(90, "2915.11", "CN")], [op("other")], 100)
    d = determine(b, None, cat)
    assert not d.originating
    # both branches are traced even though the first already fails
    assert len(d.steps("tariff_shift")) == 1 and len(d.steps("value_content")) == 1


def test_bom_validation():
    with pytest.raises(BomError):
        determine(bom("8504.40", [], [op("assembly")], 0), None, CATALOG)
    with pytest.raises(BomError):
        determine(bom("8504.40", [], [op("assembly")], 10, importer="JO"), None, CATALOG)
    with pytest.raises(BomError):
        determine(bom("8504.40", [], [op("assembly")], 10, importer="TR"), None, CATALOG)
    mixed = bom("8504.40", [item(1, "8504.90", "CN")], [op("assembly")], 10)
    mixed = dataclasses.replace(mixed, inputs=(dataclasses.replace(mixed.inputs[0], value=Money.of(1, "EGP")),))
    with pytest.raises((BomError, CurrencyMismatch)):
        determine(mixed, None, CATALOG)


# -- replay -------------------------------------------------------------------


def test_replay_reproduces_verdict():
    d = determine(matchbox(), None, CATALOG)
    assert replay(d.trace) is d.verdict
    restored = [TraceStep.from_dict(s.to_dict()) for s in d.trace]
    assert replay(restored) is d.verdict


def test_replay_detects_tampering():
    d = determine(matchbox(), None, CATALOG)
    steps = list(d.trace)
    ts = next(i for i, s in enumerate(steps) if s.check == "tariff_shift")
    forged = dataclasses.replace(steps[ts], outcome={**steps[ts].outcome, "passed": False})
    with pytest.raises(ReplayMismatch):
        replay(steps[:ts] + [forged] + steps[ts + 1:])
    edited_inputs = dataclasses.replace(steps[ts], inputs={**steps[ts].inputs, "level": "CHAPTER"})
    with pytest.raises(ReplayMismatch):
        replay(steps[:ts] + [edited_inputs] + steps[ts + 1:])


# -- properties ---------------------------------------------------------------

ORIGINS = ["JO", "EG", "SA", "CN", "TR", "UNKNOWN"]
OPS = ["printing", "bleaching", "assembly", "refinement", "simple_packaging", "dilution_with_water", "freezing"]
INSUFFICIENT = ["simple_packaging", "dilution_with_water", "freezing", "peeling", "cooking", "loading", "unloading"]
HS = ["4819.10", "4823.20", "2009.89", "8504.90", "0805.10", "5007.20"]
RULES = [VC40, CTH, parse_rule("CTH OR VC(any, >=40)"), parse_rule("CTH AND VC(net_cost, >=30)"),
         parse_rule("CTC dm 10"), parse_rule("PROC(three_ops)"), parse_rule("PROC(refinement)")]

inputs = st.lists(
    st.tuples(st.integers(0, 50), st.sampled_from(HS), st.sampled_from(ORIGINS)), min_size=0, max_size=3
)


def random_bom(raw_inputs, ops, extra):
    items = [item(v, hs, o) for v, hs, o in raw_inputs]
    total = sum(v for v, _, _ in raw_inputs)
    return bom("4819.60", items, [op(k) for k in ops], total + extra + 1, net_cost=usd(total + extra + 1))


@settings(max_examples=1000)
@given(inputs, st.lists(st.sampled_from(INSUFFICIENT), max_size=4), st.integers(0, 100), st.sampled_from(RULES))
def test_insufficiency_override_dominates(raw, ops, extra, rule):
    d = determine(random_bom(raw, ops, extra), None, catalog_with("4819", rule))
    assert d.verdict is Verdict.NON_ORIGINATING


@settings(max_examples=1000)
@given(inputs, st.lists(st.sampled_from(OPS), min_size=1, max_size=4), st.integers(0, 100),
       st.sampled_from(RULES), st.data())
def test_cumulation_monotone(raw, ops, extra, rule, data):
    cat = catalog_with("4819", rule)
    before = determine(random_bom(raw, ops, extra), None, cat)
    foreign = [i for i, r in enumerate(raw) if r[2] not in ("JO", "EG", "SA")]
    if not foreign:
        return
    k = data.draw(st.sampled_from(foreign))
    member = data.draw(st.sampled_from(["JO", "EG", "SA"]))
    moved = list(raw)
    moved[k] = (raw[k][0], raw[k][1], member)
    after = determine(random_bom(moved, ops, extra), None, cat)
    if before.originating:
        assert after.originating


@settings(max_examples=300)
@given(inputs, st.lists(st.sampled_from(OPS), max_size=4), st.integers(0, 100), st.sampled_from(RULES))
def test_deterministic_and_replayable(raw, ops, extra, rule):
    cat = catalog_with("4819", rule)
    b = random_bom(raw, ops, extra)
    d1, d2 = determine(b, None, cat), determine(b, None, cat)
    assert [s.to_dict() for s in d1.trace] == [s.to_dict() for s in d2.trace]
    assert replay(d1.trace) is d1.verdict


def test_wholly_obtained_exemption_is_opt_in():
    fish = bom("0303.89", [item(50, "0302.89", "JO")], [op("freezing")], 80)
    assert determine(fish, None, CATALOG).verdict is Verdict.NON_ORIGINATING
    assert determine(fish, None, CATALOG, Config(exempt_wholly_obtained=True)).originating
    # goods that are not wholly obtained never benefit from the flag
    mixed = bom("0303.89", [item(50, "0302.89", "JO"), item(5, "2501.00", "CN")], [op("freezing")], 80)
    assert not determine(mixed, None, CATALOG, Config(exempt_wholly_obtained=True)).originating
