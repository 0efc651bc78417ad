"""Origin determination with a replayable audit trail."""

from __future__ import annotations

from roo import BillOfMaterials, InputMaterial, Money, OperationKind, ProcessingOperation, determine, parse_hs, replay
from roo.determination import ConsignmentRoute, LegActivity, RouteLeg
from roo.rulebook import load_fixture_catalog

aed = lambda amount: Money.of(amount, "AED")  # noqa: E731
catalog = load_fixture_catalog()


def show(title, d):
    print(f"\n{title}: {d.verdict.value} under rule {d.rule_applied.key}")
    for step in d.trace:
        mark = "pass" if step.passed else "FAIL"
        print(f"  [{step.index}] {mark} {step.check:<24} {step.citation}  #{step.digest}")


# Matchboxes made in the Emirates from Moroccan paperboard: the board moves
# from heading 4823 to 4819, which is all the heading-shift rule asks for.
matchbox = BillOfMaterials(
    finished_code=parse_hs("4819.60"),
    inputs=(
        InputMaterial(aed(4), parse_hs("4823.20"), "MA", "paperboard"),
        InputMaterial(aed(3), parse_hs("3605.00"), "AE", "matches"),
    ),
    operations=(
        ProcessingOperation(OperationKind.PRINTING, "AE"),
        ProcessingOperation(OperationKind.ASSEMBLY, "AE"),
    ),
    final_value=aed(12),
    exporter_country="AE",
    importer_country="EG",
)
d = determine(matchbox, None, catalog)
show("matchbox", d)

# Each step stores its inputs and a digest, so an auditor can re-run the
# kernels and confirm the verdict without the original BOM.
print("replayed verdict:", replay(d.trace).value)

# Juice concentrate that is only diluted and bottled: the numbers would pass
# a 40% value test, but those operations never confer origin.
juice = BillOfMaterials(
    finished_code=parse_hs("2009.89"),
    inputs=(InputMaterial(aed(20), parse_hs("2009.89"), "TR", "concentrate"),),
    operations=(
        ProcessingOperation(OperationKind.DILUTION_WITH_WATER, "JO"),
        ProcessingOperation(OperationKind.SIMPLE_PACKAGING, "JO"),
    ),
    final_value=aed(100),
    exporter_country="JO",
    importer_country="SA",
)
show("diluted juice", determine(juice, None, catalog))

# The same matchboxes, reworked in a third country on the way: direct
# transport fails even though the rule itself is met.
detour = ConsignmentRoute((
    RouteLeg("AE", LegActivity.LOADING_UNLOADING),
    RouteLeg("TR", LegActivity.FURTHER_PRODUCTION),
    RouteLeg("EG", LegActivity.LOADING_UNLOADING),
))
show("matchbox via a third country", determine(matchbox, detour, catalog))

