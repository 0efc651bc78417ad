"""Small builders shared by the test modules."""

from __future__ import annotations

from roo.determination import BillOfMaterials, InputMaterial, ProcessingOperation
from roo.nomenclature import parse_hs
from roo.rulebook import OperationKind
from roo.valuation import Money


def usd(amount) -> Money:
    return Money.of(amount, "USD")


def item(value, hs=None, origin="CN", **kw) -> InputMaterial:
    return InputMaterial(usd(value), parse_hs(hs) if hs else None, origin, **kw)


def op(kind: str, country: str = "JO") -> ProcessingOperation:
    return ProcessingOperation(OperationKind(kind), country)


def bom(code, inputs, ops, final_value, exporter="JO", importer="EG", **kw) -> BillOfMaterials:
    return BillOfMaterials(
        parse_hs(code), tuple(inputs), tuple(ops), usd(final_value), exporter, importer, **kw
    )
