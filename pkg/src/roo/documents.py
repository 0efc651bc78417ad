"""JSON document formats for bills of materials, routes and certificates.

Money fields are decimal strings (integers are tolerated, binary floats are
refused), dates are ISO-8601 and countries are ISO-3166 alpha-2 codes.
"""

from __future__ import annotations

import datetime as dt
import json
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any

from .certification import CertificateOfOrigin, IssuerCategory, IssuerRef, Language, Party, Stamp
from .determination import (
    UNKNOWN,
    BillOfMaterials,
    ConsignmentRoute,
    InputMaterial,
    LegActivity,
    ProcessingOperation,
    RouteLeg,
    Vessel,
)
from .nomenclature import parse_hs
from .rulebook import OperationKind
from .valuation import CostSheet, Money

__all__ = [
    "DocumentError",
    "read_json",
    "dump_json",
    "bom_from_dict",
    "bom_to_dict",
    "route_from_dict",
    "route_to_dict",
    "certificate_from_dict",
    "certificate_to_dict",
]


class DocumentError(ValueError):
    pass


def _reject_float(text: str) -> Any:
    raise DocumentError(f"binary float {text} not allowed; write amounts as decimal strings")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"), parse_float=_reject_float)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{path}: {exc}") from None


def dump_json(obj: Any) -> str:
    """Canonical rendering: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _req(d: dict, key: str, where: str) -> Any:
    if not isinstance(d, dict):
        raise DocumentError(f"{where}: expected an object")
    if key not in d:
        raise DocumentError(f"{where}: missing field {key!r}")
    return d[key]


def _money(raw: Any, currency: str, where: str) -> Money:
    if isinstance(raw, bool) or not isinstance(raw, (str, int)):
        raise DocumentError(f"{where}: amount must be a decimal string")
    try:
        return Money.of(Decimal(str(raw)), currency)
    except ArithmeticError:
        raise DocumentError(f"{where}: {raw!r} is not a decimal amount") from None


def _opt_money(d: dict, key: str, currency: str, where: str) -> Money | None:
    raw = d.get(key)
    return None if raw is None else _money(raw, currency, f"{where}.{key}")


def _date(raw: Any, where: str) -> dt.date:
    try:
        return dt.date.fromisoformat(str(raw))
    except ValueError:
        raise DocumentError(f"{where}: {raw!r} is not an ISO date") from None


# ------------------------------------------------------------------------ BOM


def _input_from_dict(d: dict, currency: str, where: str) -> InputMaterial:
    vessel = d.get("vessel")
    frac = d.get("fungible_fraction")
    return InputMaterial(
        value=_money(_req(d, "value", where), currency, f"{where}.value"),
        hs_code=parse_hs(d["hs_code"]) if d.get("hs_code") else None,
        origin_country=d.get("origin", UNKNOWN),
        description=d.get("description", ""),
        fungible_fraction=None if frac is None else Fraction(str(frac)),
        role=d.get("role", ""),
        drawback=bool(d.get("drawback", False)),
        processed_in=d.get("processed_in"),
        vessel=None
        if vessel is None
        else Vessel(
            _req(vessel, "flag", where), _req(vessel, "registration", where), _req(vessel, "ownership", where)
        ),
    )


def bom_from_dict(d: dict) -> BillOfMaterials:
    currency = _req(d, "currency", "bom")
    cost_sheet = None
    if d.get("cost_sheet") is not None:
        cs = d["cost_sheet"]
        cost_sheet = CostSheet(
            materials=tuple(_money(m, currency, "cost_sheet.materials") for m in cs.get("materials", [])),
            direct_labor=_money(cs.get("direct_labor", 0), currency, "cost_sheet.direct_labor"),
            overhead=_money(cs.get("overhead", 0), currency, "cost_sheet.overhead"),
            packing=_money(cs.get("packing", 0), currency, "cost_sheet.packing"),
            internal_taxes_refundable=_money(
                cs.get("internal_taxes_refundable", 0), currency, "cost_sheet.internal_taxes_refundable"
            ),
            manufacturing_profit=_money(cs.get("manufacturing_profit", 0), currency, "cost_sheet.manufacturing_profit"),
        )
    try:
        operations = tuple(
            ProcessingOperation(OperationKind(_req(o, "kind", "operation")), _req(o, "country", "operation"), o.get("label", ""))
            for o in d.get("operations", [])
        )
    except ValueError as exc:
        raise DocumentError(f"operation: {exc}") from None
    return BillOfMaterials(
        finished_code=parse_hs(_req(d, "finished_code", "bom")),
        inputs=tuple(_input_from_dict(i, currency, f"inputs[{n}]") for n, i in enumerate(d.get("inputs", []))),
        operations=operations,
        final_value=_money(_req(d, "final_value", "bom"), currency, "final_value"),
        exporter_country=_req(d, "exporter", "bom"),
        importer_country=_req(d, "importer", "bom"),
        net_cost=_opt_money(d, "net_cost", currency, "bom"),
        ex_works=_opt_money(d, "ex_works", currency, "bom"),
        cost_sheet=cost_sheet,
        related_party=bool(d.get("related_party", False)),
    )


def bom_to_dict(bom: BillOfMaterials) -> dict:
    def amt(m: Money | None) -> str | None:
        return None if m is None else str(m.amount)

    inputs = []
    for i in bom.inputs:
        rec: dict[str, Any] = {"value": amt(i.value), "origin": i.origin_country}
        if i.hs_code is not None:
            rec["hs_code"] = str(i.hs_code)
        if i.description:
            rec["description"] = i.description
        if i.fungible_fraction is not None:
            rec["fungible_fraction"] = str(i.fungible_fraction)
        if i.role:
            rec["role"] = i.role
        if i.drawback:
            rec["drawback"] = True
        if i.processed_in is not None:
            rec["processed_in"] = i.processed_in
        if i.vessel is not None:
            rec["vessel"] = {"flag": i.vessel.flag, "registration": i.vessel.registration, "ownership": i.vessel.ownership}
        inputs.append(rec)
    out: dict[str, Any] = {
        "finished_code": str(bom.finished_code),
        "currency": bom.currency,
        "final_value": amt(bom.final_value),
        "exporter": bom.exporter_country,
        "importer": bom.importer_country,
        "inputs": inputs,
        "operations": [
            {"kind": o.kind.value, "country": o.country, **({"label": o.label} if o.label else {})}
            for o in bom.operations
        ],
    }
    if bom.net_cost is not None:
        out["net_cost"] = amt(bom.net_cost)
    if bom.ex_works is not None:
        out["ex_works"] = amt(bom.ex_works)
    if bom.cost_sheet is not None:
        cs = bom.cost_sheet
        out["cost_sheet"] = {
            "materials": [amt(m) for m in cs.materials],
            "direct_labor": amt(cs.direct_labor),
            "overhead": amt(cs.overhead),
            "packing": amt(cs.packing),
            "internal_taxes_refundable": amt(cs.internal_taxes_refundable),
            "manufacturing_profit": amt(cs.manufacturing_profit),
        }
    if bom.related_party:
        out["related_party"] = True
    return out


# ---------------------------------------------------------------------- route


def route_from_dict(d: dict) -> ConsignmentRoute:
    try:
        return ConsignmentRoute(
            tuple(
                RouteLeg(_req(leg, "country", "leg"), LegActivity(_req(leg, "activity", "leg")))
                for leg in _req(d, "legs", "route")
            )
        )
    except (TypeError, KeyError) as exc:
        raise DocumentError(f"route: {exc}") from None


def route_to_dict(route: ConsignmentRoute) -> dict:
    return {"legs": [{"country": leg.country, "activity": leg.activity.value} for leg in route.legs]}


# ----------------------------------------------------------------- certificate


def _party(d: dict, where: str) -> Party:
    return Party(_req(d, "name", where), _req(d, "country", where), d.get("address", ""))


def _party_dict(p: Party) -> dict:
    return {"name": p.name, "country": p.country, "address": p.address}


def certificate_from_dict(d: dict) -> CertificateOfOrigin:
    value = _req(d, "final_value", "certificate")
    issuer = _req(d, "issuing_authority", "certificate")
    return CertificateOfOrigin(
        id=str(_req(d, "id", "certificate")),
        goods_description=_req(d, "goods_description", "certificate"),
        hs_code=parse_hs(_req(d, "hs_code", "certificate")),
        producer=_party(_req(d, "producer", "certificate"), "producer"),
        exporter=_party(_req(d, "exporter", "certificate"), "exporter"),
        importer=_party(_req(d, "importer", "certificate"), "importer"),
        manufacture_date=_date(_req(d, "manufacture_date", "certificate"), "manufacture_date"),
        issue_date=_date(_req(d, "issue_date", "certificate"), "issue_date"),
        final_value=_money(_req(value, "amount", "final_value"), _req(value, "currency", "final_value"), "final_value"),
        issuing_authority=IssuerRef(
            _req(issuer, "country", "issuing_authority"), IssuerCategory(_req(issuer, "category", "issuing_authority"))
        ),
        stamps=tuple(
            Stamp(_req(s, "authority", "stamp"), _date(s["date"], "stamp.date") if s.get("date") else None)
            for s in d.get("stamps", [])
        ),
        language=Language(d.get("language", Language.ARABIC.value)),
        blanket_period=d.get("blanket_period"),
        prepared_by=d.get("prepared_by", "exporter"),
        is_certified_copy=bool(d.get("certified_copy", False)),
    )


def certificate_to_dict(cert: CertificateOfOrigin) -> dict:
    out: dict[str, Any] = {
        "id": cert.id,
        "goods_description": cert.goods_description,
        "hs_code": str(cert.hs_code),
        "producer": _party_dict(cert.producer),
        "exporter": _party_dict(cert.exporter),
        "importer": _party_dict(cert.importer),
        "manufacture_date": cert.manufacture_date.isoformat(),
        "issue_date": cert.issue_date.isoformat(),
        "final_value": {"amount": str(cert.final_value.amount), "currency": cert.final_value.currency},
        "issuing_authority": {"country": cert.issuing_authority.country, "category": cert.issuing_authority.category.value},
        "stamps": [
            {"authority": s.authority, **({"date": s.date.isoformat()} if s.date else {})} for s in cert.stamps
        ],
        "language": cert.language.value,
        "prepared_by": cert.prepared_by,
    }
    if cert.blanket_period is not None:
        out["blanket_period"] = cert.blanket_period
    if cert.is_certified_copy:
        out["certified_copy"] = True
    return out
