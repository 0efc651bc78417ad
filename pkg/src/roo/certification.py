"""Certificates of origin: issuers, validity, discrepancies, exemptions, retention."""

from __future__ import annotations

import calendar
import datetime as dt
import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum
from importlib import resources
from typing import Any

from .config import Config
from .determination import Determination
from .nomenclature import HsCode
from .rulebook import GAFTA_MEMBERS
from .valuation import CurrencyMismatch, Money

__all__ = [
    "IssuerCategory",
    "IssuerRef",
    "Party",
    "Stamp",
    "Language",
    "CertificateOfOrigin",
    "MalformedCertificate",
    "MissingDeclarationText",
    "Severity",
    "Discrepancy",
    "DiscrepancyReport",
    "ValidityStatus",
    "ValidationResult",
    "ShipmentKind",
    "RetentionRole",
    "RetentionStatus",
    "CommercialInvoice",
    "AdvanceRuling",
    "add_months",
    "add_years",
    "validity_end",
    "load_issuer_directory",
    "compare_documents",
    "validate_certificate",
    "exemption_applies",
    "accept_invoice_declaration",
    "retention_status",
    "request_advance_ruling",
]

ADVANCE_RULING_DAYS = 90
RETENTION_YEARS = 3
EXEMPTION_THRESHOLDS_USD = {"small_parcel": Decimal(500), "personal_effects": Decimal(1000)}


class MalformedCertificate(ValueError):
    pass


class MissingDeclarationText(ValueError):
    pass


class IssuerCategory(Enum):
    CHAMBER_OF_COMMERCE = "chamber_of_commerce"
    MINISTRY = "ministry"
    CUSTOMS_AUTHORITY = "customs_authority"
    IMPORT_EXPORT_AUTHORITY = "import_export_authority"


@dataclass(frozen=True)
class IssuerRef:
    country: str
    category: IssuerCategory


def load_issuer_directory() -> dict[str, IssuerCategory]:
    """Member state -> the one category of authority that issues its certificates."""
    raw = json.loads(
        resources.files("roo").joinpath("data").joinpath("issuers.json").read_text(encoding="utf-8")
    )
    directory: dict[str, IssuerCategory] = {}
    for key, countries in raw.items():
        if key.startswith("_"):
            continue
        category = IssuerCategory(key)
        for c in countries:
            if c in directory:
                raise ValueError(f"issuer directory lists {c} twice")
            directory[c] = category
    return directory


@dataclass(frozen=True)
class Party:
    name: str
    country: str
    address: str = ""


@dataclass(frozen=True)
class Stamp:
    authority: str
    date: dt.date | None = None


class Language(Enum):
    ARABIC = "arabic"
    ARABIC_WITH_ENGLISH_TERMS = "arabic_with_english_terms"


@dataclass(frozen=True)
class CertificateOfOrigin:
    id: str
    goods_description: str
    hs_code: HsCode
    producer: Party
    exporter: Party
    importer: Party
    manufacture_date: dt.date
    issue_date: dt.date
    final_value: Money
    issuing_authority: IssuerRef
    stamps: tuple[Stamp, ...] = ()
    language: Language = Language.ARABIC
    blanket_period: str | None = None  # free-form; covers multiple importations
    prepared_by: str = "exporter"  # "exporter" | "representative" | "producer"
    is_certified_copy: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "stamps", tuple(self.stamps))
        if self.issue_date < self.manufacture_date:
            raise MalformedCertificate(f"{self.id}: issue date precedes manufacture date")
        if self.prepared_by not in ("exporter", "representative", "producer"):
            raise MalformedCertificate(f"{self.id}: unknown preparer {self.prepared_by!r}")


# ----------------------------------------------------------------- calendar


def add_months(day: dt.date, months: int) -> dt.date:
    """Calendar-month addition, clamped to the last day of the target month."""
    idx = day.year * 12 + (day.month - 1) + months
    year, month = divmod(idx, 12)
    month += 1
    last = calendar.monthrange(year, month)[1]
    return dt.date(year, month, min(day.day, last))


def add_years(day: dt.date, years: int) -> dt.date:
    return add_months(day, 12 * years)


def validity_end(issue_date: dt.date, months: int = 6) -> dt.date:
    """Last day on which the certificate may be presented (inclusive)."""
    return add_months(issue_date, months)


# ------------------------------------------------------------- discrepancies


class Severity(Enum):
    MINOR = "minor"
    MAJOR = "major"


# Fields whose mismatch goes to the substance of the claim; everything else
# (addresses, spelling, formatting) is treated as a correctable slip.
MAJOR_FIELDS = frozenset({"goods_description", "hs_code", "final_value", "exporter_name"})


@dataclass(frozen=True)
class Discrepancy:
    field: str
    certificate_value: str
    document_value: str
    severity: Severity


@dataclass(frozen=True)
class DiscrepancyReport:
    items: tuple[Discrepancy, ...] = ()

    @property
    def major(self) -> tuple[Discrepancy, ...]:
        return tuple(d for d in self.items if d.severity is Severity.MAJOR)

    @property
    def minor(self) -> tuple[Discrepancy, ...]:
        return tuple(d for d in self.items if d.severity is Severity.MINOR)


def _cert_fields(cert: CertificateOfOrigin) -> dict[str, str]:
    return {
        "goods_description": cert.goods_description,
        "hs_code": cert.hs_code.digits,
        "final_value": str(cert.final_value.amount),
        "currency": cert.final_value.currency,
        "exporter_name": cert.exporter.name,
        "exporter_address": cert.exporter.address,
        "importer_name": cert.importer.name,
        "importer_address": cert.importer.address,
        "producer_name": cert.producer.name,
        "producer_address": cert.producer.address,
        "manufacture_date": cert.manufacture_date.isoformat(),
    }


def _norm(field_name: str, value: Any) -> str:
    text = str(value)
    if field_name == "hs_code":
        return text.replace(".", "").strip()
    if field_name == "final_value":
        try:
            return str(Decimal(text).normalize())
        except ArithmeticError:
            return text.strip()
    return " ".join(text.split()).casefold()


def compare_documents(cert: CertificateOfOrigin, documents: Mapping[str, Any]) -> DiscrepancyReport:
    """Compare certificate fields against accompanying documents.

    Only fields present in ``documents`` are compared.  Case and whitespace
    differences are ignored.
    """
    mine = _cert_fields(cert)
    items = []
    for name in sorted(documents):
        if name not in mine:
            continue
        theirs = documents[name]
        if _norm(name, mine[name]) != _norm(name, theirs):
            severity = Severity.MAJOR if name in MAJOR_FIELDS else Severity.MINOR
            items.append(Discrepancy(name, mine[name], str(theirs), severity))
    return DiscrepancyReport(tuple(items))


# ---------------------------------------------------------------- validation


class ValidityStatus(Enum):
    VALID = "Valid"
    VALID_WITH_WARNINGS = "ValidWithWarnings"
    EXPIRED = "Expired"
    REJECTED = "Rejected"


@dataclass(frozen=True)
class ValidationResult:
    status: ValidityStatus
    reasons: tuple[str, ...] = ()
    warnings: tuple[str, ...] = ()
    discrepancies: DiscrepancyReport = field(default_factory=DiscrepancyReport)
    window_end: dt.date | None = None

    @property
    def accepted(self) -> bool:
        return self.status in (ValidityStatus.VALID, ValidityStatus.VALID_WITH_WARNINGS)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "reasons": list(self.reasons),
            "warnings": list(self.warnings),
            "window_end": None if self.window_end is None else self.window_end.isoformat(),
            "discrepancies": [
                {
                    "field": d.field,
                    "certificate_value": d.certificate_value,
                    "document_value": d.document_value,
                    "severity": d.severity.value,
                }
                for d in self.discrepancies.items
            ],
        }


def validate_certificate(
    cert: CertificateOfOrigin,
    presentation_date: dt.date,
    accompanying_docs: Mapping[str, Any] | None = None,
    force_majeure: bool = False,
    config: Config | None = None,
    issuer_directory: Mapping[str, IssuerCategory] | None = None,
) -> ValidationResult:
    """Check a certificate presented to the importing customs authority.

    Formal defects and major discrepancies reject the certificate; late
    presentation expires it unless ``force_majeure`` is accepted; minor
    discrepancies only produce warnings.
    """
    config = config or Config()
    directory = load_issuer_directory() if issuer_directory is None else issuer_directory
    window_end = validity_end(cert.issue_date, config.validity_months)
    reasons: list[str] = []
    warnings: list[str] = []

    issuer = cert.issuing_authority
    if directory.get(issuer.country) is not issuer.category:
        reasons.append(f"issuing authority: {issuer.category.value} is not the designated issuer for {issuer.country}")
    if not cert.stamps:
        reasons.append("official stamps missing")
    if cert.prepared_by == "producer" and not config.producer_may_prepare:
        reasons.append("certificate prepared by the producer rather than the exporter")
    if cert.is_certified_copy and not config.accept_certified_copy:
        reasons.append("certified copy presented where an original is required")
    if cert.language is Language.ARABIC_WITH_ENGLISH_TERMS:
        if config.strict_arabic:
            reasons.append("language: certificate must be entirely in Arabic")
        else:
            warnings.append("language: common technical terms given in English")
    if presentation_date < cert.issue_date:
        reasons.append("presented before the issue date")

    report = compare_documents(cert, accompanying_docs or {})
    for d in report.major:
        reasons.append(f"{d.field.replace('_', ' ')}: certificate {d.certificate_value!r} vs documents {d.document_value!r}")
    for d in report.minor:
        warnings.append(f"minor discrepancy in {d.field.replace('_', ' ')}; certificate may be corrected")

    if reasons:
        return ValidationResult(ValidityStatus.REJECTED, tuple(reasons), tuple(warnings), report, window_end)
    if presentation_date > window_end:
        if not force_majeure:
            return ValidationResult(
                ValidityStatus.EXPIRED,
                (f"presented {presentation_date.isoformat()}, validity ended {window_end.isoformat()}",),
                tuple(warnings),
                report,
                window_end,
            )
        warnings.append("presented after the validity period; accepted for force majeure")
    status = ValidityStatus.VALID_WITH_WARNINGS if warnings else ValidityStatus.VALID
    return ValidationResult(status, (), tuple(warnings), report, window_end)


# ---------------------------------------------------------------- exemptions


class ShipmentKind(Enum):
    SMALL_PARCEL = "small_parcel"
    PERSONAL_EFFECTS = "personal_effects"


def exemption_applies(shipment_value: Money, kind: ShipmentKind, part_of_series: bool) -> bool:
    """Whether a low-value shipment is exempt from the certificate requirement.

    Values are in US dollars.  A shipment that is one of a series arranged to
    stay under the threshold never qualifies.
    """
    if shipment_value.currency != "USD":
        raise CurrencyMismatch("exemption thresholds are expressed in USD")
    if shipment_value.is_negative():
        raise ValueError("shipment value must be non-negative")
    if part_of_series:
        return False
    return shipment_value.amount <= EXEMPTION_THRESHOLDS_USD[kind.value]


@dataclass(frozen=True)
class CommercialInvoice:
    number: str
    issuing_country: str
    exporter: Party
    declaration_text: str = ""


def accept_invoice_declaration(
    invoice: CommercialInvoice,
    exporter: Party,
    approved_exporters: Iterable[str] = (),
    approved_exporter_required: bool = False,
    members: Iterable[str] = GAFTA_MEMBERS,
) -> bool:
    """Accept an origin declaration on a commercial invoice as proof of origin."""
    if not invoice.declaration_text.strip():
        raise MissingDeclarationText(f"invoice {invoice.number} carries no origin declaration")
    if invoice.issuing_country not in set(members):
        return False
    if approved_exporter_required and exporter.name not in set(approved_exporters):
        return False
    return True


# ----------------------------------------------------------------- retention


class RetentionRole(Enum):
    EXPORTER = "exporter"
    IMPORTER = "importer"


class RetentionStatus(Enum):
    MUST_RETAIN = "MustRetain"
    MAY_DISCARD = "MayDiscard"
    UNSPECIFIED = "Unspecified"


def retention_status(role: RetentionRole, issue_date: dt.date, today: dt.date) -> RetentionStatus:
    if today < issue_date:
        raise ValueError("today precedes the issue date")
    if role is RetentionRole.IMPORTER:
        # no retention duty is imposed on importers
        return RetentionStatus.UNSPECIFIED
    if today < add_years(issue_date, RETENTION_YEARS):
        return RetentionStatus.MUST_RETAIN
    return RetentionStatus.MAY_DISCARD


# ------------------------------------------------------------ advance rulings


@dataclass(frozen=True)
class AdvanceRuling:
    request_date: dt.date
    decision: Determination | None = None
    misrepresentation_penalty: bool = False

    @property
    def decision_due(self) -> dt.date:
        return self.request_date + dt.timedelta(days=ADVANCE_RULING_DAYS)

    def overdue(self, today: dt.date) -> bool:
        return self.decision is None and today > self.decision_due

    def decide(self, decision: Determination) -> AdvanceRuling:
        return AdvanceRuling(self.request_date, decision, self.misrepresentation_penalty)

    def penalize_misrepresentation(self) -> AdvanceRuling:
        return AdvanceRuling(self.request_date, self.decision, True)


def request_advance_ruling(request_date: dt.date) -> AdvanceRuling:
    return AdvanceRuling(request_date)
