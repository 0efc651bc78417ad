"""Certificates of origin at the border: validity windows, discrepancies, exemptions."""

from __future__ import annotations

import datetime as dt
from pathlib import Path

from roo.certification import (
    ShipmentKind,
    RetentionRole,
    exemption_applies,
    load_issuer_directory,
    request_advance_ruling,
    retention_status,
    validate_certificate,
)
from roo.config import Config
from roo.documents import certificate_from_dict, read_json
from roo.valuation import Money

FIXTURES = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "certs"
cert = certificate_from_dict(read_json(FIXTURES / "certificate.json"))
print(f"certificate {cert.id}, issued {cert.issue_date} by {cert.issuing_authority.category.value} of {cert.issuing_authority.country}")

# Each member names one kind of body that may issue certificates.
directory = load_issuer_directory()
print("issuers in the directory:", len(directory), "| Egypt:", directory["EG"].value)

# Six calendar months, inclusive of the anniversary day.
for day in (dt.date(2023, 7, 10), dt.date(2023, 7, 11)):
    print(day, "->", validate_certificate(cert, day).status.value)
print("late but force majeure ->", validate_certificate(cert, dt.date(2023, 8, 1), force_majeure=True).status.value)
print("12-month window ->", validate_certificate(cert, dt.date(2023, 12, 1), config=Config(validity_months=12)).status.value)

# Typos in an address are minor and only produce a warning; a different
# description of the goods is major and the certificate is refused.
for name in ("docs_typo.json", "docs_major.json"):
    result = validate_certificate(cert, dt.date(2023, 2, 1), read_json(FIXTURES / name))
    print(f"{name}: {result.status.value}", *result.reasons, *result.warnings, sep="\n  ")

# Small consignments travel without a certificate unless they are one of a series.
for value, kind, series in ((450, ShipmentKind.SMALL_PARCEL, False), (450, ShipmentKind.SMALL_PARCEL, True),
                            (1000, ShipmentKind.PERSONAL_EFFECTS, False), (1200, ShipmentKind.PERSONAL_EFFECTS, False)):
    print(f"{kind.value:>16} of {value} USD, series={series}: exempt={exemption_applies(Money.of(value, 'USD'), kind, series)}")

# Exporters keep their papers for three years; rulings are due in ninety days.
print("exporter on 2026-01-09:", retention_status(RetentionRole.EXPORTER, cert.issue_date, dt.date(2026, 1, 9)).value)
print("exporter on 2026-01-10:", retention_status(RetentionRole.EXPORTER, cert.issue_date, dt.date(2026, 1, 10)).value)
ruling = request_advance_ruling(dt.date(2023, 3, 1))
print("advance ruling requested 2023-03-01, due", ruling.decision_due)
