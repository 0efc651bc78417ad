"""Trade statistics: intra-regional trade shares and preference utilization."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from typing import Any

from .valuation import to_decimal

__all__ = [
    "ReportingError",
    "ZeroTotal",
    "IntraExceedsTotal",
    "ZeroEligible",
    "PreferentialExceedsEligible",
    "TradeSeries",
    "ShareRow",
    "load_trade_series",
    "intra_share",
    "utilization_rate",
    "share_table",
]


class ReportingError(ValueError):
    pass


class ZeroTotal(ReportingError):
    pass


class IntraExceedsTotal(ReportingError):
    pass


class ZeroEligible(ReportingError):
    pass


class PreferentialExceedsEligible(ReportingError):
    pass


_ONE_DECIMAL = Decimal("0.1")
_FOUR_DECIMALS = Decimal("0.0001")


def _magnitude(value: Any, name: str) -> Decimal:
    d = to_decimal(value)
    if d < 0:
        raise ReportingError(f"{name} must be non-negative, got {d}")
    return d


def intra_share(intra: Any, total: Any) -> Decimal:
    """Intra-regional flow as a percentage of the total, one decimal, half-up."""
    intra_d = _magnitude(intra, "intra")
    total_d = _magnitude(total, "total")
    if total_d == 0:
        raise ZeroTotal("total trade is zero")
    if intra_d > total_d:
        raise IntraExceedsTotal(f"intra flow {intra_d} exceeds total {total_d}")
    return (intra_d * 100 / total_d).quantize(_ONE_DECIMAL, rounding=ROUND_HALF_UP)


def utilization_rate(preferential_value: Any, eligible_value: Any) -> Decimal:
    """Share of preference-eligible imports that actually entered under preference, in percent."""
    pref = _magnitude(preferential_value, "preferential_value")
    eligible = _magnitude(eligible_value, "eligible_value")
    if eligible == 0:
        raise ZeroEligible("no eligible imports")
    if pref > eligible:
        raise PreferentialExceedsEligible(f"preferential value {pref} exceeds eligible value {eligible}")
    return (pref * 100 / eligible).quantize(_FOUR_DECIMALS, rounding=ROUND_HALF_UP)


@dataclass(frozen=True)
class TradeSeries:
    """Yearly totals and intra-regional flows in US$ billion.

    ``printed_*`` hold published shares when the series comes from a source
    table; they are carried along for comparison and never used in arithmetic.
    """

    years: tuple[int, ...]
    total_exports: tuple[Decimal, ...]
    total_imports: tuple[Decimal, ...]
    intra_exports: tuple[Decimal, ...]
    intra_imports: tuple[Decimal, ...]
    printed_export_share: tuple[Decimal | None, ...] = ()
    printed_import_share: tuple[Decimal | None, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.years)
        for name in ("total_exports", "total_imports", "intra_exports", "intra_imports"):
            if len(getattr(self, name)) != n:
                raise ReportingError(f"{name} has {len(getattr(self, name))} values for {n} years")
        for name in ("printed_export_share", "printed_import_share"):
            values = getattr(self, name)
            if values and len(values) != n:
                raise ReportingError(f"{name} has {len(values)} values for {n} years")
        for i, year in enumerate(self.years):
            for flow in ("exports", "imports"):
                total = getattr(self, f"total_{flow}")[i]
                intra = getattr(self, f"intra_{flow}")[i]
                if intra < 0 or total < 0:
                    raise ReportingError(f"{year}: negative {flow}")
                if intra > total:
                    raise IntraExceedsTotal(f"{year}: intra {flow} {intra} exceed total {total}")


_REQUIRED = ("year", "total_exports", "total_imports", "intra_exports", "intra_imports")


def load_trade_series(text: str | None = None) -> TradeSeries:
    """Parse a tab-separated series; ``#`` lines are provenance comments.

    With no argument the shipped intra-Arab trade table for 2012-2016 is read.
    """
    if text is None:
        text = (
            resources.files("roo").joinpath("data").joinpath("intra_arab_trade.tsv").read_text(encoding="utf-8")
        )
    lines = [line for line in text.splitlines() if line.strip() and not line.lstrip().startswith("#")]
    reader = csv.DictReader(io.StringIO("\n".join(lines)), delimiter="\t")
    missing = [c for c in _REQUIRED if c not in (reader.fieldnames or [])]
    if missing:
        raise ReportingError(f"series is missing columns: {', '.join(missing)}")
    rows = list(reader)
    cols: dict[str, list] = {c: [] for c in _REQUIRED}
    printed: dict[str, list] = {"printed_export_share": [], "printed_import_share": []}
    for row in rows:
        cols["year"].append(int(row["year"]))
        for c in _REQUIRED[1:]:
            cols[c].append(Decimal(row[c]))
        for c in printed:
            raw = (row.get(c) or "").strip()
            printed[c].append(Decimal(raw) if raw else None)
    has_printed = {c: any(v is not None for v in vals) for c, vals in printed.items()}
    return TradeSeries(
        tuple(cols["year"]),
        tuple(cols["total_exports"]),
        tuple(cols["total_imports"]),
        tuple(cols["intra_exports"]),
        tuple(cols["intra_imports"]),
        tuple(printed["printed_export_share"]) if has_printed["printed_export_share"] else (),
        tuple(printed["printed_import_share"]) if has_printed["printed_import_share"] else (),
    )


@dataclass(frozen=True)
class ShareRow:
    year: int
    export_share: Decimal
    import_share: Decimal
    printed_export_share: Decimal | None = None
    printed_import_share: Decimal | None = None

    def deviations(self) -> list[Decimal]:
        out = []
        if self.printed_export_share is not None:
            out.append(abs(self.export_share - self.printed_export_share))
        if self.printed_import_share is not None:
            out.append(abs(self.import_share - self.printed_import_share))
        return out

    def to_dict(self) -> dict:
        def s(v: Decimal | None) -> str | None:
            return None if v is None else str(v)

        return {
            "year": self.year,
            "export_share": s(self.export_share),
            "import_share": s(self.import_share),
            "printed_export_share": s(self.printed_export_share),
            "printed_import_share": s(self.printed_import_share),
        }


def share_table(series: TradeSeries) -> list[ShareRow]:
    rows = []
    for i, year in enumerate(series.years):
        rows.append(
            ShareRow(
                year,
                intra_share(series.intra_exports[i], series.total_exports[i]),
                intra_share(series.intra_imports[i], series.total_imports[i]),
                series.printed_export_share[i] if series.printed_export_share else None,
                series.printed_import_share[i] if series.printed_import_share else None,
            )
        )
    return rows
