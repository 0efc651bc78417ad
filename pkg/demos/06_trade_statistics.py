"""Intra-regional trade shares and preference utilization."""

from __future__ import annotations

from decimal import Decimal

from roo.reporting import load_trade_series, share_table, utilization_rate

# The shipped table carries yearly totals and intra-regional flows in US$
# billion, plus the shares as originally published for comparison.
series = load_trade_series()
print("year  exports (printed)  imports (printed)  largest gap")
for row in share_table(series):
    gap = max(row.deviations())
    print(f"{row.year}  {row.export_share:>7} ({row.printed_export_share:>4})  "
          f"{row.import_share:>7} ({row.printed_import_share:>4})  {gap}")

# Published shares mix whole and one-decimal rounding, so half a point is
# the honest tolerance.  2016 exports land exactly on it: 96 / 769 = 12.48%.
print("2016 exports unrounded:", round(Decimal(9600) / 769, 4))

# Utilization: the share of eligible imports that actually claimed the preference.
for pref, eligible in ((64, 100), (37, 212), (0, 50)):
    print(f"utilization {pref}/{eligible}: {utilization_rate(pref, eligible)}%")
