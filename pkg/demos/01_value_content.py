"""Value content: how much of a good's value was added inside the free trade area.

Run with ``python demos/01_value_content.py``.
"""

from __future__ import annotations

from roo.valuation import (
    AllocationLine,
    AllocationStrategy,
    CostSheet,
    Method,
    Money,
    allocate,
    choose_most_favorable,
    value_content_final_value,
    value_content_net_cost,
)

usd = lambda amount: Money.of(amount, "USD")  # noqa: E731

# A transformer assembled in Jordan: net cost 100, sold for 120, with 60 of
# imported parts.  Both methods are computed at four decimals, half-up.
net_cost, final_value, imported = usd(100), usd(120), usd(60)
print("final-value method:", value_content_final_value(final_value, imported), "%")
print("net-cost method:   ", value_content_net_cost(net_cost, imported), "%")

# The producer may pick whichever allowed method gives the higher figure.
method, pct = choose_most_favorable(net_cost, final_value, imported, set(Method))
print(f"most favorable: {method.value} at {pct}%")

# Money refuses binary floats outright, so 0.1 + 0.2 never leaks in.
try:
    Money.of(0.1, "USD")
except TypeError as exc:
    print("float rejected:", exc)

# When the net cost is not known it can be built from a cost sheet.
sheet = CostSheet(
    materials=(usd(60), usd(15)),
    direct_labor=usd(12),
    overhead=usd(8),
    packing=usd(3),
    internal_taxes_refundable=usd(2),
    manufacturing_profit=usd(9),
)
print("cost sheet net cost:", sheet.net_cost(), " ex-works:", sheet.ex_works())

# Shared overhead is spread over product lines without losing a cent.
lines = [AllocationLine(usd(40), usd(10), 300), AllocationLine(usd(25), usd(30), 100), AllocationLine(usd(5), usd(2), 7)]
for strategy in AllocationStrategy:
    shares = allocate(usd("1000.0001"), lines, strategy)
    print(f"{strategy.value:>17}: {[str(s.amount) for s in shares]}")
