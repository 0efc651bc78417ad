"""Exact-decimal valuation: money, cost sheets, value-content formulas.

All amounts are :class:`decimal.Decimal` at scale 4.  Results are rounded
half-up at operation boundaries only; binary floats are refused on entry.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction

__all__ = [
    "SCALE",
    "ValuationError",
    "CurrencyMismatch",
    "UnknownCurrency",
    "NegativeInput",
    "ZeroFinalValue",
    "MissingBasis",
    "NonOriginatingExceedsBasis",
    "ZeroBasisTotal",
    "InsufficientInventory",
    "Money",
    "money_sum",
    "to_decimal",
    "quantize",
    "Method",
    "CostSheet",
    "AllocationStrategy",
    "AllocationLine",
    "FungibleMethod",
    "Lot",
    "value_content_final_value",
    "value_content_net_cost",
    "choose_most_favorable",
    "allocate",
    "attribute_fungible",
]

SCALE = Decimal("0.0001")

# ISO 4217 codes accepted in BOM and certificate documents.
KNOWN_CURRENCIES = frozenset(
    """
    AED BHD DZD EGP IQD JOD KWD LBP LYD MAD OMR QAR SAR SDG SYP TND YER
    DJF MRU SOS KMF ILS
    USD EUR GBP CHF JPY CNY INR TRY CAD AUD KRW SGD HKD SEK NOK DKK
    """.split()
)


class ValuationError(ValueError):
    """Base class for valuation precondition failures."""


class CurrencyMismatch(ValuationError):
    pass


class UnknownCurrency(ValuationError):
    pass


class NegativeInput(ValuationError):
    pass


class ZeroFinalValue(ValuationError):
    """The valuation basis (final value or net cost) is zero."""


class MissingBasis(ValuationError):
    """An allowed method has no basis amount to work from."""


class NonOriginatingExceedsBasis(ValuationError):
    pass


class ZeroBasisTotal(ValuationError):
    pass


class InsufficientInventory(ValuationError):
    pass


def to_decimal(value: object) -> Decimal:
    """Coerce ``value`` to Decimal, refusing binary floats."""
    if isinstance(value, bool):
        raise TypeError("booleans are not amounts")
    if isinstance(value, Decimal):
        return value
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, Fraction):
        return Decimal(value.numerator) / Decimal(value.denominator)
    if isinstance(value, str):
        try:
            d = Decimal(value.strip())
        except InvalidOperation:
            raise ValueError(f"not a decimal amount: {value!r}") from None
        if not d.is_finite():
            raise ValueError(f"not a finite amount: {value!r}")
        return d
    if isinstance(value, float):
        raise TypeError("binary floats are not accepted for amounts; pass a decimal string")
    raise TypeError(f"cannot interpret {type(value).__name__} as an amount")


def quantize(value: Decimal, exp: Decimal = SCALE) -> Decimal:
    return value.quantize(exp, rounding=ROUND_HALF_UP)


@dataclass(frozen=True, order=True)
class Money:
    amount: Decimal
    currency: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "amount", quantize(to_decimal(self.amount)))
        if not (len(self.currency) == 3 and self.currency.isalpha() and self.currency.isupper()):
            raise UnknownCurrency(f"bad currency code {self.currency!r}")
        if self.currency not in KNOWN_CURRENCIES:
            raise UnknownCurrency(f"unknown currency {self.currency!r}")

    @classmethod
    def of(cls, amount: object, currency: str) -> Money:
        return cls(to_decimal(amount), currency)

    @classmethod
    def zero(cls, currency: str) -> Money:
        return cls(Decimal(0), currency)

    def _check(self, other: Money) -> None:
        if not isinstance(other, Money):
            raise TypeError(f"expected Money, got {type(other).__name__}")
        if other.currency != self.currency:
            raise CurrencyMismatch(f"{self.currency} vs {other.currency}")

    def __add__(self, other: Money) -> Money:
        self._check(other)
        return Money(self.amount + other.amount, self.currency)

    def __sub__(self, other: Money) -> Money:
        self._check(other)
        return Money(self.amount - other.amount, self.currency)

    def scale(self, factor: Decimal | Fraction | int) -> Money:
        """Multiply by a dimensionless factor, rounding half-up to scale 4."""
        return Money(self.amount * to_decimal(factor), self.currency)

    def is_negative(self) -> bool:
        return self.amount < 0

    def __str__(self) -> str:
        return f"{self.amount} {self.currency}"


def money_sum(items: Iterable[Money], currency: str) -> Money:
    total = Money.zero(currency)
    for m in items:
        total = total + m
    return total


class Method(Enum):
    NET_COST = "net_cost"
    FINAL_VALUE = "final_value"


@dataclass(frozen=True)
class CostSheet:
    """Cost build-up for one finished good.

    ``overhead`` covers testing, R&D, insurance, royalties and factory rent.
    ``internal_taxes_refundable`` are taxes embedded in the cost that are
    repaid on export; they are removed from both net cost and ex-works price.
    """

    materials: tuple[Money, ...]
    direct_labor: Money
    overhead: Money
    packing: Money
    internal_taxes_refundable: Money
    manufacturing_profit: Money

    def __post_init__(self) -> None:
        currency = self.direct_labor.currency
        for name, m in self._components():
            if m.currency != currency:
                raise CurrencyMismatch(f"cost sheet component {name} is in {m.currency}, expected {currency}")
            if m.is_negative():
                raise NegativeInput(f"cost sheet component {name} is negative")
        if self.internal_taxes_refundable.amount > self._production_cost().amount:
            raise NegativeInput("refundable internal taxes exceed production cost")

    def _components(self) -> list[tuple[str, Money]]:
        parts = [(f"materials[{i}]", m) for i, m in enumerate(self.materials)]
        parts += [
            ("direct_labor", self.direct_labor),
            ("overhead", self.overhead),
            ("packing", self.packing),
            ("internal_taxes_refundable", self.internal_taxes_refundable),
            ("manufacturing_profit", self.manufacturing_profit),
        ]
        return parts

    @property
    def currency(self) -> str:
        return self.direct_labor.currency

    def _production_cost(self) -> Money:
        return money_sum(self.materials, self.currency) + self.direct_labor + self.overhead

    def net_cost(self) -> Money:
        return self._production_cost() - self.internal_taxes_refundable

    def ex_works(self) -> Money:
        """Price at the factory gate: net cost plus packing and profit."""
        return self.net_cost() + self.packing + self.manufacturing_profit


def _value_content(basis: Money, non_originating: Money) -> Decimal:
    if basis.currency != non_originating.currency:
        raise CurrencyMismatch(f"{basis.currency} vs {non_originating.currency}")
    if basis.is_negative() or non_originating.is_negative():
        raise NegativeInput("valuation inputs must be non-negative")
    if basis.amount == 0:
        raise ZeroFinalValue("valuation basis is zero")
    if non_originating.amount > basis.amount:
        raise NonOriginatingExceedsBasis(
            f"non-originating value {non_originating.amount} exceeds basis {basis.amount}"
        )
    pct = (basis.amount - non_originating.amount) * 100 / basis.amount
    return quantize(pct)


def value_content_final_value(final_value: Money, non_originating: Money) -> Decimal:
    """``(final value - non-originating) / final value * 100`` at scale 4."""
    return _value_content(final_value, non_originating)


def value_content_net_cost(net_cost: Money, non_originating: Money) -> Decimal:
    """``(net cost - non-originating) / net cost * 100`` at scale 4.

    The value-added numerator is taken as net cost minus the non-originating
    material value.
    """
    return _value_content(net_cost, non_originating)


_FORMULAS = {
    Method.FINAL_VALUE: value_content_final_value,
    Method.NET_COST: value_content_net_cost,
}

# tie-break preference: earlier wins
_METHOD_PREFERENCE = (Method.FINAL_VALUE, Method.NET_COST)


def choose_most_favorable(
    net_cost: Money | None,
    final_value: Money | None,
    non_originating: Money,
    methods: Iterable[Method],
) -> tuple[Method, Decimal]:
    """Pick the allowed method yielding the highest value content.

    Ties go to the final-value method.  A method whose basis is missing or
    whose preconditions fail is skipped; if every allowed method fails, the
    first failure is raised.
    """
    allowed = set(methods)
    if not allowed:
        raise ValueError("no valuation method allowed")
    bases = {Method.NET_COST: net_cost, Method.FINAL_VALUE: final_value}
    best: tuple[Method, Decimal] | None = None
    first_error: ValuationError | None = None
    for method in _METHOD_PREFERENCE:
        if method not in allowed:
            continue
        basis = bases[method]
        if basis is None:
            first_error = first_error or MissingBasis(f"no {method.value} basis supplied")
            continue
        try:
            pct = _FORMULAS[method](basis, non_originating)
        except ValuationError as exc:
            first_error = first_error or exc
            continue
        if best is None or pct > best[1]:
            best = (method, pct)
    if best is None:
        assert first_error is not None
        raise first_error
    return best


class AllocationStrategy(Enum):
    BY_MATERIALS_COST = "materials"
    BY_LABOR_COST = "labor"
    BY_UNITS = "units"


@dataclass(frozen=True)
class AllocationLine:
    materials: Money
    labor: Money
    units: int = 0


def allocate(
    shared_cost: Money,
    lines: Sequence[AllocationLine],
    strategy: AllocationStrategy = AllocationStrategy.BY_MATERIALS_COST,
) -> list[Money]:
    """Split ``shared_cost`` over product lines in proportion to a basis column.

    Each share is rounded half-up to scale 4; the rounding remainder goes to
    the line with the largest basis (first one on ties), so the result sums
    to ``shared_cost`` exactly.
    """
    if shared_cost.is_negative():
        raise NegativeInput("shared cost must be non-negative")
    if not lines:
        raise ZeroBasisTotal("no product lines to allocate over")
    if strategy is AllocationStrategy.BY_MATERIALS_COST:
        basis = [line.materials.amount for line in lines]
    elif strategy is AllocationStrategy.BY_LABOR_COST:
        basis = [line.labor.amount for line in lines]
    else:
        basis = [Decimal(line.units) for line in lines]
    if any(b < 0 for b in basis):
        raise NegativeInput("allocation basis must be non-negative")
    total = sum(basis, Decimal(0))
    if total == 0:
        if shared_cost.amount == 0:
            return [Money.zero(shared_cost.currency) for _ in lines]
        raise ZeroBasisTotal(f"{strategy.value} basis sums to zero")

    shares = [Money(shared_cost.amount * b / total, shared_cost.currency) for b in basis]
    remainder = shared_cost - money_sum(shares, shared_cost.currency)
    largest = max(range(len(basis)), key=lambda i: (basis[i], -i))
    shares[largest] = shares[largest] + remainder
    return shares


class FungibleMethod(Enum):
    FIFO = "fifo"
    WEIGHTED_AVERAGE = "weighted_average"


@dataclass
class Lot:
    """A receipt of interchangeable material into stock."""

    qty: Fraction
    originating: bool

    def __post_init__(self) -> None:
        self.qty = Fraction(self.qty)
        if self.qty < 0:
            raise NegativeInput("lot quantity must be non-negative")


def attribute_fungible(
    withdrawal_qty: int | Fraction | Decimal | str,
    inventory: list[Lot],
    method: FungibleMethod,
) -> Fraction:
    """Withdraw from a mixed stock and return the originating fraction withdrawn.

    ``inventory`` is ordered oldest first and is updated in place: FIFO drains
    the oldest lots, weighted average draws from every lot pro rata.  Callers
    must serialize withdrawals against one inventory.
    """
    qty = Fraction(withdrawal_qty)
    if qty < 0:
        raise NegativeInput("withdrawal quantity must be non-negative")
    total = sum((lot.qty for lot in inventory), Fraction(0))
    if qty > total:
        raise InsufficientInventory(f"withdrawal {qty} exceeds stock {total}")
    if qty == 0:
        originating = sum((lot.qty for lot in inventory if lot.originating), Fraction(0))
        return originating / total if total else Fraction(0)

    if method is FungibleMethod.WEIGHTED_AVERAGE:
        originating = sum((lot.qty for lot in inventory if lot.originating), Fraction(0))
        fraction = originating / total
        for lot in inventory:
            lot.qty -= lot.qty * qty / total
    else:
        remaining = qty
        taken_originating = Fraction(0)
        for lot in inventory:
            if remaining == 0:
                break
            take = min(lot.qty, remaining)
            lot.qty -= take
            remaining -= take
            if lot.originating:
                taken_originating += take
        fraction = taken_originating / qty
    inventory[:] = [lot for lot in inventory if lot.qty > 0]
    return fraction
