"""Harmonized System codes: parsing, patterns and tariff-shift comparison.

Codes are held canonically as six digits and rendered as ``HHHH.SS``.
Rule catalogs may also use two-digit (chapter) and four-digit (heading)
patterns, which only :func:`parse_pattern` accepts.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from enum import Enum

__all__ = [
    "HsCodeError",
    "NonNumeric",
    "BadLength",
    "ChapterOutOfRange",
    "ShiftLevel",
    "HsCode",
    "HsPattern",
    "parse_hs",
    "parse_pattern",
    "shift_satisfied",
]

MIN_CHAPTER = 1
MAX_CHAPTER = 97


class HsCodeError(ValueError):
    """Base class for malformed HS codes."""


class NonNumeric(HsCodeError):
    pass


class BadLength(HsCodeError):
    pass


class ChapterOutOfRange(HsCodeError):
    pass


@functools.total_ordering
class ShiftLevel(Enum):
    """Granularity of a change-of-tariff-classification test.

    Ordered by coarseness: ``CHAPTER > HEADING > SUBHEADING``.
    """

    CHAPTER = 2
    HEADING = 4
    SUBHEADING = 6

    @property
    def width(self) -> int:
        return self.value

    def __lt__(self, other: object) -> bool:
        if not isinstance(other, ShiftLevel):
            return NotImplemented
        # wider prefix == finer level == "smaller" in coarseness
        return self.value > other.value


def _normalize(text: str, widths: tuple[int, ...]) -> str:
    raw = text.strip()
    if raw.count(".") > 1:
        raise BadLength(f"malformed HS code {text!r}")
    if "." in raw:
        head, _, tail = raw.partition(".")
        if len(head) != 4 or len(tail) != 2:
            raise BadLength(f"dot must follow the fourth digit in {text!r}")
        raw = head + tail
    if len(raw) not in widths:
        allowed = "/".join(str(w) for w in widths)
        raise BadLength(f"HS code {text!r} must have {allowed} digits")
    if not (raw.isascii() and raw.isdigit()):
        raise NonNumeric(f"HS code {text!r} contains non-digit characters")
    chapter = int(raw[:2])
    if not MIN_CHAPTER <= chapter <= MAX_CHAPTER:
        raise ChapterOutOfRange(f"chapter {raw[:2]} outside 01-97 in {text!r}")
    return raw


@dataclass(frozen=True, order=True)
class HsCode:
    """A canonical six-digit HS subheading."""

    digits: str

    def __post_init__(self) -> None:
        if _normalize(self.digits, (6,)) != self.digits:
            raise BadLength(f"HsCode requires exactly six digits, got {self.digits!r}")

    @property
    def chapter(self) -> str:
        return self.digits[:2]

    @property
    def heading(self) -> str:
        return self.digits[:4]

    @property
    def subheading(self) -> str:
        return self.digits

    def truncate(self, level: ShiftLevel) -> str:
        return self.digits[: level.width]

    def __str__(self) -> str:
        return f"{self.digits[:4]}.{self.digits[4:]}"


@dataclass(frozen=True, order=True)
class HsPattern:
    """A chapter, heading or subheading prefix used to key catalog entries."""

    digits: str

    def __post_init__(self) -> None:
        if _normalize(self.digits, (2, 4, 6)) != self.digits:
            raise BadLength(f"HsPattern requires 2, 4 or 6 plain digits, got {self.digits!r}")

    @property
    def level(self) -> ShiftLevel:
        return ShiftLevel(len(self.digits))

    def matches(self, code: HsCode) -> bool:
        return code.digits.startswith(self.digits)

    def covers(self, other: HsPattern) -> bool:
        """True if every code matched by ``other`` is also matched by this pattern."""
        return other.digits.startswith(self.digits)

    def __str__(self) -> str:
        if len(self.digits) == 6:
            return f"{self.digits[:4]}.{self.digits[4:]}"
        return self.digits


def parse_hs(text: str) -> HsCode:
    """Parse ``"HHHHSS"`` or ``"HHHH.SS"`` into an :class:`HsCode`.

    Two- and four-digit inputs are patterns, not codes, and raise
    :class:`BadLength` here; use :func:`parse_pattern` for those.
    National tariff lines longer than six digits are rejected as well.

    >>> str(parse_hs("482320"))
    '4823.20'
    """
    return HsCode(_normalize(text, (6,)))


def parse_pattern(text: str) -> HsPattern:
    """Parse a rule pattern: ``CC``, ``HHHH`` or a full subheading."""
    return HsPattern(_normalize(text, (2, 4, 6)))


def shift_satisfied(input_code: HsCode, output_code: HsCode, level: ShiftLevel) -> bool:
    """True iff the two codes differ once truncated to ``level``."""
    return input_code.truncate(level) != output_code.truncate(level)
