"""Origin-rule AST, the rule catalog DSL, rule lookup and catalog linting.

Catalog syntax, one statement per line, ``#`` starts a comment::

    hs_edition HS2012
    members AE BH EG JO ...
    fallback VC(any, >=40)
    wholly_obtained 01 03 06 08 10

    rule 4819 := CTH
    rule 29   := CTH AND VC(any, >=40)
    rule 5903 := PROC(three_ops cap 47.5)
    rule 2009 := CTH AND VC(any, >=30) OR VC(any, >=60) status disputed note "fruit juice"

``AND`` binds tighter than ``OR``; parentheses group.  Tariff-shift terms
(``CTC``, ``CTH``, ``CTSH``) accept a de-minimis allowance ``dm <pct>``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from importlib import resources
from typing import Union

from .nomenclature import HsCode, HsCodeError, HsPattern, ShiftLevel, parse_pattern
from .valuation import Method

__all__ = [
    "OperationKind",
    "FINISHING_MENU",
    "INSUFFICIENT_OPERATIONS",
    "NAMED_STAGES",
    "GAFTA_MEMBERS",
    "DEFAULT_WHOLLY_OBTAINED",
    "WhollyObtained",
    "ValueContent",
    "TariffShift",
    "ThreeOperations",
    "YarnForward",
    "NamedStage",
    "Process",
    "AllOf",
    "AnyOf",
    "OriginRule",
    "ProcessSpec",
    "RuleStatus",
    "RuleEntry",
    "RuleCatalog",
    "CatalogError",
    "CatalogSyntaxError",
    "DuplicatePattern",
    "UnknownProcessName",
    "ThresholdOutOfRange",
    "Diagnostic",
    "parse_rule",
    "parse_catalog",
    "render_rule",
    "render_catalog",
    "lookup_rule",
    "lint_catalog",
    "implies",
    "load_fixture_catalog",
]


class OperationKind(Enum):
    PRINTING = "printing"
    BLEACHING = "bleaching"
    SHRINKING = "shrinking"
    FULLING = "fulling"
    NAPPING = "napping"
    DECATING = "decating"
    PERMANENT_STIFFENING = "permanent_stiffening"
    WEIGHTING = "weighting"
    PERMANENT_EMBOSSING = "permanent_embossing"
    MOIREING = "moireing"
    WEAVING = "weaving"
    SPINNING = "spinning"
    REFINEMENT = "refinement"
    PEELING = "peeling"
    FREEZING = "freezing"
    COOKING = "cooking"
    SIMPLE_PACKAGING = "simple_packaging"
    DILUTION_WITH_WATER = "dilution_with_water"
    LOADING = "loading"
    UNLOADING = "unloading"
    ASSEMBLY = "assembly"
    OTHER = "other"

    @property
    def insufficient(self) -> bool:
        return self in INSUFFICIENT_OPERATIONS


FINISHING_MENU = frozenset(
    {
        OperationKind.BLEACHING,
        OperationKind.SHRINKING,
        OperationKind.FULLING,
        OperationKind.NAPPING,
        OperationKind.DECATING,
        OperationKind.PERMANENT_STIFFENING,
        OperationKind.WEIGHTING,
        OperationKind.PERMANENT_EMBOSSING,
        OperationKind.MOIREING,
    }
)

INSUFFICIENT_OPERATIONS = frozenset(
    {
        OperationKind.SIMPLE_PACKAGING,
        OperationKind.DILUTION_WITH_WATER,
        OperationKind.PEELING,
        OperationKind.FREEZING,
        OperationKind.COOKING,
        OperationKind.LOADING,
        OperationKind.UNLOADING,
    }
)

# Stages a PROC(<name>) rule may require.
NAMED_STAGES = frozenset(
    k.value
    for k in OperationKind
    if k not in INSUFFICIENT_OPERATIONS and k is not OperationKind.OTHER
)

GAFTA_MEMBERS = frozenset(
    "AE BH DZ EG IQ JO KW LB LY MA OM PS QA SA SD SY TN YE".split()
)

DEFAULT_WHOLLY_OBTAINED = tuple(HsPattern(c) for c in ("01", "03", "06", "08", "10"))


# --------------------------------------------------------------------------- AST


@dataclass(frozen=True)
class WhollyObtained:
    pass


@dataclass(frozen=True)
class ValueContent:
    methods: frozenset[Method]
    threshold_pct: Decimal

    def __post_init__(self) -> None:
        object.__setattr__(self, "methods", frozenset(self.methods))
        if not self.methods:
            raise ValueError("ValueContent needs at least one method")
        if not Decimal(0) < self.threshold_pct <= Decimal(100):
            raise ThresholdOutOfRange(f"threshold {self.threshold_pct} outside (0, 100]")


@dataclass(frozen=True)
class TariffShift:
    level: ShiftLevel
    de_minimis_pct: Decimal | None = None

    def __post_init__(self) -> None:
        dm = self.de_minimis_pct
        if dm is not None and not Decimal(0) <= dm < Decimal(100):
            raise ThresholdOutOfRange(f"de minimis {dm} outside [0, 100)")


@dataclass(frozen=True)
class ThreeOperations:
    """Printing plus at least two finishing-menu operations in member states."""

    fabric_value_cap_pct: Decimal | None = None
    min_finishing: int = field(default=2, init=False)

    def __post_init__(self) -> None:
        cap = self.fabric_value_cap_pct
        if cap is not None and not Decimal(0) < cap < Decimal(100):
            raise ThresholdOutOfRange(f"fabric value cap {cap} outside (0, 100)")


@dataclass(frozen=True)
class YarnForward:
    pass


@dataclass(frozen=True)
class NamedStage:
    stage: str

    def __post_init__(self) -> None:
        if self.stage not in NAMED_STAGES:
            raise UnknownProcessName(f"unknown process stage {self.stage!r}")


ProcessSpec = Union[ThreeOperations, YarnForward, NamedStage]


@dataclass(frozen=True)
class Process:
    spec: ProcessSpec


@dataclass(frozen=True)
class AllOf:
    rules: tuple[OriginRule, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", _flatten(AllOf, self.rules))


@dataclass(frozen=True)
class AnyOf:
    rules: tuple[OriginRule, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", _flatten(AnyOf, self.rules))


OriginRule = Union[WhollyObtained, ValueContent, TariffShift, Process, AllOf, AnyOf]


def _flatten(kind: type, rules) -> tuple:
    out: list = []
    for r in rules:
        if isinstance(r, kind):
            out.extend(r.rules)
        else:
            out.append(r)
    if not out:
        raise ValueError(f"{kind.__name__} needs at least one rule")
    return tuple(out)


def all_of(*rules: OriginRule) -> OriginRule:
    return rules[0] if len(rules) == 1 else AllOf(tuple(rules))


def any_of(*rules: OriginRule) -> OriginRule:
    return rules[0] if len(rules) == 1 else AnyOf(tuple(rules))


class RuleStatus(Enum):
    AGREED = "agreed"
    DISPUTED = "disputed"


@dataclass(frozen=True)
class RuleEntry:
    pattern: HsPattern | None  # None marks the synthetic fallback entry
    rule: OriginRule
    status: RuleStatus = RuleStatus.AGREED
    notes: str = ""

    @property
    def is_fallback(self) -> bool:
        return self.pattern is None

    @property
    def key(self) -> str:
        return "fallback" if self.pattern is None else str(self.pattern)


DEFAULT_FALLBACK = ValueContent(frozenset(Method), Decimal(40))


@dataclass(frozen=True)
class RuleCatalog:
    entries: tuple[RuleEntry, ...] = ()
    fallback: OriginRule = DEFAULT_FALLBACK
    hs_edition: str = "unspecified"
    member_states: frozenset[str] = GAFTA_MEMBERS
    wholly_obtained: tuple[HsPattern, ...] = DEFAULT_WHOLLY_OBTAINED

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "wholly_obtained", tuple(self.wholly_obtained))
        object.__setattr__(self, "member_states", frozenset(self.member_states))
        if not self.member_states:
            raise CatalogError("member_states must be non-empty")
        seen: set[HsPattern] = set()
        for e in self.entries:
            if e.pattern is None:
                raise CatalogError("catalog entries need a pattern")
            if e.pattern in seen:
                raise DuplicatePattern(f"duplicate pattern {e.pattern}")
            seen.add(e.pattern)
        object.__setattr__(self, "_index", {e.pattern.digits: e for e in self.entries})

    def is_wholly_obtained_category(self, code: HsCode) -> bool:
        return any(p.matches(code) for p in self.wholly_obtained)


# ------------------------------------------------------------------------ errors


class CatalogError(ValueError):
    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        where = ""
        if line is not None:
            where = f"line {line}" + (f", col {col}" if col is not None else "") + ": "
        super().__init__(where + message)


class CatalogSyntaxError(CatalogError):
    pass


class DuplicatePattern(CatalogError):
    pass


class UnknownProcessName(CatalogError):
    pass


class ThresholdOutOfRange(CatalogError):
    pass


# ------------------------------------------------------------------------ lexer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<assign>:=)
  | (?P<ge>>=)
  | (?P<punct>[(),])
  | (?P<number>\d+(?:\.\d+)?%?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_.\-]*)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    col: int


def _tokenize(line: str, lineno: int) -> list[_Tok]:
    toks: list[_Tok] = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if m is None:
            raise CatalogSyntaxError(f"unexpected character {line[pos]!r}", lineno, pos + 1)
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), pos + 1))
        pos = m.end()
    return toks


class _Parser:
    def __init__(self, toks: list[_Tok], lineno: int, line_len: int):
        self.toks = toks
        self.i = 0
        self.lineno = lineno
        self.end_col = line_len + 1

    def _err(self, msg: str, tok: _Tok | None = None, cls=CatalogSyntaxError):
        col = tok.col if tok else (self.peek().col if self.peek() else self.end_col)
        return cls(msg, self.lineno, col)

    def peek(self) -> _Tok | None:
        return self.toks[self.i] if self.i < len(self.toks) else None

    def next(self, what: str = "token") -> _Tok:
        tok = self.peek()
        if tok is None:
            raise CatalogSyntaxError(f"expected {what}, got end of line", self.lineno, self.end_col)
        self.i += 1
        return tok

    def at_word(self, *words: str) -> bool:
        tok = self.peek()
        return tok is not None and tok.kind == "word" and tok.text in words

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        tok = self.next(text or kind)
        if tok.kind != kind or (text is not None and tok.text != text):
            raise self._err(f"expected {text or kind!r}, got {tok.text!r}", tok)
        return tok

    def done(self) -> bool:
        return self.i >= len(self.toks)

    # expr := and_expr ("OR" and_expr)*
    def expr(self) -> OriginRule:
        parts = [self.and_expr()]
        while self.at_word("OR"):
            self.i += 1
            parts.append(self.and_expr())
        return any_of(*parts)

    def and_expr(self) -> OriginRule:
        parts = [self.term()]
        while self.at_word("AND"):
            self.i += 1
            parts.append(self.term())
        return all_of(*parts)

    def pct(self) -> Decimal:
        tok = self.expect("number")
        try:
            return Decimal(tok.text.rstrip("%"))
        except InvalidOperation:  # pragma: no cover - regex guarantees digits
            raise self._err(f"bad percentage {tok.text!r}", tok) from None

    def _checked(self, tok: _Tok, build):
        try:
            return build()
        except CatalogError as exc:
            raise type(exc)(str(exc), self.lineno, tok.col) from None

    def term(self) -> OriginRule:
        tok = self.next("rule term")
        if tok.kind == "punct" and tok.text == "(":
            inner = self.expr()
            self.expect("punct", ")")
            return inner
        if tok.kind != "word":
            raise self._err(f"expected rule term, got {tok.text!r}", tok)
        word = tok.text
        if word == "WO":
            return WhollyObtained()
        if word in _SHIFT_WORDS:
            dm = None
            if self.at_word("dm"):
                self.i += 1
                dm = self.pct()
            return self._checked(tok, lambda: TariffShift(_SHIFT_WORDS[word], dm))
        if word == "VC":
            self.expect("punct", "(")
            mtok = self.expect("word")
            if mtok.text not in _METHOD_WORDS:
                raise self._err(f"unknown valuation method {mtok.text!r}", mtok)
            self.expect("punct", ",")
            self.expect("ge")
            threshold = self.pct()
            self.expect("punct", ")")
            return self._checked(tok, lambda: ValueContent(_METHOD_WORDS[mtok.text], threshold))
        if word == "PROC":
            self.expect("punct", "(")
            name = self.expect("word")
            spec = self._process(name)
            self.expect("punct", ")")
            return Process(spec)
        raise self._err(f"unknown rule term {word!r}", tok)

    def _process(self, name: _Tok) -> ProcessSpec:
        if name.text == "three_ops":
            cap = None
            if self.at_word("cap"):
                self.i += 1
                cap = self.pct()
            return self._checked(name, lambda: ThreeOperations(cap))
        if name.text == "yarn_forward":
            return YarnForward()
        if name.text in NAMED_STAGES:
            return NamedStage(name.text)
        raise self._err(f"unknown process name {name.text!r}", name, UnknownProcessName)


_SHIFT_WORDS = {
    "CTC": ShiftLevel.CHAPTER,
    "CTH": ShiftLevel.HEADING,
    "CTSH": ShiftLevel.SUBHEADING,
}
_SHIFT_NAMES = {v: k for k, v in _SHIFT_WORDS.items()}

_METHOD_WORDS = {
    "any": frozenset(Method),
    "net_cost": frozenset({Method.NET_COST}),
    "final_value": frozenset({Method.FINAL_VALUE}),
}


def _pattern_token(p: _Parser) -> HsPattern:
    tok = p.next("HS pattern")
    if tok.kind != "number":
        raise p._err(f"expected HS pattern, got {tok.text!r}", tok)
    try:
        return parse_pattern(tok.text)
    except HsCodeError as exc:
        raise CatalogSyntaxError(str(exc), p.lineno, tok.col) from None


def parse_rule(text: str) -> OriginRule:
    """Parse a single rule expression such as ``"CTH AND VC(any, >=40)"``."""
    p = _Parser(_tokenize(text, 1), 1, len(text))
    rule = p.expr()
    if not p.done():
        raise p._err(f"unexpected {p.peek().text!r}")
    return rule


def _lines(text: str) -> list[str]:
    # only \n ends a line; notes may legitimately contain other separators
    return [line[:-1] if line.endswith("\r") else line for line in text.split("\n")]


def parse_catalog(text: str) -> RuleCatalog:
    """Parse a catalog document into a validated :class:`RuleCatalog`."""
    entries: list[RuleEntry] = []
    seen: dict[HsPattern, int] = {}
    fallback: OriginRule = DEFAULT_FALLBACK
    hs_edition = "unspecified"
    members: frozenset[str] | None = None
    wholly: tuple[HsPattern, ...] | None = None

    for lineno, line in enumerate(_lines(text), start=1):
        toks = _tokenize(line, lineno)
        if not toks:
            continue
        p = _Parser(toks, lineno, len(line))
        head = p.next()
        if head.kind != "word":
            raise p._err(f"expected a statement keyword, got {head.text!r}", head)
        kw = head.text
        if kw == "rule":
            pattern = _pattern_token(p)
            p.expect("assign")
            rule = p.expr()
            status = RuleStatus.AGREED
            notes = ""
            if p.at_word("status"):
                p.i += 1
                stok = p.expect("word")
                try:
                    status = RuleStatus(stok.text)
                except ValueError:
                    raise p._err(f"unknown status {stok.text!r}", stok) from None
            if p.at_word("note"):
                p.i += 1
                ntok = p.expect("string")
                notes = json.loads(ntok.text)
            if not p.done():
                raise p._err(f"unexpected {p.peek().text!r}")
            if pattern in seen:
                raise DuplicatePattern(
                    f"pattern {pattern} already defined on line {seen[pattern]}", lineno, toks[1].col
                )
            seen[pattern] = lineno
            entries.append(RuleEntry(pattern, rule, status, notes))
        elif kw == "hs_edition":
            tok = p.next("edition label")
            hs_edition = json.loads(tok.text) if tok.kind == "string" else tok.text
        elif kw == "members":
            codes = []
            while not p.done():
                tok = p.expect("word")
                if not (len(tok.text) == 2 and tok.text.isupper()):
                    raise p._err(f"bad country code {tok.text!r}", tok)
                codes.append(tok.text)
            if not codes:
                raise p._err("members needs at least one country code")
            members = frozenset(codes)
        elif kw == "fallback":
            fallback = p.expr()
        elif kw == "wholly_obtained":
            pats = []
            while not p.done():
                pats.append(_pattern_token(p))
            wholly = tuple(pats)
        else:
            raise p._err(f"unknown statement {kw!r}", head)
        if not p.done():
            raise p._err(f"unexpected {p.peek().text!r}")

    return RuleCatalog(
        entries=tuple(entries),
        fallback=fallback,
        hs_edition=hs_edition,
        member_states=members if members is not None else GAFTA_MEMBERS,
        wholly_obtained=wholly if wholly is not None else DEFAULT_WHOLLY_OBTAINED,
    )


# ----------------------------------------------------------------------- render


def _fmt_pct(d: Decimal) -> str:
    return format(d.normalize(), "f")


def render_rule(rule: OriginRule, _parent: type | None = None) -> str:
    """Render a rule back to DSL text; ``parse_rule`` inverts this."""
    if isinstance(rule, WhollyObtained):
        return "WO"
    if isinstance(rule, TariffShift):
        s = _SHIFT_NAMES[rule.level]
        if rule.de_minimis_pct is not None:
            s += f" dm {_fmt_pct(rule.de_minimis_pct)}"
        return s
    if isinstance(rule, ValueContent):
        if rule.methods == frozenset(Method):
            m = "any"
        else:
            (only,) = rule.methods
            m = only.value
        return f"VC({m}, >={_fmt_pct(rule.threshold_pct)})"
    if isinstance(rule, Process):
        spec = rule.spec
        if isinstance(spec, ThreeOperations):
            if spec.fabric_value_cap_pct is None:
                return "PROC(three_ops)"
            return f"PROC(three_ops cap {_fmt_pct(spec.fabric_value_cap_pct)})"
        if isinstance(spec, YarnForward):
            return "PROC(yarn_forward)"
        return f"PROC({spec.stage})"
    if isinstance(rule, AllOf):
        # AND binds tighter than OR, so only nested ANDs of ORs need parens
        return " AND ".join(render_rule(r, AllOf) for r in rule.rules)
    if isinstance(rule, AnyOf):
        s = " OR ".join(render_rule(r, AnyOf) for r in rule.rules)
        return f"({s})" if _parent is AllOf else s
    raise TypeError(f"not an origin rule: {rule!r}")


def render_catalog(catalog: RuleCatalog) -> str:
    edition = catalog.hs_edition
    if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_.\-]*|\d+(?:\.\d+)?%?", edition):
        edition = json.dumps(edition, ensure_ascii=False)
    lines = [
        f"hs_edition {edition}",
        "members " + " ".join(sorted(catalog.member_states)),
        f"fallback {render_rule(catalog.fallback)}",
        "wholly_obtained " + " ".join(str(p) for p in catalog.wholly_obtained),
        "",
    ]
    for e in catalog.entries:
        s = f"rule {e.pattern} := {render_rule(e.rule)}"
        if e.status is not RuleStatus.AGREED:
            s += f" status {e.status.value}"
        if e.notes:
            s += f" note {json.dumps(e.notes, ensure_ascii=False)}"
        lines.append(s)
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------------- lookup


def lookup_rule(catalog: RuleCatalog, code: HsCode) -> RuleEntry:
    """Return the most specific entry covering ``code``, else the fallback.

    Total over canonical codes: subheading beats heading beats chapter, and
    codes with no entry resolve to a synthetic agreed entry holding the
    catalog fallback.
    """
    index = catalog._index  # type: ignore[attr-defined]
    for width in (6, 4, 2):
        entry = index.get(code.digits[:width])
        if entry is not None:
            return entry
    return RuleEntry(None, catalog.fallback, RuleStatus.AGREED, "general rule")


# ------------------------------------------------------------------------- lint


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "warning" | "info"
    pattern: str
    code: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.pattern}: [{self.code}] {self.message}"


def _dm_rank(dm: Decimal | None) -> Decimal:
    # no allowance at all is stricter than an explicit 0% allowance
    return Decimal(-1) if dm is None else dm


def implies(a: OriginRule, b: OriginRule) -> bool:
    """Conservative syntactic check that satisfying ``a`` always satisfies ``b``."""
    if a == b:
        return True
    if isinstance(b, AllOf):
        return all(implies(a, r) for r in b.rules)
    if isinstance(a, AnyOf):
        return all(implies(r, b) for r in a.rules)
    if isinstance(a, AllOf):
        if any(implies(r, b) for r in a.rules):
            return True
    if isinstance(b, AnyOf):
        return any(implies(a, r) for r in b.rules)
    if isinstance(a, ValueContent) and isinstance(b, ValueContent):
        return a.methods <= b.methods and a.threshold_pct >= b.threshold_pct
    if isinstance(a, TariffShift) and isinstance(b, TariffShift):
        return a.level >= b.level and _dm_rank(a.de_minimis_pct) <= _dm_rank(b.de_minimis_pct)
    return False


def _lint_rule(rule: OriginRule, where: str, out: list[Diagnostic]) -> None:
    if isinstance(rule, (AllOf, AnyOf)):
        rules = rule.rules
        for i, ri in enumerate(rules):
            for j, rj in enumerate(rules):
                if i == j:
                    continue
                if ri == rj:
                    if i < j:
                        out.append(Diagnostic("warning", where, "duplicate-branch",
                                              f"branch {render_rule(ri)} appears more than once"))
                    continue
                if isinstance(rule, AnyOf) and implies(ri, rj):
                    out.append(Diagnostic("warning", where, "subsumed-branch",
                                          f"OR branch {render_rule(ri)} is subsumed by {render_rule(rj)}"))
                if isinstance(rule, AllOf) and implies(ri, rj):
                    out.append(Diagnostic("warning", where, "subsumed-branch",
                                          f"AND branch {render_rule(rj)} is implied by {render_rule(ri)}"))
        for r in rules:
            _lint_rule(r, where, out)


def lint_catalog(catalog: RuleCatalog) -> list[Diagnostic]:
    """Warn about disputed entries, unreachable patterns and redundant branches."""
    out: list[Diagnostic] = []
    present = {e.pattern.digits for e in catalog.entries}
    for e in catalog.entries:
        where = str(e.pattern)
        if e.status is RuleStatus.DISPUTED:
            out.append(Diagnostic("warning", where, "disputed",
                                  "disputed rule, fallback may apply"))
        if len(e.pattern.digits) < 6:
            children = (e.pattern.digits + f"{k:02d}" for k in range(100))
            if all(c in present for c in children):
                out.append(Diagnostic("warning", where, "unreachable",
                                      "every longer pattern below this one has its own entry"))
        _lint_rule(e.rule, where, out)
    _lint_rule(catalog.fallback, "fallback", out)
    return out


def load_fixture_catalog() -> RuleCatalog:
    """The bundled representative catalog covering every rule kind."""
    text = resources.files("roo").joinpath("data").joinpath("gafta.rules").read_text(encoding="utf-8")
    return parse_catalog(text)
