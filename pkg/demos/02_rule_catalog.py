"""Product-specific rules: the catalog language, lookups and linting."""

from __future__ import annotations

from roo.nomenclature import parse_hs, shift_satisfied, ShiftLevel
from roo.rulebook import lint_catalog, load_fixture_catalog, lookup_rule, parse_catalog, parse_rule, render_rule

# Rules are short expressions.  AND binds tighter than OR; parentheses override.
rule = parse_rule("CTH AND VC(any, >=30) OR PROC(three_ops cap 47.5)")
print("rendered:", render_rule(rule))

# Tariff shifts compare the finished code with each input at one of three levels.
paperboard, matchbox = parse_hs("4823.20"), parse_hs("4819.60")
for level in ShiftLevel:
    print(f"{paperboard} -> {matchbox} at {level.name.lower():>10}: {shift_satisfied(paperboard, matchbox, level)}")

# The built-in catalog covers a few dozen headings; lookups pick the most
# specific pattern and fall back to the catalog default.
catalog = load_fixture_catalog()
for code in ("4819.60", "6110.20", "9401.30"):
    entry = lookup_rule(catalog, parse_hs(code))
    print(f"{code}: rule {entry.key} [{entry.status.value}] {render_rule(entry.rule)}")

# A hand-written catalog with a redundant branch and an entry hidden behind
# a broader one; lint reports both.
text = """\
hs_edition 2012
members AE EG JO SA
fallback VC(any, >=40)
rule 48 := CTH OR CTH dm 10
rule 4819 := CTSH status disputed
"""
for diag in lint_catalog(parse_catalog(text)):
    print(diag)
