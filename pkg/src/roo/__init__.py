"""Preferential rules-of-origin engine.

Submodules: ``nomenclature`` (HS codes), ``rulebook`` (rule DSL and catalog),
``valuation`` (money and value content), ``determination`` (origin verdicts
with replayable traces), ``certification``, ``verification``, ``reporting``,
``documents`` (JSON formats) and ``cli``.
"""

from __future__ import annotations

from .config import Config, CumulationMode, DisputedPolicy, load_config
from .determination import (
    BillOfMaterials,
    ConsignmentRoute,
    Determination,
    InputMaterial,
    ProcessingOperation,
    Verdict,
    determine,
    replay,
)
from .nomenclature import HsCode, HsPattern, ShiftLevel, parse_hs, parse_pattern
from .rulebook import OperationKind, RuleCatalog, load_fixture_catalog, parse_catalog, parse_rule, render_rule
from .valuation import Method, Money

__all__ = [
    "BillOfMaterials",
    "Config",
    "ConsignmentRoute",
    "CumulationMode",
    "Determination",
    "DisputedPolicy",
    "HsCode",
    "HsPattern",
    "InputMaterial",
    "Method",
    "Money",
    "OperationKind",
    "ProcessingOperation",
    "RuleCatalog",
    "ShiftLevel",
    "Verdict",
    "determine",
    "load_config",
    "load_fixture_catalog",
    "parse_catalog",
    "parse_hs",
    "parse_pattern",
    "parse_rule",
    "render_rule",
    "replay",
]
