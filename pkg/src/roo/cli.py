"""``roo`` command-line front end.

Exit codes: 0 success (Originating, certificate accepted, clean replay),
1 negative result, 2 input error, 3 rule-catalog error.
"""

from __future__ import annotations

import argparse
import datetime as dt
import sys
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Any, TextIO

from .certification import ValidationResult, validate_certificate
from .config import Config, CumulationMode, DisputedPolicy, config_from_env
from .determination import Determination, DeterminationError, TraceStep, Verdict, determine
from .documents import DocumentError, bom_from_dict, certificate_from_dict, dump_json, read_json, route_from_dict
from .nomenclature import HsCodeError
from .reporting import ReportingError, load_trade_series, share_table, utilization_rate
from .rulebook import CatalogError, RuleCatalog, lint_catalog, load_fixture_catalog, parse_catalog, render_rule
from .valuation import ValuationError
from .verification import EventLogError, IllegalTransition, NonMonotoneTimestamp, replay_event_log

__all__ = ["DeterminationReport", "main", "build_parser"]

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_CATALOG = 3

INPUT_ERRORS = (DocumentError, DeterminationError, ValuationError, HsCodeError, ValueError, KeyError, TypeError, OSError)


class _CatalogLoadError(Exception):
    pass


# ------------------------------------------------------------------ reports


def _step_summary(step: TraceStep) -> str:
    o, i = step.outcome, step.inputs
    if step.check == "rule_lookup":
        return f"{i['pattern']} ({i['status']}) -> {o['applied_rule']}"
    if step.check == "wholly_obtained":
        return f"in category: {o['in_category']}, foreign inputs: {o['foreign_inputs']}"
    if step.check == "insufficient_operations":
        extra = ", wholly obtained (exempt)" if o["exempt_wholly_obtained"] else ""
        return f"{o['result']}{extra}"
    if step.check == "cumulation":
        return f"originating {o['originating_value']}, non-originating {o['non_originating_value']} ({i['mode']})"
    if step.check == "value_content":
        if o["method"] is None:
            return f"non-originating {i['non_originating']} exceeds every allowed basis"
        return f"{o['method']} {o['percentage']}% vs threshold {i['threshold']}%"
    if step.check == "tariff_shift":
        dm = f", de minimis {i['de_minimis']}%" if i["de_minimis"] is not None else ""
        return f"{i['level'].lower()} shift into {i['finished_code']}; non-shifting inputs {o['non_shifting']}{dm}"
    if step.check == "process":
        return ", ".join(f"{k}: {v}" for k, v in o.items() if k != "passed") or i["spec"].get("stage", "")
    if step.check == "transport":
        return f"offending legs: {o['offending_legs']}"
    return f"children {i['children']}"


@dataclass(frozen=True)
class DeterminationReport:
    """One determination in both renderings; everything derives from ``determination``."""

    determination: Determination
    source: str | None = None

    @property
    def exit_code(self) -> int:
        return EXIT_OK if self.determination.verdict is Verdict.ORIGINATING else EXIT_NEGATIVE

    def to_dict(self) -> dict[str, Any]:
        d = self.determination
        vc = d.value_content
        out: dict[str, Any] = {
            "verdict": d.verdict.value,
            "exit_code": self.exit_code,
            "rule": {
                "key": d.rule_applied.key,
                "status": d.rule_applied.status.value,
                "entry": render_rule(d.rule_applied.rule),
                "applied": render_rule(d.evaluated_rule),
            },
            "value_content": None if vc is None else {"method": vc[0].value, "percentage": str(vc[1])},
            "warnings": list(d.warnings),
            "trace": [s.to_dict() for s in d.trace],
        }
        if self.source is not None:
            out["source"] = self.source
        return out

    def render_text(self, explain: bool = False) -> str:
        d = self.determination
        head = f"{self.source}: " if self.source else ""
        lines = [f"{head}{d.verdict.value} under rule {d.rule_applied.key}: {render_rule(d.evaluated_rule)}"]
        vc = d.value_content
        if vc is not None:
            lines.append(f"  value content: {vc[0].value} {vc[1]}%")
        if not d.originating:
            verdict = d.trace[-1]
            for idx in verdict.inputs["children"]:
                step = d.trace[idx]
                if not step.passed:
                    lines.append(f"  failed: {step.check} ({step.citation})")
        for w in d.warnings:
            lines.append(f"  warning: {w}")
        if explain:
            for s in d.trace:
                mark = "pass" if s.passed else "FAIL"
                lines.append(f"  [{s.index}] {mark} {s.check} ({s.citation}): {_step_summary(s)}")
        return "\n".join(lines) + "\n"


def _load_config(args: argparse.Namespace) -> Config:
    config = config_from_env()
    overrides: dict[str, Any] = {}
    if getattr(args, "disputed_policy", None):
        overrides["disputed_policy"] = DisputedPolicy(args.disputed_policy)
    if getattr(args, "cumulation_mode", None):
        overrides["cumulation_mode"] = CumulationMode(args.cumulation_mode)
    if getattr(args, "validity_months", None):
        overrides["validity_months"] = args.validity_months
    return config.with_overrides(**overrides) if overrides else config


def _load_catalog(path: str | None) -> RuleCatalog:
    try:
        if path is None:
            return load_fixture_catalog()
        return parse_catalog(Path(path).read_text(encoding="utf-8"))
    except CatalogError as exc:
        raise _CatalogLoadError(f"{path or 'built-in catalog'}: {exc}") from None
    except OSError as exc:
        raise _CatalogLoadError(str(exc)) from None


def _write_structured(path: str | None, payload: dict, stamp: bool) -> None:
    if path is None:
        return
    if stamp:
        payload = {**payload, "generated_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")}
    Path(path).write_text(dump_json(payload), encoding="utf-8")


# ----------------------------------------------------------------- commands


def _determine_one(path: Path, route_path: str | None, catalog: RuleCatalog, config: Config, label: str | None):
    bom = bom_from_dict(read_json(path))
    route = route_from_dict(read_json(route_path)) if route_path else None
    return DeterminationReport(determine(bom, route, catalog, config), label)


def cmd_determine(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    config = _load_config(args)
    catalog = _load_catalog(args.rules)
    if args.bom_dir:
        files = sorted(Path(args.bom_dir).glob("*.json"))
        if not files:
            err.write(f"error: no *.json files in {args.bom_dir}\n")
            return EXIT_INPUT

        def run(p: Path) -> DeterminationReport | tuple[str, str]:
            try:
                return _determine_one(p, args.route, catalog, config, p.name)
            except INPUT_ERRORS as exc:
                return p.name, str(exc)

        # determine is pure, so files can be processed concurrently; results keep filename order
        with ThreadPoolExecutor() as pool:
            results = list(pool.map(run, files))
        code = EXIT_OK
        payload: list[dict] = []
        for r in results:
            if isinstance(r, tuple):
                err.write(f"error: {r[0]}: {r[1]}\n")
                payload.append({"source": r[0], "error": r[1], "exit_code": EXIT_INPUT})
                code = max(code, EXIT_INPUT)
            else:
                out.write(r.render_text(args.explain))
                payload.append(r.to_dict())
                code = max(code, r.exit_code)
        _write_structured(args.out, {"results": payload, "exit_code": code}, args.stamp)
        return code
    if not args.bom:
        err.write("error: give a BOM file or --bom-dir\n")
        return EXIT_INPUT
    report = _determine_one(Path(args.bom), args.route, catalog, config, None)
    out.write(report.render_text(args.explain))
    _write_structured(args.out, report.to_dict(), args.stamp)
    return report.exit_code


def _validation_text(cert_id: str, result: ValidationResult) -> str:
    lines = [f"certificate {cert_id}: {result.status.value}"]
    if result.window_end is not None:
        lines.append(f"  valid through {result.window_end.isoformat()}")
    lines += [f"  reason: {r}" for r in result.reasons]
    lines += [f"  warning: {w}" for w in result.warnings]
    return "\n".join(lines) + "\n"


def cmd_cert_validate(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    config = _load_config(args)
    cert = certificate_from_dict(read_json(args.cert))
    docs = read_json(args.docs) if args.docs else {}
    if not isinstance(docs, dict):
        raise DocumentError("accompanying documents must be a JSON object of field values")
    date = dt.date.fromisoformat(args.date)
    result = validate_certificate(cert, date, docs, args.force_majeure, config)
    out.write(_validation_text(cert.id, result))
    code = EXIT_OK if result.accepted else EXIT_NEGATIVE
    _write_structured(args.out, {"certificate": cert.id, **result.to_dict(), "exit_code": code}, args.stamp)
    return code


def cmd_rules_lint(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    catalog = _load_catalog(args.rules)
    diagnostics = lint_catalog(catalog)
    for d in diagnostics:
        out.write(f"{d}\n")
    warnings = sum(1 for d in diagnostics if d.severity == "warning")
    out.write(f"{len(catalog.entries)} rules, {warnings} warnings\n")
    return EXIT_NEGATIVE if warnings else EXIT_OK


def cmd_verify_replay(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    config = _load_config(args)
    text = Path(args.log).read_text(encoding="utf-8")
    try:
        cases = replay_event_log(text, config)
    except (IllegalTransition, NonMonotoneTimestamp) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_NEGATIVE
    payload = []
    for case_id in sorted(cases):
        c = cases[case_id]
        out.write(f"{case_id}: {c.state.value}{' (priority good)' if c.priority_good else ''}\n")
        payload.append(
            {
                "case": case_id,
                "certificate": c.certificate_id,
                "state": c.state.value,
                "priority_good": c.priority_good,
                "events": len(c.history),
            }
        )
    _write_structured(args.out, {"cases": payload}, args.stamp)
    return EXIT_OK


def cmd_stats_shares(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    text = Path(args.series).read_text(encoding="utf-8") if args.series else None
    rows = share_table(load_trade_series(text))
    tolerance = Decimal(args.tolerance)
    out.write("year  exports  printed  imports  printed\n")
    worst = Decimal(0)
    for r in rows:
        def p(v: Decimal | None) -> str:
            return "-" if v is None else str(v)

        out.write(
            f"{r.year}  {r.export_share:>7}  {p(r.printed_export_share):>7}  {r.import_share:>7}  "
            f"{p(r.printed_import_share):>7}\n"
        )
        worst = max([worst, *r.deviations()])
    within = worst <= tolerance
    out.write(f"largest deviation from printed shares: {worst} (tolerance {tolerance})\n")
    _write_structured(
        args.out,
        {"rows": [r.to_dict() for r in rows], "max_deviation": str(worst), "tolerance": str(tolerance)},
        args.stamp,
    )
    return EXIT_OK if within else EXIT_NEGATIVE


def cmd_stats_utilization(args: argparse.Namespace, out: TextIO, err: TextIO) -> int:
    rate = utilization_rate(Decimal(args.preferential), Decimal(args.eligible))
    out.write(f"utilization rate: {rate}%\n")
    _write_structured(args.out, {"utilization_rate": str(rate)}, args.stamp)
    return EXIT_OK


# ------------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", help="write the structured (JSON) report here")
    p.add_argument("--stamp", action="store_true", help="add a generation timestamp to the structured report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roo", description="Preferential rules-of-origin engine")
    sub = parser.add_subparsers(dest="command", required=True)

    det = sub.add_parser("determine", help="decide the origin of a bill of materials")
    det.add_argument("bom", nargs="?", help="bill of materials (JSON)")
    det.add_argument("--rules", help="rule catalog (defaults to the built-in catalog)")
    det.add_argument("--route", help="consignment route (JSON); direct shipment if omitted")
    det.add_argument("--bom-dir", help="determine every *.json file in this directory")
    det.add_argument("--explain", action="store_true", help="print every trace step with its citation")
    det.add_argument("--disputed-policy", choices=[p.value for p in DisputedPolicy])
    det.add_argument("--cumulation-mode", choices=[m.value for m in CumulationMode])
    _common(det)
    det.set_defaults(func=cmd_determine)

    cert = sub.add_parser("cert", help="certificate of origin commands")
    cert_sub = cert.add_subparsers(dest="cert_command", required=True)
    val = cert_sub.add_parser("validate", help="validate a certificate presented at import")
    val.add_argument("cert", help="certificate (JSON)")
    val.add_argument("docs", nargs="?", help="accompanying document fields (JSON object)")
    val.add_argument("--date", required=True, help="presentation date, YYYY-MM-DD")
    val.add_argument("--force-majeure", action="store_true")
    val.add_argument("--validity-months", type=int)
    _common(val)
    val.set_defaults(func=cmd_cert_validate)

    rules = sub.add_parser("rules", help="rule catalog commands")
    rules_sub = rules.add_subparsers(dest="rules_command", required=True)
    lint = rules_sub.add_parser("lint", help="report disputed, unreachable and redundant rules")
    lint.add_argument("rules", nargs="?", help="rule catalog (defaults to the built-in catalog)")
    lint.set_defaults(func=cmd_rules_lint)

    verify = sub.add_parser("verify", help="verification case commands")
    verify_sub = verify.add_subparsers(dest="verify_command", required=True)
    rep = verify_sub.add_parser("replay", help="replay a verification event log")
    rep.add_argument("log", help="event log, one JSON event per line")
    _common(rep)
    rep.set_defaults(func=cmd_verify_replay)

    stats = sub.add_parser("stats", help="trade statistics")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)
    shares = stats_sub.add_parser("shares", help="intra-regional trade shares by year")
    shares.add_argument("series", nargs="?", help="trade series (TSV); defaults to the built-in table")
    shares.add_argument("--tolerance", default="0.5", help="allowed deviation from printed shares, in points")
    _common(shares)
    shares.set_defaults(func=cmd_stats_shares)
    util = stats_sub.add_parser("utilization", help="preference utilization rate")
    util.add_argument("preferential", help="value of imports entered under preference")
    util.add_argument("eligible", help="value of imports eligible for preference")
    _common(util)
    util.set_defaults(func=cmd_stats_utilization)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        return args.func(args, out, err)
    except _CatalogLoadError as exc:
        err.write(f"catalog error: {exc}\n")
        return EXIT_CATALOG
    except (EventLogError, ReportingError) + INPUT_ERRORS as exc:
        err.write(f"input error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
