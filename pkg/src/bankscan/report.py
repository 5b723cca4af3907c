"""Report rendering and fleet comparison matrices.

Single-app reports carry one section per finding with the six standard
fields (title, evidence paths, severity, category, background,
recommendation) plus the user-countermeasure appendix. Fleet matrices put
apps on rows and the fourteen rules on columns with YES/no cells, a per-app
total, and the total as a percentage of 14 rounded half-up to two decimals.

Three output encodings: ``text`` for humans, ``json`` for machines (the
structured form round-trips losslessly), and ``csv`` tables. All output is
deterministic for a given input; report timestamps are injected by the
caller or pinned by tests.

Both structured formats are versioned via ``schema_version``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io
import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

from .knowledge import KnowledgeBase, load_knowledge_base
from .rules import RULE_COUNT, RULE_TITLES, Finding, RuleId, ScanResult, Severity

SCHEMA_VERSION = 1

_FORMATS = ("text", "json", "csv")


class ReportError(Exception):
    """Base class for rendering/serialization failures."""


class DuplicateAppNameError(ReportError):
    """Two fleet scan results share an app name."""


class UnknownFormatError(ReportError):
    """Requested serialization format is not text/json/csv."""


@dataclass(frozen=True)
class ReportSection:
    rule: RuleId
    title: str
    evidence: tuple[str, ...]
    severity: Severity
    category: str
    background: str
    recommendation: str


@dataclass(frozen=True)
class Report:
    apk_name: str
    generated_at: str
    sections: tuple[ReportSection, ...]
    user_countermeasures: tuple[str, ...]
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class FleetMatrix:
    apps: tuple[str, ...]
    rules: tuple[RuleId, ...]
    cells: tuple[tuple[bool, ...], ...]
    totals: tuple[int, ...]
    percentages: tuple[str, ...]
    rule_titles: tuple[str, ...]
    schema_version: int = SCHEMA_VERSION


def format_percentage(count: int, out_of: int = RULE_COUNT) -> str:
    """count/out_of as a percentage string, two decimals, half-up rounding."""
    value = Decimal(100 * count) / Decimal(out_of)
    return str(value.quantize(Decimal("0.01"), rounding=ROUND_HALF_UP))


def _section_sort_key(indexed: tuple[int, Finding]):
    i, finding = indexed
    return (-finding.severity.rank, finding.rule.index, i)


def render_report(
    result: ScanResult,
    kb: KnowledgeBase | None = None,
    generated_at: str | None = None,
) -> Report:
    """One section per finding, critical first, then rule order."""
    kb = kb or load_knowledge_base()
    if generated_at is None:
        generated_at = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")

    sections = []
    for _, finding in sorted(enumerate(result.findings), key=_section_sort_key):
        sections.append(
            ReportSection(
                rule=finding.rule,
                title=finding.title,
                evidence=finding.evidence,
                severity=finding.severity,
                category=finding.category,
                background=kb.backgrounds[finding.rule],
                recommendation=kb.countermeasures[finding.rule].developer_action,
            )
        )
    return Report(
        apk_name=result.apk_name,
        generated_at=generated_at,
        sections=tuple(sections),
        user_countermeasures=tuple(u.text for u in kb.user_countermeasures),
    )


def build_fleet_matrix(results: list[ScanResult]) -> FleetMatrix:
    """Stack scan results into the apps-by-rules comparison matrix."""
    if not results:
        raise ReportError("fleet matrix needs at least one scan result")
    names = [r.apk_name for r in results]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise DuplicateAppNameError(f"duplicate app names: {sorted(dupes)}")

    rules = tuple(RuleId)
    cells = tuple(tuple(r.rule_vector) for r in results)
    totals = tuple(sum(row) for row in cells)
    return FleetMatrix(
        apps=tuple(names),
        rules=rules,
        cells=cells,
        totals=totals,
        percentages=tuple(format_percentage(t) for t in totals),
        rule_titles=tuple(RULE_TITLES[r] for r in rules),
    )


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def serialize(obj: Report | FleetMatrix, fmt: str = "text") -> bytes:
    if fmt not in _FORMATS:
        raise UnknownFormatError(f"unknown format {fmt!r}, expected one of {_FORMATS}")
    if isinstance(obj, Report):
        impl = {"text": _report_text, "json": _report_json, "csv": _report_csv}[fmt]
    elif isinstance(obj, FleetMatrix):
        impl = {"text": _matrix_text, "json": _matrix_json, "csv": _matrix_csv}[fmt]
    else:
        raise ReportError(f"cannot serialize {type(obj).__name__}")
    return impl(obj)


def _dump_json(payload: dict) -> bytes:
    return (json.dumps(payload, sort_keys=True, indent=2) + "\n").encode("utf-8")


def _report_json(report: Report) -> bytes:
    return _dump_json(
        {
            "schema_version": report.schema_version,
            "kind": "report",
            "apk_name": report.apk_name,
            "generated_at": report.generated_at,
            "sections": [
                {
                    "rule": s.rule.value,
                    "title": s.title,
                    "evidence": list(s.evidence),
                    "severity": s.severity.value,
                    "category": s.category,
                    "background": s.background,
                    "recommendation": s.recommendation,
                }
                for s in report.sections
            ],
            "user_countermeasures": list(report.user_countermeasures),
        }
    )


def deserialize_report(data: bytes) -> Report:
    doc = json.loads(data.decode("utf-8"))
    if doc.get("kind") != "report":
        raise ReportError(f"not a report document: kind={doc.get('kind')!r}")
    return Report(
        apk_name=doc["apk_name"],
        generated_at=doc["generated_at"],
        sections=tuple(
            ReportSection(
                rule=RuleId(s["rule"]),
                title=s["title"],
                evidence=tuple(s["evidence"]),
                severity=Severity(s["severity"]),
                category=s["category"],
                background=s["background"],
                recommendation=s["recommendation"],
            )
            for s in doc["sections"]
        ),
        user_countermeasures=tuple(doc["user_countermeasures"]),
        schema_version=doc["schema_version"],
    )


def _matrix_json(matrix: FleetMatrix) -> bytes:
    return _dump_json(
        {
            "schema_version": matrix.schema_version,
            "kind": "fleet_matrix",
            "apps": list(matrix.apps),
            "rules": [r.value for r in matrix.rules],
            "rule_titles": list(matrix.rule_titles),
            "cells": [list(row) for row in matrix.cells],
            "totals": list(matrix.totals),
            "percentages": list(matrix.percentages),
        }
    )


def deserialize_matrix(data: bytes) -> FleetMatrix:
    doc = json.loads(data.decode("utf-8"))
    if doc.get("kind") != "fleet_matrix":
        raise ReportError(f"not a fleet matrix document: kind={doc.get('kind')!r}")
    return FleetMatrix(
        apps=tuple(doc["apps"]),
        rules=tuple(RuleId(r) for r in doc["rules"]),
        cells=tuple(tuple(bool(c) for c in row) for row in doc["cells"]),
        totals=tuple(doc["totals"]),
        percentages=tuple(doc["percentages"]),
        rule_titles=tuple(doc["rule_titles"]),
        schema_version=doc["schema_version"],
    )


def scan_result_json(result: ScanResult) -> bytes:
    """Stable byte encoding of a raw scan result (no timestamp on purpose)."""
    return _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "kind": "scan_result",
            "apk_name": result.apk_name,
            "rule_vector": list(result.rule_vector),
            "findings": [
                {
                    "rule": f.rule.value,
                    "severity": f.severity.value,
                    "title": f.title,
                    "category": f.category,
                    "evidence": list(f.evidence),
                }
                for f in result.findings
            ],
        }
    )


def _report_text(report: Report) -> bytes:
    out = io.StringIO()
    out.write(f"== Security report: {report.apk_name} ==\n")
    out.write(f"generated: {report.generated_at}\n")
    out.write(f"findings: {len(report.sections)}\n")
    for i, s in enumerate(report.sections, 1):
        out.write(f"\n[{i}] ({s.severity.value}) {s.title}\n")
        out.write(f"    category: {s.category}\n")
        out.write("    evidence:\n")
        for line in s.evidence:
            out.write(f"      - {line}\n")
        out.write(f"    background: {s.background}\n")
        out.write(f"    recommendation: {s.recommendation}\n")
    out.write("\n-- User countermeasures --\n")
    for i, text in enumerate(report.user_countermeasures, 1):
        out.write(f"{i}. {text}\n")
    return out.getvalue().encode("utf-8")


def _report_csv(report: Report) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["apk", "rule", "severity", "title", "category", "evidence"])
    for s in report.sections:
        writer.writerow(
            [report.apk_name, s.rule.value, s.severity.value, s.title, s.category, " | ".join(s.evidence)]
        )
    return buf.getvalue().encode("utf-8")


def _cell_text(vulnerable: bool) -> str:
    return "YES" if vulnerable else "no"


def _matrix_text(matrix: FleetMatrix) -> bytes:
    out = io.StringIO()
    out.write("== Fleet vulnerability matrix ==\n")
    width = max(len(a) for a in matrix.apps + ("app",))
    header = "  ".join(r.value for r in matrix.rules)
    out.write(f"{'app'.ljust(width)}  {header}  Total  Percentage\n")
    for app, row, total, pct in zip(matrix.apps, matrix.cells, matrix.totals, matrix.percentages):
        cells = "  ".join(_cell_text(c).ljust(3) for c in row)
        out.write(f"{app.ljust(width)}  {cells}  {total:>5}  {pct:>10}\n")
    out.write("\nrule legend:\n")
    for rule, title in zip(matrix.rules, matrix.rule_titles):
        out.write(f"  {rule.value}: {title}\n")
    return out.getvalue().encode("utf-8")


def _matrix_csv(matrix: FleetMatrix) -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["app", *matrix.rule_titles, "Total", "Percentage"])
    for app, row, total, pct in zip(matrix.apps, matrix.cells, matrix.totals, matrix.percentages):
        writer.writerow([app, *(_cell_text(c) for c in row), total, pct])
    return buf.getvalue().encode("utf-8")
