"""The fourteen banking-app detection rules.

Rules come in two flavors. Presence rules flag a dangerous construct that
was actually found (an API call, a manifest declaration) and carry concrete
evidence locations. Absence rules (R09, R12, R13, R14) flag a missing
defensive construct and carry a single evidence line describing the search
that came up empty; one positive marker anywhere in any DEX suppresses them.

All rules are pure functions of the scan input, so results are
deterministic and the rules could be evaluated in any order or in parallel;
findings are always merged in rule order.

Known, accepted imprecision: rules scan bundled third-party code exactly
like first-party code, R01 matches on method-local co-occurrence rather
than dataflow, and the const back-scan behind R07/R08/R13 ignores register
targets.
"""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

from .dex import (
    DexImage,
    InvocationSite,
    containing_body,
    invocations_of,
    literal_reaching,
    string_pool_matches,
)
from .manifest import ManifestModel

FLAG_SECURE = 0x2000

ROOT_MARKER_EXACT = ("su",)
ROOT_MARKER_SUBSTRINGS = (
    "/system/xbin/su",
    "/system/bin/su",
    "test-keys",
    "superuser",
)


class RuleId(enum.Enum):
    R01 = "R01"  # implicit intent used to start a service
    R02 = "R02"  # intent-filter without an action
    R03 = "R03"  # exported content provider without permission
    R04 = "R04"  # WebView addJavascriptInterface
    R05 = "R05"  # IMEI / device id collection
    R06 = "R06"  # permission declared at normal/default protection
    R07 = "R07"  # WebView local file system access
    R08 = "R08"  # WebView JavaScript enabled
    R09 = "R09"  # no root / system privilege check
    R10 = "R10"  # ADB backup allowed
    R11 = "R11"  # unsafe file deleting
    R12 = "R12"  # no package signature check
    R13 = "R13"  # screenshot capture not blocked
    R14 = "R14"  # no APK installer source check

    @property
    def index(self) -> int:
        return _RULE_ORDER.index(self)


_RULE_ORDER: tuple[RuleId, ...] = tuple(RuleId)
RULE_COUNT = len(_RULE_ORDER)


@functools.total_ordering
class Severity(enum.Enum):
    CRITICAL = "critical"
    WARNING = "warning"
    NOTICE = "notice"
    INFO = "info"

    @property
    def rank(self) -> int:
        return {"critical": 3, "warning": 2, "notice": 1, "info": 0}[self.value]

    def __lt__(self, other: "Severity") -> bool:
        if not isinstance(other, Severity):
            return NotImplemented
        return self.rank < other.rank


RULE_TITLES: dict[RuleId, str] = {
    RuleId.R01: "Implicit intent for service",
    RuleId.R02: "Misconfiguration of intent-filters",
    RuleId.R03: "Content Provider access from other apps on the device",
    RuleId.R04: "Remote code execution",
    RuleId.R05: "Getting IMEI and Device ID",
    RuleId.R06: "Normal protection-level of permission",
    RuleId.R07: "Local file system access",
    RuleId.R08: "Webview JavaScript enabled",
    RuleId.R09: "Not executing 'root' or system privilege checks",
    RuleId.R10: "ADB backup",
    RuleId.R11: "File unsafe deleting",
    RuleId.R12: "Not checking Package signature code",
    RuleId.R13: "Allowing screenshot capturing",
    RuleId.R14: "Not checking APK installer sources",
}

RULE_SEVERITIES: dict[RuleId, Severity] = {
    RuleId.R01: Severity.CRITICAL,
    RuleId.R02: Severity.CRITICAL,
    RuleId.R03: Severity.CRITICAL,
    RuleId.R04: Severity.CRITICAL,
    RuleId.R05: Severity.WARNING,
    RuleId.R06: Severity.CRITICAL,
    RuleId.R07: Severity.WARNING,
    RuleId.R08: Severity.WARNING,
    RuleId.R09: Severity.NOTICE,
    RuleId.R10: Severity.WARNING,
    RuleId.R11: Severity.NOTICE,
    RuleId.R12: Severity.NOTICE,
    RuleId.R13: Severity.NOTICE,
    RuleId.R14: Severity.NOTICE,
}

RULE_CATEGORIES: dict[RuleId, str] = {
    RuleId.R01: "Intent",
    RuleId.R02: "Manifest",
    RuleId.R03: "Manifest",
    RuleId.R04: "WebView",
    RuleId.R05: "Privacy",
    RuleId.R06: "Manifest",
    RuleId.R07: "WebView",
    RuleId.R08: "WebView",
    RuleId.R09: "Platform integrity",
    RuleId.R10: "Storage",
    RuleId.R11: "Storage",
    RuleId.R12: "Tamper detection",
    RuleId.R13: "Screen capture",
    RuleId.R14: "Install source",
}


@dataclass(frozen=True)
class Finding:
    rule: RuleId
    severity: Severity
    title: str
    evidence: tuple[str, ...]
    category: str


@dataclass(frozen=True)
class ScanInput:
    manifest: ManifestModel
    dexes: tuple[DexImage, ...]
    apk_name: str

    def __post_init__(self):
        if not self.dexes:
            raise ValueError("scan input needs at least one DEX image")


@dataclass(frozen=True)
class ScanResult:
    apk_name: str
    findings: tuple[Finding, ...]
    rule_vector: tuple[bool, ...]


def _finding(rule: RuleId, evidence: list[str]) -> Finding:
    return Finding(
        rule=rule,
        severity=RULE_SEVERITIES[rule],
        title=RULE_TITLES[rule],
        evidence=tuple(evidence),
        category=RULE_CATEGORIES[rule],
    )


def _site_evidence(dex: DexImage, site: InvocationSite) -> str:
    caller_cls, caller_name = site.caller
    return (
        f"{dex.source_name}: {caller_cls}->{caller_name} +0x{site.offset:04x} "
        f"calls {site.callee.owner}->{site.callee.name}"
    )


def _all_sites(dexes, owner, name):
    for dex in dexes:
        for site in invocations_of(dex, owner, name):
            yield dex, site


# --- manifest rules --------------------------------------------------------


def _r02_intent_filter(inp: ScanInput) -> list[Finding]:
    findings = []
    for comp in inp.manifest.components:
        for i, filt in enumerate(comp.intent_filters):
            if not filt.actions:
                findings.append(
                    _finding(
                        RuleId.R02,
                        [f"manifest: application/{comp.kind}[{comp.name}]/intent-filter[{i}] has no action"],
                    )
                )
    return findings


def _r03_provider(inp: ScanInput) -> list[Finding]:
    findings = []
    for comp in inp.manifest.components:
        if comp.kind != "provider":
            continue
        if inp.manifest.effective_exported(comp) and comp.permission is None:
            findings.append(
                _finding(
                    RuleId.R03,
                    [f"manifest: application/provider[{comp.name}] exported without permission"],
                )
            )
    return findings


def _r06_permission(inp: ScanInput) -> list[Finding]:
    findings = []
    for perm in inp.manifest.declared_permissions:
        if perm.protection_level in ("normal", "unset"):
            findings.append(
                _finding(
                    RuleId.R06,
                    [f"manifest: permission[{perm.name}] protectionLevel={perm.protection_level}"],
                )
            )
    return findings


def _r10_backup(inp: ScanInput) -> list[Finding]:
    allow = inp.manifest.application.allow_backup
    if allow is False:
        return []
    state = "true" if allow else "unset (defaults to true)"
    return [_finding(RuleId.R10, [f"manifest: application allowBackup={state}"])]


# --- code presence rules ---------------------------------------------------


def _r01_implicit_service(inp: ScanInput) -> list[Finding]:
    # Method-local co-occurrence of an Intent(action-string) constructor and a
    # startService/bindService call. Shorty VL means one reference argument,
    # which covers the action-string constructor (and over-approximates the
    # copy constructor); the two-argument explicit form is VLL and never hits.
    findings = []
    for dex in inp.dexes:
        for body in dex.bodies():
            ctor_sites = []
            start_sites = []
            for ins in body.instructions:
                if ins.method_index is None:
                    continue
                ref = dex.method_refs[ins.method_index]
                if (
                    ref.owner == "Landroid/content/Intent;"
                    and ref.name == "<init>"
                    and ref.shorty == "VL"
                ):
                    ctor_sites.append(ins.offset)
                elif ref.name in ("startService", "bindService"):
                    start_sites.append((ins.offset, ref))
            if ctor_sites and start_sites:
                evidence = [
                    f"{dex.source_name}: {body.owner}->{body.name} +0x{off:04x} "
                    f"calls {ref.owner}->{ref.name} with implicit Intent "
                    f"(action-string constructor at +0x{ctor_sites[0]:04x})"
                    for off, ref in start_sites
                ]
                findings.append(_finding(RuleId.R01, evidence))
    return findings


def _r04_remote_code(inp: ScanInput) -> list[Finding]:
    return [
        _finding(RuleId.R04, [_site_evidence(dex, site)])
        for dex, site in _all_sites(inp.dexes, "Landroid/webkit/WebView;", "addJavascriptInterface")
    ]


def _r05_device_id(inp: ScanInput) -> list[Finding]:
    return [
        _finding(RuleId.R05, [_site_evidence(dex, site)])
        for dex, site in _all_sites(
            inp.dexes, "Landroid/telephony/TelephonyManager;", "getDeviceId"
        )
    ]


def _r11_file_delete(inp: ScanInput) -> list[Finding]:
    return [
        _finding(RuleId.R11, [_site_evidence(dex, site)])
        for dex, site in _all_sites(inp.dexes, "Ljava/io/File;", "delete")
    ]


def _file_access_calls(inp: ScanInput):
    for dex, site in _all_sites(inp.dexes, "Landroid/webkit/WebSettings;", "setAllowFileAccess"):
        lit = literal_reaching(site, containing_body(dex, site))
        yield dex, site, lit


def _r07_file_access(inp: ScanInput) -> list[Finding]:
    findings = []
    explicit_off = False
    for dex, site, lit in _file_access_calls(inp):
        if lit == 1:
            findings.append(_finding(RuleId.R07, [_site_evidence(dex, site) + " with literal 1"]))
        elif lit == 0:
            explicit_off = True
    if findings:
        return findings
    # File access is on by default: a WebView in use without an explicit
    # setAllowFileAccess(false) anywhere leaves it enabled.
    if not explicit_off:
        webkit_refs = [
            f"{dex.source_name}: references type {t}"
            for dex in inp.dexes
            for t in dex.type_names
            if t.startswith("Landroid/webkit/")
        ]
        if webkit_refs:
            findings.append(
                _finding(
                    RuleId.R07,
                    [webkit_refs[0] + " and never calls setAllowFileAccess(false); file access is enabled by default"],
                )
            )
    return findings


def _r08_javascript(inp: ScanInput) -> list[Finding]:
    findings = []
    for dex, site in _all_sites(inp.dexes, "Landroid/webkit/WebSettings;", "setJavaScriptEnabled"):
        lit = literal_reaching(site, containing_body(dex, site))
        if lit == 1:
            findings.append(_finding(RuleId.R08, [_site_evidence(dex, site) + " with literal 1"]))
    return findings


# --- whole-app absence rules -----------------------------------------------


def _r09_root_check(inp: ScanInput) -> list[Finding]:
    for dex in inp.dexes:
        if string_pool_matches(dex, list(ROOT_MARKER_EXACT), "exact"):
            return []
        if string_pool_matches(dex, list(ROOT_MARKER_SUBSTRINGS), "substring"):
            return []
        if invocations_of(dex, "Ljava/lang/Runtime;", "exec"):
            return []
    markers = ", ".join(ROOT_MARKER_EXACT + ROOT_MARKER_SUBSTRINGS)
    return [
        _finding(
            RuleId.R09,
            [
                f"absence: no root-detection marker ({markers}) in any string pool and "
                f"no Runtime.exec call across {len(inp.dexes)} dex file(s)"
            ],
        )
    ]


def _r12_signature_check(inp: ScanInput) -> list[Finding]:
    for dex in inp.dexes:
        if "Landroid/content/pm/Signature;" in dex.type_names:
            return []
        if invocations_of(dex, "*", "getPackageInfo"):
            return []
    return [
        _finding(
            RuleId.R12,
            [
                "absence: no reference to Landroid/content/pm/Signature; and no "
                f"getPackageInfo call across {len(inp.dexes)} dex file(s)"
            ],
        )
    ]


def _r13_screenshot(inp: ScanInput) -> list[Finding]:
    for method_name in ("setFlags", "addFlags"):
        for dex, site in _all_sites(inp.dexes, "Landroid/view/Window;", method_name):
            lit = literal_reaching(site, containing_body(dex, site))
            if lit == FLAG_SECURE:
                return []
    return [
        _finding(
            RuleId.R13,
            [
                "absence: no Window.setFlags/addFlags call with FLAG_SECURE (0x2000) "
                f"across {len(inp.dexes)} dex file(s)"
            ],
        )
    ]


def _r14_installer_check(inp: ScanInput) -> list[Finding]:
    for dex in inp.dexes:
        if invocations_of(dex, "Landroid/content/pm/PackageManager;", "getInstallerPackageName"):
            return []
    return [
        _finding(
            RuleId.R14,
            [
                "absence: no PackageManager.getInstallerPackageName call across "
                f"{len(inp.dexes)} dex file(s)"
            ],
        )
    ]


_EVALUATORS = {
    RuleId.R01: _r01_implicit_service,
    RuleId.R02: _r02_intent_filter,
    RuleId.R03: _r03_provider,
    RuleId.R04: _r04_remote_code,
    RuleId.R05: _r05_device_id,
    RuleId.R06: _r06_permission,
    RuleId.R07: _r07_file_access,
    RuleId.R08: _r08_javascript,
    RuleId.R09: _r09_root_check,
    RuleId.R10: _r10_backup,
    RuleId.R11: _r11_file_delete,
    RuleId.R12: _r12_signature_check,
    RuleId.R13: _r13_screenshot,
    RuleId.R14: _r14_installer_check,
}


def evaluate_rule(rule: RuleId, scan_input: ScanInput) -> list[Finding]:
    """Run one rule; empty list means not vulnerable."""
    return _EVALUATORS[rule](scan_input)


def run_all_rules(scan_input: ScanInput) -> ScanResult:
    """Run all fourteen rules in rule order and fold the boolean vector."""
    findings: list[Finding] = []
    vector = []
    for rule in _RULE_ORDER:
        rule_findings = evaluate_rule(rule, scan_input)
        findings.extend(rule_findings)
        vector.append(bool(rule_findings))
    return ScanResult(
        apk_name=scan_input.apk_name,
        findings=tuple(findings),
        rule_vector=tuple(vector),
    )
