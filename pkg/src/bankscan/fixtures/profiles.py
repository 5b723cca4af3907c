"""Fixture profiles: which vulnerabilities a synthetic APK should exhibit.

A profile is a named set of expected-positive rules plus the manifest and
code knobs that realize it. ``implied_rules`` is the builder-side model of
what the knobs produce; ``build_fixture`` refuses profiles whose knobs and
expected rule set disagree, which keeps the corpus honest when either side
changes.

``rule_oracle_corpus`` yields one single-positive and one near-miss
negative fixture per rule; ``fleet_profiles`` yields the six reference
banking-app profiles used by the comparison-matrix tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..rules import RuleId
from .axml_writer import ANDROID_NS, Elem
from .dex_writer import MethodSketch, Proto

INTENT = "Landroid/content/Intent;"
CONTEXT = "Landroid/content/Context;"
COMPONENT_NAME = "Landroid/content/ComponentName;"
WEBVIEW = "Landroid/webkit/WebView;"
WEBSETTINGS = "Landroid/webkit/WebSettings;"
TELEPHONY = "Landroid/telephony/TelephonyManager;"
JFILE = "Ljava/io/File;"
PKG_MANAGER = "Landroid/content/pm/PackageManager;"
PKG_INFO = "Landroid/content/pm/PackageInfo;"
SIGNATURE = "Landroid/content/pm/Signature;"
WINDOW = "Landroid/view/Window;"
STRING = "Ljava/lang/String;"
OBJECT = "Ljava/lang/Object;"

PROVIDER_EXPORT_MODES = ("none", "open", "guarded", "private")
PERMISSION_LEVELS = (None, "normal", "unset", "signature")


class InconsistentProfileError(Exception):
    """Profile knobs do not produce the profile's declared rule set."""


@dataclass(frozen=True)
class ManifestKnobs:
    allow_backup: bool | None = False
    provider_export: str = "none"
    permission_level: str | None = None
    empty_intent_filter: bool = False
    target_sdk: int | None = 28


@dataclass(frozen=True)
class CodeKnobs:
    implicit_start_service: bool = False
    add_javascript_interface: bool = False
    get_device_id: bool = False
    set_javascript_enabled: bool | None = None
    set_allow_file_access: bool | None = None
    root_check_strings: bool = False
    file_delete: bool = False
    signature_check: bool = False
    flag_secure: bool = False
    installer_check: bool = False


@dataclass(frozen=True)
class FixtureProfile:
    name: str
    positive_rules: frozenset[RuleId]
    manifest_knobs: ManifestKnobs = field(default_factory=ManifestKnobs)
    code_knobs: CodeKnobs = field(default_factory=CodeKnobs)


def _references_webkit(ck: CodeKnobs) -> bool:
    return (
        ck.add_javascript_interface
        or ck.set_javascript_enabled is not None
        or ck.set_allow_file_access is not None
    )


def implied_rules(mk: ManifestKnobs, ck: CodeKnobs) -> frozenset[RuleId]:
    """The rule set the knob combination is expected to trigger."""
    rules: set[RuleId] = set()
    if ck.implicit_start_service:
        rules.add(RuleId.R01)
    if mk.empty_intent_filter:
        rules.add(RuleId.R02)
    if mk.provider_export == "open":
        rules.add(RuleId.R03)
    if ck.add_javascript_interface:
        rules.add(RuleId.R04)
    if ck.get_device_id:
        rules.add(RuleId.R05)
    if mk.permission_level in ("normal", "unset"):
        rules.add(RuleId.R06)
    if ck.set_allow_file_access is True or (
        _references_webkit(ck) and ck.set_allow_file_access is not False
    ):
        rules.add(RuleId.R07)
    if ck.set_javascript_enabled is True:
        rules.add(RuleId.R08)
    if not ck.root_check_strings:
        rules.add(RuleId.R09)
    if mk.allow_backup is not False:
        rules.add(RuleId.R10)
    if ck.file_delete:
        rules.add(RuleId.R11)
    if not ck.signature_check:
        rules.add(RuleId.R12)
    if not ck.flag_secure:
        rules.add(RuleId.R13)
    if not ck.installer_check:
        rules.add(RuleId.R14)
    return frozenset(rules)


def validate_profile(profile: FixtureProfile) -> None:
    implied = implied_rules(profile.manifest_knobs, profile.code_knobs)
    if implied != profile.positive_rules:
        missing = sorted(r.value for r in profile.positive_rules - implied)
        extra = sorted(r.value for r in implied - profile.positive_rules)
        raise InconsistentProfileError(
            f"profile {profile.name!r}: knobs imply extra={extra} missing={missing}"
        )


def profile_for_rules(name: str, rules: set[RuleId] | frozenset[RuleId]) -> FixtureProfile:
    """Derive a consistent knob assignment for a target rule set."""
    rules = frozenset(rules)
    mk = ManifestKnobs(
        allow_backup=None if RuleId.R10 in rules else False,
        provider_export="open" if RuleId.R03 in rules else "none",
        permission_level="normal" if RuleId.R06 in rules else None,
        empty_intent_filter=RuleId.R02 in rules,
        target_sdk=28,
    )
    if RuleId.R08 in rules:
        set_js = True
    elif RuleId.R07 in rules:
        set_js = False  # WebView in use with JavaScript switched off
    else:
        set_js = None
    if RuleId.R07 in rules:
        set_fa = True
    elif RuleId.R04 in rules or set_js is not None:
        set_fa = False  # must disarm the enabled-by-default detection
    else:
        set_fa = None
    ck = CodeKnobs(
        implicit_start_service=RuleId.R01 in rules,
        add_javascript_interface=RuleId.R04 in rules,
        get_device_id=RuleId.R05 in rules,
        set_javascript_enabled=set_js,
        set_allow_file_access=set_fa,
        root_check_strings=RuleId.R09 not in rules,
        file_delete=RuleId.R11 in rules,
        signature_check=RuleId.R12 not in rules,
        flag_secure=RuleId.R13 not in rules,
        installer_check=RuleId.R14 not in rules,
    )
    profile = FixtureProfile(name=name, positive_rules=rules, manifest_knobs=mk, code_knobs=ck)
    validate_profile(profile)
    return profile


def clean_profile(name: str = "clean") -> FixtureProfile:
    """Hardened manifest, all defensive markers present: every rule negative."""
    return profile_for_rules(name, frozenset())


def _negative_profile(rule: RuleId) -> FixtureProfile:
    """All-negative fixture whose knobs sit as close to the rule as possible."""
    base = clean_profile(f"{rule.value.lower()}-negative")
    mk, ck = base.manifest_knobs, base.code_knobs
    if rule == RuleId.R03:
        mk = replace(mk, provider_export="guarded")
    elif rule == RuleId.R06:
        mk = replace(mk, permission_level="signature")
    elif rule in (RuleId.R04, RuleId.R07):
        ck = replace(ck, set_allow_file_access=False)
    elif rule == RuleId.R08:
        ck = replace(ck, set_javascript_enabled=False, set_allow_file_access=False)
    profile = FixtureProfile(
        name=base.name, positive_rules=frozenset(), manifest_knobs=mk, code_knobs=ck
    )
    validate_profile(profile)
    return profile


def rule_oracle_corpus() -> list[FixtureProfile]:
    """28 fixtures: one single-positive and one negative per rule."""
    corpus = [
        profile_for_rules(f"{rule.value.lower()}-positive", frozenset({rule}))
        for rule in RuleId
    ]
    corpus.extend(_negative_profile(rule) for rule in RuleId)
    return corpus


# Reference fleet: six banking-app profiles for the comparison matrix.
_FLEET_RULES: dict[str, frozenset[RuleId]] = {
    "starling-like": frozenset({RuleId.R10, RuleId.R11, RuleId.R13}),
    "monese-like": frozenset(
        {RuleId.R01, RuleId.R04, RuleId.R05, RuleId.R07, RuleId.R08, RuleId.R11, RuleId.R13}
    ),
    "atom-like": frozenset({RuleId.R07, RuleId.R08, RuleId.R09, RuleId.R11, RuleId.R14}),
    "transferwise-like": frozenset(
        {RuleId.R05, RuleId.R07, RuleId.R08, RuleId.R09, RuleId.R11}
    ),
    "monzo-like": frozenset({RuleId.R07, RuleId.R09, RuleId.R11, RuleId.R13, RuleId.R14}),
    "revolut-like": frozenset(
        {
            RuleId.R01, RuleId.R02, RuleId.R03, RuleId.R06, RuleId.R07,
            RuleId.R09, RuleId.R11, RuleId.R12, RuleId.R13, RuleId.R14,
        }
    ),
}


def fleet_profiles() -> list[FixtureProfile]:
    """The six reference fleet profiles, in fixed order."""
    return [profile_for_rules(name, rules) for name, rules in _FLEET_RULES.items()]


# ---------------------------------------------------------------------------
# Knob realization: manifest element tree and dex method sketches
# ---------------------------------------------------------------------------


def manifest_element(package: str, mk: ManifestKnobs) -> Elem:
    A = ANDROID_NS
    root = Elem("manifest", [(None, "package", package)])
    sdk_attrs: list = [(A, "minSdkVersion", 21)]
    if mk.target_sdk is not None:
        sdk_attrs.append((A, "targetSdkVersion", mk.target_sdk))
    root.children.append(Elem("uses-sdk", sdk_attrs))

    if mk.permission_level is not None:
        perm_attrs: list = [(A, "name", f"{package}.permission.MESSAGES")]
        if mk.permission_level == "normal":
            perm_attrs.append((A, "protectionLevel", 0))
        elif mk.permission_level == "signature":
            perm_attrs.append((A, "protectionLevel", 2))
        # "unset" omits the protectionLevel attribute entirely
        root.children.append(Elem("permission", perm_attrs))

    app_attrs: list = []
    if mk.allow_backup is not None:
        app_attrs.append((A, "allowBackup", mk.allow_backup))
    app = Elem("application", app_attrs)
    app.children.append(
        Elem(
            "activity",
            [(A, "name", f"{package}.Main")],
            [
                Elem(
                    "intent-filter",
                    [],
                    [
                        Elem("action", [(A, "name", "android.intent.action.MAIN")]),
                        Elem("category", [(A, "name", "android.intent.category.LAUNCHER")]),
                    ],
                )
            ],
        )
    )
    if mk.empty_intent_filter:
        app.children.append(
            Elem(
                "receiver",
                [(A, "name", f"{package}.SyncReceiver")],
                [
                    Elem(
                        "intent-filter",
                        [],
                        [Elem("category", [(A, "name", "android.intent.category.DEFAULT")])],
                    )
                ],
            )
        )
    if mk.provider_export != "none":
        p_attrs: list = [
            (A, "name", f"{package}.DataProvider"),
            (A, "authorities", f"{package}.data"),
        ]
        if mk.provider_export == "open":
            p_attrs.append((A, "exported", True))
        elif mk.provider_export == "guarded":
            p_attrs.append((A, "exported", True))
            p_attrs.append((A, "permission", f"{package}.permission.MESSAGES"))
        elif mk.provider_export == "private":
            p_attrs.append((A, "exported", False))
        app.children.append(Elem("provider", p_attrs))
    root.children.append(app)
    return root


_INTENT_ACTION_CTOR: Proto = ("V", (STRING,))


def method_sketches(ck: CodeKnobs) -> list[MethodSketch]:
    sketches: list[MethodSketch] = []

    if ck.implicit_start_service:
        sketches.append(
            MethodSketch(
                "startSyncService",
                [
                    ("new-instance", 0, INTENT),
                    ("const-string", 1, "fixture.intent.action.SYNC"),
                    ("invoke-direct", [0, 1], (INTENT, "<init>", _INTENT_ACTION_CTOR)),
                    (
                        "invoke-virtual",
                        [2, 0],
                        (CONTEXT, "startService", (COMPONENT_NAME, (INTENT,))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if ck.add_javascript_interface:
        sketches.append(
            MethodSketch(
                "bindJsBridge",
                [
                    ("const-string", 1, "HostBridge"),
                    (
                        "invoke-virtual",
                        [0, 2, 1],
                        (WEBVIEW, "addJavascriptInterface", ("V", (OBJECT, STRING))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if ck.get_device_id:
        sketches.append(
            MethodSketch(
                "readDeviceId",
                [
                    ("invoke-virtual", [0], (TELEPHONY, "getDeviceId", (STRING, ()))),
                    ("return-void",),
                ],
            )
        )
    if ck.set_javascript_enabled is not None:
        sketches.append(
            MethodSketch(
                "configureJavascript",
                [
                    ("const4", 1, 1 if ck.set_javascript_enabled else 0),
                    (
                        "invoke-virtual",
                        [0, 1],
                        (WEBSETTINGS, "setJavaScriptEnabled", ("V", ("Z",))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if ck.set_allow_file_access is not None:
        sketches.append(
            MethodSketch(
                "configureFileAccess",
                [
                    ("const4", 1, 1 if ck.set_allow_file_access else 0),
                    (
                        "invoke-virtual",
                        [0, 1],
                        (WEBSETTINGS, "setAllowFileAccess", ("V", ("Z",))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if ck.root_check_strings:
        sketches.append(
            MethodSketch(
                "detectRootBinaries",
                [
                    ("const-string", 0, "/system/xbin/su"),
                    ("const-string", 1, "test-keys"),
                    ("return-void",),
                ],
            )
        )
    if ck.file_delete:
        sketches.append(
            MethodSketch(
                "purgeCachedStatements",
                [
                    ("invoke-virtual", [0], (JFILE, "delete", ("Z", ()))),
                    ("return-void",),
                ],
            )
        )
    if ck.signature_check:
        sketches.append(
            MethodSketch(
                "verifyPackageSignature",
                [
                    ("const-class", 3, SIGNATURE),
                    ("const4", 2, 0),
                    (
                        "invoke-virtual",
                        [0, 1, 2],
                        (PKG_MANAGER, "getPackageInfo", (PKG_INFO, (STRING, "I"))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if ck.flag_secure:
        sketches.append(
            MethodSketch(
                "blockScreenCapture",
                [
                    ("const16", 1, 0x2000),
                    ("invoke-virtual", [0, 1], (WINDOW, "addFlags", ("V", ("I",)))),
                    ("return-void",),
                ],
            )
        )
    if ck.installer_check:
        sketches.append(
            MethodSketch(
                "verifyInstallerSource",
                [
                    ("const-string", 1, "fixture.installer.check"),
                    (
                        "invoke-virtual",
                        [0, 1],
                        (PKG_MANAGER, "getInstallerPackageName", (STRING, (STRING,))),
                    ),
                    ("return-void",),
                ],
            )
        )
    if not sketches:
        sketches.append(MethodSketch("appEntry", [("nop",), ("return-void",)]))
    return sketches
