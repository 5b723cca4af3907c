"""Structured view of a decoded AndroidManifest.xml.

Maps the raw AXML element tree onto the handful of facts the detection
rules consult: package identity, SDK levels, backup/debug flags, the four
component kinds with their intent filters, and declared permissions with
their protection levels. Tri-state attributes distinguish an explicit
``false`` from the attribute being absent, because several Android
defaults depend on exactly that.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .axml import ANDROID_NS, AxmlDocument, AxmlElement, AxmlError, ResourceRef

logger = logging.getLogger(__name__)

COMPONENT_KINDS = ("activity", "service", "receiver", "provider")

# Content providers default to exported below this target SDK.
_PROVIDER_EXPORT_DEFAULT_SDK = 17

_PROTECTION_BY_CODE = {
    0: "normal",
    1: "dangerous",
    2: "signature",
    3: "signatureOrSystem",
}
_PROTECTION_NAMES = set(_PROTECTION_BY_CODE.values())


class ManifestError(AxmlError):
    """Base class for manifest-model failures."""


class NotAManifestError(ManifestError):
    """Document root element is not <manifest>."""


class MissingPackageNameError(ManifestError):
    """Manifest has no (or an empty) package attribute."""


@dataclass(frozen=True)
class IntentFilterDecl:
    actions: tuple[str, ...]
    categories: tuple[str, ...]
    data_specs: tuple[str, ...]


@dataclass(frozen=True)
class ComponentDecl:
    kind: str
    name: str
    exported: bool | None
    permission: str | None
    intent_filters: tuple[IntentFilterDecl, ...]


@dataclass(frozen=True)
class PermissionDecl:
    name: str
    protection_level: str  # normal | dangerous | signature | signatureOrSystem | unset


@dataclass(frozen=True)
class ApplicationAttrs:
    allow_backup: bool | None
    debuggable: bool | None


@dataclass(frozen=True)
class ManifestModel:
    package_name: str
    min_sdk: int | None
    target_sdk: int | None
    application: ApplicationAttrs
    components: tuple[ComponentDecl, ...]
    declared_permissions: tuple[PermissionDecl, ...]

    def effective_exported(self, component: ComponentDecl) -> bool:
        return effective_exported(component, self.target_sdk)


def effective_exported(component: ComponentDecl, target_sdk: int | None) -> bool:
    """Resolve the Android export default for a component.

    Explicit android:exported always wins. Otherwise activities, services
    and receivers export iff they declare an intent filter, while providers
    follow the SDK rule: exported by default below target SDK 17, private
    from 17 on. An absent target SDK takes the conservative (exported)
    branch.
    """
    if component.exported is not None:
        return component.exported
    if component.kind == "provider":
        if target_sdk is None:
            return True
        return target_sdk < _PROVIDER_EXPORT_DEFAULT_SDK
    return len(component.intent_filters) > 0


def _as_bool(value) -> bool | None:
    # Exotic encodings count as unset rather than guessed.
    return value if isinstance(value, bool) else None


def _bool_attr(elem: AxmlElement, name: str) -> bool | None:
    value = elem.attr(name)
    if isinstance(value, ResourceRef):
        logger.warning(
            "boolean attribute %s holds resource reference 0x%08x; treating as unset",
            name,
            value.resource_id,
        )
        return None
    return _as_bool(value)


def _as_int(value) -> int | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, str) and value.isdigit():
        return int(value)
    return None


def _as_str(value) -> str | None:
    return value if isinstance(value, str) else None


def _protection_level(value) -> str:
    if isinstance(value, bool) or value is None:
        return "unset"
    if isinstance(value, int):
        return _PROTECTION_BY_CODE.get(value & 0xF, "unset")
    if isinstance(value, str) and value in _PROTECTION_NAMES:
        return value
    return "unset"


def _intent_filter(elem: AxmlElement) -> IntentFilterDecl:
    actions = []
    categories = []
    data_specs = []
    for child in elem.children:
        name = _as_str(child.attr("name"))
        if child.name == "action" and name:
            actions.append(name)
        elif child.name == "category" and name:
            categories.append(name)
        elif child.name == "data":
            for a in child.attributes:
                if a.namespace == ANDROID_NS and a.value is not None:
                    data_specs.append(f"{a.name}={a.value}")
    return IntentFilterDecl(tuple(actions), tuple(categories), tuple(data_specs))


def _component(elem: AxmlElement) -> ComponentDecl | None:
    name = _as_str(elem.attr("name"))
    return ComponentDecl(
        kind=elem.name,
        name=name or "(unnamed)",
        exported=_bool_attr(elem, "exported"),
        permission=_as_str(elem.attr("permission")),
        intent_filters=tuple(
            _intent_filter(f) for f in elem.find_all("intent-filter")
        ),
    )


def build_manifest_model(doc: AxmlDocument) -> ManifestModel:
    """Project a decoded manifest document onto the analysis model."""
    root = doc.root
    if root.name != "manifest":
        raise NotAManifestError(f"root element is <{root.name}>, not <manifest>")
    package = _as_str(root.attr("package", namespace=None))
    if not package:
        raise MissingPackageNameError("manifest has no package name")

    min_sdk = target_sdk = None
    for sdk in root.find_all("uses-sdk"):
        min_sdk = _as_int(sdk.attr("minSdkVersion"))
        target_sdk = _as_int(sdk.attr("targetSdkVersion"))

    permissions = [
        PermissionDecl(
            name=_as_str(p.attr("name")) or "(unnamed)",
            protection_level=_protection_level(p.attr("protectionLevel")),
        )
        for p in root.find_all("permission")
    ]

    allow_backup = debuggable = None
    components: list[ComponentDecl] = []
    for app in root.find_all("application"):
        allow_backup = _bool_attr(app, "allowBackup")
        debuggable = _bool_attr(app, "debuggable")
        for child in app.children:
            if child.name in COMPONENT_KINDS:
                comp = _component(child)
                if comp is not None:
                    components.append(comp)

    return ManifestModel(
        package_name=package,
        min_sdk=min_sdk,
        target_sdk=target_sdk,
        application=ApplicationAttrs(allow_backup=allow_backup, debuggable=debuggable),
        components=tuple(components),
        declared_permissions=tuple(permissions),
    )
