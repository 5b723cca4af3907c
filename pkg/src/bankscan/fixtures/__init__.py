"""Synthetic APK fixtures: real ZIP + AXML + DEX bytes built from profiles.

Fixtures are generated at test time from code instead of being checked in
as binaries, which keeps them auditable and mutation-friendly; a handful of
golden hashes in the test suite guards against accidental generator drift.
Entries are stored uncompressed by default so the output bytes do not
depend on the local zlib build; pass ``compress=True`` to exercise the
deflate path.

The generated apps are never meant to install or run; they only need to
parse.
"""

from __future__ import annotations

import io
import zipfile

from .axml_writer import Elem, encode_document
from .dex_writer import DexArtifact, MethodSketch, emit_dex
from .profiles import (
    CodeKnobs,
    FixtureProfile,
    InconsistentProfileError,
    ManifestKnobs,
    clean_profile,
    fleet_profiles,
    implied_rules,
    manifest_element,
    method_sketches,
    profile_for_rules,
    rule_oracle_corpus,
    validate_profile,
)

__all__ = [
    "CodeKnobs",
    "DexArtifact",
    "Elem",
    "FixtureProfile",
    "InconsistentProfileError",
    "ManifestKnobs",
    "MethodSketch",
    "build_dex",
    "build_fixture",
    "build_manifest_bytes",
    "clean_profile",
    "emit_dex",
    "encode_document",
    "fleet_profiles",
    "implied_rules",
    "manifest_element",
    "method_sketches",
    "pack_apk",
    "profile_for_rules",
    "rule_oracle_corpus",
    "validate_profile",
]


def _class_descriptor(profile_name: str) -> str:
    safe = profile_name.replace("-", "_").replace(".", "_")
    return f"Lfixture/{safe}/Markers;"


def build_manifest_bytes(profile: FixtureProfile) -> bytes:
    return encode_document(manifest_element(f"fixture.{profile.name}", profile.manifest_knobs))


def build_dex(profile: FixtureProfile) -> DexArtifact:
    return emit_dex(_class_descriptor(profile.name), method_sketches(profile.code_knobs))


def pack_apk(entries: list[tuple[str, bytes]], compress: bool = False) -> bytes:
    """Deterministically zip named payloads (fixed timestamps and attributes)."""
    method = zipfile.ZIP_DEFLATED if compress else zipfile.ZIP_STORED
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", method) as zf:
        for name, payload in entries:
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            info.compress_type = method
            info.create_system = 3
            info.external_attr = 0o644 << 16
            zf.writestr(info, payload)
    return buf.getvalue()


def build_fixture(profile: FixtureProfile, compress: bool = False) -> bytes:
    """Emit a complete APK for a validated profile."""
    validate_profile(profile)
    return pack_apk(
        [
            ("AndroidManifest.xml", build_manifest_bytes(profile)),
            ("classes.dex", build_dex(profile).data),
        ],
        compress=compress,
    )
