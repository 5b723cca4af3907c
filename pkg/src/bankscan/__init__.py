"""bankscan: offline static-analysis vulnerability scanner for Android APKs.

Checks banking-grade Android packages against fourteen detection rules
covering manifest configuration, WebView hardening, privacy-sensitive API
use, and missing defensive code, then renders per-app reports or a fleet
comparison matrix.
"""

from .apk import ApkArchive, ApkError, dex_entry_names, load_apk, open_apk, read_entry
from .axml import AxmlDocument, AxmlError, decode_axml
from .dex import (
    DexError,
    DexImage,
    InvocationSite,
    invocations_of,
    literal_reaching,
    parse_dex,
    string_pool_matches,
)
from .knowledge import (
    countermeasure_for,
    load_knowledge_base,
    threat_for,
    user_countermeasures,
)
from .manifest import ManifestModel, build_manifest_model
from .report import (
    FleetMatrix,
    Report,
    build_fleet_matrix,
    deserialize_matrix,
    deserialize_report,
    render_report,
    serialize,
)
from .rules import (
    Finding,
    RuleId,
    ScanInput,
    ScanResult,
    Severity,
    evaluate_rule,
    run_all_rules,
)
from .scanner import scan_bytes, scan_file

__version__ = "0.1.0"

__all__ = [
    "ApkArchive",
    "ApkError",
    "AxmlDocument",
    "AxmlError",
    "DexError",
    "DexImage",
    "Finding",
    "FleetMatrix",
    "InvocationSite",
    "ManifestModel",
    "Report",
    "RuleId",
    "ScanInput",
    "ScanResult",
    "Severity",
    "build_fleet_matrix",
    "build_manifest_model",
    "countermeasure_for",
    "decode_axml",
    "deserialize_matrix",
    "deserialize_report",
    "dex_entry_names",
    "evaluate_rule",
    "invocations_of",
    "literal_reaching",
    "load_apk",
    "load_knowledge_base",
    "open_apk",
    "parse_dex",
    "read_entry",
    "render_report",
    "run_all_rules",
    "scan_bytes",
    "scan_file",
    "serialize",
    "string_pool_matches",
    "threat_for",
    "user_countermeasures",
]
