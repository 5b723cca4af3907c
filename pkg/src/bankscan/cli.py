"""Command-line front end.

Single-file scan, directory batch scan, and fleet matrix emission, fully
offline. Exit codes are a stable contract for CI use:

    0   scan finished, no finding at or above the --fail-on threshold
    1   at least one finding at or above the threshold
    2   usage error
    3   a file could not be read or parsed

Batch mode keeps scanning past broken files and summarizes the failures at
the end; exit code 3 then takes precedence over 1.
"""

from __future__ import annotations

import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .apk import ApkError
from .axml import AxmlError
from .dex import DexError
from .report import build_fleet_matrix, render_report, serialize
from .rules import ScanResult, Severity
from .scanner import scan_file

PROG = "bankscan"
FORMAT_ENV_VAR = "BANKSCAN_FORMAT"
_FORMATS = ("text", "json", "csv")

USAGE = f"""usage: {PROG} [options] [apk ...]

modes (choose one):
  -f, --file APK     scan a single APK and print its report
      --dir PATH     scan every *.apk under PATH (batch); may combine with
                     positional apk arguments
      --matrix       emit the apps-by-rules fleet matrix instead of reports
                     (inputs as for batch mode)
  -h, --help         show this help

options:
  -o, --output PATH  write output to PATH instead of stdout
      --format FMT   output format: text, json or csv
                     (default: ${FORMAT_ENV_VAR} or text)
      --fail-on SEV  exit 1 if any finding is at least SEV
                     (critical, warning, notice, info)
      --jobs N       scan up to N APKs concurrently in batch/matrix mode

exit codes: 0 ok, 1 findings at/above --fail-on, 2 usage error, 3 scan error
"""

_PARSE_ERRORS = (ApkError, AxmlError, DexError)


class CliUsageError(Exception):
    """Bad command line; rendered as usage text with exit code 2."""


class UnknownFlagError(CliUsageError):
    pass


class MissingArgumentError(CliUsageError):
    pass


class ConflictingModesError(CliUsageError):
    pass


@dataclass
class CliConfig:
    mode: str  # scan | batch | matrix | help
    inputs: list[Path] = field(default_factory=list)
    dirs: list[Path] = field(default_factory=list)
    output_path: Path | None = None
    fmt: str | None = None
    fail_threshold: Severity | None = None
    jobs: int = 1


def parse_args(argv: list[str]) -> CliConfig:
    single: Path | None = None
    dirs: list[Path] = []
    positionals: list[Path] = []
    matrix = False
    show_help = False
    output: Path | None = None
    fmt: str | None = None
    fail_on: Severity | None = None
    jobs = 1

    def take_value(flag: str, it) -> str:
        try:
            return next(it)
        except StopIteration:
            raise MissingArgumentError(f"{flag} requires a value") from None

    it = iter(argv)
    for arg in it:
        if arg in ("-h", "--help"):
            show_help = True
        elif arg in ("-f", "--file"):
            if single is not None:
                raise ConflictingModesError("-f given more than once")
            single = Path(take_value(arg, it))
        elif arg == "--dir":
            dirs.append(Path(take_value(arg, it)))
        elif arg == "--matrix":
            matrix = True
        elif arg in ("-o", "--output"):
            output = Path(take_value(arg, it))
        elif arg == "--format":
            fmt = take_value(arg, it)
            if fmt not in _FORMATS:
                raise CliUsageError(f"unknown format {fmt!r}, expected one of {_FORMATS}")
        elif arg == "--fail-on":
            value = take_value(arg, it)
            try:
                fail_on = Severity(value)
            except ValueError:
                raise CliUsageError(
                    f"unknown severity {value!r}, expected critical/warning/notice/info"
                ) from None
        elif arg == "--jobs":
            value = take_value(arg, it)
            if not value.isdigit() or int(value) < 1:
                raise CliUsageError(f"--jobs needs a positive integer, got {value!r}")
            jobs = int(value)
        elif arg.startswith("-") and arg != "-":
            raise UnknownFlagError(f"unknown flag {arg!r}")
        else:
            positionals.append(Path(arg))

    if show_help:
        return CliConfig(mode="help")
    if single is not None and (dirs or matrix or positionals):
        raise ConflictingModesError("-f cannot be combined with --dir, --matrix or positional inputs")
    if single is not None:
        return CliConfig(
            mode="scan",
            inputs=[single],
            output_path=output,
            fmt=fmt,
            fail_threshold=fail_on,
            jobs=jobs,
        )
    if not dirs and not positionals:
        raise MissingArgumentError("no inputs: give -f APK, --dir PATH or positional apk paths")
    return CliConfig(
        mode="matrix" if matrix else "batch",
        inputs=positionals,
        dirs=dirs,
        output_path=output,
        fmt=fmt,
        fail_threshold=fail_on,
        jobs=jobs,
    )


def _resolve_format(config: CliConfig) -> str:
    fmt = config.fmt or os.environ.get(FORMAT_ENV_VAR) or "text"
    if fmt not in _FORMATS:
        raise CliUsageError(
            f"{FORMAT_ENV_VAR}={fmt!r} is not a valid format, expected one of {_FORMATS}"
        )
    return fmt


def _write_output(config: CliConfig, payload: bytes) -> None:
    if config.output_path is not None:
        config.output_path.write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.buffer.flush()


def _threshold_hit(results: list[ScanResult], threshold: Severity | None) -> bool:
    if threshold is None:
        return False
    return any(
        finding.severity.rank >= threshold.rank
        for result in results
        for finding in result.findings
    )


def _collect_inputs(config: CliConfig) -> list[Path]:
    files = list(config.inputs)
    for d in config.dirs:
        files.extend(sorted(d.glob("*.apk")))
    return files


def _scan_many(paths: list[Path], jobs: int):
    """Scan in input order; returns (results, errors) keeping per-path slots."""
    slots: list[ScanResult | None] = [None] * len(paths)
    errors: list[tuple[Path, str]] = []

    def work(i: int):
        try:
            slots[i] = scan_file(paths[i])
        except (*_PARSE_ERRORS, OSError) as exc:
            errors.append((paths[i], f"{type(exc).__name__}: {exc}"))

    if jobs <= 1:
        for i in range(len(paths)):
            work(i)
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, range(len(paths))))
    errors.sort(key=lambda e: paths.index(e[0]))
    return [s for s in slots if s is not None], errors


def execute(config: CliConfig) -> int:
    if config.mode == "help":
        sys.stdout.write(USAGE)
        return 0
    fmt = _resolve_format(config)

    if config.mode == "scan":
        path = config.inputs[0]
        try:
            result = scan_file(path)
        except (*_PARSE_ERRORS, OSError) as exc:
            sys.stderr.write(f"{PROG}: {path}: {type(exc).__name__}: {exc}\n")
            return 3
        _write_output(config, serialize(render_report(result), fmt))
        return 1 if _threshold_hit([result], config.fail_threshold) else 0

    paths = _collect_inputs(config)
    if not paths:
        sys.stderr.write(f"{PROG}: no .apk files found in the given inputs\n")
        return 3
    results, errors = _scan_many(paths, config.jobs)

    if config.mode == "matrix":
        if results:
            _write_output(config, serialize(build_fleet_matrix(results), fmt))
    else:
        chunks = [serialize(render_report(r), fmt) for r in results]
        if fmt == "text":
            payload = b"\n".join(chunks)
        elif fmt == "json":
            payload = b"[\n" + b",\n".join(c.rstrip(b"\n") for c in chunks) + b"\n]\n"
        else:
            payload = b"".join(c if i == 0 else b"\n".join(c.split(b"\n")[1:]) for i, c in enumerate(chunks))
        _write_output(config, payload)

    for path, message in errors:
        sys.stderr.write(f"{PROG}: {path}: {message}\n")
    if errors:
        sys.stderr.write(f"{PROG}: {len(errors)} of {len(paths)} file(s) failed to scan\n")
        return 3
    return 1 if _threshold_hit(results, config.fail_threshold) else 0


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        config = parse_args(argv)
        return execute(config)
    except CliUsageError as exc:
        sys.stderr.write(f"{PROG}: error: {exc}\n\n{USAGE}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
