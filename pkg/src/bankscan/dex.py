"""DEX bytecode parsing.

Parses Dalvik executable files just far enough for rule queries: which
methods are invoked where, which string constants exist, and what integer
literal precedes a given call. The id sections (strings, types, protos,
fields, methods) are fully decoded and bounds-checked; instruction streams
are walked with the published opcode format table so every instruction's
width is known, but operands are only materialized for the const and
invoke families.

Register dataflow is deliberately not modeled: ``literal_reaching`` is a
bounded linear back-scan that ignores which register a const targets, so it
over- and under-approximates on reordered or obfuscated code.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER_SIZE = 0x70
ENDIAN_CONSTANT = 0x12345678
_MAGIC_VERSIONS = (b"035\x00", b"037\x00", b"038\x00", b"039\x00")

NO_INDEX = 0xFFFFFFFF

OP_CONST_4 = 0x12
OP_CONST_16 = 0x13
OP_CONST = 0x14
CONST_OPS = (OP_CONST_4, OP_CONST_16, OP_CONST)

# invoke-virtual .. invoke-interface, then the /range variants.
INVOKE_OPS = frozenset(range(0x6E, 0x73)) | frozenset(range(0x74, 0x79))

DEFAULT_LOOKBACK = 8


class DexError(Exception):
    """Base class for DEX parse failures."""


class BadMagicError(DexError):
    """File does not start with a supported dex magic."""


class BadEndianTagError(DexError):
    """Header endian tag is not the little-endian constant."""


class SectionOutOfBoundsError(DexError):
    """A section offset, index or length points outside the file."""


class MalformedUleb128Error(DexError):
    """A ULEB128 value is truncated or longer than five bytes."""


# ---------------------------------------------------------------------------
# Instruction format table. One entry per opcode byte; the format name keys
# into _FORMAT_UNITS for the instruction width in 16-bit code units.
# ---------------------------------------------------------------------------

_FORMAT_UNITS = {
    "10x": 1, "12x": 1, "11n": 1, "11x": 1, "10t": 1,
    "20t": 2, "20bc": 2, "22x": 2, "21t": 2, "21s": 2, "21h": 2, "21c": 2,
    "23x": 2, "22b": 2, "22t": 2, "22s": 2, "22c": 2, "22cs": 2,
    "30t": 3, "32x": 3, "31i": 3, "31t": 3, "31c": 3,
    "35c": 3, "35ms": 3, "35mi": 3, "3rc": 3, "3rms": 3, "3rmi": 3,
    "45cc": 4, "4rcc": 4,
    "51l": 5,
}


def _build_format_table() -> tuple[str, ...]:
    fmt = ["10x"] * 256  # unused opcodes default to a single code unit

    def put(ops, name):
        for op in ops:
            fmt[op] = name

    put([0x01, 0x04, 0x07], "12x")                  # move family
    put([0x02, 0x05, 0x08], "22x")
    put([0x03, 0x06, 0x09], "32x")
    put(range(0x0A, 0x0E), "11x")                   # move-result*/exception
    put([0x0F, 0x10, 0x11], "11x")                  # return*
    put([0x12], "11n")                              # const/4
    put([0x13, 0x16], "21s")                        # const/16, const-wide/16
    put([0x14, 0x17], "31i")                        # const, const-wide/32
    put([0x15, 0x19], "21h")                        # const/high16 variants
    put([0x18], "51l")                              # const-wide
    put([0x1A], "21c")                              # const-string
    put([0x1B], "31c")                              # const-string/jumbo
    put([0x1C], "21c")                              # const-class
    put([0x1D, 0x1E], "11x")                        # monitor-enter/exit
    put([0x1F], "21c")                              # check-cast
    put([0x20], "22c")                              # instance-of
    put([0x21], "12x")                              # array-length
    put([0x22], "21c")                              # new-instance
    put([0x23], "22c")                              # new-array
    put([0x24], "35c")                              # filled-new-array
    put([0x25], "3rc")
    put([0x26], "31t")                              # fill-array-data
    put([0x27], "11x")                              # throw
    put([0x28], "10t")                              # goto
    put([0x29], "20t")
    put([0x2A], "30t")
    put([0x2B, 0x2C], "31t")                        # packed/sparse-switch
    put(range(0x2D, 0x32), "23x")                   # cmp family
    put(range(0x32, 0x38), "22t")                   # if-test
    put(range(0x38, 0x3E), "21t")                   # if-testz
    put(range(0x44, 0x4B), "23x")                   # aget family
    put(range(0x4B, 0x52), "23x")                   # aput family
    put(range(0x52, 0x59), "22c")                   # iget family
    put(range(0x59, 0x60), "22c")                   # iput family
    put(range(0x60, 0x67), "21c")                   # sget family
    put(range(0x67, 0x6E), "21c")                   # sput family
    put(range(0x6E, 0x73), "35c")                   # invoke-kind
    put(range(0x74, 0x79), "3rc")                   # invoke-kind/range
    put(range(0x7B, 0x90), "12x")                   # unops
    put(range(0x90, 0xB0), "23x")                   # binops
    put(range(0xB0, 0xD0), "12x")                   # binop/2addr
    put(range(0xD0, 0xD8), "22s")                   # binop/lit16
    put(range(0xD8, 0xE3), "22b")                   # binop/lit8
    put([0xFA], "45cc")                             # invoke-polymorphic
    put([0xFB], "4rcc")
    put([0xFC], "35c")                              # invoke-custom
    put([0xFD], "3rc")
    put([0xFE, 0xFF], "21c")                        # const-method-handle/type
    return tuple(fmt)


OPCODE_FORMATS: tuple[str, ...] = _build_format_table()

_PACKED_SWITCH_IDENT = 0x0100
_SPARSE_SWITCH_IDENT = 0x0200
_FILL_ARRAY_IDENT = 0x0300


@dataclass(frozen=True)
class MethodRef:
    owner: str   # defining type descriptor, e.g. Landroid/webkit/WebView;
    name: str
    shorty: str  # condensed signature, e.g. VL for (ref)void


@dataclass(frozen=True)
class Instruction:
    opcode: int
    offset: int        # byte offset inside the method's instruction stream
    units: int         # width in 16-bit code units
    literal: int | None = None       # const/4, const/16, const
    method_index: int | None = None  # invoke family


@dataclass(frozen=True)
class MethodBody:
    owner: str
    name: str
    instructions: tuple[Instruction, ...]


@dataclass(frozen=True)
class ClassDef:
    type_name: str
    methods: tuple[MethodBody, ...]


@dataclass(frozen=True)
class InvocationSite:
    caller: tuple[str, str]  # (class descriptor, method name)
    callee: MethodRef
    offset: int


@dataclass(frozen=True)
class DexImage:
    string_pool: tuple[str, ...]
    type_names: tuple[str, ...]
    method_refs: tuple[MethodRef, ...]
    classes: tuple[ClassDef, ...]
    source_name: str = "classes.dex"

    def bodies(self):
        for cls in self.classes:
            yield from cls.methods


def _uleb128(data: bytes, pos: int, limit: int) -> tuple[int, int]:
    result = 0
    shift = 0
    for i in range(5):
        if pos + i >= limit:
            raise MalformedUleb128Error(f"uleb128 truncated at offset {pos + i:#x}")
        byte = data[pos + i]
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, i + 1
        shift += 7
    raise MalformedUleb128Error(f"uleb128 longer than 5 bytes at offset {pos:#x}")


def _check_section(file_len: int, off: int, count: int, item_size: int, what: str) -> None:
    if count == 0:
        return
    if off > file_len or off + count * item_size > file_len:
        raise SectionOutOfBoundsError(
            f"{what} section ({count} items at {off:#x}) extends past end of file"
        )


def parse_dex(data: bytes, source_name: str = "classes.dex") -> DexImage:
    """Parse one DEX file into its queryable image."""
    if len(data) < HEADER_SIZE:
        raise SectionOutOfBoundsError(
            f"file is {len(data)} bytes, shorter than the {HEADER_SIZE}-byte header"
        )
    if data[0:4] != b"dex\n" or data[4:8] not in _MAGIC_VERSIONS:
        raise BadMagicError(f"unsupported dex magic {data[0:8]!r}")
    endian = struct.unpack_from("<I", data, 0x28)[0]
    if endian != ENDIAN_CONSTANT:
        raise BadEndianTagError(f"endian tag {endian:#010x}")

    (
        string_ids_size, string_ids_off,
        type_ids_size, type_ids_off,
        proto_ids_size, proto_ids_off,
        field_ids_size, field_ids_off,
        method_ids_size, method_ids_off,
        class_defs_size, class_defs_off,
    ) = struct.unpack_from("<12I", data, 0x38)

    n = len(data)
    _check_section(n, string_ids_off, string_ids_size, 4, "string_ids")
    _check_section(n, type_ids_off, type_ids_size, 4, "type_ids")
    _check_section(n, proto_ids_off, proto_ids_size, 12, "proto_ids")
    _check_section(n, field_ids_off, field_ids_size, 8, "field_ids")
    _check_section(n, method_ids_off, method_ids_size, 8, "method_ids")
    _check_section(n, class_defs_off, class_defs_size, 32, "class_defs")

    strings = _parse_strings(data, string_ids_off, string_ids_size)

    type_names = []
    for i in range(type_ids_size):
        idx = struct.unpack_from("<I", data, type_ids_off + 4 * i)[0]
        if idx >= len(strings):
            raise SectionOutOfBoundsError(f"type_id {i} names string {idx}, pool has {len(strings)}")
        type_names.append(strings[idx])

    proto_shorties = _parse_protos(data, proto_ids_off, proto_ids_size, strings, len(type_names))
    _validate_fields(data, field_ids_off, field_ids_size, len(type_names), len(strings))

    method_refs = []
    for i in range(method_ids_size):
        class_idx, proto_idx, name_idx = struct.unpack_from(
            "<HHI", data, method_ids_off + 8 * i
        )
        if class_idx >= len(type_names) or proto_idx >= len(proto_shorties) or name_idx >= len(strings):
            raise SectionOutOfBoundsError(f"method_id {i} has out-of-range indices")
        method_refs.append(
            MethodRef(owner=type_names[class_idx], name=strings[name_idx], shorty=proto_shorties[proto_idx])
        )

    classes = []
    for i in range(class_defs_size):
        class_idx, _access, _super, _ifaces, _src, _anno, class_data_off, _statics = (
            struct.unpack_from("<8I", data, class_defs_off + 32 * i)
        )
        if class_idx >= len(type_names):
            raise SectionOutOfBoundsError(f"class_def {i} names type {class_idx}")
        owner = type_names[class_idx]
        methods = ()
        if class_data_off:
            if class_data_off >= n:
                raise SectionOutOfBoundsError(f"class_data of {owner} at {class_data_off:#x}")
            methods = _parse_class_data(data, class_data_off, owner, method_refs)
        classes.append(ClassDef(type_name=owner, methods=methods))

    return DexImage(
        string_pool=tuple(strings),
        type_names=tuple(type_names),
        method_refs=tuple(method_refs),
        classes=tuple(classes),
        source_name=source_name,
    )


def _parse_strings(data: bytes, off: int, count: int) -> list[str]:
    n = len(data)
    out = []
    for i in range(count):
        data_off = struct.unpack_from("<I", data, off + 4 * i)[0]
        if data_off >= n:
            raise SectionOutOfBoundsError(f"string_data of string {i} at {data_off:#x}")
        _utf16_len, consumed = _uleb128(data, data_off, n)
        start = data_off + consumed
        end = data.find(b"\x00", start)
        if end < 0:
            raise SectionOutOfBoundsError(f"string {i} is not NUL terminated")
        # MUTF-8 differs from UTF-8 only for embedded NULs and supplementary
        # characters; tolerant decoding is fine for matching purposes.
        out.append(data[start:end].decode("utf-8", "replace"))
    return out


def _parse_protos(data, off, count, strings, type_count) -> list[str]:
    n = len(data)
    shorties = []
    for i in range(count):
        shorty_idx, return_idx, params_off = struct.unpack_from("<3I", data, off + 12 * i)
        if shorty_idx >= len(strings) or return_idx >= type_count:
            raise SectionOutOfBoundsError(f"proto_id {i} has out-of-range indices")
        if params_off:
            if params_off + 4 > n:
                raise SectionOutOfBoundsError(f"proto_id {i} type_list at {params_off:#x}")
            size = struct.unpack_from("<I", data, params_off)[0]
            if params_off + 4 + 2 * size > n:
                raise SectionOutOfBoundsError(f"proto_id {i} type_list overruns file")
            for j in range(size):
                t = struct.unpack_from("<H", data, params_off + 4 + 2 * j)[0]
                if t >= type_count:
                    raise SectionOutOfBoundsError(f"proto_id {i} parameter {j} names type {t}")
        shorties.append(strings[shorty_idx])
    return shorties


def _validate_fields(data, off, count, type_count, string_count) -> None:
    for i in range(count):
        class_idx, type_idx, name_idx = struct.unpack_from("<HHI", data, off + 8 * i)
        if class_idx >= type_count or type_idx >= type_count or name_idx >= string_count:
            raise SectionOutOfBoundsError(f"field_id {i} has out-of-range indices")


def _parse_class_data(data, off, owner, method_refs) -> tuple[MethodBody, ...]:
    n = len(data)
    pos = off
    static_fields, c = _uleb128(data, pos, n); pos += c
    instance_fields, c = _uleb128(data, pos, n); pos += c
    direct_methods, c = _uleb128(data, pos, n); pos += c
    virtual_methods, c = _uleb128(data, pos, n); pos += c

    for _ in range(static_fields + instance_fields):
        _, c = _uleb128(data, pos, n); pos += c  # field_idx_diff
        _, c = _uleb128(data, pos, n); pos += c  # access_flags

    bodies = []
    for group_size in (direct_methods, virtual_methods):
        method_idx = 0
        for i in range(group_size):
            diff, c = _uleb128(data, pos, n); pos += c
            _, c = _uleb128(data, pos, n); pos += c  # access_flags
            code_off, c = _uleb128(data, pos, n); pos += c
            method_idx = diff if i == 0 else method_idx + diff
            if method_idx >= len(method_refs):
                raise SectionOutOfBoundsError(
                    f"class_data of {owner} references method {method_idx}"
                )
            ref = method_refs[method_idx]
            instructions: tuple[Instruction, ...] = ()
            if code_off:
                instructions = _parse_code_item(data, code_off, owner, ref.name)
                for ins in instructions:
                    if ins.method_index is not None and ins.method_index >= len(method_refs):
                        raise SectionOutOfBoundsError(
                            f"invoke in {owner}->{ref.name} names method {ins.method_index}, "
                            f"only {len(method_refs)} defined"
                        )
            bodies.append(MethodBody(owner=owner, name=ref.name, instructions=instructions))
    return tuple(bodies)


def _parse_code_item(data, off, owner, name) -> tuple[Instruction, ...]:
    n = len(data)
    if off + 16 > n:
        raise SectionOutOfBoundsError(f"code_item of {owner}->{name} at {off:#x}")
    insns_size = struct.unpack_from("<I", data, off + 12)[0]
    start = off + 16
    if start + 2 * insns_size > n:
        raise SectionOutOfBoundsError(
            f"instruction stream of {owner}->{name} overruns file"
        )
    return _decode_instructions(data[start : start + 2 * insns_size], owner, name)


def _payload_units(code: bytes, pos: int, ident: int, owner: str, name: str) -> int:
    def halfword(at):
        if at + 2 > len(code):
            raise SectionOutOfBoundsError(
                f"switch/array payload truncated in {owner}->{name}"
            )
        return struct.unpack_from("<H", code, at)[0]

    size = halfword(pos + 2)
    if ident == _PACKED_SWITCH_IDENT:
        return size * 2 + 4
    if ident == _SPARSE_SWITCH_IDENT:
        return size * 4 + 2
    width = size  # element_width for fill-array-data
    count_lo = halfword(pos + 4)
    count_hi = halfword(pos + 6)
    count = (count_hi << 16) | count_lo
    return (width * count + 1) // 2 + 4


def _decode_instructions(code: bytes, owner: str, name: str) -> tuple[Instruction, ...]:
    out = []
    pos = 0
    n = len(code)
    while pos < n:
        if pos + 2 > n:
            raise SectionOutOfBoundsError(f"dangling byte in {owner}->{name}")
        op = code[pos]
        high = code[pos + 1]
        if op == 0x00 and (high << 8) in (
            _PACKED_SWITCH_IDENT, _SPARSE_SWITCH_IDENT, _FILL_ARRAY_IDENT
        ):
            units = _payload_units(code, pos, high << 8, owner, name)
        else:
            units = _FORMAT_UNITS[OPCODE_FORMATS[op]]
        width = units * 2
        if pos + width > n:
            raise SectionOutOfBoundsError(
                f"instruction 0x{op:02x} at +{pos:#x} overruns {owner}->{name}"
            )

        literal = None
        method_index = None
        if op == OP_CONST_4:
            nibble = high >> 4
            literal = nibble - 16 if nibble >= 8 else nibble
        elif op == OP_CONST_16:
            literal = struct.unpack_from("<h", code, pos + 2)[0]
        elif op == OP_CONST:
            literal = struct.unpack_from("<i", code, pos + 2)[0]
        elif op in INVOKE_OPS:
            method_index = struct.unpack_from("<H", code, pos + 2)[0]

        out.append(
            Instruction(opcode=op, offset=pos, units=units, literal=literal, method_index=method_index)
        )
        pos += width
    return tuple(out)


# ---------------------------------------------------------------------------
# Rule-facing queries
# ---------------------------------------------------------------------------


def _owner_matches(pattern: str, owner: str) -> bool:
    if pattern.endswith("*"):
        return owner.startswith(pattern[:-1])
    return owner == pattern


def invocations_of(dex: DexImage, owner_pattern: str, method_name: str) -> list[InvocationSite]:
    """Every invoke instruction whose target matches the owner pattern and name.

    The pattern is an exact type descriptor, or a prefix when it ends in ``*``.
    """
    sites = []
    for body in dex.bodies():
        for ins in body.instructions:
            if ins.method_index is None:
                continue
            ref = dex.method_refs[ins.method_index]  # validated at parse time
            if ref.name == method_name and _owner_matches(owner_pattern, ref.owner):
                sites.append(
                    InvocationSite(caller=(body.owner, body.name), callee=ref, offset=ins.offset)
                )
    return sites


def string_pool_matches(
    dex: DexImage, needles: list[str], mode: str = "substring"
) -> list[tuple[str, int]]:
    """Pool strings matching any needle. ``mode`` is ``exact`` or ``substring``."""
    if not needles:
        raise ValueError("needles must be non-empty")
    if mode not in ("exact", "substring"):
        raise ValueError(f"unknown match mode {mode!r}")
    hits = []
    for i, s in enumerate(dex.string_pool):
        for needle in needles:
            if (s == needle) if mode == "exact" else (needle in s):
                hits.append((s, i))
                break
    return hits


def containing_body(dex: DexImage, site: InvocationSite) -> MethodBody:
    """The method body an invocation site was found in."""
    for body in dex.bodies():
        if (body.owner, body.name) != site.caller:
            continue
        for ins in body.instructions:
            if ins.offset == site.offset and ins.method_index is not None:
                if dex.method_refs[ins.method_index] == site.callee:
                    return body
    raise ValueError(f"site {site} does not belong to {dex.source_name}")


def literal_reaching(
    site: InvocationSite, body: MethodBody, max_lookback: int = DEFAULT_LOOKBACK
) -> int | None:
    """Literal of the nearest const/4, const/16 or const before the site.

    Scans at most ``max_lookback`` instructions backwards; returns None when
    no const is found in the window. Register targets are ignored on purpose.
    """
    index = None
    for i, ins in enumerate(body.instructions):
        if ins.offset == site.offset and ins.method_index is not None:
            index = i
            break
    if index is None:
        raise ValueError("invocation site does not belong to this method body")
    for j in range(index - 1, max(-1, index - 1 - max_lookback), -1):
        if body.instructions[j].opcode in CONST_OPS:
            return body.instructions[j].literal
    return None
