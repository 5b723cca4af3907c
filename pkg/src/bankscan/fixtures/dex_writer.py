"""DEX emitter for synthetic bytecode fixtures.

Writes real, verifier-shaped dex files without any Android toolchain: a
0x70-byte header with correct adler32 checksum and SHA-1 signature, sorted
string/type/proto/method id sections, one class definition whose direct
methods carry hand-assembled instruction streams, and a trailing map list.
Only the opcode subset the fixtures need is assembled (const family,
const-string/class, new-instance, the invoke family, nop, return-void).

Each emitted artifact records the (owner, name) invocation targets and the
pooled constant strings so tests can use the emitter as an oracle for the
parser and the rules.
"""

from __future__ import annotations

import hashlib
import struct
import zlib
from dataclasses import dataclass, field

OBJECT = "Ljava/lang/Object;"

# (return descriptor, (param descriptors...))
Proto = tuple[str, tuple[str, ...]]
# (owner descriptor, method name, proto)
MRef = tuple[str, str, Proto]

_INVOKE_OPCODES = {
    "invoke-virtual": 0x6E,
    "invoke-super": 0x6F,
    "invoke-direct": 0x70,
    "invoke-static": 0x71,
    "invoke-interface": 0x72,
}

VOID_PROTO: Proto = ("V", ())

_MAP_HEADER = 0x0000
_MAP_STRING_ID = 0x0001
_MAP_TYPE_ID = 0x0002
_MAP_PROTO_ID = 0x0003
_MAP_METHOD_ID = 0x0005
_MAP_CLASS_DEF = 0x0006
_MAP_MAP_LIST = 0x1000
_MAP_TYPE_LIST = 0x1001
_MAP_CLASS_DATA = 0x2000
_MAP_CODE_ITEM = 0x2001
_MAP_STRING_DATA = 0x2002

_NO_INDEX = 0xFFFFFFFF
_ACC_PUBLIC = 0x0001
_ACC_STATIC = 0x0008


@dataclass
class MethodSketch:
    """One method to emit: a name plus symbolic instructions."""

    name: str
    instructions: list[tuple]


@dataclass(frozen=True)
class DexArtifact:
    data: bytes
    invocation_targets: frozenset[tuple[str, str]]
    const_strings: frozenset[str]


def _shorty_char(descriptor: str) -> str:
    c = descriptor[0]
    return c if c in "VZBSCIJFD" else "L"


def _shorty(proto: Proto) -> str:
    ret, params = proto
    return _shorty_char(ret) + "".join(_shorty_char(p) for p in params)


def _uleb(value: int) -> bytes:
    out = bytearray()
    while True:
        b = value & 0x7F
        value >>= 7
        if value:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _pad4(buf: bytearray) -> None:
    while len(buf) % 4:
        buf.append(0)


def _collect(class_descriptor: str, methods: list[MethodSketch]):
    strings: set[str] = set()
    types: set[str] = {class_descriptor, OBJECT}
    protos: set[Proto] = {VOID_PROTO}
    mrefs: set[MRef] = set()
    invocation_targets: set[tuple[str, str]] = set()
    const_strings: set[str] = set()

    for sketch in methods:
        mrefs.add((class_descriptor, sketch.name, VOID_PROTO))
        for ins in sketch.instructions:
            kind = ins[0]
            if kind == "const-string":
                const_strings.add(ins[2])
            elif kind in ("const-class", "new-instance"):
                types.add(ins[2])
            elif kind in _INVOKE_OPCODES:
                owner, name, proto = ins[2]
                mrefs.add((owner, name, proto))
                invocation_targets.add((owner, name))
                types.add(owner)
                protos.add(proto)

    for _, params in protos | {VOID_PROTO}:
        types.update(params)
    for ret, _ in protos:
        types.add(ret)
    types.add("V")

    strings.update(const_strings)
    strings.update(types)
    strings.update(name for _, name, _ in mrefs)
    strings.update(_shorty(p) for p in protos)

    return strings, types, protos, mrefs, invocation_targets, const_strings


def _assemble(ins: tuple, sidx, tidx, midx) -> bytes:
    kind = ins[0]
    if kind == "nop":
        return b"\x00\x00"
    if kind == "return-void":
        return b"\x0e\x00"
    if kind == "const4":
        _, reg, lit = ins
        if not (-8 <= lit <= 7 and 0 <= reg <= 15):
            raise ValueError(f"const4 operands out of range: {ins}")
        return bytes([0x12, ((lit & 0xF) << 4) | reg])
    if kind == "const16":
        _, reg, lit = ins
        return struct.pack("<BBh", 0x13, reg, lit)
    if kind == "const":
        _, reg, lit = ins
        return struct.pack("<BBi", 0x14, reg, lit)
    if kind == "const-string":
        _, reg, text = ins
        return struct.pack("<BBH", 0x1A, reg, sidx[text])
    if kind == "const-class":
        _, reg, t = ins
        return struct.pack("<BBH", 0x1C, reg, tidx[t])
    if kind == "new-instance":
        _, reg, t = ins
        return struct.pack("<BBH", 0x22, reg, tidx[t])
    if kind in _INVOKE_OPCODES:
        _, regs, mref = ins
        if len(regs) > 5 or any(r > 15 for r in regs):
            raise ValueError(f"invoke operands out of range: {ins}")
        padded = list(regs) + [0] * (5 - len(regs))
        c, d, e, f, g = padded
        return struct.pack(
            "<BBHBB",
            _INVOKE_OPCODES[kind],
            (len(regs) << 4) | g,
            midx[mref],
            (d << 4) | c,
            (f << 4) | e,
        )
    raise ValueError(f"unknown instruction {ins!r}")


def _method_frame(sketch: MethodSketch) -> tuple[int, int]:
    """(registers_size, outs_size) for a sketch."""
    max_reg = -1
    outs = 0
    for ins in sketch.instructions:
        kind = ins[0]
        if kind in ("const4", "const16", "const", "const-string", "const-class", "new-instance"):
            max_reg = max(max_reg, ins[1])
        elif kind in _INVOKE_OPCODES:
            regs = ins[1]
            if regs:
                max_reg = max(max_reg, *regs)
            outs = max(outs, len(regs))
    return max_reg + 1, outs


def emit_dex(class_descriptor: str, methods: list[MethodSketch], version: bytes = b"035\x00") -> DexArtifact:
    """Emit one class with the given direct methods as a complete dex file."""
    if len({m.name for m in methods}) != len(methods):
        raise ValueError("method names must be unique")

    strings, types, protos, mrefs, targets, consts = _collect(class_descriptor, methods)

    sorted_strings = sorted(strings)
    sidx = {s: i for i, s in enumerate(sorted_strings)}
    sorted_types = sorted(types, key=lambda t: sidx[t])
    tidx = {t: i for i, t in enumerate(sorted_types)}
    sorted_protos = sorted(protos, key=lambda p: (tidx[p[0]], tuple(tidx[x] for x in p[1])))
    pidx = {p: i for i, p in enumerate(sorted_protos)}
    sorted_mrefs = sorted(mrefs, key=lambda m: (tidx[m[0]], sidx[m[1]], pidx[m[2]]))
    midx = {m: i for i, m in enumerate(sorted_mrefs)}

    header_size = 0x70
    string_ids_off = header_size
    type_ids_off = string_ids_off + 4 * len(sorted_strings)
    proto_ids_off = type_ids_off + 4 * len(sorted_types)
    method_ids_off = proto_ids_off + 12 * len(sorted_protos)
    class_defs_off = method_ids_off + 8 * len(sorted_mrefs)
    data_off = class_defs_off + 32

    data = bytearray()

    def here() -> int:
        return data_off + len(data)

    # type_lists for protos with parameters (deduplicated)
    type_list_offsets: dict[tuple[str, ...], int] = {}
    for _, params in sorted_protos:
        if params and params not in type_list_offsets:
            _pad4(data)
            type_list_offsets[params] = here()
            data += struct.pack("<I", len(params))
            for p in params:
                data += struct.pack("<H", tidx[p])
    type_list_count = len(type_list_offsets)
    first_type_list = min(type_list_offsets.values()) if type_list_offsets else 0

    # code items
    code_offsets: dict[str, int] = {}
    first_code_item = 0
    for sketch in methods:
        _pad4(data)
        if not first_code_item:
            first_code_item = here()
        code_offsets[sketch.name] = here()
        insns = b"".join(_assemble(i, sidx, tidx, midx) for i in sketch.instructions)
        registers, outs = _method_frame(sketch)
        data += struct.pack("<HHHHII", registers, 0, outs, 0, 0, len(insns) // 2)
        data += insns

    # string data
    string_data_offsets = []
    for s in sorted_strings:
        string_data_offsets.append(here())
        raw = s.encode("utf-8")
        data += _uleb(len(s)) + raw + b"\x00"
    first_string_data = string_data_offsets[0] if string_data_offsets else 0

    # class_data: only direct methods, ascending method_idx, diff encoded
    class_data_off = here()
    own = sorted(
        methods, key=lambda m: midx[(class_descriptor, m.name, VOID_PROTO)]
    )
    data += _uleb(0) + _uleb(0) + _uleb(len(own)) + _uleb(0)
    prev_idx = 0
    for i, sketch in enumerate(own):
        mi = midx[(class_descriptor, sketch.name, VOID_PROTO)]
        diff = mi if i == 0 else mi - prev_idx
        prev_idx = mi
        data += _uleb(diff) + _uleb(_ACC_PUBLIC | _ACC_STATIC) + _uleb(code_offsets[sketch.name])

    # map list
    _pad4(data)
    map_off = here()
    entries = [
        (_MAP_HEADER, 1, 0),
        (_MAP_STRING_ID, len(sorted_strings), string_ids_off),
        (_MAP_TYPE_ID, len(sorted_types), type_ids_off),
        (_MAP_PROTO_ID, len(sorted_protos), proto_ids_off),
        (_MAP_METHOD_ID, len(sorted_mrefs), method_ids_off),
        (_MAP_CLASS_DEF, 1, class_defs_off),
    ]
    if type_list_count:
        entries.append((_MAP_TYPE_LIST, type_list_count, first_type_list))
    if methods:
        entries.append((_MAP_CODE_ITEM, len(methods), first_code_item))
    entries.append((_MAP_STRING_DATA, len(sorted_strings), first_string_data))
    entries.append((_MAP_CLASS_DATA, 1, class_data_off))
    entries.append((_MAP_MAP_LIST, 1, map_off))
    entries.sort(key=lambda e: e[2])
    data += struct.pack("<I", len(entries))
    for etype, count, off in entries:
        data += struct.pack("<HHII", etype, 0, count, off)

    file_size = data_off + len(data)

    head = bytearray(header_size)
    head[0:4] = b"dex\n"
    head[4:8] = version
    struct.pack_into("<I", head, 0x20, file_size)
    struct.pack_into("<I", head, 0x24, header_size)
    struct.pack_into("<I", head, 0x28, 0x12345678)
    struct.pack_into("<II", head, 0x2C, 0, 0)  # link section absent
    struct.pack_into("<I", head, 0x34, map_off)
    struct.pack_into("<II", head, 0x38, len(sorted_strings), string_ids_off)
    struct.pack_into("<II", head, 0x40, len(sorted_types), type_ids_off)
    struct.pack_into("<II", head, 0x48, len(sorted_protos), proto_ids_off)
    struct.pack_into("<II", head, 0x50, 0, 0)  # no field_ids
    struct.pack_into("<II", head, 0x58, len(sorted_mrefs), method_ids_off)
    struct.pack_into("<II", head, 0x60, 1, class_defs_off)
    struct.pack_into("<II", head, 0x68, len(data), data_off)

    out = bytearray(head)
    for s in sorted_strings:
        out += struct.pack("<I", string_data_offsets[sidx[s]])
    for t in sorted_types:
        out += struct.pack("<I", sidx[t])
    for ret, params in sorted_protos:
        out += struct.pack(
            "<III",
            sidx[_shorty((ret, params))],
            tidx[ret],
            type_list_offsets[params] if params else 0,
        )
    for owner, name, proto in sorted_mrefs:
        out += struct.pack("<HHI", tidx[owner], pidx[proto], sidx[name])
    out += struct.pack(
        "<8I",
        tidx[class_descriptor],
        _ACC_PUBLIC,
        tidx[OBJECT],
        0,
        _NO_INDEX,
        0,
        class_data_off,
        0,
    )
    out += data
    assert len(out) == file_size

    sha = hashlib.sha1(out[32:]).digest()
    out[12:32] = sha
    struct.pack_into("<I", out, 8, zlib.adler32(bytes(out[12:])) & 0xFFFFFFFF)
    return DexArtifact(
        data=bytes(out),
        invocation_targets=frozenset(targets),
        const_strings=frozenset(consts),
    )
