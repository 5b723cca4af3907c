"""Binary-XML (AXML) encoder for synthetic manifests.

Emits the same chunk layout the platform toolchain produces: XML header,
UTF-8 (or UTF-16) string pool, a resource map covering the android
attribute names in use, one namespace scope, and paired element
begin/end records with typed attribute values. Element chunk headers are
16 bytes per the platform's ResChunk layout.

This writer shares no code with the decoder on purpose: round-trips
between the two act as a cross-check in tests.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

ANDROID_NS = "http://schemas.android.com/apk/res/android"

# Attribute resource ids from the public android.R.attr table. Names that
# appear in the resource map must occupy the first string-pool slots, in
# map order.
ATTR_RESOURCE_IDS = {
    "name": 0x01010003,
    "permission": 0x01010006,
    "protectionLevel": 0x01010009,
    "debuggable": 0x0101000F,
    "exported": 0x01010010,
    "authorities": 0x01010018,
    "minSdkVersion": 0x0101020C,
    "targetSdkVersion": 0x01010270,
    "allowBackup": 0x01010280,
}

_TYPE_STRING = 0x03
_TYPE_INT_DEC = 0x10
_TYPE_INT_BOOLEAN = 0x12
_NO_INDEX = 0xFFFFFFFF

AttrSpec = tuple[str | None, str, object]  # (namespace uri, name, value)


@dataclass
class Elem:
    name: str
    attrs: list[AttrSpec] = field(default_factory=list)
    children: list["Elem"] = field(default_factory=list)


def _walk(elem: Elem):
    yield elem
    for child in elem.children:
        yield from _walk(child)


def _collect_strings(root: Elem) -> list[str]:
    mapped: list[str] = []
    rest: list[str] = []

    def add(s: str, is_attr_name: bool = False):
        target = mapped if is_attr_name and s in ATTR_RESOURCE_IDS else rest
        if s not in mapped and s not in rest:
            target.append(s)

    for elem in _walk(root):
        for ns, name, value in elem.attrs:
            add(name, is_attr_name=True)
    for elem in _walk(root):
        add(elem.name)
        for ns, name, value in elem.attrs:
            add(name)
            if ns:
                add(ns)
            if isinstance(value, str):
                add(value)
    add("android")
    add(ANDROID_NS)
    return mapped + rest


def _encode_varlen8(n: int) -> bytes:
    if n > 0x7FFF:
        raise ValueError("string too long for fixture pool")
    if n <= 0x7F:
        return bytes([n])
    return bytes([0x80 | (n >> 8), n & 0xFF])


def _string_pool_chunk(strings: list[str], utf8: bool) -> bytes:
    offsets: list[int] = []
    body = bytearray()
    for s in strings:
        offsets.append(len(body))
        if utf8:
            raw = s.encode("utf-8")
            body += _encode_varlen8(len(s)) + _encode_varlen8(len(raw)) + raw + b"\x00"
        else:
            raw = s.encode("utf-16-le")
            body += struct.pack("<H", len(s)) + raw + b"\x00\x00"
    while len(body) % 4:
        body += b"\x00"

    strings_start = 28 + 4 * len(strings)
    size = strings_start + len(body)
    flags = 0x100 if utf8 else 0
    chunk = bytearray(struct.pack("<HHI", 0x0001, 28, size))
    chunk += struct.pack("<IIIII", len(strings), 0, flags, strings_start, 0)
    for off in offsets:
        chunk += struct.pack("<I", off)
    chunk += body
    return bytes(chunk)


def _resource_map_chunk(strings: list[str]) -> bytes:
    ids = []
    for s in strings:
        if s in ATTR_RESOURCE_IDS:
            ids.append(ATTR_RESOURCE_IDS[s])
        else:
            break  # mapped names are a prefix of the pool
    chunk = struct.pack("<HHI", 0x0180, 8, 8 + 4 * len(ids))
    return chunk + b"".join(struct.pack("<I", i) for i in ids)


def _ns_chunk(chunk_type: int, prefix_idx: int, uri_idx: int) -> bytes:
    return struct.pack(
        "<HHIIIII", chunk_type, 0x10, 0x18, 1, _NO_INDEX, prefix_idx, uri_idx
    )


def _typed_value(value, idx) -> tuple[int, int, int]:
    """(raw_string_index, data_type, data) for one attribute value."""
    if isinstance(value, bool):
        return _NO_INDEX, _TYPE_INT_BOOLEAN, 0xFFFFFFFF if value else 0
    if isinstance(value, int):
        return _NO_INDEX, _TYPE_INT_DEC, value & 0xFFFFFFFF
    if isinstance(value, str):
        return idx[value], _TYPE_STRING, idx[value]
    raise TypeError(f"unsupported attribute value {value!r}")


def _start_chunk(elem: Elem, idx: dict[str, int]) -> bytes:
    body = bytearray()
    body += struct.pack("<II", 1, _NO_INDEX)  # line number, comment
    body += struct.pack("<II", _NO_INDEX, idx[elem.name])
    body += struct.pack("<HHHHHH", 0x14, 0x14, len(elem.attrs), 0, 0, 0)
    for ns, name, value in elem.attrs:
        raw, dtype, data = _typed_value(value, idx)
        body += struct.pack(
            "<IIIHBBI",
            idx[ns] if ns else _NO_INDEX,
            idx[name],
            raw,
            8, 0, dtype, data,
        )
    return struct.pack("<HHI", 0x0102, 0x10, 8 + len(body)) + bytes(body)


def _end_chunk(elem: Elem, idx: dict[str, int]) -> bytes:
    return struct.pack(
        "<HHIIIII", 0x0103, 0x10, 0x18, 1, _NO_INDEX, _NO_INDEX, idx[elem.name]
    )


def encode_document(root: Elem, utf8: bool = True) -> bytes:
    """Encode an element tree as a complete AXML document."""
    strings = _collect_strings(root)
    idx = {s: i for i, s in enumerate(strings)}

    chunks = [_string_pool_chunk(strings, utf8), _resource_map_chunk(strings)]
    chunks.append(_ns_chunk(0x0100, idx["android"], idx[ANDROID_NS]))

    def emit(elem: Elem):
        chunks.append(_start_chunk(elem, idx))
        for child in elem.children:
            emit(child)
        chunks.append(_end_chunk(elem, idx))

    emit(root)
    chunks.append(_ns_chunk(0x0101, idx["android"], idx[ANDROID_NS]))

    payload = b"".join(chunks)
    return struct.pack("<HHI", 0x0003, 8, 8 + len(payload)) + payload
