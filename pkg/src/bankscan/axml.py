"""Android binary XML (AXML) decoding.

Compiled manifests are chunked little-endian documents: an XML header chunk
(0x0003) wrapping a string pool (0x0001), an optional resource map (0x0180),
and a flat stream of namespace / element begin+end records that describe the
tree. This decoder supports exactly that subset -- the resource map and
cdata chunks are skipped -- and rebuilds the element tree with typed
attribute values.

Attribute lookup downstream is by name within the ``android`` namespace URI;
resource-ID lookup is deliberately not implemented.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

ANDROID_NS = "http://schemas.android.com/apk/res/android"

CHUNK_XML = 0x0003
CHUNK_STRING_POOL = 0x0001
CHUNK_RESOURCE_MAP = 0x0180
CHUNK_NS_START = 0x0100
CHUNK_NS_END = 0x0101
CHUNK_ELEMENT_START = 0x0102
CHUNK_ELEMENT_END = 0x0103
CHUNK_CDATA = 0x0104

# Typed value dataType codes (ResValue).
TYPE_REFERENCE = 0x01
TYPE_STRING = 0x03
TYPE_INT_DEC = 0x10
TYPE_INT_HEX = 0x11
TYPE_INT_BOOLEAN = 0x12

_UTF8_FLAG = 1 << 8
_NO_INDEX = 0xFFFFFFFF


class AxmlError(Exception):
    """Base class for binary-XML decode failures."""


class BadMagicError(AxmlError):
    """Input does not start with the XML chunk type."""


class TruncatedChunkError(AxmlError):
    """A chunk or string runs past its declared bounds."""


class UnbalancedTreeError(AxmlError):
    """Element begin/end records do not form a tree."""


class StringIndexOutOfRangeError(AxmlError):
    """A string reference points outside the string pool."""


@dataclass(frozen=True)
class ResourceRef:
    """A reference-typed attribute value (points at a resource table entry)."""

    resource_id: int


# Decoded attribute values: pool string, integer, boolean, resource
# reference, or None for types this decoder does not interpret.
AttrValue = str | int | bool | ResourceRef | None


@dataclass(frozen=True)
class AxmlAttribute:
    namespace: str | None
    name: str
    value: AttrValue


@dataclass
class AxmlElement:
    namespace: str | None
    name: str
    attributes: tuple[AxmlAttribute, ...]
    children: list["AxmlElement"] = field(default_factory=list)

    def attr(self, name: str, namespace: str | None = ANDROID_NS) -> AttrValue:
        """Value of the first attribute matching (namespace, name), else None."""
        for a in self.attributes:
            if a.name == name and a.namespace == namespace:
                return a.value
        return None

    def find_all(self, name: str) -> list["AxmlElement"]:
        return [c for c in self.children if c.name == name]


@dataclass
class AxmlDocument:
    string_pool: tuple[str, ...]
    root: AxmlElement
    warnings: tuple[str, ...] = ()


class _Cursor:
    """Bounds-checked little-endian reader over a byte window."""

    def __init__(self, data: bytes, pos: int, end: int):
        self.data = data
        self.pos = pos
        self.end = end

    def need(self, n: int) -> None:
        if self.pos + n > self.end:
            raise TruncatedChunkError(
                f"need {n} bytes at offset {self.pos:#x}, only {self.end - self.pos} left"
            )

    def u16(self) -> int:
        self.need(2)
        v = struct.unpack_from("<H", self.data, self.pos)[0]
        self.pos += 2
        return v

    def u32(self) -> int:
        self.need(4)
        v = struct.unpack_from("<I", self.data, self.pos)[0]
        self.pos += 4
        return v

    def skip(self, n: int) -> None:
        self.need(n)
        self.pos += n


def _decode_string_pool(data: bytes, chunk_start: int, chunk_size: int) -> tuple[str, ...]:
    cur = _Cursor(data, chunk_start + 8, chunk_start + chunk_size)
    string_count = cur.u32()
    style_count = cur.u32()
    flags = cur.u32()
    strings_start = cur.u32()
    cur.u32()  # styles_start, unused
    is_utf8 = bool(flags & _UTF8_FLAG)

    # Offsets array must physically fit inside the chunk.
    if 28 + 4 * (string_count + style_count) > chunk_size:
        raise TruncatedChunkError("string pool offset table larger than chunk")
    if strings_start > chunk_size:
        raise TruncatedChunkError("string data starts past end of pool chunk")

    offsets = [cur.u32() for _ in range(string_count)]
    base = chunk_start + strings_start
    limit = chunk_start + chunk_size

    out: list[str] = []
    for off in offsets:
        pos = base + off
        if pos < base or pos >= limit:
            raise TruncatedChunkError(f"string offset {off:#x} outside pool data")
        out.append(_read_string(data, pos, limit, is_utf8))
    return tuple(out)


def _read_varlen(data: bytes, pos: int, limit: int, wide: bool) -> tuple[int, int]:
    # AXML length prefix: one unit, or two with the high bit of the first set.
    if wide:
        if pos + 2 > limit:
            raise TruncatedChunkError("string length prefix truncated")
        first = struct.unpack_from("<H", data, pos)[0]
        if first & 0x8000:
            if pos + 4 > limit:
                raise TruncatedChunkError("string length prefix truncated")
            second = struct.unpack_from("<H", data, pos + 2)[0]
            return ((first & 0x7FFF) << 16) | second, 4
        return first, 2
    if pos >= limit:
        raise TruncatedChunkError("string length prefix truncated")
    first = data[pos]
    if first & 0x80:
        if pos + 2 > limit:
            raise TruncatedChunkError("string length prefix truncated")
        return ((first & 0x7F) << 8) | data[pos + 1], 2
    return first, 1


def _read_string(data: bytes, pos: int, limit: int, is_utf8: bool) -> str:
    if is_utf8:
        _, n = _read_varlen(data, pos, limit, wide=False)  # UTF-16 length, unused
        pos += n
        byte_len, n = _read_varlen(data, pos, limit, wide=False)
        pos += n
        if pos + byte_len > limit:
            raise TruncatedChunkError("UTF-8 string data truncated")
        return data[pos : pos + byte_len].decode("utf-8", "replace")
    unit_len, n = _read_varlen(data, pos, limit, wide=True)
    pos += n
    if pos + 2 * unit_len > limit:
        raise TruncatedChunkError("UTF-16 string data truncated")
    return data[pos : pos + 2 * unit_len].decode("utf-16-le", "replace")


def decode_axml(data: bytes) -> AxmlDocument:
    """Decode binary-XML bytes into a string pool plus a balanced element tree."""
    if len(data) < 8:
        raise BadMagicError("input shorter than a chunk header")
    chunk_type, header_size, declared = struct.unpack_from("<HHI", data, 0)
    if chunk_type != CHUNK_XML:
        raise BadMagicError(f"expected XML chunk type 0x0003, got {chunk_type:#06x}")
    if declared != len(data):
        raise TruncatedChunkError(
            f"declared document size {declared} != input length {len(data)}"
        )
    if header_size < 8 or header_size > len(data):
        raise TruncatedChunkError(f"bad XML chunk header size {header_size}")

    pool: tuple[str, ...] | None = None
    warnings: list[str] = []
    root: AxmlElement | None = None
    stack: list[AxmlElement] = []

    def string_at(idx: int, what: str) -> str:
        if pool is None or idx >= len(pool):
            raise StringIndexOutOfRangeError(
                f"{what} string index {idx} out of range (pool size {0 if pool is None else len(pool)})"
            )
        return pool[idx]

    pos = header_size
    while pos < len(data):
        if pos + 8 > len(data):
            raise TruncatedChunkError(f"chunk header truncated at offset {pos:#x}")
        ctype, chdr, csize = struct.unpack_from("<HHI", data, pos)
        if csize < 8 or chdr < 8 or csize < chdr or pos + csize > len(data):
            raise TruncatedChunkError(
                f"chunk 0x{ctype:04x} at {pos:#x} has bad size {csize}/{chdr}"
            )

        if ctype == CHUNK_STRING_POOL:
            if pool is None:
                pool = _decode_string_pool(data, pos, csize)
            else:
                warnings.append(f"extra string pool at offset {pos:#x} ignored")
        elif ctype in (CHUNK_RESOURCE_MAP, CHUNK_CDATA):
            pass  # not needed for manifest analysis
        elif ctype in (CHUNK_NS_START, CHUNK_NS_END):
            pass  # prefix/URI bookkeeping; attributes carry full URIs already
        elif ctype == CHUNK_ELEMENT_START:
            cur = _Cursor(data, pos + chdr, pos + csize)
            ns_idx = cur.u32()
            name_idx = cur.u32()
            attr_start = cur.u16()
            attr_size = cur.u16()
            attr_count = cur.u16()
            cur.skip(6)  # id/class/style attribute indexes
            if attr_size < 20:
                raise TruncatedChunkError(f"attribute record size {attr_size} too small")
            abase = pos + chdr + attr_start
            if abase + attr_count * attr_size > pos + csize:
                raise TruncatedChunkError("attribute table larger than element chunk")
            attrs = []
            for i in range(attr_count):
                attrs.append(_decode_attribute(data, abase + i * attr_size, string_at, warnings))
            elem = AxmlElement(
                namespace=None if ns_idx == _NO_INDEX else string_at(ns_idx, "element namespace"),
                name=string_at(name_idx, "element name"),
                attributes=tuple(attrs),
            )
            if stack:
                stack[-1].children.append(elem)
            elif root is None:
                root = elem
            else:
                raise UnbalancedTreeError("multiple root elements")
            stack.append(elem)
        elif ctype == CHUNK_ELEMENT_END:
            cur = _Cursor(data, pos + chdr, pos + csize)
            cur.u32()  # namespace
            name_idx = cur.u32()
            if not stack:
                raise UnbalancedTreeError("end tag with no open element")
            open_name = stack.pop().name
            end_name = string_at(name_idx, "end tag name")
            if open_name != end_name:
                raise UnbalancedTreeError(
                    f"end tag {end_name!r} does not close open element {open_name!r}"
                )
        else:
            warnings.append(f"unknown chunk type 0x{ctype:04x} at offset {pos:#x} skipped")
        pos += csize

    if stack:
        raise UnbalancedTreeError(f"{len(stack)} element(s) left open at end of document")
    if root is None:
        raise UnbalancedTreeError("document contains no elements")
    if pool is None:
        raise TruncatedChunkError("document contains no string pool")
    return AxmlDocument(string_pool=pool, root=root, warnings=tuple(warnings))


def _decode_attribute(data, pos, string_at, warnings) -> AxmlAttribute:
    if pos + 20 > len(data):
        raise TruncatedChunkError("attribute record truncated")
    ns_idx, name_idx, _raw, _size, _res0, dtype, dvalue = struct.unpack_from(
        "<IIIHBBI", data, pos
    )
    namespace = None if ns_idx == _NO_INDEX else string_at(ns_idx, "attribute namespace")
    name = string_at(name_idx, "attribute name")

    value: AttrValue
    if dtype == TYPE_STRING:
        value = string_at(dvalue, "attribute value")
    elif dtype in (TYPE_INT_DEC, TYPE_INT_HEX):
        value = dvalue
    elif dtype == TYPE_INT_BOOLEAN:
        value = dvalue != 0
    elif dtype == TYPE_REFERENCE:
        value = ResourceRef(dvalue)
    else:
        warnings.append(f"attribute {name!r}: unhandled value type 0x{dtype:02x}")
        value = None
    return AxmlAttribute(namespace=namespace, name=name, value=value)
