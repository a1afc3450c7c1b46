"""Minimal protobuf wire-format codec.

Decodes just enough of proto2 to read scenario records: varints,
fixed32/fixed64 scalars, length-delimited fields, and packed repeated
numerics.  The encoders exist for building test fixtures.
"""

import struct
from typing import Iterator

WIRE_VARINT = 0
WIRE_FIXED64 = 1
WIRE_BYTES = 2
WIRE_FIXED32 = 5


class WireError(Exception):
    pass


def read_varint(data: bytes, pos: int) -> tuple[int, int]:
    result = 0
    shift = 0
    while True:
        if pos >= len(data):
            raise WireError("varint runs past end of buffer")
        byte = data[pos]
        pos += 1
        result |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return result, pos
        shift += 7
        if shift > 63:
            raise WireError("varint longer than 64 bits")


def iter_fields(data: bytes) -> Iterator[tuple[int, int, "int | bytes"]]:
    """Yield (field_number, wire_type, value); value is int for varints,
    raw bytes for fixed32/fixed64/length-delimited fields."""
    pos = 0
    while pos < len(data):
        key, pos = read_varint(data, pos)
        field_no, wire_type = key >> 3, key & 0x7
        if wire_type == WIRE_VARINT:
            value, pos = read_varint(data, pos)
        elif wire_type == WIRE_FIXED64:
            value, pos = data[pos : pos + 8], pos + 8
            if len(value) < 8:
                raise WireError(f"field {field_no}: truncated fixed64")
        elif wire_type == WIRE_BYTES:
            length, pos = read_varint(data, pos)
            value, pos = data[pos : pos + length], pos + length
            if len(value) < length:
                raise WireError(f"field {field_no}: truncated bytes field")
        elif wire_type == WIRE_FIXED32:
            value, pos = data[pos : pos + 4], pos + 4
            if len(value) < 4:
                raise WireError(f"field {field_no}: truncated fixed32")
        else:
            raise WireError(f"field {field_no}: unsupported wire type {wire_type}")
        yield field_no, wire_type, value


def as_signed(varint: int) -> int:
    """Interpret a decoded varint as a signed two's-complement int64."""
    return varint - (1 << 64) if varint >= 1 << 63 else varint


def as_double(value: "int | bytes") -> float:
    return struct.unpack("<d", value)[0]


def as_float(value: "int | bytes") -> float:
    return struct.unpack("<f", value)[0]


def doubles_from(wire_type: int, value) -> list[float]:
    """Repeated double: one fixed64 element or a packed run."""
    if wire_type == WIRE_FIXED64:
        return [as_double(value)]
    if wire_type == WIRE_BYTES:
        if len(value) % 8:
            raise WireError("packed doubles not a multiple of 8 bytes")
        return [v[0] for v in struct.iter_unpack("<d", value)]
    raise WireError(f"unexpected wire type {wire_type} for repeated double")


# ---- encoders (fixture construction) ----

def encode_varint(value: int) -> bytes:
    if value < 0:
        value += 1 << 64
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def _key(field_no: int, wire_type: int) -> bytes:
    return encode_varint((field_no << 3) | wire_type)


def field_varint(field_no: int, value: int) -> bytes:
    return _key(field_no, WIRE_VARINT) + encode_varint(value)


def field_double(field_no: int, value: float) -> bytes:
    return _key(field_no, WIRE_FIXED64) + struct.pack("<d", value)


def field_float(field_no: int, value: float) -> bytes:
    return _key(field_no, WIRE_FIXED32) + struct.pack("<f", value)


def field_bytes(field_no: int, value: bytes) -> bytes:
    return _key(field_no, WIRE_BYTES) + encode_varint(len(value)) + value


def field_string(field_no: int, value: str) -> bytes:
    return field_bytes(field_no, value.encode("utf-8"))
