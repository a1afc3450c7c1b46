"""Reader/writer for the TFRecord framing.

Each record is ``uint64 length | uint32 masked_crc(length) | payload |
uint32 masked_crc(payload)``, everything little-endian.
"""

import struct
from typing import BinaryIO, Iterator

from .crc32c import masked_crc32c


class RecordError(Exception):
    """Truncated or corrupted record framing."""


def read_records(source, verify: bool = True) -> Iterator[bytes]:
    """Yield record payloads from a path or binary stream.

    Raises :class:`RecordError` on truncation or checksum mismatch;
    ``verify=False`` skips the (slow, pure-Python) payload checksum.
    """
    if hasattr(source, "read"):
        yield from _read_stream(source, verify)
    else:
        with open(source, "rb") as fp:
            yield from _read_stream(fp, verify)


def _read_stream(fp: BinaryIO, verify: bool) -> Iterator[bytes]:
    offset = 0
    while True:
        header = fp.read(8)
        if not header:
            return
        if len(header) < 8:
            raise RecordError(f"truncated length header at byte {offset}")
        (length,) = struct.unpack("<Q", header)
        header_crc = fp.read(4)
        if len(header_crc) < 4:
            raise RecordError(f"truncated length checksum at byte {offset + 8}")
        if masked_crc32c(header) != struct.unpack("<I", header_crc)[0]:
            raise RecordError(f"length checksum mismatch at byte {offset}")
        payload = fp.read(length)
        if len(payload) < length:
            raise RecordError(f"truncated payload at byte {offset + 12}")
        payload_crc = fp.read(4)
        if len(payload_crc) < 4:
            raise RecordError(f"truncated payload checksum at byte {offset + 12 + length}")
        if verify and masked_crc32c(payload) != struct.unpack("<I", payload_crc)[0]:
            raise RecordError(f"payload checksum mismatch at byte {offset + 12}")
        offset += 16 + length
        yield payload


def write_record(fp: BinaryIO, payload: bytes) -> None:
    header = struct.pack("<Q", len(payload))
    fp.write(header)
    fp.write(struct.pack("<I", masked_crc32c(header)))
    fp.write(payload)
    fp.write(struct.pack("<I", masked_crc32c(payload)))


def write_records(dest, payloads) -> int:
    n = 0
    if hasattr(dest, "write"):
        for p in payloads:
            write_record(dest, p)
            n += 1
        return n
    with open(dest, "wb") as fp:
        for p in payloads:
            write_record(fp, p)
            n += 1
    return n
