"""CDR (XCDR1) encapsulation and serialization for RTPS serialized payloads.

Alignment is relative to the CDR stream origin, i.e. the first byte after the
4-byte encapsulation header.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass

from .errors import EmbeddedNul, Truncated, UnknownEncapsulation

__all__ = [
    "Endianness",
    "CdrBuffer",
    "PingPayload",
    "encode_encapsulation",
    "decode_encapsulation",
    "serialize_ping_payload",
    "deserialize_ping_payload",
    "ping_payload_size",
]


class Endianness(enum.Enum):
    LITTLE = "little"
    BIG = "big"

    @property
    def prefix(self) -> str:
        return "<" if self is Endianness.LITTLE else ">"


# representation identifiers: CDR_BE = 0x0000, CDR_LE = 0x0001
_REPR_ID = {Endianness.BIG: b"\x00\x00", Endianness.LITTLE: b"\x00\x01"}
_REPR_BY_ID = {v: k for k, v in _REPR_ID.items()}

_FORMATS = {
    (1, False): "B", (1, True): "b",
    (2, False): "H", (2, True): "h",
    (4, False): "I", (4, True): "i",
    (8, False): "Q", (8, True): "q",
}
_STRUCTS = {
    (end, size, signed): struct.Struct(end.prefix + fmt)
    for end in Endianness
    for (size, signed), fmt in _FORMATS.items()
}


def encode_encapsulation(endianness: Endianness = Endianness.LITTLE, padding: int = 0) -> bytes:
    """Return the 4-byte encapsulation header.

    ``padding`` (0-3) goes in the low bits of the options field and counts the
    alignment bytes appended after the last serialized member.
    """
    if not 0 <= padding <= 3:
        raise ValueError(f"encapsulation padding must be 0..3, got {padding}")
    return _REPR_ID[endianness] + bytes((0, padding))


def decode_encapsulation(header: bytes) -> tuple[Endianness, int]:
    """Parse an encapsulation header into (endianness, trailing padding count)."""
    if len(header) < 4:
        raise Truncated(f"encapsulation header needs 4 bytes, got {len(header)}")
    try:
        endianness = _REPR_BY_ID[bytes(header[:2])]
    except KeyError:
        raise UnknownEncapsulation(f"representation id {bytes(header[:2]).hex()}") from None
    return endianness, header[3] & 0x03


class CdrBuffer:
    """Growable CDR stream with an alignment-tracking cursor.

    Writers append at the end; readers consume from ``cursor``. A buffer is
    either being written or being read, never both.
    """

    __slots__ = ("data", "cursor", "endianness")

    def __init__(self, data: bytes | bytearray = b"", endianness: Endianness = Endianness.LITTLE) -> None:
        self.data = bytearray(data)
        self.cursor = 0 if data else len(self.data)
        self.endianness = endianness

    @classmethod
    def for_reading(cls, data: bytes, endianness: Endianness = Endianness.LITTLE) -> CdrBuffer:
        buf = cls(data, endianness)
        buf.cursor = 0
        return buf

    def __bytes__(self) -> bytes:
        return bytes(self.data)

    def __len__(self) -> int:
        return len(self.data)

    @property
    def remaining(self) -> int:
        return len(self.data) - self.cursor

    def _pad_to(self, n: int) -> None:
        pad = -self.cursor % n
        if pad:
            self.data.extend(bytes(pad))
            self.cursor += pad

    def _skip_to(self, n: int) -> None:
        pad = -self.cursor % n
        if pad > self.remaining:
            raise Truncated(f"alignment padding runs past end at offset {self.cursor}")
        self.cursor += pad

    def write_primitive(self, value: int, size: int, signed: bool = False) -> CdrBuffer:
        try:
            packer = _STRUCTS[self.endianness, size, signed]
        except KeyError:
            raise ValueError(f"primitive size must be 1, 2, 4 or 8, got {size}") from None
        self._pad_to(size)
        self.data += packer.pack(value)
        self.cursor += size
        return self

    def read_primitive(self, size: int, signed: bool = False) -> int:
        try:
            unpacker = _STRUCTS[self.endianness, size, signed]
        except KeyError:
            raise ValueError(f"primitive size must be 1, 2, 4 or 8, got {size}") from None
        self._skip_to(size)
        if size > self.remaining:
            raise Truncated(f"need {size} bytes at offset {self.cursor}, have {self.remaining}")
        (value,) = unpacker.unpack_from(self.data, self.cursor)
        self.cursor += size
        return value

    def write_u8(self, value: int) -> CdrBuffer:
        return self.write_primitive(value, 1)

    def write_u16(self, value: int) -> CdrBuffer:
        return self.write_primitive(value, 2)

    def write_u32(self, value: int) -> CdrBuffer:
        return self.write_primitive(value, 4)

    def write_u64(self, value: int) -> CdrBuffer:
        return self.write_primitive(value, 8)

    def read_u8(self) -> int:
        return self.read_primitive(1)

    def read_u16(self) -> int:
        return self.read_primitive(2)

    def read_u32(self) -> int:
        return self.read_primitive(4)

    def read_u64(self) -> int:
        return self.read_primitive(8)

    def write_string(self, s: str) -> CdrBuffer:
        """Write a CDR string: u32 length including the NUL, bytes, NUL."""
        if "\x00" in s:
            raise EmbeddedNul("CDR strings cannot contain NUL characters")
        raw = s.encode("utf-8")
        self.write_u32(len(raw) + 1)
        self.data += raw
        self.data.append(0)
        self.cursor += len(raw) + 1
        return self

    def read_string(self) -> str:
        length = self.read_u32()
        if length == 0:
            raise Truncated(f"string length 0 at offset {self.cursor - 4} has no terminator")
        if length > self.remaining:
            raise Truncated(f"string of {length} bytes at offset {self.cursor}, have {self.remaining}")
        raw = bytes(self.data[self.cursor:self.cursor + length - 1])
        self.cursor += length
        if b"\x00" in raw:
            raise EmbeddedNul("string body contains NUL before terminator")
        return raw.decode("utf-8")

    def write_octets(self, raw: bytes) -> CdrBuffer:
        self.data += raw
        self.cursor += len(raw)
        return self


@dataclass(slots=True)
class PingPayload:
    """The benchmark message: sequence, send timestamp, optional padding."""

    sequence: int
    send_timestamp_ns: int
    padding: bytes = b""


_PING_HEAD = {end: struct.Struct(end.prefix + "QQ") for end in Endianness}
_PING_FIXED = 16


def ping_payload_size(padding_len: int) -> int:
    """Serialized size in bytes, encapsulation and trailing alignment included."""
    body = _PING_FIXED + padding_len
    return 4 + body + (-body % 4)


def serialize_ping_payload(p: PingPayload, endianness: Endianness = Endianness.LITTLE) -> bytes:
    # padding is appended raw after the two u64 fields; the stream is then
    # rounded up to 4 bytes and the pad count recorded in the options field
    tail = -(_PING_FIXED + len(p.padding)) % 4
    return b"".join((
        _REPR_ID[endianness],
        bytes((0, tail)),
        _PING_HEAD[endianness].pack(p.sequence, p.send_timestamp_ns),
        p.padding,
        bytes(tail),
    ))


def deserialize_ping_payload(data: bytes) -> PingPayload:
    endianness, tail = decode_encapsulation(data)
    end = len(data) - tail
    if end < 4 + _PING_FIXED:
        raise Truncated(f"ping payload needs {4 + _PING_FIXED} bytes, got {len(data)}")
    seq, ts = _PING_HEAD[endianness].unpack_from(data, 4)
    return PingPayload(seq, ts, bytes(data[4 + _PING_FIXED:end]))
