"""RTPS message model, wire codec and best-effort writer/reader endpoints.

Only the subset needed for best-effort publish/subscribe interoperability is
modelled: DATA, INFO_TS, INFO_DST, HEARTBEAT and ACKNACK. Anything else is
carried through as :class:`UnknownSubmessage`.
"""

from __future__ import annotations

import enum
import itertools
import struct
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, NamedTuple, Union

from .errors import (
    BadMagic,
    LabError,
    NoDestinations,
    TruncatedHeader,
    TruncatedSubmessage,
    UnrepresentableLength,
)
from .transport import Locator

MAGIC = b"RTPS"
HEADER_SIZE = 20
DEFAULT_VERSION = (2, 3)
# unregistered id, used so captures from this lab are easy to tell apart
DEFAULT_VENDOR_ID = b"\x01\xfe"
MAX_SUBMESSAGE_BODY = 65532

FLAG_ENDIAN = 0x01
# DATA
FLAG_INLINE_QOS = 0x02
FLAG_DATA = 0x04
FLAG_KEY = 0x08
# INFO_TS
FLAG_INVALIDATE = 0x02
# HEARTBEAT / ACKNACK
FLAG_FINAL = 0x02
FLAG_LIVELINESS = 0x04

PID_SENTINEL = 0x0001
# submessage ids for which octetsToNextHeader == 0 is a real empty body
_ZERO_LENGTH_OK = {0x01, 0x09}


class SubmessageKind(enum.IntEnum):
    ACKNACK = 0x06
    HEARTBEAT = 0x07
    INFO_TS = 0x09
    INFO_DST = 0x0E
    DATA = 0x15


class EntityKind(enum.IntEnum):
    UNKNOWN = 0x00
    USER_WRITER_WITH_KEY = 0x02
    USER_WRITER_NO_KEY = 0x03
    USER_READER_NO_KEY = 0x04
    USER_READER_WITH_KEY = 0x07
    BUILTIN_PARTICIPANT = 0xC1
    BUILTIN_WRITER_WITH_KEY = 0xC2
    BUILTIN_WRITER_NO_KEY = 0xC3
    BUILTIN_READER_NO_KEY = 0xC4
    BUILTIN_READER_WITH_KEY = 0xC7


_WRITER_KINDS = {0x02, 0x03, 0xC2, 0xC3}
_READER_KINDS = {0x04, 0x07, 0xC4, 0xC7}


# -- identity ---------------------------------------------------------------

_prefix_counter = itertools.count()


class GuidPrefix(NamedTuple):
    value: bytes

    @classmethod
    def make(cls, host_id: int, participant_id: int, counter: int | None = None) -> GuidPrefix:
        """Build a prefix from host id, participant id and a per-process counter."""
        if counter is None:
            counter = next(_prefix_counter)
        return cls(struct.pack(">III", host_id, participant_id, counter))

    @classmethod
    def checked(cls, value: bytes) -> GuidPrefix:
        if len(value) != 12:
            raise ValueError(f"guid prefix must be 12 bytes, got {len(value)}")
        return cls(bytes(value))

    def __bytes__(self) -> bytes:
        return self.value

    def __str__(self) -> str:
        return self.value.hex()


GUIDPREFIX_UNKNOWN = GuidPrefix(bytes(12))


class EntityId(NamedTuple):
    """Entity key (3 bytes) plus kind octet; compares bytewise."""

    key: bytes
    kind: int

    @classmethod
    def checked(cls, key: bytes, kind: int) -> EntityId:
        if len(key) != 3:
            raise ValueError(f"entity key must be 3 bytes, got {len(key)}")
        if not 0 <= kind <= 0xFF:
            raise ValueError(f"entity kind must fit in one byte, got {kind}")
        return cls(bytes(key), int(kind))

    @classmethod
    def from_bytes(cls, raw: bytes) -> EntityId:
        return cls(bytes(raw[:3]), raw[3])

    @classmethod
    def user_writer(cls, index: int) -> EntityId:
        return cls(index.to_bytes(3, "big"), int(EntityKind.USER_WRITER_NO_KEY))

    @classmethod
    def user_reader(cls, index: int) -> EntityId:
        return cls(index.to_bytes(3, "big"), int(EntityKind.USER_READER_NO_KEY))

    @property
    def is_writer(self) -> bool:
        return self.kind in _WRITER_KINDS

    @property
    def is_reader(self) -> bool:
        return self.kind in _READER_KINDS

    @property
    def is_builtin(self) -> bool:
        return self.kind & 0xC0 == 0xC0

    def __bytes__(self) -> bytes:
        return self.key + bytes((self.kind,))

    def __str__(self) -> str:
        return bytes(self).hex()


ENTITYID_UNKNOWN = EntityId(bytes(3), 0)
ENTITYID_PARTICIPANT = EntityId(b"\x00\x00\x01", int(EntityKind.BUILTIN_PARTICIPANT))


class Guid(NamedTuple):
    """Prefix + entity id. Equality and ordering are bytewise."""

    prefix: GuidPrefix
    entity_id: EntityId

    def __bytes__(self) -> bytes:
        return self.prefix.value + bytes(self.entity_id)

    def __str__(self) -> str:
        return bytes(self).hex()

    @classmethod
    def from_bytes(cls, raw: bytes) -> Guid:
        if len(raw) != 16:
            raise ValueError(f"guid must be 16 bytes, got {len(raw)}")
        return cls(GuidPrefix(bytes(raw[:12])), EntityId.from_bytes(raw[12:]))

    @classmethod
    def parse(cls, text: str) -> Guid:
        """Parse 32 hex digits; dots, colons and dashes are ignored."""
        digits = text.strip().replace(".", "").replace(":", "").replace("-", "")
        return cls.from_bytes(bytes.fromhex(digits))


# -- sequence numbers and time ----------------------------------------------

SEQUENCENUMBER_UNKNOWN = -(1 << 32)


def sn_to_parts(value: int) -> tuple[int, int]:
    """Split a sequence number into its (high: i32, low: u32) wire halves."""
    return value >> 32, value & 0xFFFFFFFF


def sn_from_parts(high: int, low: int) -> int:
    return (high << 32) + low


class RtpsTime(NamedTuple):
    seconds: int
    fraction: int

    @classmethod
    def from_ns(cls, ns: int) -> RtpsTime:
        seconds, rem = divmod(ns, 1_000_000_000)
        # round half up to the nearest 2^-32 s
        fraction = (rem * (1 << 32) + 500_000_000) // 1_000_000_000
        if fraction == 1 << 32:
            seconds, fraction = seconds + 1, 0
        return cls(seconds, fraction)

    def to_ns(self) -> int:
        return self.seconds * 1_000_000_000 + (self.fraction * 1_000_000_000 + (1 << 31) >> 32)


# -- message model ----------------------------------------------------------

@dataclass(slots=True)
class RtpsHeader:
    guid_prefix: GuidPrefix
    version: tuple[int, int] = DEFAULT_VERSION
    vendor_id: bytes = DEFAULT_VENDOR_ID


@dataclass(slots=True)
class Data:
    kind: ClassVar[int] = int(SubmessageKind.DATA)

    reader_id: EntityId
    writer_id: EntityId
    writer_sn: int
    serialized_payload: bytes
    inline_qos: bytes = b""
    flags: int = FLAG_ENDIAN | FLAG_DATA
    extra_flags: int = 0


@dataclass(slots=True)
class InfoTs:
    kind: ClassVar[int] = int(SubmessageKind.INFO_TS)

    seconds: int = 0
    fraction: int = 0
    flags: int = FLAG_ENDIAN

    @classmethod
    def from_ns(cls, ns: int, flags: int = FLAG_ENDIAN) -> InfoTs:
        t = RtpsTime.from_ns(ns)
        return cls(t.seconds, t.fraction, flags)

    @property
    def invalidate(self) -> bool:
        return bool(self.flags & FLAG_INVALIDATE)


@dataclass(slots=True)
class InfoDst:
    kind: ClassVar[int] = int(SubmessageKind.INFO_DST)

    guid_prefix: GuidPrefix
    flags: int = FLAG_ENDIAN


@dataclass(slots=True)
class Heartbeat:
    kind: ClassVar[int] = int(SubmessageKind.HEARTBEAT)

    reader_id: EntityId
    writer_id: EntityId
    first_sn: int
    last_sn: int
    count: int
    flags: int = FLAG_ENDIAN


@dataclass(slots=True)
class AckNack:
    kind: ClassVar[int] = int(SubmessageKind.ACKNACK)

    reader_id: EntityId
    writer_id: EntityId
    bitmap_base: int
    num_bits: int
    bitmap: tuple[int, ...]
    count: int
    flags: int = FLAG_ENDIAN


@dataclass(slots=True)
class UnknownSubmessage:
    submessage_id: int
    body: bytes
    flags: int = FLAG_ENDIAN

    @property
    def kind(self) -> int:
        return self.submessage_id


Submessage = Union[Data, InfoTs, InfoDst, Heartbeat, AckNack, UnknownSubmessage]


@dataclass(slots=True)
class RtpsMessage:
    header: RtpsHeader
    submessages: tuple[Submessage, ...] = field(default_factory=tuple)


# -- codec ------------------------------------------------------------------

_HEADER = struct.Struct(">4sBB2s12s")
_SUB_HEADER = {"<": struct.Struct("<BBH"), ">": struct.Struct(">BBH")}
_DATA_FIXED = {e: struct.Struct(e + "HH4s4siI") for e in "<>"}
_INFO_TS = {e: struct.Struct(e + "II") for e in "<>"}
_HEARTBEAT = {e: struct.Struct(e + "4s4siIiIi") for e in "<>"}
_ACKNACK_HEAD = {e: struct.Struct(e + "4s4siII") for e in "<>"}
_I32 = {e: struct.Struct(e + "i") for e in "<>"}
_PARAM = {e: struct.Struct(e + "HH") for e in "<>"}


def _encode_data(sm: Data, e: str) -> bytes:
    if bool(sm.flags & FLAG_INLINE_QOS) != bool(sm.inline_qos):
        raise ValueError("DATA inline-QoS flag disagrees with inline_qos contents")
    sn = sm.writer_sn
    return b"".join((
        _DATA_FIXED[e].pack(sm.extra_flags, 16, bytes(sm.reader_id), bytes(sm.writer_id),
                            sn >> 32, sn & 0xFFFFFFFF),
        sm.inline_qos,
        sm.serialized_payload,
    ))


def _encode_info_ts(sm: InfoTs, e: str) -> bytes:
    if sm.flags & FLAG_INVALIDATE:
        return b""
    return _INFO_TS[e].pack(sm.seconds, sm.fraction)


def _encode_info_dst(sm: InfoDst, e: str) -> bytes:
    return sm.guid_prefix.value


def _encode_heartbeat(sm: Heartbeat, e: str) -> bytes:
    return _HEARTBEAT[e].pack(
        bytes(sm.reader_id), bytes(sm.writer_id),
        *sn_to_parts(sm.first_sn), *sn_to_parts(sm.last_sn), sm.count,
    )


def _encode_acknack(sm: AckNack, e: str) -> bytes:
    words = (sm.num_bits + 31) // 32
    if len(sm.bitmap) != words:
        raise ValueError(f"ACKNACK with {sm.num_bits} bits needs {words} bitmap words, got {len(sm.bitmap)}")
    return b"".join((
        _ACKNACK_HEAD[e].pack(bytes(sm.reader_id), bytes(sm.writer_id), *sn_to_parts(sm.bitmap_base), sm.num_bits),
        struct.pack(f"{e}{words}I", *sm.bitmap),
        _I32[e].pack(sm.count),
    ))


def _encode_unknown(sm: UnknownSubmessage, e: str) -> bytes:
    return sm.body


_ENCODERS = {
    Data: _encode_data,
    InfoTs: _encode_info_ts,
    InfoDst: _encode_info_dst,
    Heartbeat: _encode_heartbeat,
    AckNack: _encode_acknack,
    UnknownSubmessage: _encode_unknown,
}


def encode_message(m: RtpsMessage) -> bytes:
    """Serialize a message: 20-byte header then each submessage, 4-byte aligned."""
    if not m.submessages:
        raise ValueError("an RTPS message needs at least one submessage")
    h = m.header
    parts = [_HEADER.pack(MAGIC, h.version[0], h.version[1], h.vendor_id, h.guid_prefix.value)]
    last = len(m.submessages) - 1
    for i, sm in enumerate(m.submessages):
        try:
            encoder = _ENCODERS[type(sm)]
        except KeyError:
            raise TypeError(f"not a submessage: {sm!r}") from None
        body = encoder(sm, "<" if sm.flags & FLAG_ENDIAN else ">")
        pad = -len(body) % 4
        if len(body) + pad > MAX_SUBMESSAGE_BODY:
            raise UnrepresentableLength(
                f"submessage body of {len(body)} bytes exceeds {MAX_SUBMESSAGE_BODY}; fragmentation is not supported"
            )
        if not body and i != last and sm.kind not in _ZERO_LENGTH_OK:
            # a zero length field would mean "runs to the end of the message"
            raise UnrepresentableLength(f"empty submessage 0x{sm.kind:02x} can only be the last one")
        parts.append(_SUB_HEADER["<" if sm.flags & FLAG_ENDIAN else ">"].pack(sm.kind, sm.flags, len(body) + pad))
        parts.append(body)
        if pad:
            parts.append(bytes(pad))
    return b"".join(parts)


def _need(body: bytes, n: int, what: str) -> None:
    if len(body) < n:
        raise TruncatedSubmessage(f"{what} body needs {n} bytes, got {len(body)}")


def _decode_data(flags: int, body: memoryview, e: str) -> Data:
    _need(body, 20, "DATA")
    extra, to_qos, rid, wid, high, low = _DATA_FIXED[e].unpack_from(body)
    pos = 4 + to_qos
    _need(body, pos, "DATA")
    inline_qos = b""
    if flags & FLAG_INLINE_QOS:
        start = pos
        while True:
            _need(body, pos + 4, "DATA inline QoS")
            pid, plen = _PARAM[e].unpack_from(body, pos)
            pos += 4 + plen
            if pid == PID_SENTINEL:
                break
        _need(body, pos, "DATA inline QoS")
        inline_qos = bytes(body[start:pos])
    return Data(
        EntityId(bytes(rid[:3]), rid[3]), EntityId(bytes(wid[:3]), wid[3]), (high << 32) + low,
        bytes(body[pos:]), inline_qos, flags, extra,
    )


def _decode_info_ts(flags: int, body: memoryview, e: str) -> InfoTs:
    if flags & FLAG_INVALIDATE:
        return InfoTs(0, 0, flags)
    _need(body, 8, "INFO_TS")
    seconds, fraction = _INFO_TS[e].unpack_from(body)
    return InfoTs(seconds, fraction, flags)


def _decode_info_dst(flags: int, body: memoryview, e: str) -> InfoDst:
    _need(body, 12, "INFO_DST")
    return InfoDst(GuidPrefix(bytes(body[:12])), flags)


def _decode_heartbeat(flags: int, body: memoryview, e: str) -> Heartbeat:
    _need(body, 28, "HEARTBEAT")
    rid, wid, fh, fl, lh, ll, count = _HEARTBEAT[e].unpack_from(body)
    return Heartbeat(
        EntityId.from_bytes(rid), EntityId.from_bytes(wid),
        sn_from_parts(fh, fl), sn_from_parts(lh, ll), count, flags,
    )


def _decode_acknack(flags: int, body: memoryview, e: str) -> AckNack:
    _need(body, 20, "ACKNACK")
    rid, wid, bh, bl, num_bits = _ACKNACK_HEAD[e].unpack_from(body)
    if num_bits > 256:
        raise TruncatedSubmessage(f"ACKNACK numBits {num_bits} exceeds 256")
    words = (num_bits + 31) // 32
    _need(body, 20 + 4 * words + 4, "ACKNACK")
    bitmap = struct.unpack_from(f"{e}{words}I", body, 20)
    (count,) = _I32[e].unpack_from(body, 20 + 4 * words)
    return AckNack(
        EntityId.from_bytes(rid), EntityId.from_bytes(wid),
        sn_from_parts(bh, bl), num_bits, tuple(bitmap), count, flags,
    )


_DECODERS = {
    SubmessageKind.DATA: _decode_data,
    SubmessageKind.INFO_TS: _decode_info_ts,
    SubmessageKind.INFO_DST: _decode_info_dst,
    SubmessageKind.HEARTBEAT: _decode_heartbeat,
    SubmessageKind.ACKNACK: _decode_acknack,
}


def decode_message(data: bytes) -> RtpsMessage:
    """Parse a datagram into an :class:`RtpsMessage`.

    Unknown submessage ids are preserved and skipped by their length field.
    """
    if len(data) >= 4 and data[:4] != MAGIC:
        raise BadMagic(f"expected {MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < HEADER_SIZE:
        raise TruncatedHeader(f"RTPS header needs {HEADER_SIZE} bytes, got {len(data)}")
    view = memoryview(data)
    _, major, minor, vendor, prefix = _HEADER.unpack_from(data)
    header = RtpsHeader(GuidPrefix(prefix), (major, minor), vendor)
    subs: list[Submessage] = []
    pos, end = HEADER_SIZE, len(data)
    while pos < end:
        if end - pos < 4:
            raise TruncatedSubmessage(f"{end - pos} stray bytes at offset {pos}")
        sub_id, flags = data[pos], data[pos + 1]
        (length,) = struct.unpack_from("<H" if flags & FLAG_ENDIAN else ">H", data, pos + 2)
        pos += 4
        if length == 0 and sub_id not in _ZERO_LENGTH_OK:
            length = end - pos
        if length > end - pos:
            raise TruncatedSubmessage(
                f"submessage 0x{sub_id:02x} claims {length} bytes at offset {pos}, have {end - pos}"
            )
        decoder = _DECODERS.get(sub_id)
        body = view[pos:pos + length]
        if decoder is None:
            subs.append(UnknownSubmessage(sub_id, bytes(body), flags))
        else:
            subs.append(decoder(flags, body, "<" if flags & FLAG_ENDIAN else ">"))
        pos += length
    if not subs:
        raise TruncatedSubmessage("message has no submessages")
    return RtpsMessage(header, tuple(subs))


# -- best-effort endpoints --------------------------------------------------

class Sample(NamedTuple):
    writer_guid: Guid
    sequence: int
    payload: bytes


@dataclass(frozen=True)
class ReaderCounters:
    delivered: int = 0
    lost: int = 0
    duplicates: int = 0
    malformed: int = 0
    unknown_submessages: int = 0
    unmatched: int = 0
    filtered: int = 0


class BestEffortWriter:
    """Stateless-per-reader writer: numbers changes and frames them for the wire."""

    def __init__(
        self,
        guid: Guid,
        destinations: Iterable[Locator],
        *,
        version: tuple[int, int] = DEFAULT_VERSION,
        vendor_id: bytes = DEFAULT_VENDOR_ID,
    ) -> None:
        self.guid = guid
        self.destinations = tuple(destinations)
        self.next_sequence_number = 1
        self.header = RtpsHeader(guid.prefix, version, vendor_id)

    def produce(self, payload: bytes, now_ns: int) -> tuple[RtpsMessage, tuple[Locator, ...]]:
        if not self.destinations:
            raise NoDestinations(f"writer {self.guid} has no destination locators")
        sn = self.next_sequence_number
        msg = RtpsMessage(self.header, (
            InfoTs.from_ns(now_ns),
            Data(ENTITYID_UNKNOWN, self.guid.entity_id, sn, payload),
        ))
        self.next_sequence_number = sn + 1
        return msg, self.destinations


class BestEffortReader:
    """Delivers in-order, de-duplicated samples from statically matched writers.

    Nothing on the receive path raises; bad input only bumps counters.
    """

    def __init__(self, guid: Guid, matched_writers: Iterable[Guid] = ()) -> None:
        self.guid = guid
        self.matched_writers = set(matched_writers)
        self._highest: dict[Guid, int] = {}
        self._lost: dict[Guid, int] = {}
        self._delivered = 0
        self._duplicates = 0
        self._malformed = 0
        self._unknown = 0
        self._unmatched = 0
        self._filtered = 0

    def match(self, writer: Guid) -> None:
        self.matched_writers.add(writer)

    def highest_seen(self, writer: Guid) -> int:
        return self._highest.get(writer, 0)

    def lost_count(self, writer: Guid) -> int:
        return self._lost.get(writer, 0)

    @property
    def counters(self) -> ReaderCounters:
        return ReaderCounters(
            delivered=self._delivered,
            lost=sum(self._lost.values()),
            duplicates=self._duplicates,
            malformed=self._malformed,
            unknown_submessages=self._unknown,
            unmatched=self._unmatched,
            filtered=self._filtered,
        )

    def note_malformed(self) -> None:
        self._malformed += 1

    def receive(self, datagram: bytes) -> list[Sample]:
        try:
            msg = decode_message(datagram)
        except (LabError, ValueError, struct.error):
            self._malformed += 1
            return []
        return self.consume(msg)

    def consume(self, m: RtpsMessage) -> list[Sample]:
        out: list[Sample] = []
        source = m.header.guid_prefix
        own_prefix = self.guid.prefix
        own_id = self.guid.entity_id
        dest: GuidPrefix | None = None
        for sm in m.submessages:
            if type(sm) is Data:
                if dest is not None and dest != own_prefix and dest != GUIDPREFIX_UNKNOWN:
                    self._filtered += 1
                    continue
                rid = sm.reader_id
                if rid != ENTITYID_UNKNOWN and rid != own_id:
                    self._filtered += 1
                    continue
                writer = Guid(source, sm.writer_id)
                if writer not in self.matched_writers:
                    self._unmatched += 1
                    continue
                sn = sm.writer_sn
                highest = self._highest.get(writer, 0)
                if sn <= highest:
                    self._duplicates += 1
                    continue
                if sn > highest + 1:
                    self._lost[writer] = self._lost.get(writer, 0) + sn - highest - 1
                self._highest[writer] = sn
                self._delivered += 1
                out.append(Sample(writer, sn, sm.serialized_payload))
            elif type(sm) is InfoDst:
                dest = sm.guid_prefix
            elif type(sm) is UnknownSubmessage:
                self._unknown += 1
        return out
