import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtpslab.cdr import (
    CdrBuffer,
    Endianness,
    PingPayload,
    decode_encapsulation,
    deserialize_ping_payload,
    encode_encapsulation,
    ping_payload_size,
    serialize_ping_payload,
)
from rtpslab.errors import EmbeddedNul, Truncated, UnknownEncapsulation

LE, BE = Endianness.LITTLE, Endianness.BIG


def test_encapsulation_headers():
    assert encode_encapsulation(LE) == bytes([0x00, 0x01, 0x00, 0x00])
    assert encode_encapsulation(BE) == bytes([0x00, 0x00, 0x00, 0x00])
    assert decode_encapsulation(bytes([0x00, 0x01, 0x00, 0x00])) == (LE, 0)
    assert decode_encapsulation(bytes([0x00, 0x00, 0x00, 0x02])) == (BE, 2)


def test_unknown_encapsulation():
    # 0x0002 is PL_CDR_BE, which is not supported
    with pytest.raises(UnknownEncapsulation):
        decode_encapsulation(b"\x00\x02\x00\x00")


def test_write_u32_zero():
    buf = CdrBuffer().write_u32(0)
    assert bytes(buf) == b"\x00\x00\x00\x00"
    assert buf.cursor == 4


def test_u8_then_u32_pads_three_bytes():
    buf = CdrBuffer().write_u8(0xAB).write_u32(1)
    assert bytes(buf) == bytes([0xAB, 0, 0, 0, 1, 0, 0, 0])
    assert buf.cursor == 8


def test_u64_byte_order():
    assert bytes(CdrBuffer().write_u64(1 << 32)) == bytes([0, 0, 0, 0, 1, 0, 0, 0])
    assert bytes(CdrBuffer(endianness=BE).write_u64(1 << 32)) == bytes([0, 0, 0, 1, 0, 0, 0, 0])


def test_alignment_mirrors_mcap_layout():
    buf = CdrBuffer().write_u64(1).write_u8(2).write_u16(3).write_u32(4).write_u8(5).write_u64(6)
    assert bytes(buf).hex() == (
        "0100000000000000" "02" "00" "0300" "04000000" "05" "00000000000000" "0600000000000000"
    )


@pytest.mark.parametrize("text, expected", [
    ("", bytes([1, 0, 0, 0, 0])),
    ("abc", bytes([4, 0, 0, 0]) + b"abc\x00"),
])
def test_write_string(text, expected):
    assert bytes(CdrBuffer().write_string(text)) == expected


def test_string_length_counts_nul():
    raw = bytes(CdrBuffer().write_string("ping"))
    assert int.from_bytes(raw[:4], "little") == 5


def test_string_aligned_to_four():
    raw = bytes(CdrBuffer().write_u8(9).write_string("x"))
    assert raw == bytes([9, 0, 0, 0, 2, 0, 0, 0]) + b"x\x00"


def test_embedded_nul_rejected():
    with pytest.raises(EmbeddedNul):
        CdrBuffer().write_string("a\x00b")


def test_read_u32_from_two_bytes_is_truncated():
    with pytest.raises(Truncated):
        CdrBuffer.for_reading(b"\x01\x02").read_u32()


def test_read_string_truncated():
    raw = bytes(CdrBuffer().write_string("hello"))[:-2]
    with pytest.raises(Truncated):
        CdrBuffer.for_reading(raw).read_string()


def test_bad_primitive_size():
    with pytest.raises(ValueError):
        CdrBuffer().write_primitive(1, 3)


def test_zero_roundtrip():
    assert CdrBuffer.for_reading(bytes(CdrBuffer().write_u32(0))).read_u32() == 0


_SIZES = (1, 2, 4, 8)


def _random_sequence(rng: random.Random):
    items = []
    for _ in range(rng.randrange(1, 20)):
        if rng.random() < 0.2:
            items.append(("str", "".join(chr(rng.randrange(1, 0x2FF)) for _ in range(rng.randrange(0, 12)))))
        else:
            size = rng.choice(_SIZES)
            signed = rng.random() < 0.5
            lo, hi = (-(1 << (8 * size - 1)), (1 << (8 * size - 1)) - 1) if signed else (0, (1 << (8 * size)) - 1)
            items.append(("int", (size, signed, rng.randint(lo, hi))))
    return items


def _write(items, endianness):
    buf = CdrBuffer(endianness=endianness)
    for kind, v in items:
        if kind == "str":
            buf.write_string(v)
        else:
            size, signed, value = v
            buf.write_primitive(value, size, signed)
    return buf


def test_mixed_sequences_roundtrip_1000():
    rng = random.Random(20240611)
    for _ in range(1000):
        items = _random_sequence(rng)
        endianness = rng.choice([LE, BE])
        written = _write(items, endianness)
        reader = CdrBuffer.for_reading(bytes(written), endianness)
        for kind, v in items:
            if kind == "str":
                assert reader.read_string() == v
            else:
                size, signed, value = v
                assert reader.read_primitive(size, signed) == value
        assert reader.cursor == written.cursor == len(written)


@settings(max_examples=300)
@given(st.lists(st.tuples(st.sampled_from(_SIZES), st.integers(min_value=0)), min_size=1, max_size=30),
       st.sampled_from([LE, BE]))
def test_primitives_land_on_aligned_offsets(items, endianness):
    items = [(n, v % (1 << (8 * n))) for n, v in items]
    raw = bytes(_write([("int", (n, False, v)) for n, v in items], endianness))
    # independent offset walk: align up, then read the value bytes directly
    offset = 0
    for n, v in items:
        offset += -offset % n
        assert offset % n == 0
        assert int.from_bytes(raw[offset:offset + n], endianness.value) == v
        offset += n
    assert offset == len(raw)


def test_ping_payload_zero_case():
    raw = serialize_ping_payload(PingPayload(0, 0))
    assert raw == bytes([0x00, 0x01, 0x00, 0x00]) + bytes(16)
    assert len(raw) == 20


def test_ping_payload_big_endian_fixture(hexfix):
    assert serialize_ping_payload(PingPayload(1, 2), BE) == hexfix("ping_payload_be.hex")


def test_ping_payload_64_bytes_with_44_padding():
    raw = serialize_ping_payload(PingPayload(1, 2, bytes(44)))
    assert len(raw) == 64 == ping_payload_size(44)


def test_ping_payload_roundtrip_identity():
    p = PingPayload(1, 2)
    assert deserialize_ping_payload(serialize_ping_payload(p)) == p


def test_ping_payload_unaligned_padding_records_tail():
    p = PingPayload(3, 4, b"\xff\xee\xdd")
    raw = serialize_ping_payload(p)
    assert len(raw) == 24
    assert raw[3] == 1
    assert deserialize_ping_payload(raw) == p


def test_ping_payload_matches_generic_writer():
    p = PingPayload(0xDEADBEEF, 123456789, b"xyz!")
    for end in (LE, BE):
        buf = CdrBuffer(endianness=end).write_u64(p.sequence).write_u64(p.send_timestamp_ns).write_octets(p.padding)
        assert serialize_ping_payload(p, end) == encode_encapsulation(end) + bytes(buf)


def test_ping_payload_errors():
    with pytest.raises(Truncated):
        deserialize_ping_payload(b"\x00\x01\x00\x00" + bytes(10))
    with pytest.raises(UnknownEncapsulation):
        deserialize_ping_payload(b"\x00\x07\x00\x00" + bytes(16))


@settings(max_examples=300)
@given(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1), st.binary(max_size=80), st.sampled_from([LE, BE]))
def test_ping_payload_roundtrip_property(seq, ts, padding, endianness):
    p = PingPayload(seq, ts, padding)
    raw = serialize_ping_payload(p, endianness)
    assert deserialize_ping_payload(raw) == p
    assert serialize_ping_payload(p, endianness) == raw
    assert len(raw) == ping_payload_size(len(padding))
    assert len(raw) % 4 == 0
