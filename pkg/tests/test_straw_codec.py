import pytest
from hypothesis import given, strategies as st

from harvestsim.straw.codec import (FRAME_BYTES, HEADER_BYTES, KIND_COMMAND, KIND_DATA, MAX_NODE_ID, MAX_SPAN,
                                    PAYLOAD_BYTES, CodecError, StrawCommand, StrawDataFrame, decode,
                                    encode_command, encode_data)


def test_sizes():
    assert HEADER_BYTES == 7 and FRAME_BYTES == 29 and MAX_SPAN == 192


def test_data_golden():
    f = StrawDataFrame(origin=9, seq=0x0102, session=300, dest=4, hops=3, payload=bytes([7]) * 22)
    want = bytes([KIND_DATA, 300 & 0xFF, 9, 1, 2, 4, 3]) + bytes([7]) * 22
    assert encode_data(f) == want
    assert decode(want) == StrawDataFrame(9, 0x0102, 44, 4, 3, bytes([7]) * 22)


def test_command_golden():
    c = StrawCommand(target=5, missing_seqs=(10, 11, 17), session=2)
    data = encode_command(c)
    assert data[:5] == bytes([KIND_COMMAND, 2, 5, 0, 10])
    assert data[5] == 0b1100_0001 and not any(data[6:])
    assert decode(data) == c


def test_first_session_command_is_empty():
    c = StrawCommand(target=3)
    assert decode(encode_command(c)) == c


@st.composite
def commands(draw):
    first = draw(st.integers(0, 0xFFFF - MAX_SPAN + 1))
    offs = draw(st.sets(st.integers(1, MAX_SPAN - 1), max_size=40))
    seqs = tuple(sorted({first} | {first + o for o in offs}))
    return StrawCommand(draw(st.integers(0, MAX_NODE_ID)), seqs if draw(st.booleans()) else (),
                        draw(st.integers(0, 255)))


@given(commands())
def test_command_round_trip(c):
    data = encode_command(c)
    assert len(data) == FRAME_BYTES
    assert decode(data) == c


@given(st.integers(0, MAX_NODE_ID), st.integers(0, 0xFFFF), st.integers(0, 255), st.integers(0, 255),
       st.integers(0, 255), st.binary(min_size=PAYLOAD_BYTES, max_size=PAYLOAD_BYTES))
def test_data_round_trip(origin, seq, session, dest, hops, payload):
    f = StrawDataFrame(origin, seq, session, dest, hops, payload)
    assert decode(encode_data(f)) == f


def test_rejects():
    with pytest.raises(CodecError):
        StrawCommand(1, (3, 2))
    with pytest.raises(CodecError):
        encode_command(StrawCommand(1, (0, MAX_SPAN)))
    with pytest.raises(CodecError):
        encode_data(StrawDataFrame(0xFE, 0))
    with pytest.raises(CodecError):
        encode_data(StrawDataFrame(1, 0x10000))
    with pytest.raises(CodecError):
        decode(bytes([0x55]) + bytes(28))
    with pytest.raises(CodecError):
        decode(bytes(10))
