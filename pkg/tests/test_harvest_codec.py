import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from harvestsim.harvest.codec import (CONTESTED, FLAG_CONTEND, FLAG_DATA, FRAME_BYTES, HEADER_BYTES,
                                      NULL_ID, OPEN_SLOT, PAYLOAD_BYTES, CodecError, HarvestMessage,
                                      decode, encode, make_payload, read_payload)

from strategies import harvest_messages


def test_sizes():
    assert (HEADER_BYTES, PAYLOAD_BYTES, FRAME_BYTES) == (9, 20, 29)


def test_golden_bytes():
    msg = HarvestMessage(color_id=2, hops=5, child_ids=(7, OPEN_SLOT), color_owners=(1, NULL_ID, 9, CONTESTED),
                         seq=0x1234, payload=bytes(range(20)))
    want = bytes([0b10_000101, 7, 0xFE, 1, 0xFF, 9, 0xFE, 0x12, 0x34]) + bytes(range(20))
    assert encode(msg) == want
    assert decode(want) == msg


def test_sender_is_owner_of_own_colour():
    msg = HarvestMessage(1, 0, (NULL_ID, NULL_ID), (NULL_ID, 42, NULL_ID, NULL_ID), 0)
    assert msg.sender == 42
    assert msg.cleared() == () and not msg.accepting


def test_cleared_and_accepting():
    msg = HarvestMessage(0, 1, (3, OPEN_SLOT), (5, NULL_ID, NULL_ID, NULL_ID), 0)
    assert msg.cleared() == (3,) and msg.accepting


@given(harvest_messages())
def test_round_trip(msg):
    data = encode(msg)
    assert len(data) == FRAME_BYTES
    assert decode(data) == msg


@pytest.mark.parametrize("kw", [
    dict(color_id=4), dict(hops=64), dict(seq=0x10000), dict(payload=b"x"),
    dict(child_ids=(300, 1)), dict(color_owners=(NULL_ID, 1, 2, 3)),
    dict(color_owners=(CONTESTED, 1, 2, 3)), dict(child_ids=(1,)),
])
def test_rejects_bad_fields(kw):
    base = dict(color_id=0, hops=1, child_ids=(NULL_ID, NULL_ID), color_owners=(4, NULL_ID, NULL_ID, NULL_ID),
                seq=0, payload=bytes(PAYLOAD_BYTES))
    base.update(kw)
    with pytest.raises(CodecError):
        encode(HarvestMessage(**base))


@pytest.mark.parametrize("n", [0, 28, 30])
def test_decode_length_checked(n):
    with pytest.raises(CodecError):
        decode(bytes(n))


@given(st.integers(0, 255), st.integers(0, 0xFFFF), st.integers(0, 255))
def test_payload_round_trip(origin, seq, flags):
    p = make_payload(origin, seq, flags)
    assert len(p) == PAYLOAD_BYTES
    assert read_payload(p) == (origin, seq, flags)


def test_flags_distinct():
    assert FLAG_DATA & FLAG_CONTEND == 0


def test_random_fuzz_never_crashes_unexpectedly():
    rng = random.Random(3)
    for _ in range(2000):
        data = bytes(rng.randrange(256) for _ in range(FRAME_BYTES))
        msg = decode(data)
        assert len(msg.payload) == PAYLOAD_BYTES


def _golden():
    path = Path(__file__).parent / "golden" / "harvest_frames.txt"
    for line in path.read_text().splitlines():
        if line.startswith("#") or not line.strip():
            continue
        *nums, pay, frame = line.split()
        c, h, c0, c1, o0, o1, o2, o3, seq = map(int, nums)
        yield HarvestMessage(c, h, (c0, c1), (o0, o1, o2, o3), seq, bytes.fromhex(pay)), bytes.fromhex(frame)


def test_golden_vector_file():
    cases = list(_golden())
    assert len(cases) >= 10
    for msg, frame in cases:
        assert encode(msg) == frame
        assert decode(frame) == msg
