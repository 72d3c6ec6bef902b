"""Bit-exact Harvest wire format.

Byte layout (big-endian), 29 bytes total::

    0      color_id (2 bits, high) | hops (6 bits, low)
    1-2    child_ids[0], child_ids[1]
    3-6    color_owners[0..3], indexed by color id
    7-8    seq
    9-28   payload (20 bytes)

Node ids are 8 bit.  0xFF marks an empty field; in ``child_ids`` 0xFE marks
an open child slot.  There is no sender field: the sender is the owner listed
at its own colour.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER_BYTES = 9
PAYLOAD_BYTES = 20
FRAME_BYTES = HEADER_BYTES + PAYLOAD_BYTES
NULL_ID = 0xFF
OPEN_SLOT = 0xFE
# in color_owners the same marker means "collision heard in this slot, owner unknown"
CONTESTED = 0xFE
MAX_NODE_ID = 0xFD
MAX_HOPS = 63
NUM_COLORS = 4

_HEADER = struct.Struct(">B2B4BH")


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class HarvestMessage:
    color_id: int
    hops: int
    child_ids: tuple[int, int]
    color_owners: tuple[int, int, int, int]
    seq: int
    payload: bytes = bytes(PAYLOAD_BYTES)

    @property
    def sender(self) -> int:
        return self.color_owners[self.color_id]

    def cleared(self) -> tuple[int, ...]:
        """Children told to send in their next slot."""
        return tuple(c for c in self.child_ids if c <= MAX_NODE_ID)

    @property
    def accepting(self) -> bool:
        return OPEN_SLOT in self.child_ids


def _check_id(v: int, what: str, allow: tuple[int, ...]) -> None:
    if not (0 <= v <= MAX_NODE_ID or v in allow):
        raise CodecError(f"{what} {v} out of range")


def encode(msg: HarvestMessage) -> bytes:
    if not 0 <= msg.color_id < NUM_COLORS:
        raise CodecError(f"color_id {msg.color_id} out of range")
    if not 0 <= msg.hops <= MAX_HOPS:
        raise CodecError(f"hops {msg.hops} out of range")
    if len(msg.child_ids) != 2 or len(msg.color_owners) != NUM_COLORS:
        raise CodecError("child_ids needs 2 entries and color_owners 4")
    for c in msg.child_ids:
        _check_id(c, "child id", (NULL_ID, OPEN_SLOT))
    for o in msg.color_owners:
        _check_id(o, "owner id", (NULL_ID, CONTESTED))
    if msg.color_owners[msg.color_id] in (NULL_ID, CONTESTED):
        raise CodecError("sender's own colour slot must name the sender")
    if not 0 <= msg.seq <= 0xFFFF:
        raise CodecError(f"seq {msg.seq} out of range")
    if len(msg.payload) != PAYLOAD_BYTES:
        raise CodecError(f"payload must be {PAYLOAD_BYTES} bytes, got {len(msg.payload)}")
    head = _HEADER.pack((msg.color_id << 6) | msg.hops, *msg.child_ids, *msg.color_owners, msg.seq)
    return head + msg.payload


def decode(data: bytes) -> HarvestMessage:
    if len(data) != FRAME_BYTES:
        raise CodecError(f"expected {FRAME_BYTES} bytes, got {len(data)}")
    b0, c0, c1, o0, o1, o2, o3, seq = _HEADER.unpack_from(data)
    return HarvestMessage(
        color_id=b0 >> 6, hops=b0 & 0x3F, child_ids=(c0, c1),
        color_owners=(o0, o1, o2, o3), seq=seq, payload=bytes(data[HEADER_BYTES:]),
    )


# Payload convention used by the simulator: origin id, origin sequence number
# and a flag byte, zero padded.  Beacons carry FLAG_BEACON and no data.
FLAG_DATA = 0x01
FLAG_BEACON = 0x02
FLAG_DONE = 0x04
FLAG_CONTEND = 0x08
_PAYLOAD = struct.Struct(">BHB")


def make_payload(origin: int, origin_seq: int, flags: int) -> bytes:
    return _PAYLOAD.pack(origin, origin_seq, flags).ljust(PAYLOAD_BYTES, b"\0")


def read_payload(payload: bytes) -> tuple[int, int, int]:
    return _PAYLOAD.unpack_from(payload)
