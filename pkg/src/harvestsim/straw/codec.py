"""Straw wire formats, 29 bytes on air like Harvest.

Data frame (big-endian)::

    0      kind (KIND_DATA)
    1      session (mod 256)
    2      origin id
    3-4    seq
    5      next-hop destination id
    6      origin hop count
    7-28   payload (22 bytes)

Command frame::

    0      kind (KIND_COMMAND)
    1      session (mod 256)
    2      target id
    3-4    first missing seq (0 on a first session)
    5-28   bitmap of missing seqs relative to the first, bit i set means
           first + i is missing (MSB first); all zero on a first session
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

HEADER_BYTES = 7
PAYLOAD_BYTES = 22
FRAME_BYTES = HEADER_BYTES + PAYLOAD_BYTES
KIND_DATA = 0x11
KIND_COMMAND = 0x12
MAX_SPAN = (FRAME_BYTES - 5) * 8
MAX_NODE_ID = 0xFD

_DATA = struct.Struct(">BBBHBB")
_CMD = struct.Struct(">BBBH")


class CodecError(ValueError):
    pass


@dataclass(frozen=True)
class StrawDataFrame:
    origin: int
    seq: int
    session: int = 0
    dest: int = 0
    hops: int = 0
    payload: bytes = bytes(PAYLOAD_BYTES)


@dataclass(frozen=True)
class StrawCommand:
    target: int
    missing_seqs: tuple[int, ...] = ()
    session: int = 0

    def __post_init__(self):
        m = self.missing_seqs
        if any(b <= a for a, b in zip(m, m[1:])):
            raise CodecError("missing_seqs must be strictly increasing")


def _byte(v: int, what: str) -> None:
    if not 0 <= v <= 0xFF:
        raise CodecError(f"{what} {v} out of range")


def encode_data(f: StrawDataFrame) -> bytes:
    for v, what in ((f.origin, "origin"), (f.dest, "dest"), (f.hops, "hops")):
        _byte(v, what)
    if f.origin > MAX_NODE_ID:
        raise CodecError(f"origin {f.origin} out of range")
    if not 0 <= f.seq <= 0xFFFF:
        raise CodecError(f"seq {f.seq} out of range")
    if len(f.payload) != PAYLOAD_BYTES:
        raise CodecError(f"payload must be {PAYLOAD_BYTES} bytes, got {len(f.payload)}")
    return _DATA.pack(KIND_DATA, f.session & 0xFF, f.origin, f.seq, f.dest, f.hops) + f.payload


def encode_command(c: StrawCommand) -> bytes:
    if not 0 <= c.target <= MAX_NODE_ID:
        raise CodecError(f"target {c.target} out of range")
    m = c.missing_seqs
    if any(not 0 <= s <= 0xFFFF for s in m):
        raise CodecError("missing seq out of range")
    first = m[0] if m else 0
    if m and m[-1] - first >= MAX_SPAN:
        raise CodecError(f"missing seqs must span fewer than {MAX_SPAN}")
    bits = 0
    for s in m:
        bits |= 1 << (MAX_SPAN - 1 - (s - first))
    return _CMD.pack(KIND_COMMAND, c.session & 0xFF, c.target, first) + bits.to_bytes(MAX_SPAN // 8, "big")


def decode(data: bytes) -> StrawDataFrame | StrawCommand:
    if len(data) != FRAME_BYTES:
        raise CodecError(f"expected {FRAME_BYTES} bytes, got {len(data)}")
    kind = data[0]
    if kind == KIND_DATA:
        _, session, origin, seq, dest, hops = _DATA.unpack_from(data)
        return StrawDataFrame(origin, seq, session, dest, hops, bytes(data[HEADER_BYTES:]))
    if kind == KIND_COMMAND:
        _, session, target, first = _CMD.unpack_from(data)
        bits = int.from_bytes(data[_CMD.size:], "big")
        if bits and not bits >> (MAX_SPAN - 1):
            raise CodecError("bitmap must start at the first missing seq")
        missing = tuple(first + i for i in range(MAX_SPAN) if bits >> (MAX_SPAN - 1 - i) & 1)
        if not missing and first:
            raise CodecError("empty bitmap with a nonzero first seq")
        if missing and missing[-1] > 0xFFFF:
            raise CodecError("missing seq out of range")
        return StrawCommand(target, missing, session)
    raise CodecError(f"unknown frame kind {kind:#x}")
