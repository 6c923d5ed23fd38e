"""Byte-exact wire frames for BSM, SPaT and WSM messages.

Frame = magic ``b"VT"`` | version (1) | msg_type | little-endian payload.

=========  ====  ========================================================
msg_type   len   payload
=========  ====  ========================================================
1 Bsm      48    u32 vehicle_id, u64 timestamp_ms, f64 x, y, speed, heading
2 Spat     25    u32 intersection_id, u32 leader_id, u8 green_mask,
                 u32 time_remaining_ms, u64 timestamp_ms
3 Wsm      13+n  u8 subkind, u32 intersection_id, u32 sender_id, payload:
                 ElectionClaim f64 distance (n=8), HandoverOffer
                 u32 new_leader_id + u8 green_mask (n=5), HandoverAccept
                 u32 offer_sender_id (n=4)
=========  ====  ========================================================

Frames are exact-length: short input and trailing bytes are both errors.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from typing import Union

from .world import mask_is_conflict_free

MAGIC = b"VT"
VERSION = 1

_HEADER = struct.Struct("<2sBB")
_BSM = struct.Struct("<IQdddd")
_SPAT = struct.Struct("<IIBIQ")
_WSM_COMMON = struct.Struct("<BII")
_CLAIM = struct.Struct("<d")
_OFFER = struct.Struct("<IB")
_ACCEPT = struct.Struct("<I")

U32_MAX = 0xFFFFFFFF
U64_MAX = 0xFFFFFFFFFFFFFFFF


class MsgType(IntEnum):
    BSM = 1
    SPAT = 2
    WSM = 3


class WsmKind(IntEnum):
    ELECTION_CLAIM = 1
    HANDOVER_OFFER = 2
    HANDOVER_ACCEPT = 3


class ValidationError(ValueError):
    """A message violates its field invariants."""


class DecodeError(ValueError):
    """Input is not a valid frame. ``reason`` is one of ``DECODE_REASONS``."""

    def __init__(self, reason: str, detail: str = ""):
        self.reason = reason
        super().__init__(f"{reason}: {detail}" if detail else reason)


DECODE_REASONS = (
    "truncated header",
    "bad magic",
    "unknown version",
    "unknown msg_type",
    "unknown wsm subkind",
    "truncated payload",
    "trailing bytes",
    "invalid field",
)


def _check_u32(name: str, v: int) -> None:
    if not isinstance(v, int) or not 0 <= v <= U32_MAX:
        raise ValidationError(f"{name}={v!r} is not a u32")


def _check_u64(name: str, v: int) -> None:
    if not isinstance(v, int) or not 0 <= v <= U64_MAX:
        raise ValidationError(f"{name}={v!r} is not a u64")


def _check_finite(name: str, v: float) -> None:
    if not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValidationError(f"{name}={v!r} is not a finite number")


def _check_mask(v: int) -> None:
    if not isinstance(v, int) or not 0 <= v <= 0xFF:
        raise ValidationError(f"green_mask={v!r} is not a u8")
    if not mask_is_conflict_free(v):
        raise ValidationError(f"green_mask=0b{v:08b} greens conflicting directions")


@dataclass(frozen=True, slots=True)
class Bsm:
    vehicle_id: int
    timestamp_ms: int
    x: float
    y: float
    speed: float
    heading: float

    def validate(self) -> None:
        _check_u32("vehicle_id", self.vehicle_id)
        _check_u64("timestamp_ms", self.timestamp_ms)
        for name in ("x", "y", "speed", "heading"):
            _check_finite(name, getattr(self, name))
        if self.speed < 0:
            raise ValidationError(f"speed={self.speed} is negative")
        if not 0.0 <= self.heading < 360.0:
            raise ValidationError(f"heading={self.heading} outside [0, 360)")


@dataclass(frozen=True, slots=True)
class Spat:
    intersection_id: int
    leader_id: int
    green_mask: int
    time_remaining_ms: int
    timestamp_ms: int

    def validate(self) -> None:
        _check_u32("intersection_id", self.intersection_id)
        _check_u32("leader_id", self.leader_id)
        _check_mask(self.green_mask)
        _check_u32("time_remaining_ms", self.time_remaining_ms)
        _check_u64("timestamp_ms", self.timestamp_ms)


@dataclass(frozen=True, slots=True)
class ElectionClaim:
    intersection_id: int
    sender_id: int
    distance_to_stop_line: float

    kind = WsmKind.ELECTION_CLAIM

    def validate(self) -> None:
        _check_u32("intersection_id", self.intersection_id)
        _check_u32("sender_id", self.sender_id)
        _check_finite("distance_to_stop_line", self.distance_to_stop_line)
        if self.distance_to_stop_line < 0:
            raise ValidationError("distance_to_stop_line is negative")


@dataclass(frozen=True, slots=True)
class HandoverOffer:
    intersection_id: int
    sender_id: int
    new_leader_id: int
    green_mask: int

    kind = WsmKind.HANDOVER_OFFER

    def validate(self) -> None:
        _check_u32("intersection_id", self.intersection_id)
        _check_u32("sender_id", self.sender_id)
        _check_u32("new_leader_id", self.new_leader_id)
        _check_mask(self.green_mask)


@dataclass(frozen=True, slots=True)
class HandoverAccept:
    intersection_id: int
    sender_id: int
    offer_sender_id: int

    kind = WsmKind.HANDOVER_ACCEPT

    def validate(self) -> None:
        _check_u32("intersection_id", self.intersection_id)
        _check_u32("sender_id", self.sender_id)
        _check_u32("offer_sender_id", self.offer_sender_id)


Wsm = Union[ElectionClaim, HandoverOffer, HandoverAccept]
Message = Union[Bsm, Spat, ElectionClaim, HandoverOffer, HandoverAccept]


def frame_length(msg: Message) -> int:
    if isinstance(msg, Bsm):
        return _HEADER.size + _BSM.size
    if isinstance(msg, Spat):
        return _HEADER.size + _SPAT.size
    body = {ElectionClaim: _CLAIM, HandoverOffer: _OFFER, HandoverAccept: _ACCEPT}[type(msg)]
    return _HEADER.size + _WSM_COMMON.size + body.size


def encode(msg: Message) -> bytes:
    """Validate and serialize a message. Raises ValidationError."""
    msg.validate()
    if isinstance(msg, Bsm):
        return _HEADER.pack(MAGIC, VERSION, MsgType.BSM) + _BSM.pack(
            msg.vehicle_id, msg.timestamp_ms, msg.x, msg.y, msg.speed, msg.heading)
    if isinstance(msg, Spat):
        return _HEADER.pack(MAGIC, VERSION, MsgType.SPAT) + _SPAT.pack(
            msg.intersection_id, msg.leader_id, msg.green_mask,
            msg.time_remaining_ms, msg.timestamp_ms)
    head = _HEADER.pack(MAGIC, VERSION, MsgType.WSM) + _WSM_COMMON.pack(
        msg.kind, msg.intersection_id, msg.sender_id)
    if isinstance(msg, ElectionClaim):
        return head + _CLAIM.pack(msg.distance_to_stop_line)
    if isinstance(msg, HandoverOffer):
        return head + _OFFER.pack(msg.new_leader_id, msg.green_mask)
    if isinstance(msg, HandoverAccept):
        return head + _ACCEPT.pack(msg.offer_sender_id)
    raise ValidationError(f"not a message: {type(msg).__name__}")


def _unpack_exact(layout: struct.Struct, data: bytes, offset: int) -> tuple:
    remaining = len(data) - offset
    if remaining < layout.size:
        raise DecodeError("truncated payload",
                          f"need {layout.size} bytes at offset {offset}, have {remaining}")
    if remaining > layout.size:
        raise DecodeError("trailing bytes", f"{remaining - layout.size} unexpected byte(s)")
    return layout.unpack_from(data, offset)


def decode(data: bytes) -> Message:
    """Parse exactly one frame. Raises DecodeError on any malformed input."""
    data = bytes(data)
    if len(data) < _HEADER.size:
        raise DecodeError("truncated header", f"{len(data)} byte(s)")
    magic, version, msg_type = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise DecodeError("bad magic", magic.hex())
    if version != VERSION:
        raise DecodeError("unknown version", str(version))
    off = _HEADER.size
    if msg_type == MsgType.BSM:
        msg: Message = Bsm(*_unpack_exact(_BSM, data, off))
    elif msg_type == MsgType.SPAT:
        msg = Spat(*_unpack_exact(_SPAT, data, off))
    elif msg_type == MsgType.WSM:
        if len(data) - off < _WSM_COMMON.size:
            raise DecodeError("truncated payload", "WSM common fields")
        kind, iid, sender = _WSM_COMMON.unpack_from(data, off)
        off += _WSM_COMMON.size
        if kind == WsmKind.ELECTION_CLAIM:
            msg = ElectionClaim(iid, sender, *_unpack_exact(_CLAIM, data, off))
        elif kind == WsmKind.HANDOVER_OFFER:
            msg = HandoverOffer(iid, sender, *_unpack_exact(_OFFER, data, off))
        elif kind == WsmKind.HANDOVER_ACCEPT:
            msg = HandoverAccept(iid, sender, *_unpack_exact(_ACCEPT, data, off))
        else:
            raise DecodeError("unknown wsm subkind", str(kind))
    else:
        raise DecodeError("unknown msg_type", str(msg_type))
    try:
        msg.validate()
    except ValidationError as exc:
        raise DecodeError("invalid field", str(exc)) from None
    return msg
