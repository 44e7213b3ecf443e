"""Bit-exact conversion between physical signal values and CAN frame payloads.

Scaling follows the standard DBC linear transfer function
``physical = raw * factor + offset``. Physical-to-raw rounding is
half-away-from-zero, and out-of-range physical inputs are clamped to the
signal's range (clamps are counted, not errors, so a streaming generator
never stalls on a spike).

All operations are pure functions over immutable inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal, localcontext

from .dbc import ByteOrder, DbcDatabase, SignalDef, UnknownMessageError, UnknownSignalError
from .errors import SimbusError

MAX_STD_FRAME_ID = 0x7FF

# alias: signal name -> physical value, for one message
PhysicalValueMap = dict[str, Decimal]


class CodecError(SimbusError):
    """Base class for encode/decode errors."""


class RawRangeError(CodecError):
    """A raw integer does not fit the signal's bit length/signedness."""


class UnmappedFrameError(CodecError):
    """A frame id with no matching message in the database."""

    def __init__(self, frame_id: int):
        self.frame_id = frame_id
        super().__init__(f"unmapped frame id 0x{frame_id:X}")


@dataclass(frozen=True)
class CanFrame:
    """One classic CAN data frame (11-bit id, up to 8 payload bytes)."""

    frame_id: int
    dlc: int
    data: bytes
    timestamp_ns: int = 0

    def __post_init__(self):
        if not 0 <= self.frame_id <= MAX_STD_FRAME_ID:
            raise CodecError(f"frame id 0x{self.frame_id:X} outside 11-bit range")
        if not 0 <= self.dlc <= 8:
            raise CodecError(f"dlc {self.dlc} outside 0..8")
        object.__setattr__(self, "data", bytes(self.data))
        if len(self.data) != self.dlc:
            raise CodecError(f"data length {len(self.data)} != dlc {self.dlc}")


@dataclass
class CodecStats:
    """Diagnostics accumulated across encode calls."""

    clamp_events: int = 0


def _to_decimal(value) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, int):
        return Decimal(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite physical value {value!r}")
        return Decimal(str(value))
    return Decimal(str(value))


def phys_to_raw(sig: SignalDef, value, stats: CodecStats | None = None) -> int:
    """Convert a physical value to the raw integer stored on the bus.

    The value is clamped to the signal's physical range first; the result is
    always within the raw range implied by bit length and signedness.
    """
    phys = _to_decimal(value)
    lo, hi = sig.phys_range()
    clamped = min(max(phys, lo), hi)
    if clamped != phys and stats is not None:
        stats.clamp_events += 1
    with localcontext() as ctx:
        ctx.prec = 50
        raw = int(((clamped - sig.offset) / sig.factor).quantize(Decimal(1), rounding=ROUND_HALF_UP))
    raw_lo, raw_hi = sig.raw_range()
    if raw < raw_lo or raw > raw_hi:
        raw = min(max(raw, raw_lo), raw_hi)
        if stats is not None:
            stats.clamp_events += 1
    return raw


def raw_to_phys(sig: SignalDef, raw: int) -> Decimal:
    """Convert a raw integer back to its physical value."""
    raw_lo, raw_hi = sig.raw_range()
    if not raw_lo <= raw <= raw_hi:
        raise RawRangeError(
            f"signal {sig.name!r}: raw {raw} outside [{raw_lo}, {raw_hi}]"
        )
    return raw * sig.factor + sig.offset


def _le_span(sig: SignalDef, payload_bits: int) -> int:
    """Shift of the signal's LSB within the payload seen as a little-endian int."""
    if sig.start_bit + sig.bit_length > payload_bits:
        raise CodecError(
            f"signal {sig.name!r}: bits {sig.start_bit}..{sig.start_bit + sig.bit_length - 1} "
            f"exceed payload of {payload_bits} bits"
        )
    return sig.start_bit


def _be_span(sig: SignalDef, payload_bits: int) -> int:
    """Shift of the signal's LSB within the payload seen as a big-endian int.

    In MSB-first numbering a Motorola signal occupies a contiguous run
    starting at index ``(start_byte * 8) + (7 - start_bit_in_byte)``.
    """
    byte_idx, bit_idx = divmod(sig.start_bit, 8)
    msb_index = byte_idx * 8 + (7 - bit_idx)
    if msb_index + sig.bit_length > payload_bits:
        raise CodecError(
            f"signal {sig.name!r}: bits exceed payload of {payload_bits} bits"
        )
    return payload_bits - msb_index - sig.bit_length


def pack_signal(payload: bytes, sig: SignalDef, raw: int) -> bytes:
    """Write a raw value into its bit positions; all other bits unchanged."""
    raw_lo, raw_hi = sig.raw_range()
    if not raw_lo <= raw <= raw_hi:
        raise RawRangeError(
            f"signal {sig.name!r}: raw {raw} outside [{raw_lo}, {raw_hi}]"
        )
    size = len(payload)
    bits = 8 * size
    raw_u = raw & ((1 << sig.bit_length) - 1)
    mask = (1 << sig.bit_length) - 1
    if sig.byte_order is ByteOrder.LITTLE_ENDIAN:
        shift = _le_span(sig, bits)
        word = int.from_bytes(payload, "little")
        word = (word & ~(mask << shift)) | (raw_u << shift)
        return word.to_bytes(size, "little")
    shift = _be_span(sig, bits)
    word = int.from_bytes(payload, "big")
    word = (word & ~(mask << shift)) | (raw_u << shift)
    return word.to_bytes(size, "big")


def unpack_signal(payload: bytes, sig: SignalDef) -> int:
    """Extract a raw value; exact inverse of pack_signal, sign-extended."""
    size = len(payload)
    bits = 8 * size
    mask = (1 << sig.bit_length) - 1
    if sig.byte_order is ByteOrder.LITTLE_ENDIAN:
        shift = _le_span(sig, bits)
        raw = (int.from_bytes(payload, "little") >> shift) & mask
    else:
        shift = _be_span(sig, bits)
        raw = (int.from_bytes(payload, "big") >> shift) & mask
    if sig.signed and raw & (1 << (sig.bit_length - 1)):
        raw -= 1 << sig.bit_length
    return raw


def encode_message(
    db: DbcDatabase,
    message: str,
    values: PhysicalValueMap,
    timestamp_ns: int = 0,
    stats: CodecStats | None = None,
) -> CanFrame:
    """Encode physical values into a frame for the named message.

    Signals absent from ``values`` stay at raw 0, so partial value maps still
    produce legal frames.
    """
    msg = db.message_by_name(message)
    if msg.extended:
        raise CodecError(
            f"message {message!r} uses an extended frame id; only 11-bit frames are generated"
        )
    known = {sig.name for sig in msg.signals}
    for name in values:
        if name not in known:
            raise UnknownSignalError(message, name)
    payload = bytes(msg.dlc)
    for sig in msg.signals:
        if sig.name in values:
            payload = pack_signal(payload, sig, phys_to_raw(sig, values[sig.name], stats))
    return CanFrame(frame_id=msg.frame_id, dlc=msg.dlc, data=payload, timestamp_ns=timestamp_ns)


def decode_frame(db: DbcDatabase, frame: CanFrame) -> PhysicalValueMap:
    """Decode every signal of the matching message to physical values.

    The result is ordered by ascending start bit (payload layout order).
    Raises UnmappedFrameError for unknown frame ids; a receiver is expected
    to count those rather than abort.
    """
    try:
        msg = db.message_by_id(frame.frame_id)
    except UnknownMessageError:
        raise UnmappedFrameError(frame.frame_id) from None
    decoded: PhysicalValueMap = {}
    for sig in sorted(msg.signals, key=lambda s: s.start_bit):
        decoded[sig.name] = raw_to_phys(sig, unpack_signal(frame.data, sig))
    return decoded
