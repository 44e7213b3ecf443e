"""CAN database (DBC) subset: data model, parser, and renderer.

Only ``BO_`` (message) and ``SG_`` (signal) records are interpreted; every
other record type (VERSION, NS_, BU_, comments, attributes, value tables) is
tolerated and skipped so that real-world database files remain loadable.

Bit numbering
-------------
Payload bits are numbered LSB-first within each byte::

    byte 0                 byte 1
    | 7  6  5  4  3  2  1  0 | 15 14 13 12 11 10  9  8 | ...
    absolute position = byte_index * 8 + bit_in_byte

* little-endian (``@1``, Intel): the raw value's least-significant bit sits
  at absolute position ``start_bit`` and significance ascends from there::

      SG_ x : 16|16@1+   ->  bits 16..31, LSB at bit 16 (byte 2, bit 0)

* big-endian (``@0``, Motorola "sawtooth"): ``start_bit`` is the position of
  the raw value's MOST significant bit; successive bits walk down within the
  byte and continue at bit 7 of the next byte::

      SG_ y : 7|12@0+    ->  byte 0 bits 7..0, then byte 1 bits 7..4

Numeric fields (factor, offset, min, max) are kept as ``decimal.Decimal`` so
values such as 0.0001 survive a parse/render round trip without binary-float
drift.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum

from .errors import SimbusError

MAX_STD_FRAME_ID = 0x7FF
MAX_EXT_FRAME_ID = 0x1FFFFFFF
_EXT_FLAG = 0x80000000

_IDENT = r"[A-Za-z_][A-Za-z0-9_]*"
_NUMBER = r"[-+]?(?:[0-9]+\.?[0-9]*|\.[0-9]+)(?:[eE][-+]?[0-9]+)?"


class DbcError(SimbusError):
    """Base class for database file errors."""


class DbcSyntaxError(DbcError):
    """A line could not be parsed; carries file:line:column."""

    def __init__(self, message: str, *, filename: str = "<dbc>", line: int = 0, column: int = 0):
        self.filename = filename
        self.line = line
        self.column = column
        super().__init__(f"{filename}:{line}:{column}: {message}")


class DbcSemanticError(DbcError):
    """The text parsed but violates a database invariant."""


class UnknownMessageError(DbcError, KeyError):
    def __init__(self, message: str):
        self.message_name = message
        super().__init__(f"unknown message {message!r}")

    def __str__(self) -> str:
        return self.args[0]


class UnknownSignalError(DbcError, KeyError):
    def __init__(self, message: str, signal: str):
        self.message_name = message
        self.signal_name = signal
        super().__init__(f"unknown signal {signal!r} in message {message!r}")

    def __str__(self) -> str:
        return self.args[0]


class ByteOrder(Enum):
    LITTLE_ENDIAN = "little_endian"  # DBC '@1' (Intel)
    BIG_ENDIAN = "big_endian"        # DBC '@0' (Motorola)


def format_decimal(value: Decimal) -> str:
    """Render a Decimal without exponent notation or trailing zeros."""
    text = format(value, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    if text in ("", "-0", "-"):
        return "0"
    return text


@dataclass(frozen=True)
class SignalDef:
    """One signal's bit layout and physical scaling within a message."""

    name: str
    start_bit: int
    bit_length: int
    byte_order: ByteOrder = ByteOrder.LITTLE_ENDIAN
    signed: bool = False
    factor: Decimal = Decimal(1)
    offset: Decimal = Decimal(0)
    min_phys: Decimal = Decimal(0)
    max_phys: Decimal = Decimal(0)
    unit: str = ""
    receivers: tuple[str, ...] = ()

    def __post_init__(self):
        if not 1 <= self.bit_length <= 64:
            raise DbcSemanticError(f"signal {self.name!r}: bit_length must be in 1..64, got {self.bit_length}")
        if self.start_bit < 0:
            raise DbcSemanticError(f"signal {self.name!r}: negative start bit")
        if self.factor == 0:
            raise DbcSemanticError(f"signal {self.name!r}: factor must be nonzero")
        if self.min_phys > self.max_phys:
            raise DbcSemanticError(f"signal {self.name!r}: min {self.min_phys} > max {self.max_phys}")
        if not self.receivers:
            object.__setattr__(self, "receivers", ("Vector__XXX",))

    def raw_range(self) -> tuple[int, int]:
        """Raw integer range implied by bit length and signedness."""
        if self.signed:
            return -(1 << (self.bit_length - 1)), (1 << (self.bit_length - 1)) - 1
        return 0, (1 << self.bit_length) - 1

    def phys_range(self) -> tuple[Decimal, Decimal]:
        """Effective physical bounds.

        A DBC range of [0|0] conventionally means "unbounded"; in that case
        the bounds implied by the raw range are used instead.
        """
        if self.min_phys == 0 and self.max_phys == 0:
            raw_lo, raw_hi = self.raw_range()
            ends = (raw_lo * self.factor + self.offset, raw_hi * self.factor + self.offset)
            return min(ends), max(ends)
        return self.min_phys, self.max_phys

    def occupied_bits(self) -> frozenset[int]:
        """Absolute payload bit positions covered by this signal."""
        if self.byte_order is ByteOrder.LITTLE_ENDIAN:
            return frozenset(range(self.start_bit, self.start_bit + self.bit_length))
        positions = []
        byte_idx, bit_idx = divmod(self.start_bit, 8)
        for _ in range(self.bit_length):
            positions.append(byte_idx * 8 + bit_idx)
            if bit_idx == 0:
                byte_idx, bit_idx = byte_idx + 1, 7
            else:
                bit_idx -= 1
        return frozenset(positions)


@dataclass(frozen=True)
class MessageDef:
    """One CAN message: frame id, payload size, and its signals."""

    frame_id: int
    name: str
    dlc: int
    sender: str = "Vector__XXX"
    signals: tuple[SignalDef, ...] = ()
    extended: bool = False

    def __post_init__(self):
        if not 0 <= self.dlc <= 8:
            raise DbcSemanticError(f"message {self.name!r}: dlc must be in 0..8, got {self.dlc}")
        limit = MAX_EXT_FRAME_ID if self.extended else MAX_STD_FRAME_ID
        if not 0 <= self.frame_id <= limit:
            raise DbcSemanticError(
                f"message {self.name!r}: frame id 0x{self.frame_id:X} outside "
                f"{'29' if self.extended else '11'}-bit range"
            )
        object.__setattr__(self, "signals", tuple(self.signals))
        seen: dict[str, SignalDef] = {}
        used_bits: dict[int, str] = {}
        for sig in self.signals:
            if sig.name in seen:
                raise DbcSemanticError(f"message {self.name!r}: duplicate signal {sig.name!r}")
            seen[sig.name] = sig
            bits = sig.occupied_bits()
            if max(bits) >= 8 * self.dlc:
                raise DbcSemanticError(
                    f"signal exceeds DLC: {self.name!r}.{sig.name!r} needs bit "
                    f"{max(bits)} but dlc {self.dlc} provides {8 * self.dlc} bits"
                )
            for b in bits:
                if b in used_bits:
                    raise DbcSemanticError(
                        f"overlapping signals in message {self.name!r}: "
                        f"{sig.name!r} and {used_bits[b]!r} both use bit {b}"
                    )
                used_bits[b] = sig.name

    def signal(self, name: str) -> SignalDef:
        for sig in self.signals:
            if sig.name == name:
                return sig
        raise UnknownSignalError(self.name, name)


@dataclass
class DbcDatabase:
    """Parsed CAN database, indexed by frame id and by message name."""

    messages: tuple[MessageDef, ...] = ()
    _by_id: dict[int, MessageDef] = field(init=False, repr=False, compare=False)
    _by_name: dict[str, MessageDef] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.messages = tuple(self.messages)
        self._by_id = {}
        self._by_name = {}
        for msg in self.messages:
            if msg.frame_id in self._by_id:
                raise DbcSemanticError(
                    f"duplicate frame id 0x{msg.frame_id:X}: messages "
                    f"{self._by_id[msg.frame_id].name!r} and {msg.name!r}"
                )
            if msg.name in self._by_name:
                raise DbcSemanticError(f"duplicate message name {msg.name!r}")
            self._by_id[msg.frame_id] = msg
            self._by_name[msg.name] = msg

    def __len__(self) -> int:
        return len(self.messages)

    def message_by_id(self, frame_id: int) -> MessageDef:
        try:
            return self._by_id[frame_id]
        except KeyError:
            raise UnknownMessageError(f"0x{frame_id:X}") from None

    def message_by_name(self, name: str) -> MessageDef:
        try:
            return self._by_name[name]
        except KeyError:
            raise UnknownMessageError(name) from None


def lookup_signal(db: DbcDatabase, message: str, signal: str) -> SignalDef:
    """Find a signal definition, or raise naming the missing level."""
    return db.message_by_name(message).signal(signal)


class _Cursor:
    """Sequential matcher over one line, tracking the column for errors."""

    def __init__(self, text: str, line_no: int, filename: str):
        self.text = text
        self.pos = 0
        self.line_no = line_no
        self.filename = filename

    def error(self, message: str) -> DbcSyntaxError:
        return DbcSyntaxError(message, filename=self.filename, line=self.line_no, column=self.pos + 1)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def take(self, pattern: str, what: str) -> str:
        self.skip_ws()
        m = re.compile(pattern).match(self.text, self.pos)
        if m is None:
            raise self.error(f"expected {what}")
        self.pos = m.end()
        return m.group(0)

    def peek(self, pattern: str) -> bool:
        self.skip_ws()
        return re.compile(pattern).match(self.text, self.pos) is not None

    def rest(self) -> str:
        return self.text[self.pos:].strip()


def _parse_message_header(cur: _Cursor) -> dict:
    cur.take(r"BO_", "'BO_'")
    raw_id = int(cur.take(r"[0-9]+", "frame id"))
    name = cur.take(_IDENT, "message name")
    cur.take(r":", "':'")
    dlc = int(cur.take(r"[0-9]+", "dlc"))
    sender = cur.rest() or "Vector__XXX"
    extended = bool(raw_id & _EXT_FLAG)
    return {
        "frame_id": raw_id & MAX_EXT_FRAME_ID,
        "name": name,
        "dlc": dlc,
        "sender": sender.split()[0],
        "extended": extended,
    }


def _parse_signal(cur: _Cursor) -> SignalDef:
    cur.take(r"SG_", "'SG_'")
    name = cur.take(_IDENT, "signal name")
    if cur.peek(r"[mM][0-9]*\s*:"):
        raise DbcSemanticError(
            f"signal {name!r}: multiplexed signals are unsupported"
        )
    cur.take(r":", "':'")
    start_bit = int(cur.take(r"[0-9]+", "start bit"))
    cur.take(r"\|", "'|'")
    bit_length = int(cur.take(r"[0-9]+", "bit length"))
    cur.take(r"@", "'@'")
    order = cur.take(r"[01]", "byte order (0 or 1)")
    sign = cur.take(r"[-+]", "sign (+ or -)")
    cur.take(r"\(", "'('")
    factor = Decimal(cur.take(_NUMBER, "factor"))
    cur.take(r",", "','")
    offset = Decimal(cur.take(_NUMBER, "offset"))
    cur.take(r"\)", "')'")
    cur.take(r"\[", "'['")
    min_phys = Decimal(cur.take(_NUMBER, "minimum"))
    cur.take(r"\|", "'|'")
    max_phys = Decimal(cur.take(_NUMBER, "maximum"))
    cur.take(r"\]", "']'")
    unit = cur.take(r'"[^"]*"', "quoted unit")[1:-1]
    receivers = tuple(r for r in cur.rest().replace(",", " ").split() if r)
    return SignalDef(
        name=name,
        start_bit=start_bit,
        bit_length=bit_length,
        byte_order=ByteOrder.LITTLE_ENDIAN if order == "1" else ByteOrder.BIG_ENDIAN,
        signed=(sign == "-"),
        factor=factor,
        offset=offset,
        min_phys=min_phys,
        max_phys=max_phys,
        unit=unit,
        receivers=receivers,
    )


def parse_dbc(text: str, filename: str = "<dbc>") -> DbcDatabase:
    """Parse DBC text into a database.

    Raises DbcSyntaxError (with file:line:column) for lines that start a
    BO_/SG_ record but cannot be parsed, and DbcSemanticError for invariant
    violations (overlapping signals, signal exceeding DLC, duplicate ids).
    """
    messages: list[MessageDef] = []
    header: dict | None = None
    header_line = 0
    pending: list[SignalDef] = []

    def finish():
        nonlocal header, pending
        if header is None:
            return
        try:
            messages.append(MessageDef(signals=tuple(pending), **header))
        except DbcSemanticError as exc:
            raise DbcSemanticError(f"{filename}:{header_line}: {exc}") from None
        header = None
        pending = []

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if re.match(r"BO_\s", line):
            finish()
            cur = _Cursor(line, line_no, filename)
            header = _parse_message_header(cur)
            header_line = line_no
        elif re.match(r"SG_\s", line):
            if header is None:
                raise DbcSyntaxError(
                    "signal without a preceding BO_ message",
                    filename=filename, line=line_no, column=1,
                )
            cur = _Cursor(line, line_no, filename)
            try:
                pending.append(_parse_signal(cur))
            except DbcSemanticError as exc:
                raise DbcSemanticError(f"{filename}:{line_no}: {exc}") from None
        # anything else (VERSION, NS_, BU_, CM_, BA_, VAL_, blank) is skipped

    finish()
    try:
        return DbcDatabase(messages=tuple(messages))
    except DbcSemanticError as exc:
        raise DbcSemanticError(f"{filename}: {exc}") from None


def load_dbc(path) -> DbcDatabase:
    """Read and parse a DBC file (UTF-8, LF or CRLF)."""
    with open(path, "r", encoding="utf-8-sig") as fh:
        return parse_dbc(fh.read(), filename=str(path))


def render_dbc(db: DbcDatabase) -> str:
    """Emit BO_/SG_ text that parses back into an identical database."""
    lines: list[str] = []
    for msg in db.messages:
        raw_id = msg.frame_id | _EXT_FLAG if msg.extended else msg.frame_id
        lines.append(f"BO_ {raw_id} {msg.name}: {msg.dlc} {msg.sender}")
        for sig in msg.signals:
            order = "1" if sig.byte_order is ByteOrder.LITTLE_ENDIAN else "0"
            sign = "-" if sig.signed else "+"
            receivers = ",".join(sig.receivers) if sig.receivers else "Vector__XXX"
            lines.append(
                f" SG_ {sig.name} : {sig.start_bit}|{sig.bit_length}@{order}{sign}"
                f" ({format_decimal(sig.factor)},{format_decimal(sig.offset)})"
                f" [{format_decimal(sig.min_phys)}|{format_decimal(sig.max_phys)}]"
                f' "{sig.unit}" {receivers}'
            )
        lines.append("")
    return "\n".join(lines)
