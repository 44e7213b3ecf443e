"""Declarative binding of simulated vehicle channels to CAN signals.

The map file is JSON: a list of bindings, each naming a vehicle state
channel and the message/signal it feeds, with an optional linear transform::

    {
      "bindings": [
        {"channel": "wheel_speed", "message": "sampleFrame2", "signal": "wheelspeed"},
        {"channel": "steering", "message": "sampleFrame1", "signal": "steering",
         "gain": 1, "bias": 0}
      ]
    }

The schema is specific to this tool; exports from other stacks need a small
conversion step. Encoded value = gain * channel + bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path

from .codec import CanFrame, CodecStats, encode_message
from .dbc import DbcDatabase, DbcError
from .errors import SimbusError
from .scenario import CHANNEL_NAMES, VehicleState


class MappingError(SimbusError):
    """Invalid mapping file or binding."""


@dataclass(frozen=True)
class Binding:
    channel: str
    message: str
    signal: str
    gain: Decimal = Decimal(1)
    bias: Decimal = Decimal(0)


@dataclass(frozen=True)
class SignalMapping:
    bindings: tuple[Binding, ...]

    def messages(self) -> list[str]:
        seen = []
        for b in self.bindings:
            if b.message not in seen:
                seen.append(b.message)
        return seen


def load_mapping(path, db: DbcDatabase) -> SignalMapping:
    """Parse and cross-validate a map file against the database."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh, parse_float=Decimal)
    except FileNotFoundError:
        raise MappingError(f"mapping file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise MappingError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None

    if isinstance(raw, dict):
        entries = raw.get("bindings")
    else:
        entries = raw
    if not isinstance(entries, list):
        raise MappingError(f"{path}: expected a 'bindings' list")

    bindings: list[Binding] = []
    bound: dict[tuple[str, str], int] = {}
    for idx, entry in enumerate(entries):
        where = f"{path}: bindings[{idx}]"
        if not isinstance(entry, dict):
            raise MappingError(f"{where}: expected an object")
        try:
            channel = entry["channel"]
            message = entry["message"]
            signal = entry["signal"]
        except KeyError as exc:
            raise MappingError(f"{where}: missing field {exc.args[0]!r}") from None
        if channel not in CHANNEL_NAMES:
            raise MappingError(
                f"{where}: unknown channel {channel!r} (valid: {', '.join(CHANNEL_NAMES)})"
            )
        try:
            db.message_by_name(message).signal(signal)
        except DbcError as exc:
            raise MappingError(f"{where}: {exc}") from None
        key = (message, signal)
        if key in bound:
            raise MappingError(
                f"{where}: signal {message}.{signal} already bound at bindings[{bound[key]}]"
            )
        bound[key] = idx
        try:
            gain = Decimal(str(entry.get("gain", 1)))
            bias = Decimal(str(entry.get("bias", 0)))
        except ArithmeticError:
            raise MappingError(f"{where}: gain/bias must be numbers") from None
        bindings.append(Binding(channel, message, signal, gain, bias))
    return SignalMapping(bindings=tuple(bindings))


def build_frames(
    state: VehicleState,
    mapping: SignalMapping,
    db: DbcDatabase,
    stats: CodecStats | None = None,
) -> list[CanFrame]:
    """Encode one frame per mapped message from a vehicle state.

    Frames are ordered by ascending frame id and stamped with the state's
    simulation time.
    """
    per_message: dict[str, dict[str, Decimal]] = {}
    for b in mapping.bindings:
        value = Decimal(str(getattr(state, b.channel))) * b.gain + b.bias
        per_message.setdefault(b.message, {})[b.signal] = value
    timestamp_ns = round(state.t * 1e9)
    ordered = sorted(per_message, key=lambda name: db.message_by_name(name).frame_id)
    return [
        encode_message(db, name, values, timestamp_ns=timestamp_ns, stats=stats)
        for name, values in ((m, per_message[m]) for m in ordered)
    ]
