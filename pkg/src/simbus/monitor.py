"""Receiver side of the pipeline: subscribe, decode, print, assert.

The monitor plays the role of the physical CAN device plus its dashboard:
it prints every decoded frame as it arrives and can check declarative
expectations so CI asserts the end-to-end path without a human watching.
Malformed or unmapped traffic is counted, never fatal.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation

from .codec import CodecError, UnmappedFrameError, decode_frame
from .dbc import DbcDatabase, lookup_signal
from .errors import SimbusError
from .sinks import format_console
from .wire import channel_label, open_receiver

POLL_INTERVAL_S = 0.1


class ExpectationError(SimbusError):
    """A malformed expectation or one naming an unknown signal."""


@dataclass(frozen=True)
class Expectation:
    """Require >= min_count observations of message.signal within [lo, hi]."""

    message: str
    signal: str
    lo: Decimal
    hi: Decimal
    min_count: int


def parse_expectation(text: str) -> Expectation:
    """Parse the CLI form ``message.signal:min:max:count``."""
    parts = text.split(":")
    if len(parts) != 4 or "." not in parts[0]:
        raise ExpectationError(
            f"expectation {text!r} must look like message.signal:min:max:count"
        )
    message, _, signal = parts[0].partition(".")
    try:
        lo, hi = Decimal(parts[1]), Decimal(parts[2])
        min_count = int(parts[3])
    except (InvalidOperation, ValueError):
        raise ExpectationError(f"expectation {text!r}: min/max/count must be numeric") from None
    return Expectation(message, signal, lo, hi, min_count)


def validate_expectations(expectations, db: DbcDatabase) -> None:
    for exp in expectations:
        lookup_signal(db, exp.message, exp.signal)  # raises naming the level


def check_expectations(expectations, observed) -> tuple[bool, list[int]]:
    """Count in-range observations per expectation.

    ``observed`` yields (message, signal, value) triples. Returns the overall
    verdict and the per-expectation counts.
    """
    counts = [0] * len(expectations)
    index: dict[tuple[str, str], list[int]] = {}
    for i, exp in enumerate(expectations):
        index.setdefault((exp.message, exp.signal), []).append(i)
    for message, signal, value in observed:
        for i in index.get((message, signal), ()):
            exp = expectations[i]
            if exp.lo <= value <= exp.hi:
                counts[i] += 1
    ok = all(c >= e.min_count for c, e in zip(counts, expectations))
    return ok, counts


@dataclass
class MonitorReport:
    frames: int = 0
    unmapped: int = 0
    decode_errors: int = 0
    observations: list[tuple[str, str, Decimal]] = field(default_factory=list)

    @property
    def no_traffic(self) -> bool:
        return self.frames == 0


def run_monitor(
    channel: str,
    db: DbcDatabase,
    *,
    timeout: float = 5.0,
    expectations=(),
    max_frames: int | None = None,
    out=None,
    err=None,
) -> MonitorReport:
    """Receive until the channel stays idle for ``timeout`` seconds.

    Each frame prints as its console line followed by decoded
    ``message.signal=value unit`` pairs.
    """
    out = out if out is not None else sys.stdout
    err = err if err is not None else sys.stderr
    validate_expectations(expectations, db)
    receiver = open_receiver(channel)
    label = channel_label(channel)
    err.write(f"monitor: listening on {channel}\n")
    err.flush()

    report = MonitorReport()
    idle = 0.0
    try:
        while True:
            frame = receiver.recv(timeout=POLL_INTERVAL_S)
            if frame is None:
                idle += POLL_INTERVAL_S
                if idle >= timeout:
                    break
                continue
            idle = 0.0
            report.frames += 1
            line = format_console(frame, label)
            try:
                decoded = decode_frame(db, frame)
            except UnmappedFrameError:
                report.unmapped += 1
                out.write(f"{line} | (unmapped)\n")
            except CodecError:
                report.decode_errors += 1
                out.write(f"{line} | (decode error)\n")
            else:
                message = db.message_by_id(frame.frame_id)
                pairs = []
                for sig in sorted(message.signals, key=lambda s: s.start_bit):
                    value = decoded[sig.name]
                    pair = f"{message.name}.{sig.name}={value}"
                    if sig.unit:
                        pair += f" {sig.unit}"
                    pairs.append(pair)
                    report.observations.append((message.name, sig.name, value))
                out.write(f"{line} | {' '.join(pairs)}\n")
            out.flush()
            if max_frames is not None and report.frames >= max_frames:
                break
    finally:
        receiver.close()
        err.write(
            f"monitor: {report.frames} frames, {report.unmapped} unmapped, "
            f"{report.decode_errors} decode errors\n"
        )
        err.flush()
    return report
