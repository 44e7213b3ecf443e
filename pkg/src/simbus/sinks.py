"""Composable frame outputs: console, bus channel, time-series writer.

Layers are stacked as decorators in a fixed order (stdout, then channel,
then time-series), each forwarding every frame to the next enabled layer,
so any subset observes the exact emitted sequence. An optional pacing layer
in front spaces emissions to the configured bus bitrate.
"""

from __future__ import annotations

import os
import re
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .codec import CanFrame, decode_frame
from .dbc import DbcDatabase
from .errors import ConfigError, SimbusError
from .influx import InfluxWriter
from .wire import channel_label, open_sender

# classic CAN base frame overhead: SOF+arbitration+control+CRC+ACK+EOF+IFS,
# bit stuffing ignored
FRAME_OVERHEAD_BITS = 47


class SinkWriteError(SimbusError):
    """A sink layer failed to deliver a frame; the run must stop."""


@dataclass
class SinkConfig:
    """What to open: any subset of the three output layers plus pacing."""

    stdout_enabled: bool = False
    channel: str | None = None        # transport descriptor, e.g. "udp:127.0.0.1:9000"
    bitrate: int = 250_000            # bit/s, used when pacing
    pace: bool | None = None          # None: pace iff a channel is open
    channel_name: str = "vcan0"       # label for console lines and influx tags
    influx_bucket: str = ""
    influx_org: str = ""
    influx_url: str = ""              # resolved from INFLUXDB_URL / .env
    influx_token: str = ""            # resolved from INFLUXDB_TOKEN / .env

    @property
    def influx_enabled(self) -> bool:
        return bool(self.influx_bucket or self.influx_org)


def frame_bits(dlc: int) -> int:
    """Nominal bus occupancy of a classic CAN data frame in bits."""
    return FRAME_OVERHEAD_BITS + 8 * dlc


def format_console(frame: CanFrame, channel: str) -> str:
    """One frame as a candump-style line: ``(SS.ssssss) CHANNEL III#DD..DD``."""
    total_us = (frame.timestamp_ns + 500) // 1000
    secs, micros = divmod(total_us, 1_000_000)
    return f"({secs}.{micros:06d}) {channel} {frame.frame_id:03X}#{frame.data.hex().upper()}"


_CONSOLE_RE = re.compile(
    r"^\((?P<s>\d+)\.(?P<us>\d{6})\) (?P<chan>\S+) (?P<id>[0-9A-F]{3,8})#(?P<data>[0-9A-F]*)"
)


def parse_console(line: str) -> tuple[int, str, int, bytes]:
    """Inverse of format_console -> (timestamp_ns, channel, frame_id, data)."""
    m = _CONSOLE_RE.match(line.strip())
    if m is None:
        raise ValueError(f"not a console frame line: {line!r}")
    timestamp_ns = (int(m["s"]) * 1_000_000 + int(m["us"])) * 1000
    return timestamp_ns, m["chan"], int(m["id"], 16), bytes.fromhex(m["data"])


class FrameSink:
    """Base decorator layer: do this layer's work, then forward inward."""

    def __init__(self, inner: "FrameSink | None" = None):
        self.inner = inner

    def emit(self, frame: CanFrame) -> None:
        if self.inner is not None:
            self.inner.emit(frame)

    def close(self) -> None:
        if self.inner is not None:
            self.inner.close()

    def layers(self):
        sink: FrameSink | None = self
        while sink is not None:
            yield sink
            sink = sink.inner

    @property
    def depth(self) -> int:
        """Number of output layers (pacing is a gate, not an output)."""
        return sum(1 for layer in self.layers() if isinstance(layer, (ConsoleSink, ChannelSink, InfluxSink)))


class ConsoleSink(FrameSink):
    def __init__(self, channel: str, stream=None, inner: FrameSink | None = None):
        super().__init__(inner)
        self._channel = channel
        self._stream = stream if stream is not None else sys.stdout

    def emit(self, frame: CanFrame) -> None:
        self._stream.write(format_console(frame, self._channel) + "\n")
        self._stream.flush()
        super().emit(frame)


class ChannelSink(FrameSink):
    def __init__(self, sender, inner: FrameSink | None = None):
        super().__init__(inner)
        self._sender = sender
        self._seq = 0

    def emit(self, frame: CanFrame) -> None:
        self._seq += 1
        try:
            self._sender.send(frame)
        except SimbusError as exc:
            raise SinkWriteError(
                f"channel write failed for frame 0x{frame.frame_id:03X} (seq {self._seq}): {exc}"
            ) from exc
        super().emit(frame)

    def close(self) -> None:
        self._sender.close()
        super().close()


class InfluxSink(FrameSink):
    def __init__(self, writer: InfluxWriter, db: DbcDatabase, channel: str,
                 inner: FrameSink | None = None):
        super().__init__(inner)
        self._writer = writer
        self._db = db
        self._channel = channel

    def emit(self, frame: CanFrame) -> None:
        decoded = decode_frame(self._db, frame)
        message = self._db.message_by_id(frame.frame_id).name
        self._writer.add(frame, decoded, message=message, channel=self._channel)
        super().emit(frame)

    def close(self) -> None:
        self._writer.flush()
        super().close()


class PacingSink(FrameSink):
    """Spaces consecutive emissions by at least frame_bits/bitrate seconds."""

    def __init__(self, bitrate: int, inner: FrameSink):
        super().__init__(inner)
        self._bitrate = bitrate
        self._next_free = 0.0

    def emit(self, frame: CanFrame) -> None:
        while True:
            now = time.monotonic()
            if now >= self._next_free:
                break
            time.sleep(self._next_free - now)
        self._next_free = now + frame_bits(frame.dlc) / self._bitrate
        super().emit(frame)


def load_env_file(path=".env") -> dict[str, str]:
    """Parse a KEY=VALUE env file; missing file yields an empty mapping."""
    values: dict[str, str] = {}
    path = Path(path)
    if not path.is_file():
        return values
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        values[key.strip()] = value.strip().strip("'\"")
    return values


def resolve_env(name: str, env_file=".env") -> str:
    """Look a variable up in the process environment, then the env file."""
    return os.environ.get(name) or load_env_file(env_file).get(name, "")


def open_sink_stack(
    config: SinkConfig,
    db: DbcDatabase | None = None,
    mapping=None,
    console_stream=None,
) -> FrameSink:
    """Compose the configured layers into a single sink.

    ``mapping`` is accepted for interface symmetry with the frame builder;
    the current layers do not consult it.
    """
    if config.pace is None:
        pacing = config.channel is not None and config.bitrate > 0
    else:
        pacing = config.pace
    if pacing and config.bitrate <= 0:
        raise ConfigError(f"bitrate must be > 0 when pacing, got {config.bitrate}")

    sink: FrameSink | None = None
    if config.influx_enabled:
        if db is None:
            raise ConfigError("time-series output needs a CAN database to decode frames")
        for var, value in (("INFLUXDB_URL", config.influx_url),
                           ("INFLUXDB_TOKEN", config.influx_token)):
            if not value:
                raise ConfigError(
                    f"time-series output requested but {var} is not set "
                    f"(environment or .env file)"
                )
        writer = InfluxWriter(url=config.influx_url, token=config.influx_token,
                              org=config.influx_org, bucket=config.influx_bucket)
        sink = InfluxSink(writer, db, config.channel_name, inner=sink)
    if config.channel:
        sink = ChannelSink(open_sender(config.channel), inner=sink)
    if config.stdout_enabled:
        label = config.channel_name or channel_label(config.channel)
        sink = ConsoleSink(label, stream=console_stream, inner=sink)
    if sink is None:
        sink = FrameSink()
    if pacing:
        sink = PacingSink(config.bitrate, inner=sink)
    return sink
