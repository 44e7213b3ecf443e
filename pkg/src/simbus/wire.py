"""Frame transports and the datagram wire format.

Wire layout (28 bytes, used verbatim for udp and inproc channels)::

    offset  size  field
    0       4     magic "CAN1" (43 41 4E 31)
    4       4     frame id, big-endian
    8       1     dlc
    9       1     flags (0)
    10      2     reserved (0)
    12      8     payload, zero-padded to 8 bytes
    20      8     timestamp, big-endian nanoseconds

Channel descriptors:

* ``inproc:<name>``  — in-process broadcast queue (one sender, any receivers)
* ``udp:<host>:<port>`` — one datagram per frame
* ``socketcan:<ifname>`` — Linux SocketCAN, available only where the OS
  provides AF_CAN; timestamps are local arrival times.
"""

from __future__ import annotations

import queue
import socket
import struct
import threading
import time

from .codec import CanFrame
from .errors import SimbusError

MAGIC = b"CAN1"
_WIRE = struct.Struct(">4sIBBH8sQ")
WIRE_SIZE = _WIRE.size  # 28

_CAN_FRAME_FMT = "=IB3x8s"  # SocketCAN kernel frame layout


class TransportError(SimbusError):
    """Channel open, send, or receive failure."""


def serialize_frame(frame: CanFrame) -> bytes:
    """Encode a frame into its fixed-size wire datagram."""
    return _WIRE.pack(
        MAGIC,
        frame.frame_id,
        frame.dlc,
        0,
        0,
        frame.data.ljust(8, b"\x00"),
        frame.timestamp_ns,
    )


def deserialize_frame(datagram: bytes) -> CanFrame:
    """Decode a wire datagram; rejects short, oversized, or foreign data."""
    if len(datagram) < WIRE_SIZE:
        raise TransportError(f"short datagram: {len(datagram)} bytes, need {WIRE_SIZE}")
    if len(datagram) > WIRE_SIZE:
        raise TransportError(f"oversized datagram: {len(datagram)} bytes, expected {WIRE_SIZE}")
    magic, frame_id, dlc, _flags, _reserved, data, timestamp_ns = _WIRE.unpack(datagram)
    if magic != MAGIC:
        raise TransportError(f"bad magic {magic!r}")
    if dlc > 8:
        raise TransportError(f"invalid dlc {dlc}")
    return CanFrame(frame_id=frame_id, dlc=dlc, data=data[:dlc], timestamp_ns=timestamp_ns)


def parse_descriptor(descriptor: str) -> tuple[str, str]:
    scheme, sep, rest = descriptor.partition(":")
    if not sep or scheme not in ("inproc", "udp", "socketcan"):
        raise TransportError(
            f"unknown channel scheme in {descriptor!r} (use inproc:, udp:, or socketcan:)"
        )
    return scheme, rest


def channel_label(descriptor: str | None, default: str = "vcan0") -> str:
    """Human-readable channel name for log/console lines."""
    if not descriptor:
        return default
    return parse_descriptor(descriptor)[1] or default


# --- in-process channel ------------------------------------------------

_inproc_lock = threading.Lock()
_inproc_receivers: dict[str, list[queue.Queue]] = {}


class InprocSender:
    def __init__(self, name: str):
        self._name = name

    def send(self, frame: CanFrame) -> None:
        datagram = serialize_frame(frame)
        with _inproc_lock:
            targets = list(_inproc_receivers.get(self._name, ()))
        for q in targets:
            q.put(datagram)

    def close(self) -> None:
        pass


class InprocReceiver:
    def __init__(self, name: str):
        self._name = name
        self._queue: queue.Queue = queue.Queue()
        with _inproc_lock:
            _inproc_receivers.setdefault(name, []).append(self._queue)

    def recv(self, timeout: float | None = None) -> CanFrame | None:
        try:
            datagram = self._queue.get(timeout=timeout)
        except queue.Empty:
            return None
        return deserialize_frame(datagram)

    def close(self) -> None:
        with _inproc_lock:
            receivers = _inproc_receivers.get(self._name, [])
            if self._queue in receivers:
                receivers.remove(self._queue)


# --- UDP channel --------------------------------------------------------


def _split_host_port(rest: str) -> tuple[str, int]:
    host, sep, port = rest.rpartition(":")
    if not sep:
        raise TransportError(f"udp descriptor needs host:port, got {rest!r}")
    try:
        return host, int(port)
    except ValueError:
        raise TransportError(f"invalid udp port {port!r}") from None


class UdpSender:
    def __init__(self, rest: str):
        self._addr = _split_host_port(rest)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)

    def send(self, frame: CanFrame) -> None:
        try:
            self._sock.sendto(serialize_frame(frame), self._addr)
        except OSError as exc:
            raise TransportError(f"udp send to {self._addr}: {exc}") from exc

    def close(self) -> None:
        self._sock.close()


class UdpReceiver:
    # bursts from the generator overflow the default kernel buffer
    RCVBUF = 1 << 22

    def __init__(self, rest: str):
        host, port = _split_host_port(rest)
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, self.RCVBUF)
        except OSError:
            pass
        try:
            self._sock.bind((host, port))
        except OSError as exc:
            self._sock.close()
            raise TransportError(f"udp bind {host}:{port}: {exc}") from exc

    @property
    def port(self) -> int:
        return self._sock.getsockname()[1]

    def recv(self, timeout: float | None = None) -> CanFrame | None:
        self._sock.settimeout(timeout)
        try:
            datagram, _ = self._sock.recvfrom(65536)
        except (socket.timeout, TimeoutError):
            return None
        return deserialize_frame(datagram)

    def close(self) -> None:
        self._sock.close()


# --- SocketCAN channel (platform-specific) -------------------------------


def socketcan_available() -> bool:
    return hasattr(socket, "AF_CAN") and hasattr(socket, "CAN_RAW")


def _open_can_socket(ifname: str):
    if not socketcan_available():
        raise TransportError("socketcan is not available on this platform")
    try:
        sock = socket.socket(socket.AF_CAN, socket.SOCK_RAW, socket.CAN_RAW)
    except OSError as exc:
        raise TransportError(f"socketcan unavailable here: {exc}") from exc
    try:
        sock.bind((ifname,))
    except OSError as exc:
        sock.close()
        raise TransportError(f"socketcan bind {ifname!r}: {exc}") from exc
    return sock


class SocketCanSender:
    def __init__(self, ifname: str):
        self._sock = _open_can_socket(ifname)

    def send(self, frame: CanFrame) -> None:
        packed = struct.pack(_CAN_FRAME_FMT, frame.frame_id, frame.dlc, frame.data.ljust(8, b"\x00"))
        try:
            self._sock.send(packed)
        except OSError as exc:
            raise TransportError(f"socketcan send: {exc}") from exc

    def close(self) -> None:
        self._sock.close()


class SocketCanReceiver:
    def __init__(self, ifname: str):
        self._sock = _open_can_socket(ifname)

    def recv(self, timeout: float | None = None) -> CanFrame | None:
        self._sock.settimeout(timeout)
        try:
            packed = self._sock.recv(16)
        except (socket.timeout, TimeoutError):
            return None
        can_id, dlc, data = struct.unpack(_CAN_FRAME_FMT, packed)
        return CanFrame(frame_id=can_id & 0x7FF, dlc=dlc, data=data[:dlc],
                        timestamp_ns=time.time_ns())

    def close(self) -> None:
        self._sock.close()


_SENDERS = {"inproc": InprocSender, "udp": UdpSender, "socketcan": SocketCanSender}
_RECEIVERS = {"inproc": InprocReceiver, "udp": UdpReceiver, "socketcan": SocketCanReceiver}


def open_sender(descriptor: str):
    scheme, rest = parse_descriptor(descriptor)
    return _SENDERS[scheme](rest)


def open_receiver(descriptor: str):
    scheme, rest = parse_descriptor(descriptor)
    return _RECEIVERS[scheme](rest)
