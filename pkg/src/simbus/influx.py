"""Line-protocol writer for decoded frames.

Records go to ``{url}/api/v2/write?org={org}&bucket={bucket}`` via HTTP POST
with a token header. A ``file:`` URL appends the same lines to a local file
instead, which keeps desk runs and CI self-contained.
"""

from __future__ import annotations

import urllib.error
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from decimal import Decimal

from .codec import CanFrame
from .dbc import format_decimal
from .errors import SimbusError

MEASUREMENT = "canbus"
DEFAULT_BATCH = 200


class InfluxWriteError(SimbusError):
    """The write endpoint rejected a batch (after one retry) or the file is unwritable."""


def _escape_tag(value: str) -> str:
    return value.replace("\\", "\\\\").replace(",", "\\,").replace(" ", "\\ ").replace("=", "\\=")


def line_protocol(frame: CanFrame, decoded: dict[str, Decimal], *, message: str, channel: str) -> str | None:
    """Format one frame's decoded values as a line-protocol record.

    Returns None for an empty value map (nothing to write). Field order
    follows the decoded map (payload layout order).
    """
    if not decoded:
        return None
    tags = f"channel={_escape_tag(channel)},message={_escape_tag(message)}"
    fields = ",".join(f"{_escape_tag(name)}={format_decimal(value)}" for name, value in decoded.items())
    return f"{MEASUREMENT},{tags} {fields} {frame.timestamp_ns}"


@dataclass
class InfluxWriter:
    url: str
    token: str
    org: str
    bucket: str
    batch_size: int = DEFAULT_BATCH
    _buffer: list[str] = field(default_factory=list, repr=False)

    def add(self, frame: CanFrame, decoded: dict[str, Decimal], *, message: str, channel: str) -> None:
        line = line_protocol(frame, decoded, message=message, channel=channel)
        if line is None:
            return
        self._buffer.append(line)
        if len(self._buffer) >= self.batch_size:
            self.flush()

    def flush(self) -> None:
        if not self._buffer:
            return
        payload = "\n".join(self._buffer) + "\n"
        self._buffer = []
        parsed = urllib.parse.urlparse(self.url)
        if parsed.scheme == "file":
            self._write_file(parsed, payload)
        else:
            self._post(payload)

    def _write_file(self, parsed, payload: str) -> None:
        path = parsed.path or parsed.netloc
        try:
            with open(path, "a", encoding="utf-8") as fh:
                fh.write(payload)
        except OSError as exc:
            raise InfluxWriteError(f"cannot append to {path!r}: {exc}") from exc

    def _post(self, payload: str) -> None:
        endpoint = (
            f"{self.url.rstrip('/')}/api/v2/write?"
            + urllib.parse.urlencode({"org": self.org, "bucket": self.bucket})
        )
        request = urllib.request.Request(
            endpoint,
            data=payload.encode("utf-8"),
            headers={
                "Authorization": f"Token {self.token}",
                "Content-Type": "text/plain; charset=utf-8",
            },
            method="POST",
        )
        last_error = None
        for _ in range(2):  # one retry
            try:
                with urllib.request.urlopen(request, timeout=10) as response:
                    if 200 <= response.status < 300:
                        return
                    last_error = f"HTTP {response.status}"
            except urllib.error.HTTPError as exc:
                last_error = f"HTTP {exc.code}"
            except urllib.error.URLError as exc:
                last_error = str(exc.reason)
        raise InfluxWriteError(f"write to {endpoint} failed: {last_error}")
