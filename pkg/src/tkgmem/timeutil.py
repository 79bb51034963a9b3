"""UTC timestamp handling.

All timestamps are carried internally as 64-bit epoch milliseconds; the
wire format is ISO 8601 UTC with millisecond precision.
"""

from __future__ import annotations

import time
from datetime import datetime, timezone

MS_PER_SECOND = 1000


def utc_now_ms() -> int:
    return time.time_ns() // 1_000_000


class TickingClock:
    """Deterministic clock for tests: starts at a fixed instant, advances a
    fixed step per call."""

    def __init__(self, start_ms: int, step_ms: int = 1) -> None:
        self._next = start_ms
        self._step = step_ms

    def __call__(self) -> int:
        value = self._next
        self._next += self._step
        return value


def parse_iso(text: str) -> int:
    """Parse an ISO 8601 timestamp to epoch milliseconds.

    Accepts 'Z' or explicit offsets, date-only forms (midnight UTC), and
    fractional seconds up to microseconds (truncated to milliseconds).
    Naive timestamps are taken as UTC. Raises ValueError on anything else.
    """
    if not isinstance(text, str) or not text.strip():
        raise ValueError(f"not a timestamp: {text!r}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    dt = datetime.fromisoformat(raw)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    # Integer arithmetic throughout; float timestamps lose sub-ms precision.
    epoch_s = int(dt.replace(microsecond=0).timestamp())
    return epoch_s * MS_PER_SECOND + dt.microsecond // 1000


def format_iso(ms: int) -> str:
    """Canonical ISO 8601 UTC rendering with millisecond precision."""
    dt = datetime.fromtimestamp(ms // MS_PER_SECOND, tz=timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%S") + f".{ms % 1000:03d}Z"


def format_human(ms: int) -> str:
    """Compact rendering for context strings: date-only at exact midnight
    UTC, otherwise a full timestamp (milliseconds shown only when nonzero).
    """
    dt = datetime.fromtimestamp(ms // MS_PER_SECOND, tz=timezone.utc)
    millis = ms % 1000
    if millis == 0 and dt.hour == 0 and dt.minute == 0 and dt.second == 0:
        return dt.strftime("%Y-%m-%d")
    base = dt.strftime("%Y-%m-%dT%H:%M:%S")
    if millis:
        return f"{base}.{millis:03d}Z"
    return base + "Z"
