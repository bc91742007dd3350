"""Clocks. Mutations read server time through a Clock so tests and the demo
loader can pin created-time values."""

from __future__ import annotations

from datetime import datetime


class SystemClock:
    def now(self) -> datetime:
        return datetime.now()


class SettableClock:
    """Returns a fixed instant until retargeted; naive like the rest of the store."""

    def __init__(self, start: datetime):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def set(self, value: datetime) -> None:
        self._now = value
