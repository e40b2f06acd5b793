"""Collection schedules: an active date range plus weekly local-time windows.

Timestamps everywhere else in the system are UTC epoch milliseconds;
schedules are the one place timezones appear. Windows are half-open
[start, end) so adjacent windows tile without overlap, and an empty window
list means "any time within the date range".
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime, timezone
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

DAY_NAMES = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")
_DAY_INDEX = {name: i for i, name in enumerate(DAY_NAMES)}


def _parse_hhmm(text: str) -> int:
    try:
        hh, mm = text.split(":")
        minute = int(hh) * 60 + int(mm)
    except (ValueError, AttributeError):
        raise ValueError(f"bad time of day {text!r}, expected HH:MM")
    if not (0 <= int(hh) < 24 and 0 <= int(mm) < 60):
        raise ValueError(f"bad time of day {text!r}")
    return minute


@dataclass(frozen=True)
class ScheduleWindow:
    """A weekly window: days of week + [start, end) local time in one tz."""

    days: frozenset[int]  # 0 = Monday .. 6 = Sunday
    start_minute: int  # minutes since local midnight
    end_minute: int
    tz: str

    def __post_init__(self):
        if not self.days or not all(0 <= d <= 6 for d in self.days):
            raise ValueError("window days must be a nonempty subset of mon..sun")
        if not (0 <= self.start_minute < self.end_minute <= 24 * 60):
            raise ValueError("window requires 0 <= start < end <= 24h")
        try:
            ZoneInfo(self.tz)
        except (ZoneInfoNotFoundError, ValueError, KeyError):
            raise ValueError(f"unknown timezone {self.tz!r}")

    @staticmethod
    def of(days: str | list[str], start: str, end: str, tz: str) -> "ScheduleWindow":
        """Build from day names ('tue' or ['mon','fri']) and HH:MM strings."""
        if isinstance(days, str):
            days = [days]
        try:
            idx = frozenset(_DAY_INDEX[d] for d in days)
        except KeyError as e:
            raise ValueError(f"unknown day name {e.args[0]!r}")
        return ScheduleWindow(idx, _parse_hhmm(start), _parse_hhmm(end), tz)


@dataclass(frozen=True)
class Schedule:
    """Active UTC date range plus zero or more weekly windows."""

    active_from: date
    active_until: date
    windows: tuple[ScheduleWindow, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.active_from > self.active_until:
            raise ValueError("active_from must not be after active_until")


def unrestricted_schedule(active_from: date = date(2000, 1, 1), active_until: date = date(2099, 12, 31)) -> Schedule:
    return Schedule(active_from, active_until, ())


def schedule_contains(s: Schedule, t_ms: int) -> bool:
    """True iff the UTC date of ``t_ms`` is in range and some window matches.

    With no windows, any instant inside the date range matches. Window
    matching converts ``t_ms`` to the window's timezone and tests local
    day-of-week plus the half-open [start, end) minute range.
    """
    dt_utc = datetime.fromtimestamp(t_ms / 1000.0, tz=timezone.utc)
    d = dt_utc.date()
    if d < s.active_from or d > s.active_until:
        return False
    if not s.windows:
        return True
    for w in s.windows:
        local = dt_utc.astimezone(ZoneInfo(w.tz))
        if local.weekday() not in w.days:
            continue
        minute = local.hour * 60 + local.minute + (local.second + local.microsecond / 1e6) / 60.0
        if w.start_minute <= minute < w.end_minute:
            return True
    return False
