"""Domain types and time arithmetic shared by every other module.

All types here are immutable values; the operations are pure functions.
Times are minutes since midnight at 1-minute internal resolution, days are
abstract indices 1-7 (1-5 classed as weekday, 6-7 as weekend).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from enum import Enum
from typing import Iterable, NamedTuple

MINUTES_PER_DAY = 1440

# Closed subject vocabulary; free-text subjects map through SUBJECT_ALIASES
# with "other" as the fallback.
SUBJECT_TAGS: frozenset[str] = frozenset(
    {"chinese", "math", "english", "science", "music", "physical", "art", "habits", "other"}
)

SUBJECT_ALIASES: dict[str, str] = {
    "chinese": "chinese",
    "mandarin": "chinese",
    "literacy": "chinese",
    "calligraphy": "chinese",
    "math": "math",
    "maths": "math",
    "mathematics": "math",
    "arithmetic": "math",
    "english": "english",
    "vocabulary": "english",
    "spelling": "english",
    "science": "science",
    "physics": "science",
    "biology": "science",
    "chemistry": "science",
    "nature": "science",
    "music": "music",
    "piano": "music",
    "violin": "music",
    "singing": "music",
    "rhythm": "music",
    "physical": "physical",
    "pe": "physical",
    "sports": "physical",
    "exercise": "physical",
    "fitness": "physical",
    "art": "art",
    "drawing": "art",
    "painting": "art",
    "habits": "habits",
    "habit": "habits",
    "routine": "habits",
    "organization": "habits",
    "chores": "habits",
}


def normalize_subject(text: str) -> str:
    """Map a free-text subject onto the closed tag set ("other" fallback)."""
    return SUBJECT_ALIASES.get(text.strip().lower(), "other")


class TaskClass(str, Enum):
    PRACTICE_MEMORIZATION = "practice_memorization"
    HOMEWORK_QA = "homework_qa"
    HABIT_STATE = "habit_state"
    REFLECTIVE = "reflective"
    PHYSICAL_MUSIC = "physical_music"


class Status(str, Enum):
    PENDING = "pending"
    IN_PROGRESS = "in_progress"
    DONE = "done"


# Legal status transitions: pending -> in_progress -> done, or pending -> done.
_TRANSITIONS: dict[Status, frozenset[Status]] = {
    Status.PENDING: frozenset({Status.IN_PROGRESS, Status.DONE}),
    Status.IN_PROGRESS: frozenset({Status.DONE}),
    Status.DONE: frozenset(),
}


def can_transition(old: Status, new: Status) -> bool:
    return new in _TRANSITIONS[old]


_HHMM_RE = re.compile(r"^([01]\d|2[0-3]):([0-5]\d)$")


@dataclass(frozen=True, order=True, slots=True)
class TimeOfDay:
    """A clock time as minutes since midnight, rendering as 24-hour HH:MM."""

    minutes_since_midnight: int

    def __post_init__(self) -> None:
        m = self.minutes_since_midnight
        if not isinstance(m, int) or not 0 <= m <= 1439:
            raise ValueError(f"time out of range: {m!r}")

    @classmethod
    def parse(cls, text: str) -> "TimeOfDay":
        match = _HHMM_RE.match(text)
        if match is None:
            raise ValueError(f"not a 24-hour HH:MM time: {text!r}")
        return cls(int(match.group(1)) * 60 + int(match.group(2)))

    @classmethod
    def at(cls, hour: int, minute: int = 0) -> "TimeOfDay":
        return cls(hour * 60 + minute)

    def quantized(self, step: int = 5) -> "TimeOfDay":
        """Round to the nearest multiple of ``step`` minutes (half rounds up)."""
        q = (self.minutes_since_midnight + step // 2) // step * step
        return TimeOfDay(min(q, (1439 // step) * step))

    def __str__(self) -> str:
        h, m = divmod(self.minutes_since_midnight, 60)
        return f"{h:02d}:{m:02d}"


@dataclass(frozen=True, order=True, slots=True)
class TimeSlot:
    """A half-open interval [start, end) on one abstract day (1-7)."""

    day: int
    start: TimeOfDay
    end: TimeOfDay

    def __post_init__(self) -> None:
        if not 1 <= self.day <= 7:
            raise ValueError(f"day out of range 1-7: {self.day}")
        if not self.start < self.end:
            raise ValueError(f"slot must have start < end: {self.start}-{self.end}")

    @property
    def duration_minutes(self) -> int:
        return self.end.minutes_since_midnight - self.start.minutes_since_midnight

    @property
    def abs_start(self) -> int:
        """Minutes from the start of Day 1; totally orders slots across days."""
        return (self.day - 1) * MINUTES_PER_DAY + self.start.minutes_since_midnight

    @property
    def abs_end(self) -> int:
        return (self.day - 1) * MINUTES_PER_DAY + self.end.minutes_since_midnight


def slots_overlap(a: TimeSlot, b: TimeSlot) -> bool:
    """True iff the two half-open slots intersect on the same day."""
    return a.day == b.day and a.start < b.end and b.start < a.end


WEEKDAY_DAYS = (1, 2, 3, 4, 5)
WEEKEND_DAYS = (6, 7)


@dataclass(frozen=True, slots=True)
class AvailabilityWindow:
    """A caregiver availability interval over a day class.

    ``days`` is "weekday" (Days 1-5), "weekend" (Days 6-7), or a specific
    day index. Weekday/weekend windows are hour-granular.
    """

    days: str | int
    start: TimeOfDay
    end: TimeOfDay

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise ValueError(f"window must have start < end: {self.start}-{self.end}")
        if isinstance(self.days, str):
            if self.days not in ("weekday", "weekend"):
                raise ValueError(f"unknown day class: {self.days!r}")
            if (
                self.start.minutes_since_midnight % 60
                or self.end.minutes_since_midnight % 60
            ):
                raise ValueError("weekday/weekend windows must fall on whole hours")
        elif not 1 <= self.days <= 7:
            raise ValueError(f"day out of range 1-7: {self.days}")

    def day_indices(self) -> tuple[int, ...]:
        if self.days == "weekday":
            return WEEKDAY_DAYS
        if self.days == "weekend":
            return WEEKEND_DAYS
        return (int(self.days),)


@dataclass(frozen=True, slots=True)
class CaregiverProfile:
    """An adult actor with expertise tags and availability windows."""

    caregiver_id: str
    role_label: str
    expertise_tags: frozenset[str] = frozenset()
    availability: tuple[AvailabilityWindow, ...] = ()
    notes: str = ""

    def __post_init__(self) -> None:
        if not self.caregiver_id:
            raise ValueError("caregiver_id must be nonempty")
        unknown = set(self.expertise_tags) - SUBJECT_TAGS
        if unknown:
            raise ValueError(f"expertise tags outside vocabulary: {sorted(unknown)}")


def expand_availability(caregiver: CaregiverProfile) -> tuple[TimeSlot, ...]:
    """Expand windows to per-day slots, merging overlaps into maximal runs.

    Returns slots sorted by (day, start); slots are pairwise disjoint.
    """
    by_day: dict[int, list[tuple[int, int]]] = {}
    for window in caregiver.availability:
        for day in window.day_indices():
            by_day.setdefault(day, []).append(
                (window.start.minutes_since_midnight, window.end.minutes_since_midnight)
            )
    slots: list[TimeSlot] = []
    for day in sorted(by_day):
        merged = merge_intervals(by_day[day])
        slots.extend(
            TimeSlot(day, TimeOfDay(lo), TimeOfDay(hi)) for lo, hi in merged
        )
    return tuple(slots)


def merge_intervals(intervals: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Merge half-open minute intervals into maximal disjoint ones."""
    merged: list[tuple[int, int]] = []
    for lo, hi in sorted(intervals):
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


@dataclass(frozen=True, slots=True)
class ChildProfile:
    child_id: str
    age: int
    grade_level: int
    characteristics: str = ""

    def __post_init__(self) -> None:
        if self.age <= 0:
            raise ValueError("age must be positive")
        if self.grade_level < 1:
            raise ValueError("grade_level must be >= 1")


_RESERVED_SUFFIX_RE = re.compile(r"_\d+$")


@dataclass(frozen=True, slots=True)
class LearningTask:
    """A weekly learning goal to be decomposed into subtasks."""

    task_name: str
    description: str
    subject_tag: str
    task_class: TaskClass

    def __post_init__(self) -> None:
        if not self.task_name:
            raise ValueError("task_name must be nonempty")
        if _RESERVED_SUFFIX_RE.search(self.task_name):
            raise ValueError(
                f"task_name must not end in an underscore-digit suffix: {self.task_name!r}"
            )
        if self.subject_tag not in SUBJECT_TAGS:
            raise ValueError(f"unknown subject tag: {self.subject_tag!r}")


class Handover(NamedTuple):
    from_id: str
    to_id: str
    timestamp: float


class SubtaskNote(NamedTuple):
    caregiver_id: str
    text: str
    timestamp: float


_SUBTASK_INDEX_RE = re.compile(r"^(.*)_(\d+)$")


@dataclass(frozen=True, slots=True)
class Subtask:
    """An atomic schedulable unit named ``<parent_task>_<k>`` with k >= 1."""

    subtask_name: str
    parent_task: str
    description: str
    owners: frozenset[str]
    tutoring_method: str = ""
    answers: str | None = None
    child_participates: bool = False
    slot: TimeSlot | None = None
    status: Status = Status.PENDING
    handover_log: tuple[Handover, ...] = ()
    notes: tuple[SubtaskNote, ...] = ()
    # Unknown wire fields preserved in lenient parse mode, as canonical JSON text.
    extra_json: str = ""

    def __post_init__(self) -> None:
        match = _SUBTASK_INDEX_RE.match(self.subtask_name)
        if (
            match is None
            or match.group(1) != self.parent_task
            or int(match.group(2)) < 1
        ):
            raise ValueError(
                f"subtask_name must be {self.parent_task!r} + '_<k>', k >= 1: "
                f"{self.subtask_name!r}"
            )
        if not self.owners:
            raise ValueError(f"{self.subtask_name}: owners must be nonempty")

    @property
    def index(self) -> int:
        return int(self.subtask_name.rsplit("_", 1)[1])

    def with_slot(self, slot: TimeSlot | None) -> "Subtask":
        return replace_subtask(self, slot=slot)

    def with_status(self, status: Status) -> "Subtask":
        return replace_subtask(self, status=status)


def replace_subtask(subtask: Subtask, **changes) -> Subtask:
    return replace(subtask, **changes)


@dataclass(frozen=True, slots=True)
class FamilyContext:
    """A family: 2-4 caregivers plus one child."""

    family_id: str
    caregivers: tuple[CaregiverProfile, ...]
    child: ChildProfile
    independence_required: bool = False

    def __post_init__(self) -> None:
        if not 2 <= len(self.caregivers) <= 4:
            raise ValueError(
                f"family must have 2-4 caregivers, got {len(self.caregivers)}"
            )
        ids = [c.caregiver_id for c in self.caregivers]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate caregiver ids: {ids}")

    def caregiver(self, caregiver_id: str) -> CaregiverProfile:
        for c in self.caregivers:
            if c.caregiver_id == caregiver_id:
                return c
        raise KeyError(caregiver_id)

    @property
    def caregiver_ids(self) -> tuple[str, ...]:
        return tuple(c.caregiver_id for c in self.caregivers)


@dataclass(frozen=True, slots=True)
class WeeklySchedule:
    """A 7-day plan: subtasks with assigned slots, rendered as the timesheet."""

    plan_id: str
    family_id: str
    subtasks: tuple[Subtask, ...]
    summary: str | None = None
    extra_json: str = ""

    def __post_init__(self) -> None:
        names = [s.subtask_name for s in self.subtasks]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"duplicate subtask names: {dupes}")
        missing = [s.subtask_name for s in self.subtasks if s.slot is None]
        if missing:
            raise ValueError(f"subtasks without slots: {missing}")

    def find(self, subtask_name: str) -> Subtask:
        for s in self.subtasks:
            if s.subtask_name == subtask_name:
                return s
        raise KeyError(subtask_name)

    def sorted_subtasks(self) -> tuple[Subtask, ...]:
        """Subtasks in canonical (day, start, name) order."""
        return tuple(
            sorted(self.subtasks, key=lambda s: (s.slot.abs_start, s.subtask_name))
        )

    def days_used(self) -> tuple[int, ...]:
        return tuple(sorted({s.slot.day for s in self.subtasks}))


def day_coverage_advisories(schedule: WeeklySchedule) -> list[str]:
    """Advisory (non-fatal) day-spread checks.

    With >= 7 subtasks every day should hold at least one; with fewer, each
    subtask should occupy a distinct day.
    """
    advisories: list[str] = []
    days = [s.slot.day for s in schedule.subtasks]
    if not days:
        return advisories
    if len(days) >= 7:
        empty = sorted(set(range(1, 8)) - set(days))
        if empty:
            advisories.append(f"days without any subtask: {empty}")
    else:
        if len(set(days)) != len(days):
            crowded = sorted({d for d in days if days.count(d) > 1})
            advisories.append(f"multiple subtasks share days: {crowded}")
    return advisories


# Daypart boundaries (minutes): morning 06:00-12:00, afternoon 12:00-18:00,
# evening 18:00-22:00. Child-independent tasks may use daytime 08:00-18:00.
WAKING_HOURS = (6 * 60, 22 * 60)
DAYTIME_HOURS = (8 * 60, 18 * 60)
DAYPARTS: tuple[tuple[str, int, int], ...] = (
    ("morning", 6 * 60, 12 * 60),
    ("afternoon", 12 * 60, 18 * 60),
    ("evening", 18 * 60, 22 * 60),
)


def daypart_of(start: TimeOfDay) -> str | None:
    """Daypart containing a slot's start, or None outside 06:00-22:00."""
    m = start.minutes_since_midnight
    for name, lo, hi in DAYPARTS:
        if lo <= m < hi:
            return name
    return None


def slot_within_intervals(slot: TimeSlot, intervals: Iterable[tuple[int, int]]) -> bool:
    """True iff the slot's minute range is contained in one interval."""
    lo = slot.start.minutes_since_midnight
    hi = slot.end.minutes_since_midnight
    return any(a <= lo and hi <= b for a, b in intervals)


def availability_minutes(caregiver: CaregiverProfile) -> dict[int, list[tuple[int, int]]]:
    """Merged per-day availability intervals in minutes, keyed by day."""
    out: dict[int, list[tuple[int, int]]] = {}
    for slot in expand_availability(caregiver):
        out.setdefault(slot.day, []).append(
            (slot.start.minutes_since_midnight, slot.end.minutes_since_midnight)
        )
    return out


def owner_available(
    caregiver: CaregiverProfile, slot: TimeSlot, *, child_participates: bool = False
) -> bool:
    """Whether a slot is inside the caregiver's availability.

    Child-involving subtasks fall back to daytime hours when outside adult
    windows (the child-independence scheduling rule).
    """
    intervals = availability_minutes(caregiver).get(slot.day, [])
    if slot_within_intervals(slot, intervals):
        return True
    if child_participates:
        return (
            DAYTIME_HOURS[0] <= slot.start.minutes_since_midnight
            and slot.end.minutes_since_midnight <= DAYTIME_HOURS[1]
        )
    return False
