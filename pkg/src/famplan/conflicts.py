"""Conflict detection and minimal repair over weekly schedules.

Repair edits only day/start/end; every other subtask field is untouched.
Parallel caregiving is allowed by design: two different owners at the same
time is not a conflict, and the child is only a contended resource when
both overlapping subtasks involve the child.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import (
    DAYTIME_HOURS,
    WAKING_HOURS,
    FamilyContext,
    Subtask,
    TimeOfDay,
    TimeSlot,
    WeeklySchedule,
    availability_minutes,
    replace_subtask,
    slots_overlap,
)
from .scheduler import GRID_MINUTES, ordering_edges

KIND_OVERLAP = "overlap"
KIND_SIMULTANEOUS = "simultaneous_same_owner"
KIND_UNAVAILABLE = "owner_unavailable"


@dataclass(frozen=True)
class Conflict:
    kind: str
    subtasks: tuple[str, ...]
    detail: str

    def to_json(self) -> dict:
        return {"kind": self.kind, "subtasks": list(self.subtasks), "detail": self.detail}


@dataclass(frozen=True)
class RepairResult:
    schedule: WeeklySchedule
    edits: tuple[tuple[str, TimeSlot, TimeSlot], ...]
    unresolved: tuple[Conflict, ...]


def _slot_in_availability(
    avail: dict[int, list[tuple[int, int]]], slot: TimeSlot, child_participates: bool
) -> bool:
    lo = slot.start.minutes_since_midnight
    hi = slot.end.minutes_since_midnight
    if any(a <= lo and hi <= b for a, b in avail.get(slot.day, [])):
        return True
    return child_participates and DAYTIME_HOURS[0] <= lo and hi <= DAYTIME_HOURS[1]


def detect_conflicts(family: FamilyContext, schedule: WeeklySchedule) -> list[Conflict]:
    """Every conflict of every kind, in stable (day, start, name) order."""
    avail = {c.caregiver_id: availability_minutes(c) for c in family.caregivers}
    ordered = sorted(schedule.subtasks, key=lambda s: (s.slot.abs_start, s.subtask_name))
    conflicts: list[tuple[tuple, Conflict]] = []

    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.slot.day != a.slot.day:
                continue
            if not slots_overlap(a.slot, b.slot):
                continue
            shared = a.owners & b.owners
            names = tuple(sorted((a.subtask_name, b.subtask_name)))
            if shared:
                if a.slot.start == b.slot.start:
                    kind = KIND_SIMULTANEOUS
                    detail = (
                        f"{names[0]} and {names[1]} start together on day {a.slot.day} "
                        f"at {a.slot.start} for owner(s) {sorted(shared)}"
                    )
                else:
                    kind = KIND_OVERLAP
                    detail = (
                        f"{names[0]} and {names[1]} overlap on day {a.slot.day} "
                        f"for owner(s) {sorted(shared)}"
                    )
                conflict = Conflict(kind, names, detail)
            elif a.child_participates and b.child_participates:
                conflict = Conflict(
                    KIND_OVERLAP, names,
                    f"{names[0]} and {names[1]} both need the child on day "
                    f"{a.slot.day} at overlapping times",
                )
            else:
                continue
            key = (a.slot.day, a.slot.start.minutes_since_midnight, names, conflict.kind)
            conflicts.append((key, conflict))

    for s in ordered:
        for owner in sorted(s.owners):
            owner_avail = avail.get(owner)
            if owner_avail is None:
                continue  # unknown owners are a verify concern, not a conflict
            if not _slot_in_availability(owner_avail, s.slot, s.child_participates):
                conflict = Conflict(
                    KIND_UNAVAILABLE, (s.subtask_name,),
                    f"{owner} is unavailable on day {s.slot.day} "
                    f"{s.slot.start}-{s.slot.end}",
                )
                key = (
                    s.slot.day, s.slot.start.minutes_since_midnight,
                    (s.subtask_name,), conflict.kind + owner,
                )
                conflicts.append((key, conflict))

    conflicts.sort(key=lambda pair: pair[0])
    return [c for _, c in conflicts]


def _ordering_bounds(
    name: str,
    slots: dict[str, TimeSlot],
    edges: Sequence[tuple[str, str]],
) -> tuple[int, int]:
    """Allowed [abs_start_min, abs_end_max] for one subtask given the others.

    Only ordering edges that currently hold constrain the move: repair must
    not break intact ordering, but an already-violated edge (the input may
    arrive arbitrarily broken) must not deadlock conflict fixing.
    """
    lo = 0
    hi = 7 * 1440
    own = slots[name]
    for before, after in edges:
        if after == name and before in slots:
            if slots[before].abs_end <= own.abs_start:
                lo = max(lo, slots[before].abs_end)
        if before == name and after in slots:
            if own.abs_end <= slots[after].abs_start:
                hi = min(hi, slots[after].abs_start)
    return lo, hi


def _move_is_feasible(
    subtask: Subtask,
    slot: TimeSlot,
    others: Iterable[Subtask],
    avail: dict[str, dict[int, list[tuple[int, int]]]],
    bounds: tuple[int, int],
) -> bool:
    if slot.abs_start < bounds[0] or slot.abs_end > bounds[1]:
        return False
    for owner in subtask.owners:
        owner_avail = avail.get(owner)
        if owner_avail is not None and not _slot_in_availability(
            owner_avail, slot, subtask.child_participates
        ):
            return False
    for other in others:
        if other.subtask_name == subtask.subtask_name:
            continue
        if not slots_overlap(slot, other.slot):
            continue
        if subtask.owners & other.owners:
            return False
        if subtask.child_participates and other.child_participates:
            return False
    return True


def _scan_positions(original: TimeSlot, duration: int) -> Iterable[TimeSlot]:
    """Grid slots ordered from just after the original start, forward through
    Day 7, then wrapping to earlier days."""
    lo_w, hi_w = WAKING_HOURS
    starts = list(range(-(-lo_w // GRID_MINUTES) * GRID_MINUTES,
                        hi_w - duration + 1, GRID_MINUTES))
    positions = [(day, start) for day in range(1, 8) for start in starts]
    origin = (original.day, original.start.minutes_since_midnight)
    after = [p for p in positions if p > origin]
    before = [p for p in positions if p < origin]
    for day, start in after + before:
        yield TimeSlot(day, TimeOfDay(start), TimeOfDay(start + duration))


def _movers(conflict: Conflict, by_name: dict[str, Subtask]) -> list[Subtask]:
    """Candidates to relocate, later-starting first; if that one has no
    feasible slot the other involved subtask gets a turn."""
    involved = [by_name[n] for n in conflict.subtasks if n in by_name]
    return sorted(involved, key=lambda s: (s.slot.abs_start, s.subtask_name),
                  reverse=True)


def repair(
    family: FamilyContext,
    schedule: WeeklySchedule,
    ordering: Sequence[tuple[str, str]] = (),
) -> RepairResult:
    """Repeatedly relocate one conflicted subtask to the earliest fully
    feasible grid slot until no fixable conflict remains.

    Accepted moves always strictly reduce the conflict count: the moved
    subtask leaves all of its conflicts and its new slot introduces none.
    Subtasks with no feasible relocation keep their slot and their conflicts
    are reported as unresolved.
    """
    avail = {c.caregiver_id: availability_minutes(c) for c in family.caregivers}
    current: dict[str, Subtask] = {s.subtask_name: s for s in schedule.subtasks}
    edges = ordering_edges(list(current.values()), ordering)
    edits: list[tuple[str, TimeSlot, TimeSlot]] = []
    failed: set[tuple[str, tuple[str, ...]]] = set()

    while True:
        working = WeeklySchedule(
            plan_id=schedule.plan_id,
            family_id=schedule.family_id,
            subtasks=tuple(current[n] for n in sorted(current)),
            summary=schedule.summary,
            extra_json=schedule.extra_json,
        )
        conflicts = detect_conflicts(family, working)
        open_conflicts = [c for c in conflicts if (c.kind, c.subtasks) not in failed]
        if not open_conflicts:
            return RepairResult(
                schedule=working,
                edits=tuple(edits),
                unresolved=tuple(conflicts),
            )

        conflict = open_conflicts[0]
        slots = {n: s.slot for n, s in current.items()}
        moved = False
        for mover in _movers(conflict, current):
            bounds = _ordering_bounds(mover.subtask_name, slots, edges)
            others = [s for n, s in current.items() if n != mover.subtask_name]
            duration = mover.slot.duration_minutes
            for candidate in _scan_positions(mover.slot, duration):
                if _move_is_feasible(mover, candidate, others, avail, bounds):
                    edits.append((mover.subtask_name, mover.slot, candidate))
                    current[mover.subtask_name] = replace_subtask(
                        mover, slot=candidate
                    )
                    moved = True
                    break
            if moved:
                break

        if not moved:
            failed.add((conflict.kind, conflict.subtasks))
            continue
        # A successful move can unlock conflicts that previously had no room.
        failed.clear()
