"""Deterministic assignment of subtasks to owners and time slots.

Greedy list scheduling: subtasks are processed in topological waves (a
subtask becomes eligible once every predecessor has been handled); within a
wave the subtask with the fewest statically feasible (owner, slot) pairs
goes first. Candidate starts lie on a 30-minute grid inside caregiver
availability (child-involving subtasks may also use daytime hours), the
earliest feasible slot wins, and ties break by lowest current owner load,
then lexicographic caregiver id. The result is bitwise reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .errors import InfeasibleOrdering
from .model import (
    DAYTIME_HOURS,
    WAKING_HOURS,
    DAYPARTS,
    FamilyContext,
    LearningTask,
    Subtask,
    TaskClass,
    TimeOfDay,
    TimeSlot,
    WeeklySchedule,
    availability_minutes,
    daypart_of,
    replace_subtask,
    slots_overlap,
)

GRID_MINUTES = 30

DEFAULT_DURATIONS: dict[TaskClass, int] = {
    TaskClass.HOMEWORK_QA: 30,
    TaskClass.PRACTICE_MEMORIZATION: 20,
    TaskClass.PHYSICAL_MUSIC: 40,
    TaskClass.HABIT_STATE: 30,
    TaskClass.REFLECTIVE: 30,
}
FALLBACK_DURATION = 30


def daypart_cap(total_subtasks: int) -> int:
    """No daypart may hold more than ceil(n/3) + 1 subtasks."""
    return -(-total_subtasks // 3) + 1


@dataclass(frozen=True, eq=False)
class SchedulingRequest:
    """Inputs for one scheduling run.

    ``dependencies`` are explicit (before, after) subtask-name pairs; the
    ``_1 < _2 < ...`` order within each parent task is always implied.
    ``tasks`` supplies each parent's subject tag and class, which drive the
    expertise rule and default durations.
    """

    family: FamilyContext
    tasks: tuple[LearningTask, ...]
    subtasks: tuple[Subtask, ...]
    dependencies: tuple[tuple[str, str], ...] = ()
    duration_hints: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name, minutes in self.duration_hints.items():
            if minutes <= 0:
                raise ValueError(f"duration hint for {name} must be positive: {minutes}")

    def task_for(self, parent_task: str) -> LearningTask | None:
        for task in self.tasks:
            if task.task_name == parent_task:
                return task
        return None

    def duration_of(self, subtask: Subtask) -> int:
        if subtask.subtask_name in self.duration_hints:
            return int(self.duration_hints[subtask.subtask_name])
        task = self.task_for(subtask.parent_task)
        if task is None:
            return FALLBACK_DURATION
        return DEFAULT_DURATIONS.get(task.task_class, FALLBACK_DURATION)


@dataclass(frozen=True)
class Violation:
    """One broken scheduling rule found by ``verify_schedule``."""

    rule_id: str
    subtasks: tuple[str, ...]
    detail: str

    def to_json(self) -> dict:
        return {"rule_id": self.rule_id, "subtasks": list(self.subtasks), "detail": self.detail}


@dataclass(frozen=True)
class SchedulingOutcome:
    schedule: WeeklySchedule
    unplaced: tuple[tuple[str, str], ...]
    objective_trace: tuple[dict, ...]


def ordering_edges(
    subtasks: Sequence[Subtask], dependencies: Iterable[tuple[str, str]] = ()
) -> list[tuple[str, str]]:
    """All (before, after) edges: per-parent numbering plus explicit pairs."""
    by_parent: dict[str, list[Subtask]] = {}
    for s in subtasks:
        by_parent.setdefault(s.parent_task, []).append(s)
    edges: list[tuple[str, str]] = []
    for parent in sorted(by_parent):
        chain = sorted(by_parent[parent], key=lambda s: s.index)
        edges.extend(
            (a.subtask_name, b.subtask_name) for a, b in zip(chain, chain[1:])
        )
    edges.extend(dependencies)
    return edges


def topological_order(names: Sequence[str], edges: Sequence[tuple[str, str]]) -> list[str]:
    """Kahn's algorithm with lexicographic tie-breaks; raises on cycles."""
    name_set = set(names)
    indegree = {n: 0 for n in names}
    successors: dict[str, list[str]] = {n: [] for n in names}
    for before, after in edges:
        if before not in name_set or after not in name_set:
            continue
        indegree[after] += 1
        successors[before].append(after)
    ready = sorted(n for n, d in indegree.items() if d == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        changed = False
        for follower in successors[node]:
            indegree[follower] -= 1
            if indegree[follower] == 0:
                ready.append(follower)
                changed = True
        if changed:
            ready.sort()
    if len(order) != len(names):
        cycle = sorted(n for n, d in indegree.items() if d > 0)
        raise InfeasibleOrdering(f"ordering contains a cycle through {cycle}", cycle)
    return order


def _eligible_owners(req: SchedulingRequest, subtask: Subtask) -> list[str]:
    """Tag-carrying caregivers when any exist for the subject, else all."""
    task = req.task_for(subtask.parent_task)
    caregivers = req.family.caregivers
    if task is not None:
        tagged = [c.caregiver_id for c in caregivers if task.subject_tag in c.expertise_tags]
        if tagged:
            return sorted(tagged)
    return sorted(c.caregiver_id for c in caregivers)


def _candidate_intervals(
    avail: dict[int, list[tuple[int, int]]], day: int, child_participates: bool
) -> list[tuple[int, int]]:
    intervals = list(avail.get(day, []))
    if child_participates:
        intervals.append(DAYTIME_HOURS)
    # Clamp to waking hours.
    lo_w, hi_w = WAKING_HOURS
    return [(max(a, lo_w), min(b, hi_w)) for a, b in intervals if max(a, lo_w) < min(b, hi_w)]


def _grid_starts(interval: tuple[int, int], duration: int) -> range:
    lo, hi = interval
    first = -(-lo // GRID_MINUTES) * GRID_MINUTES
    last = hi - duration
    if last < first:
        return range(0)
    return range(first, last + 1, GRID_MINUTES)


class _Placements:
    """Mutable view of placed slots for overlap checks during scheduling."""

    def __init__(self) -> None:
        self.by_owner: dict[str, dict[int, list[tuple[int, int]]]] = {}
        self.child_slots: dict[int, list[tuple[int, int]]] = {}
        self.load: dict[str, int] = {}
        self.daypart_counts: dict[str, int] = {name: 0 for name, _, _ in DAYPARTS}

    def conflicts(self, owner: str, day: int, lo: int, hi: int) -> bool:
        for a, b in self.by_owner.get(owner, {}).get(day, []):
            if lo < b and a < hi:
                return True
        return False

    def child_conflicts(self, day: int, lo: int, hi: int) -> bool:
        for a, b in self.child_slots.get(day, []):
            if lo < b and a < hi:
                return True
        return False

    def add(self, owner: str, slot: TimeSlot, child_participates: bool) -> None:
        lo = slot.start.minutes_since_midnight
        hi = slot.end.minutes_since_midnight
        self.by_owner.setdefault(owner, {}).setdefault(slot.day, []).append((lo, hi))
        if child_participates:
            self.child_slots.setdefault(slot.day, []).append((lo, hi))
        self.load[owner] = self.load.get(owner, 0) + 1
        part = daypart_of(slot.start)
        if part is not None:
            self.daypart_counts[part] += 1


def _static_option_count(
    avail: dict[int, list[tuple[int, int]]], duration: int, child_participates: bool
) -> int:
    count = 0
    for day in range(1, 8):
        for interval in _candidate_intervals(avail, day, child_participates):
            count += len(_grid_starts(interval, duration))
    return count


def assign_and_schedule(req: SchedulingRequest, *, plan_id: str = "plan") -> SchedulingOutcome:
    """Place every subtask it can; the rest land in ``unplaced`` with reasons."""
    names = [s.subtask_name for s in req.subtasks]
    edges = ordering_edges(req.subtasks, req.dependencies)
    topological_order(names, edges)  # surfaces cycles before any placement

    by_name = {s.subtask_name: s for s in req.subtasks}
    preds: dict[str, list[str]] = {n: [] for n in names}
    succs: dict[str, list[str]] = {n: [] for n in names}
    for before, after in edges:
        if before in by_name and after in by_name:
            preds[after].append(before)
            succs[before].append(after)

    avail_by_owner = {
        c.caregiver_id: availability_minutes(c) for c in req.family.caregivers
    }
    cap = daypart_cap(len(req.subtasks))

    static_options: dict[str, int] = {}
    for s in req.subtasks:
        duration = req.duration_of(s)
        static_options[s.subtask_name] = sum(
            _static_option_count(avail_by_owner[o], duration, s.child_participates)
            for o in _eligible_owners(req, s)
        )

    placements = _Placements()
    placed: dict[str, tuple[str, TimeSlot]] = {}
    handled: set[str] = set()
    unplaced: list[tuple[str, str]] = []
    trace: list[dict] = []

    remaining = set(names)
    while remaining:
        ready = sorted(
            (n for n in remaining if all(p in handled for p in preds[n])),
            key=lambda n: (static_options[n], n),
        )
        name = ready[0]
        remaining.discard(name)
        handled.add(name)
        subtask = by_name[name]
        duration = req.duration_of(subtask)
        earliest_abs = max(
            (placed[p][1].abs_end for p in preds[name] if p in placed),
            default=0,
        )

        best: tuple[int, int, str] | None = None  # (abs_start, load, owner)
        considered = 0
        for owner in _eligible_owners(req, subtask):
            avail = avail_by_owner[owner]
            found: int | None = None
            for day in range(1, 8):
                day_base = (day - 1) * 1440
                for interval in sorted(_candidate_intervals(avail, day, subtask.child_participates)):
                    for start in _grid_starts(interval, duration):
                        abs_start = day_base + start
                        if abs_start < earliest_abs:
                            continue
                        considered += 1
                        part = daypart_of(TimeOfDay(start))
                        if part is not None and placements.daypart_counts[part] >= cap:
                            continue
                        if placements.conflicts(owner, day, start, start + duration):
                            continue
                        if subtask.child_participates and placements.child_conflicts(
                            day, start, start + duration
                        ):
                            continue
                        found = abs_start
                        break
                    if found is not None:
                        break
                if found is not None:
                    break
            if found is None:
                continue
            key = (found, placements.load.get(owner, 0), owner)
            if best is None or key < best:
                best = key

        if best is None:
            unplaced.append((name, "no-feasible-slot"))
            trace.append({"subtask": name, "result": "unplaced",
                          "candidates_considered": considered})
            continue

        abs_start, _, owner = best
        day, start = divmod(abs_start, 1440)
        slot = TimeSlot(day + 1, TimeOfDay(start), TimeOfDay(start + duration))
        placements.add(owner, slot, subtask.child_participates)
        placed[name] = (owner, slot)
        trace.append({
            "subtask": name,
            "result": "placed",
            "owner": owner,
            "day": slot.day,
            "start": str(slot.start),
            "end": str(slot.end),
            "candidates_considered": considered,
            "tie_break": "earliest-slot/min-load/caregiver-id",
        })

    scheduled = tuple(
        replace_subtask(by_name[n], owners=frozenset({placed[n][0]}), slot=placed[n][1])
        for n in names
        if n in placed
    )
    schedule = WeeklySchedule(plan_id=plan_id, family_id=req.family.family_id,
                              subtasks=scheduled)
    return SchedulingOutcome(schedule=schedule, unplaced=tuple(unplaced),
                             objective_trace=tuple(trace))


def verify_schedule(req: SchedulingRequest, schedule: WeeklySchedule) -> list[Violation]:
    """Audit a schedule against every scheduling rule; empty means feasible.

    Used both for self-checking deterministic output and for vetting
    schedules produced elsewhere before accepting them.
    """
    violations: list[Violation] = []
    family_ids = set(req.family.caregiver_ids)
    avail_by_owner = {
        c.caregiver_id: availability_minutes(c) for c in req.family.caregivers
    }
    subtasks = sorted(schedule.subtasks, key=lambda s: (s.slot.abs_start, s.subtask_name))

    for s in subtasks:
        for owner in sorted(s.owners):
            if owner not in family_ids:
                violations.append(
                    Violation("unknown_owner", (s.subtask_name,),
                              f"{owner} is not a caregiver in family {req.family.family_id}")
                )

    for s in subtasks:
        task = req.task_for(s.parent_task)
        if task is None:
            continue
        tagged = {
            c.caregiver_id
            for c in req.family.caregivers
            if task.subject_tag in c.expertise_tags
        }
        if tagged and not (s.owners & tagged):
            violations.append(
                Violation("expertise_bypassed", (s.subtask_name,),
                          f"no owner carries tag {task.subject_tag!r} though "
                          f"{sorted(tagged)} do")
            )

    for s in subtasks:
        lo = s.slot.start.minutes_since_midnight
        hi = s.slot.end.minutes_since_midnight
        child_ok = (
            s.child_participates
            and DAYTIME_HOURS[0] <= lo
            and hi <= DAYTIME_HOURS[1]
        )
        for owner in sorted(s.owners & family_ids):
            intervals = avail_by_owner[owner].get(s.slot.day, [])
            inside = any(a <= lo and hi <= b for a, b in intervals)
            if not inside and not child_ok:
                violations.append(
                    Violation("owner_unavailable", (s.subtask_name,),
                              f"{owner} is unavailable on day {s.slot.day} "
                              f"{s.slot.start}-{s.slot.end}")
                )

    for i, a in enumerate(subtasks):
        for b in subtasks[i + 1:]:
            if b.slot.day != a.slot.day:
                continue
            if not slots_overlap(a.slot, b.slot):
                continue
            shared = a.owners & b.owners
            if shared:
                violations.append(
                    Violation("owner_overlap", (a.subtask_name, b.subtask_name),
                              f"overlap for owner(s) {sorted(shared)}")
                )
            elif a.child_participates and b.child_participates:
                violations.append(
                    Violation("child_double_booked", (a.subtask_name, b.subtask_name),
                              "child is needed in both subtasks at once")
                )

    by_name = {s.subtask_name: s for s in subtasks}
    for before, after in ordering_edges(req.subtasks, req.dependencies):
        a = by_name.get(before)
        b = by_name.get(after)
        if a is None or b is None:
            continue
        if a.slot.abs_end > b.slot.abs_start:
            violations.append(
                Violation("order_violated", (before, after),
                          f"{before} ends at day {a.slot.day} {a.slot.end} after "
                          f"{after} starts at day {b.slot.day} {b.slot.start}")
            )

    cap = daypart_cap(len(req.subtasks))
    per_part: dict[str, list[str]] = {name: [] for name, _, _ in DAYPARTS}
    for s in subtasks:
        part = daypart_of(s.slot.start)
        if part is not None:
            per_part[part].append(s.subtask_name)
    for part, members in per_part.items():
        if len(members) > cap:
            violations.append(
                Violation("daypart_overload", tuple(members),
                          f"{len(members)} subtasks start in the {part} (cap {cap})")
            )

    violations.sort(key=lambda v: (v.rule_id, v.subtasks))
    return violations
