"""Seeded random generators shared by property and acceptance tests."""

from __future__ import annotations

import random

from famplan.model import (
    AvailabilityWindow,
    CaregiverProfile,
    ChildProfile,
    FamilyContext,
    LearningTask,
    Subtask,
    TaskClass,
    TimeOfDay,
    TimeSlot,
    WeeklySchedule,
)
from famplan.scheduler import SchedulingRequest

SUBJECTS = ("math", "english", "chinese", "science", "music", "physical", "habits")
CLASSES = tuple(TaskClass)


def random_windows(rng: random.Random) -> list[AvailabilityWindow]:
    windows = []
    for _ in range(rng.randint(1, 3)):
        kind = rng.choice(("weekday", "weekend", "day"))
        start = rng.randint(7, 19)
        length = rng.randint(1, 3)
        if kind == "day":
            windows.append(AvailabilityWindow(
                rng.randint(1, 7), TimeOfDay.at(start), TimeOfDay.at(start + length)
            ))
        else:
            windows.append(AvailabilityWindow(
                kind, TimeOfDay.at(start), TimeOfDay.at(start + length)
            ))
    return windows


def random_family(rng: random.Random, index: int = 0) -> FamilyContext:
    count = rng.randint(2, 4)
    caregivers = []
    for i in range(count):
        caregivers.append(CaregiverProfile(
            caregiver_id=f"c{i}",
            role_label=rng.choice(("mother", "father", "grandmother", "grandfather")),
            expertise_tags=frozenset(rng.sample(SUBJECTS, k=rng.randint(0, 3))),
            availability=tuple(random_windows(rng)),
        ))
    return FamilyContext(
        family_id=f"rf{index}",
        caregivers=tuple(caregivers),
        child=ChildProfile(child_id="kid", age=rng.randint(7, 12), grade_level=rng.randint(1, 6)),
        independence_required=rng.random() < 0.25,
    )


def random_request(rng: random.Random, index: int = 0) -> SchedulingRequest:
    """2-4 caregivers, 3-12 slot-less subtasks, sparse explicit dependencies."""
    family = random_family(rng, index)
    task_count = rng.randint(1, 4)
    tasks = [
        LearningTask(
            task_name=f"task{i}",
            description=f"practice set {i}",
            subject_tag=rng.choice(SUBJECTS),
            task_class=rng.choice(CLASSES),
        )
        for i in range(task_count)
    ]
    total = rng.randint(3, 12)
    subtasks: list[Subtask] = []
    counters = {t.task_name: 0 for t in tasks}
    for _ in range(total):
        parent = rng.choice(tasks).task_name
        counters[parent] += 1
        subtasks.append(Subtask(
            subtask_name=f"{parent}_{counters[parent]}",
            parent_task=parent,
            description="the child practices one unit",
            owners=frozenset({rng.choice(family.caregiver_ids)}),
            tutoring_method="check the result",
            child_participates=rng.random() < 0.6,
        ))

    names = [s.subtask_name for s in subtasks]
    dependencies = []
    if len(names) > 2 and rng.random() < 0.5:
        for _ in range(rng.randint(1, 2)):
            i, j = sorted(rng.sample(range(len(names)), 2))
            if names[i].rsplit("_", 1)[0] != names[j].rsplit("_", 1)[0]:
                dependencies.append((names[i], names[j]))

    hints = {
        s.subtask_name: rng.choice((20, 30, 40, 60))
        for s in subtasks
        if rng.random() < 0.4
    }
    return SchedulingRequest(
        family=family,
        tasks=tuple(tasks),
        subtasks=tuple(subtasks),
        dependencies=tuple(dependencies),
        duration_hints=hints,
    )


def random_slot(rng: random.Random) -> TimeSlot:
    day = rng.randint(1, 7)
    start = rng.randrange(6 * 60, 21 * 60, 5)
    length = rng.choice((15, 20, 30, 45, 60))
    return TimeSlot(day, TimeOfDay(start), TimeOfDay(min(start + length, 22 * 60)))


def random_schedule(
    rng: random.Random, family: FamilyContext, index: int = 0
) -> WeeklySchedule:
    """A parsed-shape schedule with arbitrary (possibly conflicting) slots."""
    total = rng.randint(2, 12)
    subtasks = []
    parents = [f"job{i}" for i in range(rng.randint(1, 3))]
    counters = {p: 0 for p in parents}
    for _ in range(total):
        parent = rng.choice(parents)
        counters[parent] += 1
        owner_count = 1 if rng.random() < 0.8 else 2
        owners = rng.sample(family.caregiver_ids, k=min(owner_count, len(family.caregiver_ids)))
        subtasks.append(Subtask(
            subtask_name=f"{parent}_{counters[parent]}",
            parent_task=parent,
            description="the child writes one page",
            owners=frozenset(owners),
            tutoring_method="look it over",
            child_participates=rng.random() < 0.5,
            slot=random_slot(rng),
        ))
    return WeeklySchedule(
        plan_id=f"rs{index}", family_id=family.family_id, subtasks=tuple(subtasks)
    )
