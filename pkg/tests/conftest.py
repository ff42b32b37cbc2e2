import pytest

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


def t(text: str) -> TimeOfDay:
    return TimeOfDay.parse(text)


def slot(day: int, start: str, end: str) -> TimeSlot:
    return TimeSlot(day, t(start), t(end))


def window(days, start: str, end: str) -> AvailabilityWindow:
    return AvailabilityWindow(days, t(start), t(end))


def caregiver(cid, *, tags=(), windows=(), role="parent", notes="") -> CaregiverProfile:
    return CaregiverProfile(
        caregiver_id=cid,
        role_label=role,
        expertise_tags=frozenset(tags),
        availability=tuple(windows),
        notes=notes,
    )


def family(*caregivers, family_id="fam", independence=False) -> FamilyContext:
    return FamilyContext(
        family_id=family_id,
        caregivers=tuple(caregivers),
        child=ChildProfile(child_id=f"{family_id}-child", age=9, grade_level=3),
        independence_required=independence,
    )


def task(name, subject="math", task_class=TaskClass.HOMEWORK_QA, description="") -> LearningTask:
    return LearningTask(
        task_name=name,
        description=description or f"work through {name}",
        subject_tag=subject,
        task_class=task_class,
    )


def subtask(name, owners, *, slot=None, description="practice", child=True,
            method="check the result", answers=None, status=None) -> Subtask:
    parent = name.rsplit("_", 1)[0]
    kwargs = {}
    if status is not None:
        kwargs["status"] = status
    return Subtask(
        subtask_name=name,
        parent_task=parent,
        description=description,
        owners=frozenset([owners] if isinstance(owners, str) else owners),
        tutoring_method=method,
        answers=answers,
        child_participates=child,
        slot=slot,
        **kwargs,
    )


def schedule(subtasks, *, plan_id="plan-1", family_id="fam", summary=None) -> WeeklySchedule:
    return WeeklySchedule(
        plan_id=plan_id,
        family_id=family_id,
        subtasks=tuple(subtasks),
        summary=summary,
    )


@pytest.fixture
def two_parent_family():
    return family(
        caregiver("father", tags={"math"},
                  windows=[window("weekday", "19:00", "21:00"),
                           window("weekend", "09:00", "12:00")],
                  role="father"),
        caregiver("mother", tags={"english", "chinese"},
                  windows=[window("weekday", "18:00", "21:00"),
                           window("weekend", "14:00", "17:00")],
                  role="mother"),
    )
