"""JSON codecs for family, caregiver, and task objects.

Schedules have their own canonical codec in ``schedule_json``; these cover
the remaining fixture and API payloads.
"""

from __future__ import annotations

from typing import Mapping

from .model import (
    AvailabilityWindow,
    CaregiverProfile,
    ChildProfile,
    FamilyContext,
    LearningTask,
    Subtask,
    TaskClass,
    TimeOfDay,
    TimeSlot,
)


def window_to_obj(window: AvailabilityWindow) -> dict:
    return {"days": window.days, "start": str(window.start), "end": str(window.end)}


def window_from_obj(data: Mapping) -> AvailabilityWindow:
    return AvailabilityWindow(
        days=data["days"],
        start=TimeOfDay.parse(data["start"]),
        end=TimeOfDay.parse(data["end"]),
    )


def caregiver_to_obj(caregiver: CaregiverProfile) -> dict:
    return {
        "caregiver_id": caregiver.caregiver_id,
        "role_label": caregiver.role_label,
        "expertise_tags": sorted(caregiver.expertise_tags),
        "availability": [window_to_obj(w) for w in caregiver.availability],
        "notes": caregiver.notes,
    }


def caregiver_from_obj(data: Mapping) -> CaregiverProfile:
    return CaregiverProfile(
        caregiver_id=data["caregiver_id"],
        role_label=data.get("role_label", ""),
        expertise_tags=frozenset(data.get("expertise_tags", ())),
        availability=tuple(window_from_obj(w) for w in data.get("availability", ())),
        notes=data.get("notes", ""),
    )


def child_to_obj(child: ChildProfile) -> dict:
    return {
        "child_id": child.child_id,
        "age": child.age,
        "grade_level": child.grade_level,
        "characteristics": child.characteristics,
    }


def child_from_obj(data: Mapping) -> ChildProfile:
    return ChildProfile(
        child_id=data["child_id"],
        age=int(data["age"]),
        grade_level=int(data["grade_level"]),
        characteristics=data.get("characteristics", ""),
    )


def family_to_obj(family: FamilyContext) -> dict:
    return {
        "family_id": family.family_id,
        "caregivers": [caregiver_to_obj(c) for c in family.caregivers],
        "child": child_to_obj(family.child),
        "independence_required": family.independence_required,
    }


def family_from_obj(data: Mapping) -> FamilyContext:
    return FamilyContext(
        family_id=data["family_id"],
        caregivers=tuple(caregiver_from_obj(c) for c in data["caregivers"]),
        child=child_from_obj(data["child"]),
        independence_required=bool(data.get("independence_required", False)),
    )


def task_to_obj(task: LearningTask) -> dict:
    return {
        "task_name": task.task_name,
        "description": task.description,
        "subject_tag": task.subject_tag,
        "task_class": task.task_class.value,
    }


def task_from_obj(data: Mapping) -> LearningTask:
    return LearningTask(
        task_name=data["task_name"],
        description=data.get("description", ""),
        subject_tag=data["subject_tag"],
        task_class=TaskClass(data["task_class"]),
    )


def subtask_from_obj(data: Mapping) -> Subtask:
    """Subtask from wire fields; day/start/end are optional (pre-scheduling)."""
    slot = None
    if data.get("day") is not None and data.get("start") and data.get("end"):
        slot = TimeSlot(
            int(data["day"]),
            TimeOfDay.parse(data["start"]),
            TimeOfDay.parse(data["end"]),
        )
    return Subtask(
        subtask_name=data["subtask_name"],
        parent_task=data["parent_task"],
        description=data.get("description", ""),
        owners=frozenset(data["owners"]),
        tutoring_method=data.get("tutoring_method", ""),
        answers=data.get("answers"),
        child_participates=bool(data.get("child_participates", False)),
        slot=slot,
    )
