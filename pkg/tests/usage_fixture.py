"""Event-log fixture reconstructing the field-study engagement numbers.

Per caregiver: executed subtask counts and feature usage; per family: the
number of fully completed tasks. Every caregiver owns at least one subtask
of every task in their family, so per-caregiver completed-task counts equal
the family's.
"""

from __future__ import annotations

# family -> (tasks_completed, {caregiver: (subtasks_executed, new_example,
#                                          answer_checking, tutoring_guidance)})
USAGE_TABLE: dict[str, tuple[int, dict[str, tuple[int, bool, bool, bool]]]] = {
    "F1": (6, {"F1D": (6, True, True, True),
               "F1M": (10, True, True, True),
               "F1GM": (19, True, True, True)}),
    "F2": (6, {"F2D": (23, True, True, True),
               "F2M": (31, True, True, True)}),
    "F3": (4, {"F3D": (11, True, True, True),
               "F3M": (7, True, True, True)}),
    "F4": (3, {"F4GM": (5, True, True, True),
               "F4M": (4, False, False, True)}),
    "F5": (1, {"F5D": (2, False, False, False),
               "F5M": (5, True, False, True)}),
    "F6": (4, {"F6D": (4, False, False, False),
               "F6M": (14, True, True, True)}),
    "F7": (1, {"F7D": (1, False, False, True),
               "F7M": (1, False, False, False)}),
    "F8": (1, {"F8D": (2, False, False, False),
               "F8M": (2, False, True, True)}),
    "F9": (1, {"F9D": (1, False, True, False),
               "F9M": (2, False, True, False)}),
    "F10": (1, {"F10D": (1, False, True, False),
                "F10M": (2, False, True, False)}),
    "F11": (1, {"F11D": (4, False, False, False),
                "F11M": (4, True, True, False)}),
}

_FLAG_MODES = ("transfer_practice", "answer_check", "explain_support")


def family_events(family_id: str) -> list[dict]:
    """Events for one family: a generated plan inventory, done transitions
    for every subtask, and tutoring usage events."""
    completed_tasks, caregivers = USAGE_TABLE[family_id]
    plan_id = f"{family_id}-plan"

    # Give every caregiver one subtask per task, then pile their remainder
    # onto the first task.
    inventory: list[dict] = []
    counters = {f"{family_id}t{j}": 0 for j in range(1, completed_tasks + 1)}
    for caregiver_id in sorted(caregivers):
        executed = caregivers[caregiver_id][0]
        spread = [1] * completed_tasks
        spread[0] += executed - completed_tasks
        for j, count in enumerate(spread, start=1):
            parent = f"{family_id}t{j}"
            for _ in range(count):
                counters[parent] += 1
                inventory.append({
                    "subtask_name": f"{parent}_{counters[parent]}",
                    "parent_task": parent,
                    "owners": [caregiver_id],
                })

    events: list[dict] = [{
        "event_id": f"{family_id}-gen",
        "family_id": family_id,
        "actor": None,
        "kind": "plan_generated",
        "payload": {"plan_id": plan_id, "subtasks": inventory},
        "timestamp": 0.0,
    }]
    for i, item in enumerate(inventory):
        events.append({
            "event_id": f"{family_id}-done-{i}",
            "family_id": family_id,
            "actor": item["owners"][0],
            "kind": "subtask_status_changed",
            "payload": {"plan_id": plan_id,
                        "subtask_name": item["subtask_name"],
                        "status": "done"},
            "timestamp": float(i + 1),
        })
    for caregiver_id in sorted(caregivers):
        flags = caregivers[caregiver_id][1:]
        for mode, used in zip(_FLAG_MODES, flags):
            if used:
                events.append({
                    "event_id": f"{family_id}-{caregiver_id}-{mode}",
                    "family_id": family_id,
                    "actor": caregiver_id,
                    "kind": "tutoring_used",
                    "payload": {"mode": mode},
                    "timestamp": 9000.0,
                })
    return events


def all_events() -> list[dict]:
    events = []
    for family_id in USAGE_TABLE:
        events.extend(family_events(family_id))
    return events
