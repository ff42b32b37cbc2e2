"""Canonical schedule JSON: parsing with exhaustive validation, and
deterministic serialization.

Wire format (field names are bit-exact):

    {plan_id, family_id, summary, subtasks: [{subtask_name, parent_task,
     description, answers, tutoring_method, owners: [id...],
     child_participates, day, start: "HH:MM", end: "HH:MM", status}]}

Strict mode rejects unknown fields and enforces schedule-level invariants
(owner overlap, consecutive subtask numbering). Lenient mode preserves
unknown fields and defers those invariants to the conflict engine, which is
how replies from an LLM are ingested before repair. Day coverage is advisory
in both modes (see ``model.day_coverage_advisories``).

Start/end times are quantized to 5-minute boundaries on ingestion to absorb
minute-level noise in generated text.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import FamplanError
from .model import (
    Status,
    Subtask,
    TimeOfDay,
    TimeSlot,
    WeeklySchedule,
    slots_overlap,
)

TOP_LEVEL_FIELDS = ("plan_id", "family_id", "summary", "subtasks")
SUBTASK_FIELDS = (
    "subtask_name",
    "parent_task",
    "description",
    "answers",
    "tutoring_method",
    "owners",
    "child_participates",
    "day",
    "start",
    "end",
    "status",
)

QUANTIZE_STEP = 5


@dataclass(frozen=True)
class Violation:
    """One parse problem: category, JSON path, rule id, and detail."""

    kind: str  # malformed-syntax | schema-violation | invariant-violation
    path: str
    rule_id: str
    message: str
    subtasks: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "path": self.path,
            "rule_id": self.rule_id,
            "message": self.message,
            "subtasks": list(self.subtasks),
        }


class ScheduleParseError(FamplanError):
    """Raised with every violation found, not only the first."""

    code = "schedule_parse_error"

    def __init__(self, violations: list[Violation]):
        super().__init__(
            "; ".join(f"{v.rule_id} at {v.path}: {v.message}" for v in violations)
        )
        self.violations = violations


def _canonical_extra(obj: dict) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True) if obj else ""


def parse_schedule_json(text: str, *, strict: bool = True) -> WeeklySchedule:
    """Parse canonical schedule JSON, reporting every violated rule at once."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleParseError(
            [Violation("malformed-syntax", "$", "syntax", str(exc))]
        ) from exc
    return schedule_from_obj(data, strict=strict)


def schedule_from_obj(data: object, *, strict: bool = True) -> WeeklySchedule:
    """Build a WeeklySchedule from already-decoded JSON."""
    violations: list[Violation] = []
    if not isinstance(data, dict):
        raise ScheduleParseError(
            [Violation("schema-violation", "$", "type", "top level must be an object")]
        )

    for name in ("plan_id", "family_id"):
        value = data.get(name)
        if not isinstance(value, str) or not value:
            violations.append(
                Violation(
                    "schema-violation", f"$.{name}", "required_string",
                    f"{name} must be a nonempty string",
                )
            )
    summary = data.get("summary")
    if summary is not None and not isinstance(summary, str):
        violations.append(
            Violation("schema-violation", "$.summary", "type", "summary must be a string or null")
        )
    raw_subtasks = data.get("subtasks")
    if not isinstance(raw_subtasks, list):
        violations.append(
            Violation("schema-violation", "$.subtasks", "required_list", "subtasks must be a list")
        )
        raise ScheduleParseError(violations)

    extra_top = {k: v for k, v in data.items() if k not in TOP_LEVEL_FIELDS}
    if extra_top and strict:
        for key in sorted(extra_top):
            violations.append(
                Violation("schema-violation", f"$.{key}", "unknown_field",
                          f"unknown field {key!r}")
            )

    subtasks: list[Subtask] = []
    for i, raw in enumerate(raw_subtasks):
        parsed = _parse_subtask(raw, f"$.subtasks[{i}]", violations, strict=strict)
        if parsed is not None:
            subtasks.append(parsed)

    if len(subtasks) == len(raw_subtasks):
        _check_schedule_invariants(subtasks, violations, strict=strict)

    if violations:
        raise ScheduleParseError(violations)
    return WeeklySchedule(
        plan_id=data["plan_id"],
        family_id=data["family_id"],
        subtasks=tuple(subtasks),
        summary=summary,
        extra_json=_canonical_extra(extra_top) if not strict else "",
    )


def _parse_time(value: object, path: str, violations: list[Violation]) -> TimeOfDay | None:
    if not isinstance(value, str):
        violations.append(
            Violation("schema-violation", path, "time_format", "time must be an HH:MM string")
        )
        return None
    try:
        return TimeOfDay.parse(value).quantized(QUANTIZE_STEP)
    except ValueError as exc:
        violations.append(Violation("schema-violation", path, "time_format", str(exc)))
        return None


def _parse_subtask(
    raw: object, path: str, violations: list[Violation], *, strict: bool
) -> Subtask | None:
    if not isinstance(raw, dict):
        violations.append(
            Violation("schema-violation", path, "type", "subtask must be an object")
        )
        return None
    before = len(violations)

    def need_str(field: str, allow_empty: bool = True) -> str | None:
        value = raw.get(field)
        if not isinstance(value, str) or (not allow_empty and not value):
            violations.append(
                Violation("schema-violation", f"{path}.{field}", "required_string",
                          f"{field} must be a string")
            )
            return None
        return value

    name = need_str("subtask_name", allow_empty=False)
    parent = need_str("parent_task", allow_empty=False)
    description = need_str("description")
    tutoring = need_str("tutoring_method")

    answers = raw.get("answers")
    if answers is not None and not isinstance(answers, str):
        violations.append(
            Violation("schema-violation", f"{path}.answers", "type",
                      "answers must be a string or null")
        )

    owners_raw = raw.get("owners")
    owners: frozenset[str] = frozenset()
    if (
        not isinstance(owners_raw, list)
        or not owners_raw
        or not all(isinstance(o, str) and o for o in owners_raw)
    ):
        violations.append(
            Violation("invariant-violation", f"{path}.owners", "owners_nonempty",
                      "owners must be a nonempty list of caregiver ids",
                      subtasks=(name,) if name else ())
        )
    else:
        owners = frozenset(owners_raw)

    child = raw.get("child_participates")
    if not isinstance(child, bool):
        violations.append(
            Violation("schema-violation", f"{path}.child_participates", "type",
                      "child_participates must be a boolean")
        )
        child = False

    day = raw.get("day")
    if not isinstance(day, int) or isinstance(day, bool) or not 1 <= day <= 7:
        violations.append(
            Violation("schema-violation", f"{path}.day", "day_range",
                      "day must be an integer 1-7")
        )
        day = None

    start = _parse_time(raw.get("start"), f"{path}.start", violations)
    end = _parse_time(raw.get("end"), f"{path}.end", violations)

    status_raw = raw.get("status", Status.PENDING.value)
    try:
        status = Status(status_raw)
    except ValueError:
        violations.append(
            Violation("schema-violation", f"{path}.status", "status_value",
                      f"unknown status {status_raw!r}")
        )
        status = Status.PENDING

    extra = {k: v for k, v in raw.items() if k not in SUBTASK_FIELDS}
    if extra and strict:
        for key in sorted(extra):
            violations.append(
                Violation("schema-violation", f"{path}.{key}", "unknown_field",
                          f"unknown field {key!r}")
            )

    slot: TimeSlot | None = None
    if day is not None and start is not None and end is not None:
        if start < end:
            slot = TimeSlot(day, start, end)
        else:
            violations.append(
                Violation("invariant-violation", f"{path}.start", "slot_order",
                          f"start must precede end ({start} >= {end})",
                          subtasks=(name,) if name else ())
            )

    if len(violations) > before or name is None or parent is None:
        return None
    try:
        return Subtask(
            subtask_name=name,
            parent_task=parent,
            description=description or "",
            owners=owners,
            tutoring_method=tutoring or "",
            answers=answers,
            child_participates=child,
            slot=slot,
            status=status,
            extra_json=_canonical_extra(extra) if not strict else "",
        )
    except ValueError as exc:
        violations.append(
            Violation("invariant-violation", f"{path}.subtask_name", "name_suffix",
                      str(exc), subtasks=(name,))
        )
        return None


def _check_schedule_invariants(
    subtasks: list[Subtask], violations: list[Violation], *, strict: bool
) -> None:
    names = [s.subtask_name for s in subtasks]
    seen: set[str] = set()
    for i, name in enumerate(names):
        if name in seen:
            violations.append(
                Violation("invariant-violation", f"$.subtasks[{i}].subtask_name",
                          "duplicate_name", f"duplicate subtask name {name!r}",
                          subtasks=(name,))
            )
        seen.add(name)
    if not strict:
        return

    # Consecutive numbering per parent: indices must be exactly 1..n.
    by_parent: dict[str, list[int]] = {}
    for s in subtasks:
        by_parent.setdefault(s.parent_task, []).append(s.index)
    for parent in sorted(by_parent):
        indices = sorted(by_parent[parent])
        if indices != list(range(1, len(indices) + 1)):
            violations.append(
                Violation("invariant-violation", "$.subtasks", "name_consecutive",
                          f"{parent} subtask indices are not consecutive from 1: {indices}",
                          subtasks=tuple(f"{parent}_{k}" for k in indices))
            )

    ordered = sorted(
        (s for s in subtasks if s.slot is not None),
        key=lambda s: (s.slot.abs_start, s.subtask_name),
    )
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if b.slot.day != a.slot.day:
                break
            if a.owners & b.owners and slots_overlap(a.slot, b.slot):
                violations.append(
                    Violation("invariant-violation", "$.subtasks", "owner_overlap",
                              f"{a.subtask_name} and {b.subtask_name} overlap for "
                              f"owner(s) {sorted(a.owners & b.owners)}",
                              subtasks=(a.subtask_name, b.subtask_name))
                )


def subtask_to_obj(subtask: Subtask, *, include_slot: bool = True) -> dict:
    """Canonical wire object for one subtask (keys in documented order)."""
    obj: dict = {
        "subtask_name": subtask.subtask_name,
        "parent_task": subtask.parent_task,
        "description": subtask.description,
        "answers": subtask.answers,
        "tutoring_method": subtask.tutoring_method,
        "owners": sorted(subtask.owners),
        "child_participates": subtask.child_participates,
    }
    if include_slot:
        if subtask.slot is None:
            raise ValueError(f"{subtask.subtask_name} has no slot to serialize")
        obj["day"] = subtask.slot.day
        obj["start"] = str(subtask.slot.start)
        obj["end"] = str(subtask.slot.end)
        obj["status"] = subtask.status.value
    if subtask.extra_json:
        extra = json.loads(subtask.extra_json)
        for key in sorted(extra):
            obj[key] = extra[key]
    return obj


def schedule_to_obj(schedule: WeeklySchedule) -> dict:
    obj: dict = {
        "plan_id": schedule.plan_id,
        "family_id": schedule.family_id,
        "summary": schedule.summary,
        "subtasks": [subtask_to_obj(s) for s in schedule.sorted_subtasks()],
    }
    if schedule.extra_json:
        extra = json.loads(schedule.extra_json)
        for key in sorted(extra):
            obj[key] = extra[key]
    return obj


def dump_schedule_json(schedule: WeeklySchedule) -> str:
    """Serialize to canonical text: fixed key order, sorted subtasks/owners."""
    return json.dumps(schedule_to_obj(schedule), ensure_ascii=False, indent=2)


def subtask_content_bytes(subtask: Subtask) -> str:
    """Serialized subtask minus {day, start, end, status}; the byte-comparison
    basis for content-preservation checks."""
    return json.dumps(
        subtask_to_obj(subtask, include_slot=False), ensure_ascii=False, sort_keys=False
    )
