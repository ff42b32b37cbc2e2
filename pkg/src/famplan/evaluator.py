"""Automated plan-quality scoring and engagement metrics.

Five dimensions are scored 1-3 from rule-based findings: a dimension with no
deduction-bearing findings scores 3, only minor findings 2, any major
finding 1. Each detector rule feeds exactly one dimension (see
``RULE_DIMENSIONS``). The rules flag the mechanically checkable failure
shapes; they approximate, and do not claim to replicate, expert judgment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from importlib import resources
from typing import Iterable, Mapping, Sequence

from . import conflicts as conflict_engine
from .model import (
    FamilyContext,
    LearningTask,
    TaskClass,
    WeeklySchedule,
)


class Dimension(str, Enum):
    ROLE_TASK_ALIGNMENT = "role_task_alignment"
    TASK_DECOMPOSITION = "task_decomposition"
    TASK_COVERAGE = "task_coverage"
    CONTEXT_AWARENESS = "context_awareness"
    ACTIONABILITY = "actionability"


class Severity(str, Enum):
    MINOR = "minor"
    MAJOR = "major"


# Closed detector set; every rule feeds exactly one dimension.
RULE_DIMENSIONS: dict[str, Dimension] = {
    "expertise_mismatch": Dimension.ROLE_TASK_ALIGNMENT,
    "forced_joint_session": Dimension.ROLE_TASK_ALIGNMENT,
    "spacing_violation": Dimension.TASK_DECOMPOSITION,
    "too_few_sessions": Dimension.TASK_DECOMPOSITION,
    "child_action_unspecified": Dimension.TASK_DECOMPOSITION,
    "task_uncovered": Dimension.TASK_COVERAGE,
    "member_idle": Dimension.TASK_COVERAGE,
    "owner_unavailable": Dimension.CONTEXT_AWARENESS,
    "under_duration": Dimension.ACTIONABILITY,
    "state_task_repetition": Dimension.ACTIONABILITY,
    "outside_waking_hours": Dimension.ACTIONABILITY,
}

# Minimum plausible minutes per task class; conservative and configurable.
MIN_DURATIONS: dict[TaskClass, int] = {
    TaskClass.PRACTICE_MEMORIZATION: 15,
    TaskClass.HOMEWORK_QA: 15,
    TaskClass.PHYSICAL_MUSIC: 20,
    TaskClass.REFLECTIVE: 20,
    TaskClass.HABIT_STATE: 10,
}

MAX_SESSION_GAP_DAYS = 2
MIN_MEMORIZATION_SESSIONS = 3

MONITORING_HINTS = ("monitoring only", "monitor only", "supervision only")
INSTRUCTION_HINTS = ("explain", "teach", "lead", "instruct", "demonstrate", "mentor", "tutor")


def load_child_action_verbs() -> list[str]:
    text = resources.files("famplan").joinpath("data/child_action_verbs.json").read_text()
    return json.loads(text)


def _verb_forms(verb: str) -> set[str]:
    forms = {verb, verb + "s"}
    if verb.endswith("e"):
        forms.update({verb + "d", verb[:-1] + "ing"})
    else:
        forms.update({verb + "es", verb + "ed", verb + "ing"})
    return forms


def _contains_verb(text: str, verbs: Sequence[str]) -> bool:
    words = {w.strip(".,;:!?()\"'") for w in text.lower().split()}
    for verb in verbs:
        if words & _verb_forms(verb):
            return True
    return False


@dataclass(frozen=True)
class Finding:
    rule_id: str
    severity: Severity
    subtasks: tuple[str, ...]
    explanation: str

    def __post_init__(self) -> None:
        if self.rule_id not in RULE_DIMENSIONS:
            raise ValueError(f"unknown rule id: {self.rule_id!r}")

    def to_json(self) -> dict:
        return {
            "rule_id": self.rule_id,
            "severity": self.severity.value,
            "subtasks": list(self.subtasks),
            "explanation": self.explanation,
        }


@dataclass(frozen=True)
class DimensionScore:
    dimension: Dimension
    score: int
    findings: tuple[Finding, ...]

    def __post_init__(self) -> None:
        if self.score not in (1, 2, 3):
            raise ValueError(f"score must be 1-3: {self.score}")

    def to_json(self) -> dict:
        return {
            "dimension": self.dimension.value,
            "score": self.score,
            "findings": [f.to_json() for f in self.findings],
        }


@dataclass(frozen=True)
class PlanQualityReport:
    plan_id: str
    scores: tuple[DimensionScore, ...]
    overall_mean: float

    def __post_init__(self) -> None:
        dims = [s.dimension for s in self.scores]
        if len(dims) != len(Dimension) or len(set(dims)) != len(dims):
            raise ValueError("report must carry exactly one score per dimension")

    def score_for(self, dimension: Dimension) -> DimensionScore:
        for s in self.scores:
            if s.dimension == dimension:
                return s
        raise KeyError(dimension)

    def to_json(self) -> dict:
        return {
            "plan_id": self.plan_id,
            "scores": [s.to_json() for s in self.scores],
            "overall_mean": self.overall_mean,
        }


def report_from_obj(data: Mapping) -> PlanQualityReport:
    scores = tuple(
        DimensionScore(
            dimension=Dimension(s["dimension"]),
            score=int(s["score"]),
            findings=tuple(
                Finding(
                    rule_id=f["rule_id"],
                    severity=Severity(f["severity"]),
                    subtasks=tuple(f["subtasks"]),
                    explanation=f["explanation"],
                )
                for f in s.get("findings", ())
            ),
        )
        for s in data["scores"]
    )
    return PlanQualityReport(
        plan_id=data["plan_id"], scores=scores, overall_mean=float(data["overall_mean"])
    )


def _task_index(tasks: Iterable[LearningTask]) -> dict[str, LearningTask]:
    return {t.task_name: t for t in tasks}


def detect_expertise_mismatch(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    schedule: WeeklySchedule,
) -> list[Finding]:
    """Owners lacking the subject tag while a better-tagged caregiver exists,
    or monitoring-only caregivers given instructional duties."""
    index = _task_index(tasks)
    findings: list[Finding] = []
    for s in sorted(schedule.subtasks, key=lambda s: s.subtask_name):
        task = index.get(s.parent_task)
        if task is not None:
            tagged = {
                c.caregiver_id
                for c in family.caregivers
                if task.subject_tag in c.expertise_tags
            }
            if tagged and not (s.owners & tagged):
                findings.append(
                    Finding(
                        "expertise_mismatch", Severity.MAJOR, (s.subtask_name,),
                        f"owned by {sorted(s.owners)} but {sorted(tagged)} carry "
                        f"the {task.subject_tag!r} tag",
                    )
                )
        method = s.tutoring_method.lower()
        if any(hint in method for hint in INSTRUCTION_HINTS):
            for owner in sorted(s.owners):
                try:
                    caregiver = family.caregiver(owner)
                except KeyError:
                    continue
                notes = caregiver.notes.lower()
                if any(hint in notes for hint in MONITORING_HINTS):
                    findings.append(
                        Finding(
                            "expertise_mismatch", Severity.MAJOR, (s.subtask_name,),
                            f"{owner} is marked monitoring-only but the tutoring "
                            f"method implies instruction",
                        )
                    )
    return findings


def detect_unnecessary_collaboration(
    family: FamilyContext, schedule: WeeklySchedule
) -> list[Finding]:
    """Joint sessions, and cross-owner subtask pairs explicitly tied together
    within the same hour."""
    severity = Severity.MAJOR if family.independence_required else Severity.MINOR
    findings: list[Finding] = []
    ordered = sorted(schedule.subtasks, key=lambda s: s.subtask_name)
    for s in ordered:
        if len(s.owners) > 1:
            findings.append(
                Finding(
                    "forced_joint_session", severity, (s.subtask_name,),
                    f"requires {sorted(s.owners)} simultaneously",
                )
            )
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            if a.owners & b.owners:
                continue
            linked = (
                b.subtask_name in a.description or a.subtask_name in b.description
            )
            if not linked:
                continue
            if a.slot is None or b.slot is None:
                continue
            same_hour = (
                a.slot.day == b.slot.day
                and abs(a.slot.abs_start - b.slot.abs_start) <= 60
            )
            if same_hour:
                findings.append(
                    Finding(
                        "forced_joint_session", severity,
                        (a.subtask_name, b.subtask_name),
                        "explicitly linked subtasks owned by different caregivers "
                        "within the same hour",
                    )
                )
    return findings


def detect_trajectory_gaps(
    tasks: Sequence[LearningTask], schedule: WeeklySchedule
) -> list[Finding]:
    """Memorization practice needs enough sessions, spaced no more than two
    days apart."""
    findings: list[Finding] = []
    index = _task_index(tasks)
    by_parent: dict[str, list] = {}
    for s in schedule.subtasks:
        by_parent.setdefault(s.parent_task, []).append(s)
    for parent in sorted(by_parent):
        task = index.get(parent)
        if task is None or task.task_class is not TaskClass.PRACTICE_MEMORIZATION:
            continue
        sessions = sorted(by_parent[parent], key=lambda s: (s.slot.abs_start, s.subtask_name))
        names = tuple(s.subtask_name for s in sessions)
        if len(sessions) < MIN_MEMORIZATION_SESSIONS:
            findings.append(
                Finding(
                    "too_few_sessions", Severity.MAJOR, names,
                    f"{parent} has {len(sessions)} session(s); memorization needs "
                    f">= {MIN_MEMORIZATION_SESSIONS}",
                )
            )
        days = [s.slot.day for s in sessions]
        gaps = [b - a for a, b in zip(days, days[1:])]
        if gaps and max(gaps) > MAX_SESSION_GAP_DAYS:
            findings.append(
                Finding(
                    "spacing_violation", Severity.MAJOR, names,
                    f"{parent} sessions are up to {max(gaps)} days apart "
                    f"(max {MAX_SESSION_GAP_DAYS})",
                )
            )
    return findings


def detect_infeasibility(
    tasks: Sequence[LearningTask], schedule: WeeklySchedule
) -> list[Finding]:
    """Durations below the class minimum, repeated state-reset tasks, and
    slots touching sleep hours."""
    findings: list[Finding] = []
    index = _task_index(tasks)
    ordered = sorted(schedule.subtasks, key=lambda s: (s.slot.abs_start, s.subtask_name))

    for s in ordered:
        task = index.get(s.parent_task)
        if task is not None:
            minimum = MIN_DURATIONS[task.task_class]
            if s.slot.duration_minutes < minimum:
                findings.append(
                    Finding(
                        "under_duration", Severity.MAJOR, (s.subtask_name,),
                        f"{s.slot.duration_minutes} min is below the "
                        f"{task.task_class.value} minimum of {minimum} min",
                    )
                )
        start = s.slot.start.minutes_since_midnight
        end = s.slot.end.minutes_since_midnight
        if start < 6 * 60 or end > 22 * 60:
            findings.append(
                Finding(
                    "outside_waking_hours", Severity.MAJOR, (s.subtask_name,),
                    f"{s.slot.start}-{s.slot.end} intersects 22:00-06:00",
                )
            )

    by_parent: dict[str, list] = {}
    for s in ordered:
        task = index.get(s.parent_task)
        if task is not None and task.task_class is TaskClass.HABIT_STATE:
            by_parent.setdefault(s.parent_task, []).append(s)
    for parent in sorted(by_parent):
        group = by_parent[parent]
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                if a.slot.day != b.slot.day:
                    continue
                # Same slot, overlapping, or touching end-to-start.
                if b.slot.start.minutes_since_midnight <= a.slot.end.minutes_since_midnight:
                    findings.append(
                        Finding(
                            "state_task_repetition", Severity.MAJOR,
                            (a.subtask_name, b.subtask_name),
                            f"{parent} is a state task repeated back-to-back on "
                            f"day {a.slot.day}",
                        )
                    )
    return findings


def detect_coverage_gaps(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    schedule: WeeklySchedule,
) -> list[Finding]:
    """Tasks left without subtasks (major) and caregivers left idle (minor)."""
    findings: list[Finding] = []
    covered = {s.parent_task for s in schedule.subtasks}
    for task in sorted(tasks, key=lambda t: t.task_name):
        if task.task_name not in covered:
            findings.append(
                Finding(
                    "task_uncovered", Severity.MAJOR, (),
                    f"task {task.task_name!r} has no subtasks in the plan",
                )
            )
    owning = {o for s in schedule.subtasks for o in s.owners}
    for caregiver in sorted(family.caregiver_ids):
        if caregiver not in owning:
            findings.append(
                Finding(
                    "member_idle", Severity.MINOR, (),
                    f"{caregiver} owns no subtasks",
                )
            )
    return findings


def detect_child_role_gap(
    schedule: WeeklySchedule, lexicon: Sequence[str] | None = None
) -> list[Finding]:
    """Child-involving subtasks whose descriptions never say what the child
    actually does."""
    verbs = list(lexicon) if lexicon is not None else load_child_action_verbs()
    findings: list[Finding] = []
    for s in sorted(schedule.subtasks, key=lambda s: s.subtask_name):
        if not s.child_participates:
            continue
        if not _contains_verb(s.description, verbs):
            findings.append(
                Finding(
                    "child_action_unspecified", Severity.MINOR, (s.subtask_name,),
                    "description names no concrete child action "
                    f"(looked for: {', '.join(verbs)})",
                )
            )
    return findings


def _context_findings(family: FamilyContext, schedule: WeeklySchedule) -> list[Finding]:
    findings = []
    for conflict in conflict_engine.detect_conflicts(family, schedule):
        if conflict.kind == conflict_engine.KIND_UNAVAILABLE:
            findings.append(
                Finding("owner_unavailable", Severity.MAJOR, conflict.subtasks,
                        conflict.detail)
            )
    return findings


def score_from_findings(findings: Sequence[Finding]) -> int:
    if any(f.severity is Severity.MAJOR for f in findings):
        return 1
    if findings:
        return 2
    return 3


def score_plan(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    schedule: WeeklySchedule,
    *,
    child_action_lexicon: Sequence[str] | None = None,
) -> PlanQualityReport:
    """Run every detector and fold findings into per-dimension scores."""
    all_findings: list[Finding] = []
    all_findings += detect_expertise_mismatch(family, tasks, schedule)
    all_findings += detect_unnecessary_collaboration(family, schedule)
    all_findings += detect_trajectory_gaps(tasks, schedule)
    all_findings += detect_infeasibility(tasks, schedule)
    all_findings += detect_coverage_gaps(family, tasks, schedule)
    all_findings += detect_child_role_gap(schedule, child_action_lexicon)
    all_findings += _context_findings(family, schedule)

    per_dimension: dict[Dimension, list[Finding]] = {d: [] for d in Dimension}
    for finding in all_findings:
        per_dimension[RULE_DIMENSIONS[finding.rule_id]].append(finding)

    scores = tuple(
        DimensionScore(
            dimension=d,
            score=score_from_findings(per_dimension[d]),
            findings=tuple(per_dimension[d]),
        )
        for d in Dimension
    )
    mean = sum(s.score for s in scores) / len(scores)
    return PlanQualityReport(plan_id=schedule.plan_id, scores=scores, overall_mean=mean)


def aggregate_reports(
    reports: Sequence[PlanQualityReport],
) -> dict[Dimension, dict[str, object]]:
    """Per-dimension mean (2 decimals, half up) and count of score-3 plans."""
    if not reports:
        raise ValueError("aggregate_reports needs at least one report")
    out: dict[Dimension, dict[str, object]] = {}
    for dimension in Dimension:
        values = [r.score_for(dimension).score for r in reports]
        mean = (Decimal(sum(values)) / Decimal(len(values))).quantize(
            Decimal("0.01"), rounding=ROUND_HALF_UP
        )
        out[dimension] = {"mean": float(mean), "count_of_3": values.count(3)}
    return out


@dataclass(frozen=True)
class EngagementSummary:
    caregiver_id: str
    tasks_completed: int = 0
    subtasks_executed: int = 0
    used_new_example: bool = False
    used_answer_checking: bool = False
    used_tutoring_guidance: bool = False

    def to_json(self) -> dict:
        return {
            "caregiver_id": self.caregiver_id,
            "tasks_completed": self.tasks_completed,
            "subtasks_executed": self.subtasks_executed,
            "used_new_example": self.used_new_example,
            "used_answer_checking": self.used_answer_checking,
            "used_tutoring_guidance": self.used_tutoring_guidance,
        }


_TUTORING_FLAGS = {
    "transfer_practice": "used_new_example",
    "answer_check": "used_answer_checking",
    "explain_support": "used_tutoring_guidance",
}


def compute_engagement(
    events: Iterable[Mapping],
    caregivers: Sequence[str] | None = None,
) -> dict[str, EngagementSummary]:
    """Fold an event log into per-caregiver engagement.

    Events are mappings with ``kind``, ``actor`` and ``payload``.
    ``plan_generated`` events carry the subtask inventory (names, parents,
    owners); status and handover events are replayed over it. A caregiver's
    executed count is the number of done subtasks they own in the final
    state; a task counts as completed for them when every subtask of that
    parent is done and they own at least one.
    """
    inventory: dict[tuple[str, str], dict] = {}  # (plan, subtask) -> {parent, owners}
    status: dict[tuple[str, str], str] = {}
    flags: dict[str, set[str]] = {}

    for event in events:
        kind = event["kind"]
        payload = event.get("payload", {})
        if kind == "plan_generated":
            plan_id = payload["plan_id"]
            for item in payload.get("subtasks", []):
                inventory[(plan_id, item["subtask_name"])] = {
                    "parent": item["parent_task"],
                    "owners": set(item["owners"]),
                }
        elif kind == "subtask_status_changed":
            key = (payload["plan_id"], payload["subtask_name"])
            status[key] = payload["status"]
        elif kind == "handover":
            key = (payload["plan_id"], payload["subtask_name"])
            entry = inventory.get(key)
            if entry is not None:
                entry["owners"].discard(payload["from"])
                entry["owners"].add(payload["to"])
        elif kind == "tutoring_used":
            flag = _TUTORING_FLAGS.get(payload.get("mode", ""))
            actor = event.get("actor")
            if flag and actor:
                flags.setdefault(actor, set()).add(flag)

    everyone: set[str] = set(caregivers or ())
    for entry in inventory.values():
        everyone.update(entry["owners"])
    everyone.update(flags)

    done_by_plan_parent: dict[tuple[str, str], list[tuple[str, set[str]]]] = {}
    for (plan_id, name), entry in inventory.items():
        done_by_plan_parent.setdefault((plan_id, entry["parent"]), []).append(
            (status.get((plan_id, name), "pending"), entry["owners"])
        )

    summaries: dict[str, EngagementSummary] = {}
    for caregiver in sorted(everyone):
        executed = sum(
            1
            for (plan_id, name), entry in inventory.items()
            if caregiver in entry["owners"]
            and status.get((plan_id, name), "pending") == "done"
        )
        completed = 0
        for (_, _), members in done_by_plan_parent.items():
            if all(state == "done" for state, _ in members) and any(
                caregiver in owners for _, owners in members
            ):
                completed += 1
        caregiver_flags = flags.get(caregiver, set())
        summaries[caregiver] = EngagementSummary(
            caregiver_id=caregiver,
            tasks_completed=completed,
            subtasks_executed=executed,
            used_new_example="used_new_example" in caregiver_flags,
            used_answer_checking="used_answer_checking" in caregiver_flags,
            used_tutoring_guidance="used_tutoring_guidance" in caregiver_flags,
        )
    return summaries
