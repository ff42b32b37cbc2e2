"""End-to-end plan generation: decompose, schedule, conflict-check,
summarize, score — with policy switching between model-produced and
deterministic scheduling, and versioned regeneration.

Every stage appends a provenance entry; an accepted plan is either
conflict-free or its unresolved conflicts are listed there, never silently
conflicted.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, replace
from enum import Enum
from typing import Mapping, Sequence

from . import conflicts as conflict_engine
from .errors import PipelineStageError, ProviderUnreachable, UnknownPlan
from .evaluator import PlanQualityReport, score_plan
from .llm.gateway import LlmGateway
from .model import FamilyContext, LearningTask, Status, Subtask, WeeklySchedule
from .scheduler import SchedulingRequest, assign_and_schedule, verify_schedule

logger = logging.getLogger(__name__)

LLM_REPAIR_ATTEMPTS = 2


class Policy(str, Enum):
    LLM_FIRST = "llm_first"
    DETERMINISTIC_ONLY = "deterministic_only"
    LLM_WITH_REPAIR = "llm_with_repair"


@dataclass(frozen=True)
class PlanResult:
    plan_id: str
    schedule: WeeklySchedule
    report: PlanQualityReport
    summary: str
    provenance: tuple[dict, ...]
    unplaced: tuple[tuple[str, str], ...] = ()
    unresolved_conflicts: tuple[conflict_engine.Conflict, ...] = ()


def deterministic_summary(schedule: WeeklySchedule, family: FamilyContext) -> str:
    """Offline collaboration summary built from the schedule itself."""
    per_owner: dict[str, int] = {}
    for subtask in schedule.subtasks:
        for owner in subtask.owners:
            per_owner[owner] = per_owner.get(owner, 0) + 1
    roles = {c.caregiver_id: c.role_label for c in family.caregivers}
    shares = ", ".join(
        f"{roles.get(owner, owner)} takes {count}"
        for owner, count in sorted(per_owner.items())
    )
    days = len(schedule.days_used())
    text = (
        f"This week has {len(schedule.subtasks)} subtasks spread over {days} "
        f"day(s): {shares}. Check the timesheet before each session and hand "
        f"over tasks early when plans change."
    )
    return text[:300]


def _build_request(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    subtasks: Sequence[Subtask],
    dependencies: Sequence[tuple[str, str]] = (),
    duration_hints: Mapping[str, int] | None = None,
) -> SchedulingRequest:
    return SchedulingRequest(
        family=family,
        tasks=tuple(tasks),
        subtasks=tuple(subtasks),
        dependencies=tuple(dependencies),
        duration_hints=dict(duration_hints or {}),
    )


def generate_plan(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    *,
    policy: Policy | str,
    gateway: LlmGateway,
    plan_id: str = "plan",
    subtasks: Sequence[Subtask] | None = None,
    dependencies: Sequence[tuple[str, str]] = (),
    duration_hints: Mapping[str, int] | None = None,
) -> PlanResult:
    """Run the full generation flow under the given policy.

    ``subtasks`` short-circuits decomposition with fixture input (no
    provider call); a decomposition failure otherwise aborts the run.
    """
    policy = Policy(policy)
    provenance: list[dict] = []

    if subtasks is None:
        try:
            subtasks = gateway.decompose_tasks(family, tasks)
        except Exception as exc:
            provenance.append({"stage": "decompose", "strategy": "provider",
                               "error": str(exc)})
            raise PipelineStageError("decompose", exc) from exc
        provenance.append({"stage": "decompose", "strategy": "provider",
                           "subtasks": len(subtasks)})
    else:
        subtasks = list(subtasks)
        provenance.append({"stage": "decompose", "strategy": "fixture",
                           "subtasks": len(subtasks)})

    request = _build_request(family, tasks, subtasks, dependencies, duration_hints)

    unplaced: tuple[tuple[str, str], ...] = ()
    unresolved: tuple[conflict_engine.Conflict, ...] = ()

    if policy is Policy.DETERMINISTIC_ONLY:
        schedule, unplaced = _deterministic_stage(request, plan_id, provenance)
    elif policy is Policy.LLM_WITH_REPAIR:
        schedule, unresolved = _llm_with_repair_stage(
            family, tasks, subtasks, request, plan_id, provenance, gateway
        )
    else:
        schedule, unplaced, unresolved = _llm_first_stage(
            family, tasks, subtasks, request, plan_id, provenance, gateway
        )

    summary = _summary_stage(schedule, family, policy, gateway, provenance)
    schedule = replace(schedule, summary=summary)

    report = score_plan(family, tasks, schedule)
    provenance.append({
        "stage": "score",
        "scores": {s.dimension.value: s.score for s in report.scores},
    })

    return PlanResult(
        plan_id=plan_id,
        schedule=schedule,
        report=report,
        summary=summary,
        provenance=tuple(provenance),
        unplaced=unplaced,
        unresolved_conflicts=unresolved,
    )


def _deterministic_stage(
    request: SchedulingRequest, plan_id: str, provenance: list[dict]
) -> tuple[WeeklySchedule, tuple[tuple[str, str], ...]]:
    outcome = assign_and_schedule(request, plan_id=plan_id)
    provenance.append({
        "stage": "schedule",
        "strategy": "deterministic",
        "placed": len(outcome.schedule.subtasks),
        "unplaced": [list(u) for u in outcome.unplaced],
    })
    return outcome.schedule, outcome.unplaced


def _llm_first_stage(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    subtasks: Sequence[Subtask],
    request: SchedulingRequest,
    plan_id: str,
    provenance: list[dict],
    gateway: LlmGateway,
) -> tuple[WeeklySchedule, tuple[tuple[str, str], ...], tuple[conflict_engine.Conflict, ...]]:
    try:
        reply = gateway.llm_schedule(family, tasks, subtasks, plan_id=plan_id)
    except ProviderUnreachable as exc:
        provenance.append({"stage": "schedule", "strategy": "provider",
                           "error": str(exc), "fallback": "deterministic"})
        schedule, unplaced = _deterministic_stage(request, plan_id, provenance)
        return schedule, unplaced, ()

    provenance.append({
        "stage": "schedule",
        "strategy": "provider",
        "violations": [v.to_json() for v in reply.violations],
    })
    schedule = reply.schedule
    violations = reply.violations

    attempts = 0
    while violations and attempts < LLM_REPAIR_ATTEMPTS:
        attempts += 1
        try:
            repair_reply = gateway.llm_repair(family, tasks, schedule)
        except ProviderUnreachable as exc:
            provenance.append({"stage": "llm_repair", "attempt": attempts,
                               "error": str(exc)})
            break
        schedule = repair_reply.schedule
        violations = tuple(verify_schedule(request, schedule))
        provenance.append({
            "stage": "llm_repair",
            "attempt": attempts,
            "violations": [v.to_json() for v in violations],
        })

    unresolved: tuple[conflict_engine.Conflict, ...] = ()
    if violations:
        result = conflict_engine.repair(family, schedule, request.dependencies)
        schedule = result.schedule
        unresolved = result.unresolved
        provenance.append({
            "stage": "deterministic_backstop",
            "edits": [
                {"subtask": name, "from": f"day {old.day} {old.start}-{old.end}",
                 "to": f"day {new.day} {new.start}-{new.end}"}
                for name, old, new in result.edits
            ],
            "unresolved": [c.to_json() for c in unresolved],
        })
    return schedule, (), unresolved


def _llm_with_repair_stage(
    family: FamilyContext,
    tasks: Sequence[LearningTask],
    subtasks: Sequence[Subtask],
    request: SchedulingRequest,
    plan_id: str,
    provenance: list[dict],
    gateway: LlmGateway,
) -> tuple[WeeklySchedule, tuple[conflict_engine.Conflict, ...]]:
    try:
        reply = gateway.llm_schedule(family, tasks, subtasks, plan_id=plan_id)
    except Exception as exc:
        provenance.append({"stage": "schedule", "strategy": "provider",
                           "error": str(exc)})
        raise PipelineStageError("llm_schedule", exc) from exc
    provenance.append({
        "stage": "schedule",
        "strategy": "provider",
        "violations": [v.to_json() for v in reply.violations],
    })
    result = conflict_engine.repair(family, reply.schedule, request.dependencies)
    provenance.append({
        "stage": "repair",
        "strategy": "deterministic",
        "edits": [
            {"subtask": name, "from": f"day {old.day} {old.start}-{old.end}",
             "to": f"day {new.day} {new.start}-{new.end}"}
            for name, old, new in result.edits
        ],
        "unresolved": [c.to_json() for c in result.unresolved],
    })
    return result.schedule, result.unresolved


def _summary_stage(
    schedule: WeeklySchedule,
    family: FamilyContext,
    policy: Policy,
    gateway: LlmGateway,
    provenance: list[dict],
) -> str:
    if policy is Policy.DETERMINISTIC_ONLY:
        summary = deterministic_summary(schedule, family)
        provenance.append({"stage": "summary", "strategy": "deterministic"})
        return summary
    try:
        summary = gateway.summarize_collaboration(schedule, family)
        provenance.append({"stage": "summary", "strategy": "provider"})
        return summary
    except ProviderUnreachable as exc:
        summary = deterministic_summary(schedule, family)
        provenance.append({"stage": "summary", "strategy": "deterministic",
                           "error": str(exc)})
        return summary


@dataclass(frozen=True)
class PlanVersion:
    plan_id: str
    base_id: str
    version: int
    parent_plan_id: str | None
    result: PlanResult


class PlanVersions:
    """Append-only, thread-safe plan version registry.

    One in-flight generation per base id; concurrent generations across
    bases proceed independently.
    """

    def __init__(self) -> None:
        self._versions: dict[str, PlanVersion] = {}
        self._by_base: dict[str, list[str]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._guard = threading.Lock()

    def _lock_for(self, base_id: str) -> threading.Lock:
        with self._guard:
            return self._locks.setdefault(base_id, threading.Lock())

    def get(self, plan_id: str) -> PlanVersion:
        try:
            return self._versions[plan_id]
        except KeyError:
            raise UnknownPlan(f"unknown plan: {plan_id}") from None

    def versions_of(self, base_id: str) -> list[PlanVersion]:
        return [self._versions[pid] for pid in self._by_base.get(base_id, [])]

    def create(
        self,
        base_id: str,
        family: FamilyContext,
        tasks: Sequence[LearningTask],
        *,
        policy: Policy | str,
        gateway: LlmGateway,
        subtasks: Sequence[Subtask] | None = None,
        dependencies: Sequence[tuple[str, str]] = (),
        duration_hints: Mapping[str, int] | None = None,
    ) -> PlanVersion:
        with self._lock_for(base_id):
            version = len(self._by_base.get(base_id, [])) + 1
            plan_id = f"{base_id}-v{version}"
            result = generate_plan(
                family, tasks, policy=policy, gateway=gateway, plan_id=plan_id,
                subtasks=subtasks, dependencies=dependencies,
                duration_hints=duration_hints,
            )
            record = PlanVersion(plan_id, base_id, version, None, result)
            self._versions[plan_id] = record
            self._by_base.setdefault(base_id, []).append(plan_id)
            return record

    def regenerate(
        self,
        plan_id: str,
        family: FamilyContext,
        tasks: Sequence[LearningTask],
        *,
        policy: Policy | str,
        gateway: LlmGateway,
        subtasks: Sequence[Subtask] | None = None,
        dependencies: Sequence[tuple[str, str]] = (),
        duration_hints: Mapping[str, int] | None = None,
    ) -> PlanVersion:
        """Full regeneration as a new linked version; completed subtasks keep
        their status when (subtask_name, parent_task) matches."""
        prior = self.get(plan_id)
        with self._lock_for(prior.base_id):
            version = len(self._by_base[prior.base_id]) + 1
            new_plan_id = f"{prior.base_id}-v{version}"
            result = generate_plan(
                family, tasks, policy=policy, gateway=gateway, plan_id=new_plan_id,
                subtasks=subtasks, dependencies=dependencies,
                duration_hints=duration_hints,
            )
            carried = carry_over_statuses(prior.result.schedule, result.schedule)
            result = replace(
                result,
                schedule=carried,
                provenance=result.provenance
                + ({"stage": "carry_over", "from": plan_id},),
            )
            record = PlanVersion(new_plan_id, prior.base_id, version, plan_id, result)
            self._versions[new_plan_id] = record
            self._by_base[prior.base_id].append(new_plan_id)
            return record


def carry_over_statuses(old: WeeklySchedule, new: WeeklySchedule) -> WeeklySchedule:
    """Preserve done statuses across regeneration for matching subtasks."""
    done = {
        (s.subtask_name, s.parent_task)
        for s in old.subtasks
        if s.status is Status.DONE
    }
    carried = tuple(
        s.with_status(Status.DONE)
        if (s.subtask_name, s.parent_task) in done
        else s
        for s in new.subtasks
    )
    return replace(new, subtasks=carried)
