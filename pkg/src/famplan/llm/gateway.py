"""High-level operations over a chat provider: decomposition, scheduling,
conflict fixing, summaries, and the four tutoring modes.

Structured replies go through ``extract_json`` and are validated hard;
content-preservation is enforced by byte comparison of canonical subtask
serializations, so a model can never silently rewrite task content.
"""

from __future__ import annotations

import json
import logging
import uuid
from dataclasses import dataclass
from typing import Callable, Sequence

from ..errors import (
    ConstraintViolation,
    ContentMutated,
    EmptySource,
    EmptySummary,
    NoAttachment,
    NoVisionSupport,
    AttachmentTooLarge,
    OutputUnparseable,
    WrongMode,
)
from ..model import (
    FamilyContext,
    LearningTask,
    Subtask,
    WeeklySchedule,
    expand_availability,
)
from ..conflicts import Conflict, detect_conflicts
from ..schedule_json import (
    ScheduleParseError,
    schedule_from_obj,
    subtask_content_bytes,
    subtask_to_obj,
)
from ..scheduler import SchedulingRequest, Violation, verify_schedule
from .extraction import extract_json
from .prompts import (
    TUTORING_MODES,
    decompose_format_instructions,
    load_catalog,
    schedule_format_instructions,
)
from .providers import Attachment, ChatMessage, ChatProvider

logger = logging.getLogger(__name__)

MAX_SUBTASKS_PER_TASK = 10
SUMMARY_CHAR_LIMIT = 300
DEFAULT_HISTORY_WINDOW = 8
DEFAULT_CHUNK_CHARS = 4000
DEFAULT_MAX_IMAGE_BYTES = 4 * 1024 * 1024

# Reproducible output for planning calls, conversational for tutoring.
PLANNING_TEMPERATURE = 0.0
TUTORING_TEMPERATURE = 0.7


@dataclass(frozen=True)
class TutoringExchange:
    """One caregiver-assistant interaction in a tutoring mode."""

    exchange_id: str
    caregiver_id: str
    mode: str
    request_text: str
    response: str
    timestamp: float
    subtask_name: str | None = None
    attachments: tuple[Attachment, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in TUTORING_MODES:
            raise ValueError(f"unknown tutoring mode: {self.mode!r}")
        if self.mode == "answer_check" and not self.attachments and not self.request_text:
            raise ValueError("answer_check needs an attachment or inline answer text")

    def to_json(self) -> dict:
        # Raw bytes never serialize; only attachment metadata does.
        return {
            "exchange_id": self.exchange_id,
            "caregiver_id": self.caregiver_id,
            "mode": self.mode,
            "subtask_name": self.subtask_name,
            "request_text": self.request_text,
            "attachments": [
                {"media_type": a.media_type, "bytes": a.size} for a in self.attachments
            ],
            "response": self.response,
            "timestamp": self.timestamp,
        }


@dataclass(frozen=True)
class ScheduleReply:
    schedule: WeeklySchedule
    violations: tuple[Violation, ...]


@dataclass(frozen=True)
class RepairReply:
    schedule: WeeklySchedule
    residual_conflicts: tuple[Conflict, ...]


def render_members(family: FamilyContext) -> str:
    """Deterministic availability text for the {members} placeholder."""
    lines = []
    for caregiver in family.caregivers:
        tags = ", ".join(sorted(caregiver.expertise_tags)) or "none"
        windows = "; ".join(
            f"day {slot.day} {slot.start}-{slot.end}"
            for slot in expand_availability(caregiver)
        ) or "no stated availability"
        note = f" ({caregiver.notes})" if caregiver.notes else ""
        lines.append(
            f"- {caregiver.caregiver_id} [{caregiver.role_label}]{note} "
            f"expertise: {tags}; available: {windows}"
        )
    return "\n".join(lines)


def render_family_desc(family: FamilyContext) -> str:
    parts = []
    for caregiver in family.caregivers:
        tags = ", ".join(sorted(caregiver.expertise_tags)) or "no subject preference"
        note = f"; {caregiver.notes}" if caregiver.notes else ""
        parts.append(f"{caregiver.caregiver_id} ({caregiver.role_label}): {tags}{note}")
    if family.independence_required:
        parts.append("each subtask must be completable by a single caregiver")
    return "; ".join(parts)


def render_child_desc(family: FamilyContext) -> str:
    child = family.child
    characteristics = f"; {child.characteristics}" if child.characteristics else ""
    return f"age {child.age}, grade {child.grade_level}{characteristics}"


def subtasks_payload(subtasks: Sequence[Subtask]) -> str:
    """Canonical JSON of subtasks without slots, for prompt embedding."""
    return json.dumps(
        {"subtasks": [subtask_to_obj(s, include_slot=False) for s in subtasks]},
        ensure_ascii=False,
        indent=2,
    )


def _truncate_at_sentence(text: str, limit: int) -> str:
    if len(text) <= limit:
        return text
    head = text[:limit]
    cut = max(head.rfind(mark) for mark in (".", "!", "?", "。", "！", "？"))
    if cut > 0:
        return head[: cut + 1]
    return head


class LlmGateway:
    """Prompt rendering, reply validation, and exchange bookkeeping."""

    def __init__(
        self,
        provider: ChatProvider,
        *,
        history_window: int = DEFAULT_HISTORY_WINDOW,
        summary_limit: int = SUMMARY_CHAR_LIMIT,
        chunk_chars: int = DEFAULT_CHUNK_CHARS,
        max_image_bytes: int = DEFAULT_MAX_IMAGE_BYTES,
        output_language: str = "Chinese",
        id_factory: Callable[[], str] | None = None,
        clock: Callable[[], float] | None = None,
    ):
        self.provider = provider
        self.templates = load_catalog()
        self.history_window = history_window
        self.summary_limit = summary_limit
        self.chunk_chars = chunk_chars
        self.max_image_bytes = max_image_bytes
        self.output_language = output_language
        self._new_id = id_factory or (lambda: uuid.uuid4().hex)
        if clock is None:
            import time

            clock = time.time
        self._clock = clock

    # -- Stage 1: plan generation ------------------------------------------

    def decompose_tasks(
        self, family: FamilyContext, tasks: Sequence[LearningTask]
    ) -> list[Subtask]:
        """Decompose each task, enforcing the hard output constraints.

        A reply violating the constraints triggers exactly one structured
        repair retry (the violations are appended to the prompt); a second
        bad reply is a hard error. Plan-wide, every caregiver must own at
        least one subtask.
        """
        if not tasks:
            raise ConstraintViolation("decompose_tasks needs at least one task")
        all_subtasks: list[Subtask] = []
        for task in tasks:
            prompt = self.templates["decompose"].render(
                task_name=task.task_name,
                task_description=task.description,
                family_desc=render_family_desc(family),
                child_desc=render_child_desc(family),
                format_instructions=decompose_format_instructions(),
            )
            reply = self.provider.complete(
                [ChatMessage("user", prompt)],
                temperature=PLANNING_TEMPERATURE,
                template_id="decompose",
            )
            subtasks, problems = self._parse_decomposition(task, family, reply)
            if problems:
                retry_prompt = (
                    prompt
                    + "\n\nYour previous reply violated these requirements:\n- "
                    + "\n- ".join(problems)
                    + "\nReturn corrected JSON."
                )
                logger.info("decompose retry for %s: %s", task.task_name, problems)
                reply = self.provider.complete(
                    [ChatMessage("user", retry_prompt)],
                    temperature=PLANNING_TEMPERATURE,
                    template_id="decompose",
                )
                subtasks, problems = self._parse_decomposition(task, family, reply)
                if problems:
                    raise ConstraintViolation(
                        f"decomposition of {task.task_name} still invalid after repair",
                        problems,
                    )
            all_subtasks.extend(subtasks)

        idle = set(family.caregiver_ids) - {o for s in all_subtasks for o in s.owners}
        if idle:
            raise ConstraintViolation(
                "every family member must participate",
                [f"caregiver {c} owns no subtasks" for c in sorted(idle)],
            )
        return all_subtasks

    def _parse_decomposition(
        self, task: LearningTask, family: FamilyContext, reply: str
    ) -> tuple[list[Subtask], list[str]]:
        extracted = extract_json(reply)
        data = extracted.value
        problems: list[str] = []
        if not isinstance(data, dict) or not isinstance(data.get("subtasks"), list):
            return [], ['reply must be {"subtasks": [...]}']
        items = data["subtasks"]
        if len(items) > MAX_SUBTASKS_PER_TASK:
            problems.append(
                f"total subtasks must not exceed {MAX_SUBTASKS_PER_TASK}, got {len(items)}"
            )
        if not items:
            problems.append("at least one subtask is required")
        subtasks: list[Subtask] = []
        known = set(family.caregiver_ids)
        for i, item in enumerate(items):
            if not isinstance(item, dict):
                problems.append(f"subtask {i} is not an object")
                continue
            expected_name = f"{task.task_name}_{i + 1}"
            name = item.get("subtask_name")
            if name != expected_name:
                problems.append(
                    f"subtask names must run {task.task_name}_1..{task.task_name}_{len(items)}; "
                    f"position {i} has {name!r}"
                )
                continue
            owners_raw = item.get("owners")
            owners = (
                frozenset(owners_raw)
                if isinstance(owners_raw, list)
                and owners_raw
                and all(isinstance(o, str) for o in owners_raw)
                else frozenset()
            )
            if not owners:
                problems.append(f"{expected_name}: at least one responsible adult required")
                continue
            unknown = owners - known
            if unknown:
                problems.append(f"{expected_name}: unknown owners {sorted(unknown)}")
                continue
            try:
                subtasks.append(
                    Subtask(
                        subtask_name=expected_name,
                        parent_task=task.task_name,
                        description=str(item.get("description", "")),
                        owners=owners,
                        tutoring_method=str(item.get("tutoring_method", "")),
                        answers=(
                            str(item["answers"])
                            if item.get("answers") is not None
                            else None
                        ),
                        child_participates=bool(item.get("child_participates", False)),
                    )
                )
            except ValueError as exc:
                problems.append(f"{expected_name}: {exc}")
        if problems:
            return [], problems
        return subtasks, []

    def llm_schedule(
        self,
        family: FamilyContext,
        tasks: Sequence[LearningTask],
        subtasks: Sequence[Subtask],
        *,
        plan_id: str = "plan",
    ) -> ScheduleReply:
        """Ask the model to place subtasks, then audit the result.

        The reply must keep every non-slot field byte-identical to the
        input; any drift is a hard ``ContentMutated`` error. Scheduling-rule
        violations are attached for the caller to judge.
        """
        prompt = self.templates["schedule"].render(
            members=render_members(family),
            format_instructions=schedule_format_instructions(),
            task_assignment_dict=subtasks_payload(subtasks),
        )
        reply = self.provider.complete(
            [ChatMessage("user", prompt)],
            temperature=PLANNING_TEMPERATURE,
            template_id="schedule",
        )
        schedule = self._parse_schedule_reply(reply, family, plan_id)
        _check_content_preserved(subtasks, schedule.subtasks)
        request = SchedulingRequest(
            family=family, tasks=tuple(tasks), subtasks=tuple(subtasks)
        )
        return ScheduleReply(
            schedule=schedule,
            violations=tuple(verify_schedule(request, schedule)),
        )

    def llm_repair(
        self,
        family: FamilyContext,
        tasks: Sequence[LearningTask],
        schedule: WeeklySchedule,
    ) -> RepairReply:
        """Ask the model to fix conflicts; only day/start/end may change."""
        prompt = self.templates["conflict_fix"].render(
            schedule_dict_all=json.dumps(
                {"subtasks": [subtask_to_obj(s) for s in schedule.sorted_subtasks()]},
                ensure_ascii=False,
                indent=2,
            ),
            members=render_members(family),
        )
        reply = self.provider.complete(
            [ChatMessage("user", prompt)],
            temperature=PLANNING_TEMPERATURE,
            template_id="conflict_fix",
        )
        repaired = self._parse_schedule_reply(reply, family, schedule.plan_id)
        _check_content_preserved(schedule.subtasks, repaired.subtasks)
        return RepairReply(
            schedule=repaired,
            residual_conflicts=tuple(detect_conflicts(family, repaired)),
        )

    def _parse_schedule_reply(
        self, reply: str, family: FamilyContext, plan_id: str
    ) -> WeeklySchedule:
        extracted = extract_json(reply)
        data = extracted.value
        if not isinstance(data, dict) or "subtasks" not in data:
            raise OutputUnparseable('schedule reply must carry a "subtasks" array')
        envelope = {
            "plan_id": plan_id,
            "family_id": family.family_id,
            "summary": None,
            "subtasks": data["subtasks"],
        }
        try:
            # Lenient: conflicts in raw model output are the repair stage's job.
            return schedule_from_obj(envelope, strict=False)
        except ScheduleParseError as exc:
            raise OutputUnparseable(
                f"schedule reply failed validation: {exc}",
                [v.rule_id for v in exc.violations],
            ) from exc

    def summarize_collaboration(
        self, schedule: WeeklySchedule, family: FamilyContext
    ) -> str:
        """One warm paragraph, hard-capped at the configured character limit."""
        prompt = self.templates["summary"].render(
            output_language=self.output_language,
            final_schedule=json.dumps(
                {"subtasks": [subtask_to_obj(s) for s in schedule.sorted_subtasks()]},
                ensure_ascii=False,
            ),
            members=render_members(family),
        )
        reply = self.provider.complete(
            [ChatMessage("user", prompt)],
            temperature=PLANNING_TEMPERATURE,
            template_id="summary",
        ).strip()
        if not reply:
            raise EmptySummary("provider returned an empty summary")
        if len(reply) > self.summary_limit:
            retry = self.provider.complete(
                [ChatMessage(
                    "user",
                    prompt
                    + f"\n\nYour previous reply was {len(reply)} characters; "
                    f"it must not exceed {self.summary_limit}.",
                )],
                temperature=PLANNING_TEMPERATURE,
                template_id="summary",
            ).strip()
            if retry:
                reply = retry
            if len(reply) > self.summary_limit:
                reply = _truncate_at_sentence(reply, self.summary_limit)
        return reply

    # -- Stage 2: tutoring modes ---------------------------------------------

    def chat_tutoring(
        self,
        caregiver_id: str,
        text: str,
        history: Sequence[tuple[str, str]] = (),
        *,
        subtask_name: str | None = None,
        attachments: Sequence[Attachment] = (),
    ) -> TutoringExchange:
        """General dialogue with a rolling history window."""
        if attachments:
            raise WrongMode("dialogue mode takes no attachments; use answer_check")
        window = list(history)[-self.history_window:]
        messages = [ChatMessage("system", self.templates["dialogue"].body)]
        messages += [ChatMessage(role, content) for role, content in window]
        messages.append(ChatMessage("user", text))
        response = self.provider.complete(
            messages, temperature=TUTORING_TEMPERATURE, template_id="dialogue"
        )
        return self._exchange("dialogue", caregiver_id, text, response,
                              subtask_name=subtask_name)

    def check_answers(
        self,
        caregiver_id: str,
        *,
        attachments: Sequence[Attachment] = (),
        text: str = "",
        subtask_name: str | None = None,
    ) -> TutoringExchange:
        """Verify homework answers from photos (or inline text)."""
        if not attachments and not text.strip():
            raise NoAttachment("answer checking needs a photo or inline answers")
        if attachments and not self.provider.supports_vision:
            raise NoVisionSupport(f"provider {self.provider.name} cannot take images")
        for attachment in attachments:
            if attachment.size > self.max_image_bytes:
                raise AttachmentTooLarge(
                    f"image of {attachment.size} bytes exceeds cap {self.max_image_bytes}"
                )
        messages = [
            ChatMessage("system", self.templates["answer_check"].body),
            ChatMessage("user", text, tuple(attachments)),
        ]
        response = self.provider.complete(
            messages, temperature=TUTORING_TEMPERATURE, template_id="answer_check"
        )
        return self._exchange("answer_check", caregiver_id, text, response,
                              subtask_name=subtask_name, attachments=tuple(attachments))

    def generate_examples(
        self, caregiver_id: str, source_text: str, *, subtask_name: str | None = None
    ) -> TutoringExchange:
        """Similar practice problems from completed answers."""
        response = self._chunked_mode("transfer_practice", source_text)
        return self._exchange("transfer_practice", caregiver_id, source_text, response,
                              subtask_name=subtask_name)

    def explain_guidance(
        self, caregiver_id: str, problems_text: str, *, subtask_name: str | None = None
    ) -> TutoringExchange:
        """Age-appropriate explanation guidance for the caregiver."""
        response = self._chunked_mode("explain_support", problems_text)
        return self._exchange("explain_support", caregiver_id, problems_text, response,
                              subtask_name=subtask_name)

    def _chunked_mode(self, mode: str, source: str) -> str:
        if not source.strip():
            raise EmptySource(f"{mode} needs source text")
        chunks = [
            source[i : i + self.chunk_chars]
            for i in range(0, len(source), self.chunk_chars)
        ]
        replies = []
        for chunk in chunks:
            replies.append(
                self.provider.complete(
                    [
                        ChatMessage("system", self.templates[mode].body),
                        ChatMessage("user", chunk),
                    ],
                    temperature=TUTORING_TEMPERATURE,
                    template_id=mode,
                )
            )
        return "\n\n".join(replies)

    def _exchange(
        self,
        mode: str,
        caregiver_id: str,
        request_text: str,
        response: str,
        *,
        subtask_name: str | None = None,
        attachments: tuple[Attachment, ...] = (),
    ) -> TutoringExchange:
        return TutoringExchange(
            exchange_id=self._new_id(),
            caregiver_id=caregiver_id,
            mode=mode,
            request_text=request_text,
            response=response,
            timestamp=self._clock(),
            subtask_name=subtask_name,
            attachments=attachments,
        )


def _check_content_preserved(
    before: Sequence[Subtask], after: Sequence[Subtask]
) -> None:
    """Byte-compare canonical non-slot serializations, keyed by name."""
    before_map = {s.subtask_name: subtask_content_bytes(s) for s in before}
    after_map = {s.subtask_name: subtask_content_bytes(s) for s in after}
    mutated: list[str] = []
    for name in sorted(before_map.keys() - after_map.keys()):
        mutated.append(f"subtask {name} disappeared or was renamed")
    for name in sorted(after_map.keys() - before_map.keys()):
        mutated.append(f"subtask {name} appeared from nowhere")
    for name in sorted(before_map.keys() & after_map.keys()):
        if before_map[name] != after_map[name]:
            mutated.append(f"content of {name} changed")
    if mutated:
        raise ContentMutated("reply mutated subtask content", mutated)
