"""Resource-oriented HTTP+JSON API over the store, pipeline, and gateway.

Authentication is one bearer token per family, issued at creation. Errors
come back as ``{code, message, details: []}``. A caregiver may act for
another through the explicit ``acting_as`` field (defaults to self).
"""

from __future__ import annotations

import base64
import logging
from dataclasses import replace

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse

from . import codec
from .errors import (
    AttachmentTooLarge,
    ConstraintViolation,
    ContentMutated,
    DuplicateId,
    EmptySource,
    EmptySummary,
    FamplanError,
    IllegalTransition,
    InfeasibleOrdering,
    NoAttachment,
    NotOwner,
    NoVisionSupport,
    OutputUnparseable,
    PipelineStageError,
    ProviderUnreachable,
    TransitionConflict,
    UnknownCaregiver,
    UnknownFamily,
    UnknownPlan,
    ValidationFailure,
    WrongMode,
)
from .fixtures import rule_decompose
from .llm.gateway import LlmGateway
from .llm.prompts import TUTORING_MODES
from .llm.providers import Attachment, ChatProvider, StubChatProvider
from .model import Status
from .pipeline import Policy, carry_over_statuses, generate_plan
from .schedule_json import ScheduleParseError
from .store import Store

logger = logging.getLogger(__name__)

_STATUS_CODES: dict[type, int] = {
    UnknownPlan: 404,
    UnknownFamily: 404,
    DuplicateId: 409,
    TransitionConflict: 409,
    IllegalTransition: 422,
    ValidationFailure: 422,
    NotOwner: 422,
    UnknownCaregiver: 422,
    WrongMode: 422,
    NoAttachment: 422,
    EmptySource: 422,
    NoVisionSupport: 422,
    InfeasibleOrdering: 422,
    ConstraintViolation: 422,
    ScheduleParseError: 422,
    AttachmentTooLarge: 413,
    EmptySummary: 502,
    ProviderUnreachable: 502,
    ContentMutated: 502,
    OutputUnparseable: 502,
    PipelineStageError: 502,
}


def _error_payload(exc: Exception) -> dict:
    details: list = []
    for attr in ("rules", "fields", "attempts", "cycle"):
        details.extend(getattr(exc, attr, ()) or ())
    if isinstance(exc, ScheduleParseError):
        details.extend(v.to_json() for v in exc.violations)
    return {
        "code": getattr(exc, "code", "error"),
        "message": str(exc),
        "details": details,
    }


def _echo_stub() -> StubChatProvider:
    return StubChatProvider(
        fallback=lambda messages, template_id: (
            f"[stub:{template_id}] {messages[-1].text[:200]}"
        )
    )


def create_app(
    store: Store,
    *,
    provider: ChatProvider | None = None,
    default_policy: str = Policy.DETERMINISTIC_ONLY.value,
    decomposition: str = "rule",  # "rule" (offline) or "provider"
) -> FastAPI:
    provider = provider or _echo_stub()
    gateway = LlmGateway(provider)
    app = FastAPI(title="famplan", version="0.1.0")

    @app.exception_handler(FamplanError)
    async def handle_famplan_error(request: Request, exc: FamplanError):
        status = 500
        for cls, code in _STATUS_CODES.items():
            if isinstance(exc, cls):
                status = code
                break
        return JSONResponse(status_code=status, content=_error_payload(exc))

    @app.exception_handler(ValueError)
    async def handle_value_error(request: Request, exc: ValueError):
        return JSONResponse(status_code=422, content=_error_payload(exc))

    def family_auth(
        family_id: str, authorization: str = Header(default="")
    ) -> str:
        token = authorization.removeprefix("Bearer ").strip()
        known = store.family_for_token(token) if token else None
        if known is None or known != family_id:
            raise ValidationFailure("missing or wrong bearer token")
        return family_id

    def plan_auth(plan_id: str, authorization: str = Header(default="")) -> str:
        family_id = store.plan_family(plan_id)
        token = authorization.removeprefix("Bearer ").strip()
        known = store.family_for_token(token) if token else None
        if known is None or known != family_id:
            raise ValidationFailure("missing or wrong bearer token")
        return plan_id

    # -- families -----------------------------------------------------------

    @app.post("/families", status_code=201)
    async def create_family(body: dict):
        family = codec.family_from_obj(body)
        token = store.create_family(family)
        return {"family": codec.family_to_obj(family), "token": token}

    @app.get("/families/{family_id}")
    async def get_family(family_id: str = Depends(family_auth)):
        return codec.family_to_obj(store.get_family(family_id))

    @app.put("/families/{family_id}/caregivers/{caregiver_id}")
    async def update_caregiver(
        caregiver_id: str, body: dict, family_id: str = Depends(family_auth)
    ):
        caregiver = codec.caregiver_from_obj({**body, "caregiver_id": caregiver_id})
        family = store.update_caregiver_profile(family_id, caregiver)
        return {
            "family": codec.family_to_obj(family),
            "profile_version": store.caregiver_version_count(family_id, caregiver_id),
        }

    # -- plans --------------------------------------------------------------

    @app.post("/families/{family_id}/plans", status_code=201)
    async def create_plan(body: dict, family_id: str = Depends(family_auth)):
        family = store.get_family(family_id)
        tasks = [codec.task_from_obj(t) for t in body.get("tasks", ())]
        if not tasks:
            raise ValidationFailure("tasks must be a nonempty list")
        policy = Policy(body.get("policy", default_policy))

        subtasks = None
        if body.get("subtasks"):
            subtasks = [codec.subtask_from_obj(s) for s in body["subtasks"]]
        elif decomposition == "rule":
            subtasks = rule_decompose(family, tasks)

        base_id = body.get("base_id") or f"{family_id}-plan"
        version = store.next_plan_version(base_id)
        plan_id = f"{base_id}-v{version}"
        result = generate_plan(
            family, tasks, policy=policy, gateway=gateway,
            plan_id=plan_id, subtasks=subtasks,
        )
        parent_plan_id = f"{base_id}-v{version - 1}" if version > 1 else None
        if parent_plan_id is not None:
            prior = store.get_schedule(parent_plan_id)
            live = store.snapshot_states(parent_plan_id)
            prior_live = replace(
                prior,
                subtasks=tuple(
                    s.with_status(Status(live[s.subtask_name]["status"]))
                    if s.subtask_name in live else s
                    for s in prior.subtasks
                ),
            )
            result = replace(
                result, schedule=carry_over_statuses(prior_live, result.schedule)
            )
        store.save_plan(result, base_id=base_id, version=version,
                        parent_plan_id=parent_plan_id)
        row = store.get_plan_row(plan_id)
        row["unplaced"] = [list(u) for u in result.unplaced]
        return row

    @app.get("/plans/{plan_id}/timesheet")
    async def get_timesheet(plan_id: str = Depends(plan_auth)):
        return store.get_timesheet(plan_id)

    @app.get("/plans/{plan_id}/report")
    async def get_report(plan_id: str = Depends(plan_auth)):
        return store.get_plan_row(plan_id)["report"]

    @app.post("/plans/{plan_id}/subtasks/{subtask_name}/handover")
    async def handover(
        subtask_name: str, body: dict, plan_id: str = Depends(plan_auth)
    ):
        state, warnings = store.handover_subtask(
            plan_id, subtask_name,
            from_id=body["from"], to_id=body["to"],
            acting_as=body.get("acting_as"),
        )
        return {"subtask": state, "warnings": warnings}

    @app.post("/plans/{plan_id}/subtasks/{subtask_name}/status")
    async def set_status(
        subtask_name: str, body: dict, plan_id: str = Depends(plan_auth)
    ):
        state = store.set_subtask_status(
            plan_id, subtask_name, Status(body["status"]),
            actor=body.get("caregiver_id", ""),
            acting_as=body.get("acting_as"),
        )
        return {"subtask": state}

    @app.post("/plans/{plan_id}/subtasks/{subtask_name}/notes")
    async def add_note(
        subtask_name: str, body: dict, plan_id: str = Depends(plan_auth)
    ):
        state = store.add_note(
            plan_id, subtask_name,
            caregiver_id=body["caregiver_id"], text=body.get("text", ""),
            acting_as=body.get("acting_as"),
        )
        return {"subtask": state}

    # -- tutoring -------------------------------------------------------------

    @app.post("/tutoring/{mode}")
    async def tutoring(mode: str, body: dict, authorization: str = Header(default="")):
        if mode not in TUTORING_MODES:
            raise WrongMode(f"unknown tutoring mode: {mode}")
        family_id = body.get("family_id", "")
        family_auth(family_id, authorization)
        caregiver_id = body.get("caregiver_id", "")
        text = body.get("text", "")
        subtask_name = body.get("subtask_name")
        attachments = tuple(
            Attachment(
                media_type=a.get("media_type", "image/png"),
                data=base64.b64decode(a["data_b64"]),
            )
            for a in body.get("attachments", ())
        )
        if mode == "dialogue":
            history = [tuple(h) for h in body.get("history", ())]
            exchange = gateway.chat_tutoring(
                caregiver_id, text, history,
                subtask_name=subtask_name, attachments=attachments,
            )
        elif mode == "answer_check":
            exchange = gateway.check_answers(
                caregiver_id, attachments=attachments, text=text,
                subtask_name=subtask_name,
            )
        elif mode == "transfer_practice":
            exchange = gateway.generate_examples(
                caregiver_id, text, subtask_name=subtask_name
            )
        else:
            exchange = gateway.explain_guidance(
                caregiver_id, text, subtask_name=subtask_name
            )
        store.record_tutoring_use(family_id, exchange)
        return exchange.to_json()

    # -- engagement -------------------------------------------------------------

    @app.get("/families/{family_id}/engagement")
    async def engagement(family_id: str = Depends(family_auth)):
        return {
            "family_id": family_id,
            "caregivers": [s.to_json() for s in store.get_engagement(family_id)],
        }

    return app
