"""Exception hierarchy shared across modules."""

from __future__ import annotations


class FamplanError(Exception):
    """Base class for all package errors."""

    code = "error"


class ValidationFailure(FamplanError):
    code = "validation_failure"


class ProviderUnreachable(FamplanError):
    """The chat-completion provider could not be reached after retries."""

    code = "provider_unreachable"


class OutputUnparseable(FamplanError):
    """No extraction strategy recovered structured data from a reply."""

    code = "output_unparseable"

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class ConstraintViolation(FamplanError):
    """A structured reply violated hard output constraints after repair."""

    code = "constraint_violation"

    def __init__(self, message: str, rules: list[str] | None = None):
        super().__init__(message)
        self.rules = rules or []


class ContentMutated(FamplanError):
    """A reply silently changed fields it was told to leave untouched."""

    code = "content_mutated"

    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = fields or []


class WrongMode(FamplanError):
    code = "wrong_mode"


class NoAttachment(FamplanError):
    code = "no_attachment"


class NoVisionSupport(FamplanError):
    code = "provider_no_vision"


class AttachmentTooLarge(FamplanError):
    code = "attachment_too_large"


class EmptySummary(FamplanError):
    code = "empty_summary"


class EmptySource(FamplanError):
    code = "empty_source"


class InfeasibleOrdering(FamplanError):
    """The requested subtask ordering contains a cycle."""

    code = "infeasible_ordering"

    def __init__(self, message: str, cycle: list[str] | None = None):
        super().__init__(message)
        self.cycle = cycle or []


class UnknownPlan(FamplanError):
    code = "unknown_plan"


class UnknownFamily(FamplanError):
    code = "unknown_family"


class DuplicateId(FamplanError):
    code = "duplicate_id"


class IllegalTransition(FamplanError):
    """A status change that no legal transition path permits."""

    code = "illegal_transition"


class TransitionConflict(FamplanError):
    """A concurrent writer already applied a conflicting transition; retriable."""

    code = "transition_conflict"
    retriable = True


class NotOwner(FamplanError):
    code = "from_not_owner"


class UnknownCaregiver(FamplanError):
    code = "unknown_caregiver"


class PipelineStageError(FamplanError):
    """Wraps a stage failure inside plan generation with its stage tag."""

    code = "pipeline_stage_error"

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause
