"""The prompt template catalog: versioned text assets with strict rendering.

Template bodies live under ``templates/`` and are loaded verbatim; rendering
substitutes ``{name}`` placeholders and fails if any stays unbound.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from importlib import resources

TEMPLATE_IDS = (
    "decompose",
    "schedule",
    "conflict_fix",
    "summary",
    "dialogue",
    "answer_check",
    "transfer_practice",
    "explain_support",
)

TUTORING_MODES = ("dialogue", "answer_check", "transfer_practice", "explain_support")

_PLACEHOLDER_RE = re.compile(r"\{([a-z_]+)\}")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class PromptTemplate:
    template_id: str
    body: str

    @property
    def placeholders(self) -> frozenset[str]:
        names = set()
        for _, field, _, _ in string.Formatter().parse(self.body):
            if field:
                names.add(field)
        return frozenset(names)

    def render(self, **values: str) -> str:
        unbound = self.placeholders - set(values)
        if unbound:
            raise TemplateError(
                f"{self.template_id}: unbound placeholders {sorted(unbound)}"
            )

        # Single pass over the body so substituted values are never rescanned.
        def substitute(match: re.Match) -> str:
            name = match.group(1)
            return str(values[name]) if name in self.placeholders else match.group(0)

        return _PLACEHOLDER_RE.sub(substitute, self.body)


def _load(name: str) -> str:
    return (
        resources.files("famplan.llm")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
        .rstrip("\n")
    )


def load_template(template_id: str) -> PromptTemplate:
    if template_id not in TEMPLATE_IDS:
        raise TemplateError(f"unknown template id: {template_id!r}")
    return PromptTemplate(template_id, _load(template_id))


def load_catalog() -> dict[str, PromptTemplate]:
    return {tid: load_template(tid) for tid in TEMPLATE_IDS}


def decompose_format_instructions() -> str:
    return _load("decompose_format")


def schedule_format_instructions() -> str:
    return _load("schedule_format")
