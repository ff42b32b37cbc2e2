"""Recover structured JSON from free-form model replies."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass

from ..errors import OutputUnparseable

_FENCE_RE = re.compile(r"```(?:json)?\s*(.*?)```", re.DOTALL)

STRATEGY_DIRECT = "direct"
STRATEGY_FENCED = "fenced"
STRATEGY_BALANCED_SCAN = "balanced_scan"


@dataclass(frozen=True)
class ExtractedJson:
    value: object
    strategy: str


def _balanced_scan(text: str) -> str | None:
    """First balanced top-level {...} or [...] span, string-aware."""
    for i, ch in enumerate(text):
        if ch not in "{[":
            continue
        closer = "}" if ch == "{" else "]"
        depth = 0
        in_string = False
        escaped = False
        for j in range(i, len(text)):
            c = text[j]
            if in_string:
                if escaped:
                    escaped = False
                elif c == "\\":
                    escaped = True
                elif c == '"':
                    in_string = False
                continue
            if c == '"':
                in_string = True
            elif c in "{[":
                depth += 1
            elif c in "}]":
                depth -= 1
                if depth == 0:
                    if c == closer:
                        return text[i : j + 1]
                    break
        # Unbalanced from this opener; try the next one.
    return None


def extract_json(raw: str) -> ExtractedJson:
    """Try, in order: direct parse, code-fence stripping, balanced-span scan.

    Returns the parsed value plus which strategy succeeded; raises
    ``OutputUnparseable`` carrying every strategy's failure otherwise.
    """
    attempts: list[str] = []

    try:
        return ExtractedJson(json.loads(raw), STRATEGY_DIRECT)
    except json.JSONDecodeError as exc:
        attempts.append(f"{STRATEGY_DIRECT}: {exc}")

    for match in _FENCE_RE.finditer(raw):
        try:
            return ExtractedJson(json.loads(match.group(1)), STRATEGY_FENCED)
        except json.JSONDecodeError as exc:
            attempts.append(f"{STRATEGY_FENCED}: {exc}")
    if not _FENCE_RE.search(raw):
        attempts.append(f"{STRATEGY_FENCED}: no code fence found")

    span = _balanced_scan(raw)
    if span is not None:
        try:
            return ExtractedJson(json.loads(span), STRATEGY_BALANCED_SCAN)
        except json.JSONDecodeError as exc:
            attempts.append(f"{STRATEGY_BALANCED_SCAN}: {exc}")
    else:
        attempts.append(f"{STRATEGY_BALANCED_SCAN}: no balanced span found")

    raise OutputUnparseable("no strategy recovered JSON from the reply", attempts)
