import json

import pytest

from famplan.errors import OutputUnparseable
from famplan.llm.extraction import (
    STRATEGY_BALANCED_SCAN,
    STRATEGY_DIRECT,
    STRATEGY_FENCED,
    extract_json,
)

PAYLOAD = {"subtasks": [{"subtask_name": "read_1", "owners": ["mother"]}]}
TEXT = json.dumps(PAYLOAD)


def test_plain_json_uses_direct():
    result = extract_json(TEXT)
    assert result.strategy == STRATEGY_DIRECT
    assert result.value == PAYLOAD


def test_fenced_reply():
    result = extract_json(f"Here is the plan:\n```json\n{TEXT}\n```\nGood luck!")
    assert result.strategy == STRATEGY_FENCED
    assert result.value == PAYLOAD


def test_fence_without_language_tag():
    result = extract_json(f"```\n{TEXT}\n```")
    assert result.strategy == STRATEGY_FENCED
    assert result.value == PAYLOAD


def test_prose_embedded_uses_balanced_scan():
    result = extract_json(f"Sure thing. The schedule is {TEXT} as requested.")
    assert result.strategy == STRATEGY_BALANCED_SCAN
    assert result.value == PAYLOAD


def test_braces_inside_strings_do_not_confuse_scan():
    tricky = json.dumps({"note": 'see {"this"} and } that', "n": 1})
    result = extract_json(f"prefix {tricky} suffix")
    assert result.value["n"] == 1


def test_array_payload():
    result = extract_json("answer: [1, 2, 3] done")
    assert result.value == [1, 2, 3]


def test_unparseable_collects_all_attempts():
    with pytest.raises(OutputUnparseable) as e:
        extract_json("no json here at all {unclosed")
    assert len(e.value.attempts) >= 2


# Thirty structured-output shapes: 28 recoverable, 2 genuinely hopeless.
def _corpus():
    cases = []
    for i in range(10):
        cases.append((json.dumps({"case": i}), True))            # plain
    for i in range(8):
        cases.append((f"```json\n{json.dumps({'case': i})}\n```", True))  # fenced
    for i in range(6):
        cases.append((f"The result you wanted: {json.dumps({'case': i})}. Enjoy!",
                      True))                                      # prose
    cases.append(('Nested fences ```json {"a": {"b": 2}} ``` trailing', True))
    cases.append(('{"答案": "中文 JSON ✓"}', True))
    cases.append(('leading [  {"x": 1}, {"y": 2} ] trailing', True))
    cases.append(('{"compact":true}\nsecond line of prose', True))
    cases.append(("{'single': 'quotes'}", False))                 # not JSON
    cases.append(('{"truncated": [1, 2', False))                  # cut off
    return cases


def test_corpus_recovery_rate_at_least_28_of_30():
    cases = _corpus()
    assert len(cases) == 30
    recovered = 0
    for text, expected_ok in cases:
        try:
            extract_json(text)
            recovered += 1
            ok = True
        except OutputUnparseable:
            ok = False
        assert ok == expected_ok
    assert recovered >= 28
