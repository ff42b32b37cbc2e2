"""Deterministic fixture generation for the evaluation harness.

Families, task sets, and a rule-based decomposer that stands in for the
model during offline runs. ``build_stub_store`` precomputes canned replies
keyed exactly the way the stub provider looks them up, so a harness run
through the full gateway path is reproducible byte for byte.
"""

from __future__ import annotations

import json
import random
from pathlib import Path
from typing import Sequence

from . import codec
from .llm.gateway import render_child_desc, render_family_desc
from .llm.prompts import decompose_format_instructions, load_template
from .llm.providers import stub_key
from .model import (
    AvailabilityWindow,
    CaregiverProfile,
    ChildProfile,
    FamilyContext,
    LearningTask,
    Subtask,
    TaskClass,
    TimeOfDay,
)

CHILD_TRAITS = (
    "easily distracted, likes picture books",
    "strong reader, weaker at mental arithmetic",
    "energetic, concentrates best in the morning",
    "quiet and careful, slow but accurate",
    "loves music, resists repetitive drills",
    "quick learner who skips checking steps",
)

ROLE_EXPERTISE = {
    "mother": ("english", "chinese", "math", "music", "art"),
    "father": ("math", "science", "physical", "english"),
    "grandmother": ("chinese", "habits", "art"),
    "grandfather": ("chinese", "habits", "physical"),
}

# (task_name, subject, class, description). Descriptions name what the child
# does, which keeps clean fixtures free of child-role findings.
TASK_CATALOG: tuple[tuple[str, str, TaskClass, str], ...] = (
    ("english_passage", "english", TaskClass.PRACTICE_MEMORIZATION,
     "The child recites an eight-sentence English passage from memory."),
    ("chinese_poem", "chinese", TaskClass.PRACTICE_MEMORIZATION,
     "The child recites one classical poem and writes it out once."),
    ("math_worksheets", "math", TaskClass.HOMEWORK_QA,
     "The child solves two pages of arithmetic word problems."),
    ("science_questions", "science", TaskClass.HOMEWORK_QA,
     "The child writes answers to the workbook's nature questions."),
    ("desk_organizing", "habits", TaskClass.HABIT_STATE,
     "The child sorts the study desk and packs the school bag."),
    ("weekly_review", "other", TaskClass.REFLECTIVE,
     "The child writes a short reflection on what went well this week."),
    ("song_practice", "music", TaskClass.PHYSICAL_MUSIC,
     "The child sings the chosen song and practices the rhythm."),
    ("jump_rope", "physical", TaskClass.PHYSICAL_MUSIC,
     "The child practices jump rope and records the best count."),
)

SUBTASK_COUNTS = {
    TaskClass.PRACTICE_MEMORIZATION: 3,
    TaskClass.HOMEWORK_QA: 2,
    TaskClass.HABIT_STATE: 1,
    TaskClass.REFLECTIVE: 2,
    TaskClass.PHYSICAL_MUSIC: 2,
}

TUTORING_METHODS = {
    TaskClass.PRACTICE_MEMORIZATION: "listen to each recitation and mark slips",
    TaskClass.HOMEWORK_QA: "check answers against the key and flag mistakes",
    TaskClass.HABIT_STATE: "look over the result and note anything missed",
    TaskClass.REFLECTIVE: "read the reflection and ask one follow-up question",
    TaskClass.PHYSICAL_MUSIC: "time the practice and record the result",
}

STAGE_WORDING = ("first part", "second part", "full run-through", "final check")


def generate_family(rng: random.Random, index: int, caregivers_range=(2, 4)) -> FamilyContext:
    family_id = f"fam{index:02d}"
    count = rng.randint(*caregivers_range)
    roles = ["mother", "father"] + rng.sample(["grandmother", "grandfather"], k=2)
    roles = roles[:count]

    caregivers = []
    for role in roles:
        pool = ROLE_EXPERTISE[role]
        tags = frozenset(rng.sample(pool, k=rng.randint(1, min(3, len(pool)))))
        windows: list[AvailabilityWindow] = []
        if role in ("mother", "father"):
            evening = rng.choice((18, 19))
            windows.append(AvailabilityWindow(
                "weekday", TimeOfDay.at(evening), TimeOfDay.at(evening + rng.choice((2, 3)))
            ))
            weekend = rng.choice((9, 10, 14))
            windows.append(AvailabilityWindow(
                "weekend", TimeOfDay.at(weekend), TimeOfDay.at(weekend + rng.choice((2, 3)))
            ))
        else:
            afternoon = rng.choice((14, 15, 16))
            windows.append(AvailabilityWindow(
                "weekday", TimeOfDay.at(afternoon), TimeOfDay.at(afternoon + rng.choice((2, 3)))
            ))
            if rng.random() < 0.5:
                windows.append(AvailabilityWindow(
                    "weekend", TimeOfDay.at(9), TimeOfDay.at(11)
                ))
        caregivers.append(CaregiverProfile(
            caregiver_id=f"{family_id}-{role}",
            role_label=role,
            expertise_tags=tags,
            availability=tuple(windows),
        ))

    age = rng.randint(8, 12)
    child = ChildProfile(
        child_id=f"{family_id}-child",
        age=age,
        grade_level=max(1, age - 6),
        characteristics=rng.choice(CHILD_TRAITS),
    )
    return FamilyContext(
        family_id=family_id,
        caregivers=tuple(caregivers),
        child=child,
        independence_required=rng.random() < 0.3,
    )


def generate_task_set(rng: random.Random, set_index: int) -> list[LearningTask]:
    """3-5 tasks spanning the home-learning need categories.

    Task names carry the set index (week) so the same catalog entry in two
    sets stays a distinct task with a distinct decomposition prompt.
    """
    count = rng.randint(3, 5)
    entries = rng.sample(TASK_CATALOG, k=count)
    return [
        LearningTask(task_name=f"w{set_index}_{name}", description=desc,
                     subject_tag=subject, task_class=task_class)
        for name, subject, task_class, desc in sorted(entries)
    ]


def rule_decompose(family: FamilyContext, tasks: Sequence[LearningTask]) -> list[Subtask]:
    """Deterministic decomposition honoring the hard output constraints:
    consecutive naming, single responsible adult, full participation."""
    load: dict[str, int] = {c: 0 for c in family.caregiver_ids}
    subtasks: list[Subtask] = []

    for task in tasks:
        tagged = sorted(
            c.caregiver_id
            for c in family.caregivers
            if task.subject_tag in c.expertise_tags
        )
        eligible = tagged or sorted(family.caregiver_ids)
        count = SUBTASK_COUNTS[task.task_class]
        for k in range(1, count + 1):
            owner = min(eligible, key=lambda c: (load[c], c))
            load[owner] += 1
            stage = STAGE_WORDING[min(k - 1, len(STAGE_WORDING) - 1)]
            subtasks.append(Subtask(
                subtask_name=f"{task.task_name}_{k}",
                parent_task=task.task_name,
                description=f"{task.description} Session {k}: {stage}.",
                owners=frozenset({owner}),
                tutoring_method=TUTORING_METHODS[task.task_class],
                answers=None,
                child_participates=True,
            ))

    # Full-participation fallback: hand the busiest owner's last subtask to
    # each idle caregiver (may cost an expertise match; participation wins).
    idle = sorted(set(family.caregiver_ids) - {o for s in subtasks for o in s.owners})
    for caregiver in idle:
        donor = max(
            range(len(subtasks)),
            key=lambda i: (load[next(iter(subtasks[i].owners))], i),
        )
        old_owner = next(iter(subtasks[donor].owners))
        load[old_owner] -= 1
        load[caregiver] += 1
        subtasks[donor] = Subtask(
            subtask_name=subtasks[donor].subtask_name,
            parent_task=subtasks[donor].parent_task,
            description=subtasks[donor].description,
            owners=frozenset({caregiver}),
            tutoring_method=subtasks[donor].tutoring_method,
            answers=subtasks[donor].answers,
            child_participates=subtasks[donor].child_participates,
        )
    return subtasks


def decompose_reply(subtasks: Sequence[Subtask]) -> str:
    """Canned provider reply for one task's decomposition."""
    return json.dumps(
        {
            "subtasks": [
                {
                    "subtask_name": s.subtask_name,
                    "description": s.description,
                    "answers": s.answers,
                    "tutoring_method": s.tutoring_method,
                    "owners": sorted(s.owners),
                    "child_participates": s.child_participates,
                }
                for s in subtasks
            ]
        },
        ensure_ascii=False,
        indent=2,
    )


def build_stub_store(
    family: FamilyContext, tasks: Sequence[LearningTask]
) -> dict[str, str]:
    """Canned decompose replies keyed by (template_id, prompt hash)."""
    template = load_template("decompose")
    decomposed = rule_decompose(family, tasks)
    store: dict[str, str] = {}
    for task in tasks:
        prompt = template.render(
            task_name=task.task_name,
            task_description=task.description,
            family_desc=render_family_desc(family),
            child_desc=render_child_desc(family),
            format_instructions=decompose_format_instructions(),
        )
        per_task = [s for s in decomposed if s.parent_task == task.task_name]
        store[stub_key("decompose", prompt)] = decompose_reply(per_task)
    return store


def _write_json(path: Path, obj: object) -> None:
    path.write_text(
        json.dumps(obj, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def write_fixtures(
    out_dir: str | Path,
    *,
    count_families: int = 10,
    caregivers_range: tuple[int, int] = (2, 4),
    task_sets: int = 3,
    seed: int = 42,
) -> dict:
    """Write family, task-set, and stub-reply fixtures; fully seed-determined."""
    out = Path(out_dir)
    (out / "families").mkdir(parents=True, exist_ok=True)
    (out / "tasksets").mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    stub_responses: dict[str, str] = {}
    manifest = {"seed": seed, "families": [], "task_sets": task_sets}
    for i in range(count_families):
        family = generate_family(rng, i, caregivers_range)
        _write_json(out / "families" / f"{family.family_id}.json",
                    codec.family_to_obj(family))
        manifest["families"].append(family.family_id)
        for set_index in range(task_sets):
            tasks = generate_task_set(rng, set_index)
            _write_json(
                out / "tasksets" / f"{family.family_id}_set{set_index}.json",
                {
                    "family_id": family.family_id,
                    "set": set_index,
                    "tasks": [codec.task_to_obj(t) for t in tasks],
                },
            )
            stub_responses.update(build_stub_store(family, tasks))

    _write_json(out / "stub_responses.json",
                {k: stub_responses[k] for k in sorted(stub_responses)})
    _write_json(out / "manifest.json", manifest)
    return manifest


def load_fixture_family(path: str | Path) -> FamilyContext:
    return codec.family_from_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def load_fixture_tasks(path: str | Path) -> tuple[str, int, list[LearningTask]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return (
        data["family_id"],
        data["set"],
        [codec.task_from_obj(t) for t in data["tasks"]],
    )
