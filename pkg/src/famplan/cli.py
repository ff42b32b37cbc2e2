"""Offline operation and the evaluation harness.

Commands: fixture generation, harness runs over (family, task-set) pairs,
timesheet export, and the API server. Option precedence is config file <
environment (FAMPLAN_*) < flag. Exit codes: 0 success, 2 usage error,
3 fixture/IO error, 4 provider configuration error.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click

from . import fixtures
from .errors import ProviderUnreachable
from .evaluator import Dimension, aggregate_reports
from .llm.gateway import LlmGateway
from .llm.providers import HttpChatProvider, StubChatProvider, config_from_env
from .pipeline import Policy, generate_plan
from .schedule_json import dump_schedule_json, parse_schedule_json

logger = logging.getLogger(__name__)

DIMENSION_LABELS = {
    Dimension.ROLE_TASK_ALIGNMENT: "Role-Task Alignment",
    Dimension.TASK_DECOMPOSITION: "Task Decomposition",
    Dimension.TASK_COVERAGE: "Task Coverage",
    Dimension.CONTEXT_AWARENESS: "Context Awareness",
    Dimension.ACTIONABILITY: "Actionability",
}


class FixtureError(click.ClickException):
    exit_code = 3


class ProviderConfigError(click.ClickException):
    exit_code = 4


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FixtureError(f"cannot read config file {path}: {exc}") from exc


def _resolve(flag_value, config: dict, key: str, default, cast=str):
    """Precedence: flag > FAMPLAN_<KEY> env > config file > default."""
    if flag_value is not None:
        return flag_value
    env_value = os.environ.get(f"FAMPLAN_{key.upper()}")
    if env_value is not None:
        return cast(env_value)
    if key in config:
        return cast(config[key])
    return default


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


@click.group()
def main() -> None:
    """Weekly learning-plan toolkit."""


@main.command("gen-fixtures")
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--families", type=int, default=None)
@click.option("--caregivers-min", type=int, default=None)
@click.option("--caregivers-max", type=int, default=None)
@click.option("--task-sets", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def gen_fixtures(out_dir, families, caregivers_min, caregivers_max, task_sets,
                 seed, config_path) -> None:
    """Generate deterministic family and task-set fixtures."""
    config = _load_config(config_path)
    out_dir = _resolve(out_dir, config, "out_dir", "fixtures")
    families = _resolve(families, config, "families", 10, int)
    lo = _resolve(caregivers_min, config, "caregivers_min", 2, int)
    hi = _resolve(caregivers_max, config, "caregivers_max", 4, int)
    task_sets = _resolve(task_sets, config, "task_sets", 3, int)
    seed = _resolve(seed, config, "seed", 42, int)
    if not 2 <= lo <= hi <= 4:
        raise click.UsageError("caregiver range must stay within 2-4")
    try:
        manifest = fixtures.write_fixtures(
            out_dir, count_families=families, caregivers_range=(lo, hi),
            task_sets=task_sets, seed=seed,
        )
    except OSError as exc:
        raise FixtureError(str(exc)) from exc
    click.echo(f"wrote {len(manifest['families'])} families x {task_sets} "
               f"task sets to {out_dir} (seed {seed})")


def _make_provider(kind: str, fixtures_dir: Path):
    if kind == "stub":
        store_path = fixtures_dir / "stub_responses.json"
        if not store_path.exists():
            raise FixtureError(f"missing stub store: {store_path}")
        return StubChatProvider(store_path)
    if kind == "none":
        return StubChatProvider()  # never called; decomposition from fixtures
    if kind == "http":
        try:
            return HttpChatProvider(config_from_env(dict(os.environ)))
        except ProviderUnreachable as exc:
            raise ProviderConfigError(str(exc)) from exc
    raise click.UsageError(f"unknown provider kind: {kind}")


def _run_one_plan(family, tasks, set_index, policy, gateway, provider_kind):
    plan_id = f"{family.family_id}-s{set_index}-v1"
    subtasks = None
    if provider_kind == "none":
        subtasks = fixtures.rule_decompose(family, tasks)
    result = generate_plan(
        family, tasks, policy=policy, gateway=gateway,
        plan_id=plan_id, subtasks=subtasks,
    )
    return result


@main.command("run-harness")
@click.option("--fixtures", "fixtures_dir", type=click.Path(), default=None)
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--task-sets", type=int, default=None)
@click.option("--policy", type=click.Choice([p.value for p in Policy]), default=None)
@click.option("--provider", type=click.Choice(["stub", "http", "none"]), default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_path", type=click.Path(), default=None)
def run_harness(fixtures_dir, out_dir, task_sets, policy, provider, jobs,
                config_path) -> None:
    """Generate and score a plan per (family, task set); aggregate the scores.

    Per-plan provider failures are recorded and the run continues; only
    harness-level faults exit nonzero.
    """
    config = _load_config(config_path)
    fixtures_dir = Path(_resolve(fixtures_dir, config, "fixtures", "fixtures"))
    out = Path(_resolve(out_dir, config, "out_dir", "harness-out"))
    task_sets = _resolve(task_sets, config, "task_sets", 3, int)
    policy = Policy(_resolve(policy, config, "policy", Policy.DETERMINISTIC_ONLY.value))
    provider_kind = _resolve(provider, config, "provider", "stub")
    jobs = _resolve(jobs, config, "jobs", 1, int)

    family_files = sorted((fixtures_dir / "families").glob("*.json"))
    if not family_files:
        raise FixtureError(f"no family fixtures under {fixtures_dir}")
    chat_provider = _make_provider(provider_kind, fixtures_dir)
    gateway = LlmGateway(chat_provider)
    (out / "plans").mkdir(parents=True, exist_ok=True)

    units = []
    for family_file in family_files:
        family = fixtures.load_fixture_family(family_file)
        for set_index in range(task_sets):
            taskset_file = fixtures_dir / "tasksets" / f"{family.family_id}_set{set_index}.json"
            if not taskset_file.exists():
                raise FixtureError(f"missing task set fixture: {taskset_file}")
            _, _, tasks = fixtures.load_fixture_tasks(taskset_file)
            units.append((family, tasks, set_index))

    def run_unit(unit):
        family, tasks, set_index = unit
        key = f"{family.family_id}_set{set_index}"
        try:
            result = _run_one_plan(family, tasks, set_index, policy, gateway,
                                   provider_kind)
        except Exception as exc:  # per-plan failures never kill the harness
            logger.warning("plan %s failed: %s", key, exc)
            return key, None, f"{type(exc).__name__}: {exc}"
        return key, result, None

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_unit, units))
    else:
        outcomes = [run_unit(u) for u in units]

    reports = []
    failures = []
    for key, result, error in sorted(outcomes, key=lambda o: o[0]):
        if result is None:
            failures.append({"plan": key, "error": error})
            continue
        _atomic_write(out / "plans" / f"{key}.plan.json",
                      dump_schedule_json(result.schedule) + "\n")
        _atomic_write(
            out / "plans" / f"{key}.report.json",
            json.dumps(result.report.to_json(), ensure_ascii=False, indent=2) + "\n",
        )
        reports.append(result.report)

    aggregate: dict = {"plans": len(reports), "failures": failures}
    table_lines = ["| Metric | Avg. | Best (#) |", "|---|---|---|"]
    if reports:
        stats = aggregate_reports(reports)
        aggregate["dimensions"] = {
            d.value: stats[d] for d in Dimension
        }
        for d in Dimension:
            table_lines.append(
                f"| {DIMENSION_LABELS[d]} | {stats[d]['mean']:.2f} "
                f"| 3 ({stats[d]['count_of_3']}) |"
            )
    _atomic_write(out / "aggregate.json",
                  json.dumps(aggregate, ensure_ascii=False, indent=2) + "\n")
    _atomic_write(out / "aggregate.md", "\n".join(table_lines) + "\n")
    click.echo(f"{len(reports)} plans scored, {len(failures)} failures; "
               f"aggregate in {out}")


def _timesheet_csv(schedule) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["day", "start", "end", "subtask_name", "owners", "status"])
    for s in schedule.sorted_subtasks():
        writer.writerow([
            s.slot.day, str(s.slot.start), str(s.slot.end), s.subtask_name,
            "|".join(sorted(s.owners)), s.status.value,
        ])
    return buffer.getvalue()


def _timesheet_markdown(schedule) -> str:
    by_day: dict[int, list[str]] = {d: [] for d in range(1, 8)}
    for s in schedule.sorted_subtasks():
        by_day[s.slot.day].append(
            f"{s.slot.start}-{s.slot.end} {s.subtask_name} "
            f"({'|'.join(sorted(s.owners))})"
        )
    height = max((len(v) for v in by_day.values()), default=0)
    lines = [
        "| " + " | ".join(f"Day {d}" for d in range(1, 8)) + " |",
        "|" + "---|" * 7,
    ]
    for row in range(height):
        cells = [
            by_day[d][row] if row < len(by_day[d]) else "" for d in range(1, 8)
        ]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


@main.command("export-timesheet")
@click.option("--plan-file", type=click.Path(exists=True), required=True)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "markdown"]),
              default="json")
@click.option("--out", type=click.Path(), default=None)
def export_timesheet(plan_file, fmt, out) -> None:
    """Render a stored plan as JSON, CSV, or a 7-column week grid."""
    try:
        schedule = parse_schedule_json(Path(plan_file).read_text(encoding="utf-8"))
    except OSError as exc:
        raise FixtureError(str(exc)) from exc
    if fmt == "json":
        text = dump_schedule_json(schedule) + "\n"
    elif fmt == "csv":
        text = _timesheet_csv(schedule)
    else:
        text = _timesheet_markdown(schedule)
    if out:
        _atomic_write(Path(out), text)
    else:
        click.echo(text, nl=False)


@main.command("serve")
@click.option("--db", type=click.Path(), default="famplan.db")
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8642)
@click.option("--provider", type=click.Choice(["stub", "http"]), default="stub")
def serve(db, host, port, provider) -> None:
    """Run the coordination API server."""
    import uvicorn

    from .api import create_app
    from .store import Store

    if provider == "http":
        try:
            chat_provider = HttpChatProvider(config_from_env(dict(os.environ)))
        except ProviderUnreachable as exc:
            raise ProviderConfigError(str(exc)) from exc
        decomposition = "provider"
    else:
        chat_provider = None  # echo stub inside create_app
        decomposition = "rule"
    app = create_app(Store(db), provider=chat_provider, decomposition=decomposition)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
