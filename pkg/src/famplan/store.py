"""Persistence for families, plans, events, and tutoring exchanges.

Backed by a single-file SQLite database with JSON payload columns. Subtask
state is event-sourced: every mutation appends an EventRecord and updates a
materialized snapshot in the same transaction, so the snapshot always equals
a fold over the event stream (the replay tests assert exactly that).
"""

from __future__ import annotations

import json
import logging
import sqlite3
import threading
import time
import uuid
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

from . import codec
from .conflicts import detect_conflicts
from .errors import (
    DuplicateId,
    IllegalTransition,
    NotOwner,
    TransitionConflict,
    UnknownCaregiver,
    UnknownFamily,
    UnknownPlan,
    ValidationFailure,
)
from .evaluator import EngagementSummary, compute_engagement
from .llm.gateway import TutoringExchange
from .model import (
    FamilyContext,
    Status,
    WeeklySchedule,
    can_transition,
    replace_subtask,
)
from .pipeline import PlanResult
from .schedule_json import dump_schedule_json, parse_schedule_json, subtask_to_obj

logger = logging.getLogger(__name__)

EVENT_KINDS = (
    "subtask_status_changed",
    "handover",
    "note_added",
    "tutoring_used",
    "plan_generated",
)

_SCHEMA = """
CREATE TABLE IF NOT EXISTS families (
    family_id TEXT PRIMARY KEY,
    body TEXT NOT NULL,
    token TEXT NOT NULL,
    profile_version INTEGER NOT NULL DEFAULT 1
);
CREATE TABLE IF NOT EXISTS caregiver_versions (
    family_id TEXT NOT NULL,
    caregiver_id TEXT NOT NULL,
    version INTEGER NOT NULL,
    body TEXT NOT NULL,
    PRIMARY KEY (family_id, caregiver_id, version)
);
CREATE TABLE IF NOT EXISTS plans (
    plan_id TEXT PRIMARY KEY,
    base_id TEXT NOT NULL,
    family_id TEXT NOT NULL,
    version INTEGER NOT NULL,
    parent_plan_id TEXT,
    schedule TEXT NOT NULL,
    report TEXT NOT NULL,
    summary TEXT,
    provenance TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS subtask_state (
    plan_id TEXT NOT NULL,
    subtask_name TEXT NOT NULL,
    status TEXT NOT NULL,
    owners TEXT NOT NULL,
    handover_log TEXT NOT NULL,
    notes TEXT NOT NULL,
    PRIMARY KEY (plan_id, subtask_name)
);
CREATE TABLE IF NOT EXISTS events (
    seq INTEGER PRIMARY KEY AUTOINCREMENT,
    event_id TEXT UNIQUE NOT NULL,
    family_id TEXT NOT NULL,
    actor TEXT,
    kind TEXT NOT NULL,
    payload TEXT NOT NULL,
    timestamp REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS exchanges (
    exchange_id TEXT PRIMARY KEY,
    family_id TEXT NOT NULL,
    body TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_events_family ON events (family_id, seq);
"""


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    family_id: str
    actor: str | None
    kind: str
    payload: dict
    timestamp: float
    seq: int = 0

    def to_json(self) -> dict:
        return {
            "event_id": self.event_id,
            "family_id": self.family_id,
            "actor": self.actor,
            "kind": self.kind,
            "payload": self.payload,
            "timestamp": self.timestamp,
            "seq": self.seq,
        }


class Store:
    """Single-file store; writes are serialized, reads snapshot-consistent."""

    def __init__(
        self,
        path: str | Path = ":memory:",
        *,
        clock: Callable[[], float] = time.time,
        token_factory: Callable[[], str] | None = None,
    ):
        self._conn = sqlite3.connect(str(path), check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.executescript(_SCHEMA)
        self._write_lock = threading.RLock()
        self._clock = clock
        self._new_token = token_factory or (lambda: uuid.uuid4().hex)
        self._last_ts: dict[str, float] = {}

    def close(self) -> None:
        self._conn.close()

    # -- events ------------------------------------------------------------

    def _append_event(
        self,
        cursor: sqlite3.Cursor,
        family_id: str,
        actor: str | None,
        kind: str,
        payload: dict,
    ) -> EventRecord:
        # Timestamps are monotone per family stream.
        now = self._clock()
        last = self._last_ts.get(family_id, 0.0)
        ts = now if now > last else last + 1e-6
        self._last_ts[family_id] = ts
        event_id = uuid.uuid4().hex
        cursor.execute(
            "INSERT INTO events (event_id, family_id, actor, kind, payload, timestamp)"
            " VALUES (?, ?, ?, ?, ?, ?)",
            (event_id, family_id, actor, kind,
             json.dumps(payload, ensure_ascii=False), ts),
        )
        return EventRecord(event_id, family_id, actor, kind, payload, ts,
                           seq=cursor.lastrowid)

    def events_for_family(self, family_id: str) -> list[EventRecord]:
        rows = self._conn.execute(
            "SELECT event_id, family_id, actor, kind, payload, timestamp, seq"
            " FROM events WHERE family_id = ? ORDER BY seq",
            (family_id,),
        ).fetchall()
        return [
            EventRecord(r[0], r[1], r[2], r[3], json.loads(r[4]), r[5], r[6])
            for r in rows
        ]

    # -- families ------------------------------------------------------------

    def create_family(self, family: FamilyContext) -> str:
        """Persist a family; returns its bearer token."""
        token = self._new_token()
        with self._write_lock, self._conn:
            exists = self._conn.execute(
                "SELECT 1 FROM families WHERE family_id = ?", (family.family_id,)
            ).fetchone()
            if exists:
                raise DuplicateId(f"family {family.family_id} already exists")
            body = json.dumps(codec.family_to_obj(family), ensure_ascii=False)
            cursor = self._conn.cursor()
            cursor.execute(
                "INSERT INTO families (family_id, body, token) VALUES (?, ?, ?)",
                (family.family_id, body, token),
            )
            for caregiver in family.caregivers:
                cursor.execute(
                    "INSERT INTO caregiver_versions VALUES (?, ?, 1, ?)",
                    (family.family_id, caregiver.caregiver_id,
                     json.dumps(codec.caregiver_to_obj(caregiver), ensure_ascii=False)),
                )
        return token

    def get_family(self, family_id: str) -> FamilyContext:
        row = self._conn.execute(
            "SELECT body FROM families WHERE family_id = ?", (family_id,)
        ).fetchone()
        if row is None:
            raise UnknownFamily(f"unknown family: {family_id}")
        return codec.family_from_obj(json.loads(row[0]))

    def family_token(self, family_id: str) -> str:
        row = self._conn.execute(
            "SELECT token FROM families WHERE family_id = ?", (family_id,)
        ).fetchone()
        if row is None:
            raise UnknownFamily(f"unknown family: {family_id}")
        return row[0]

    def family_for_token(self, token: str) -> str | None:
        row = self._conn.execute(
            "SELECT family_id FROM families WHERE token = ?", (token,)
        ).fetchone()
        return row[0] if row else None

    def update_caregiver_profile(self, family_id: str, caregiver) -> FamilyContext:
        """Insert or replace one caregiver; the family must stay valid."""
        family = self.get_family(family_id)
        others = [c for c in family.caregivers if c.caregiver_id != caregiver.caregiver_id]
        try:
            updated = FamilyContext(
                family_id=family.family_id,
                caregivers=tuple(others) + (caregiver,),
                child=family.child,
                independence_required=family.independence_required,
            )
        except ValueError as exc:
            raise ValidationFailure(str(exc)) from exc
        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            (version,) = cursor.execute(
                "SELECT COALESCE(MAX(version), 0) + 1 FROM caregiver_versions"
                " WHERE family_id = ? AND caregiver_id = ?",
                (family_id, caregiver.caregiver_id),
            ).fetchone()
            cursor.execute(
                "INSERT INTO caregiver_versions VALUES (?, ?, ?, ?)",
                (family_id, caregiver.caregiver_id, version,
                 json.dumps(codec.caregiver_to_obj(caregiver), ensure_ascii=False)),
            )
            cursor.execute(
                "UPDATE families SET body = ?, profile_version = profile_version + 1"
                " WHERE family_id = ?",
                (json.dumps(codec.family_to_obj(updated), ensure_ascii=False), family_id),
            )
        return updated

    def caregiver_version_count(self, family_id: str, caregiver_id: str) -> int:
        (count,) = self._conn.execute(
            "SELECT COUNT(*) FROM caregiver_versions"
            " WHERE family_id = ? AND caregiver_id = ?",
            (family_id, caregiver_id),
        ).fetchone()
        return count

    # -- plans ---------------------------------------------------------------

    def save_plan(
        self,
        result: PlanResult,
        *,
        base_id: str | None = None,
        version: int = 1,
        parent_plan_id: str | None = None,
    ) -> None:
        """Persist a generated plan, seed subtask snapshots, and emit the
        plan_generated event carrying the subtask inventory."""
        schedule = result.schedule
        inventory = [
            {
                "subtask_name": s.subtask_name,
                "parent_task": s.parent_task,
                "owners": sorted(s.owners),
            }
            for s in schedule.sorted_subtasks()
        ]
        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            cursor.execute(
                "INSERT INTO plans VALUES (?, ?, ?, ?, ?, ?, ?, ?, ?)",
                (
                    result.plan_id,
                    base_id or result.plan_id,
                    schedule.family_id,
                    version,
                    parent_plan_id,
                    dump_schedule_json(schedule),
                    json.dumps(result.report.to_json(), ensure_ascii=False),
                    result.summary,
                    json.dumps(list(result.provenance), ensure_ascii=False),
                ),
            )
            for s in schedule.subtasks:
                cursor.execute(
                    "INSERT OR REPLACE INTO subtask_state VALUES (?, ?, ?, ?, ?, ?)",
                    (
                        result.plan_id,
                        s.subtask_name,
                        s.status.value,
                        json.dumps(sorted(s.owners)),
                        json.dumps([list(h) for h in s.handover_log]),
                        json.dumps([list(n) for n in s.notes]),
                    ),
                )
            self._append_event(
                cursor, schedule.family_id, None, "plan_generated",
                {"plan_id": result.plan_id, "subtasks": inventory},
            )

    def get_schedule(self, plan_id: str) -> WeeklySchedule:
        row = self._conn.execute(
            "SELECT schedule FROM plans WHERE plan_id = ?", (plan_id,)
        ).fetchone()
        if row is None:
            raise UnknownPlan(f"unknown plan: {plan_id}")
        return parse_schedule_json(row[0], strict=True)

    def get_plan_row(self, plan_id: str) -> dict:
        row = self._conn.execute(
            "SELECT plan_id, base_id, family_id, version, parent_plan_id,"
            " schedule, report, summary, provenance FROM plans WHERE plan_id = ?",
            (plan_id,),
        ).fetchone()
        if row is None:
            raise UnknownPlan(f"unknown plan: {plan_id}")
        return {
            "plan_id": row[0],
            "base_id": row[1],
            "family_id": row[2],
            "version": row[3],
            "parent_plan_id": row[4],
            "schedule": json.loads(row[5]),
            "report": json.loads(row[6]),
            "summary": row[7],
            "provenance": json.loads(row[8]),
        }

    def plan_family(self, plan_id: str) -> str:
        row = self._conn.execute(
            "SELECT family_id FROM plans WHERE plan_id = ?", (plan_id,)
        ).fetchone()
        if row is None:
            raise UnknownPlan(f"unknown plan: {plan_id}")
        return row[0]

    def next_plan_version(self, base_id: str) -> int:
        (count,) = self._conn.execute(
            "SELECT COUNT(*) FROM plans WHERE base_id = ?", (base_id,)
        ).fetchone()
        return count + 1

    # -- subtask state ---------------------------------------------------------

    def _subtask_row(self, cursor, plan_id: str, name: str) -> tuple:
        row = cursor.execute(
            "SELECT status, owners, handover_log, notes FROM subtask_state"
            " WHERE plan_id = ? AND subtask_name = ?",
            (plan_id, name),
        ).fetchone()
        if row is None:
            raise UnknownPlan(f"no subtask {name} in plan {plan_id}")
        return row

    def set_subtask_status(
        self,
        plan_id: str,
        subtask_name: str,
        new_status: Status,
        *,
        actor: str,
        acting_as: str | None = None,
    ) -> dict:
        """Apply a status transition; emits the event atomically.

        A transition into the state already reached is a retriable conflict
        (a concurrent writer won); a backwards transition is illegal.
        """
        family_id = self.plan_family(plan_id)
        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            status_raw, owners, log, notes = self._subtask_row(
                cursor, plan_id, subtask_name
            )
            current = Status(status_raw)
            if new_status == current:
                raise TransitionConflict(
                    f"{subtask_name} is already {current.value}; retry with fresh state"
                )
            if not can_transition(current, new_status):
                raise IllegalTransition(
                    f"{subtask_name}: {current.value} -> {new_status.value} is not allowed"
                )
            cursor.execute(
                "UPDATE subtask_state SET status = ? WHERE plan_id = ? AND subtask_name = ?",
                (new_status.value, plan_id, subtask_name),
            )
            self._append_event(
                cursor, family_id, acting_as or actor, "subtask_status_changed",
                {"plan_id": plan_id, "subtask_name": subtask_name,
                 "status": new_status.value},
            )
        return self.subtask_live_state(plan_id, subtask_name)

    def add_note(
        self,
        plan_id: str,
        subtask_name: str,
        caregiver_id: str,
        text: str,
        *,
        acting_as: str | None = None,
    ) -> dict:
        family_id = self.plan_family(plan_id)
        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            _, _, _, notes_raw = self._subtask_row(cursor, plan_id, subtask_name)
            notes = json.loads(notes_raw)
            event = self._append_event(
                cursor, family_id, acting_as or caregiver_id, "note_added",
                {"plan_id": plan_id, "subtask_name": subtask_name,
                 "caregiver_id": caregiver_id, "text": text},
            )
            notes.append([caregiver_id, text, event.timestamp])
            cursor.execute(
                "UPDATE subtask_state SET notes = ? WHERE plan_id = ? AND subtask_name = ?",
                (json.dumps(notes, ensure_ascii=False), plan_id, subtask_name),
            )
        return self.subtask_live_state(plan_id, subtask_name)

    def handover_subtask(
        self,
        plan_id: str,
        subtask_name: str,
        from_id: str,
        to_id: str,
        *,
        acting_as: str | None = None,
    ) -> tuple[dict, list[dict]]:
        """Transfer ownership; returns the updated state plus any new
        availability warnings (a knowing caregiver may accept them)."""
        family_id = self.plan_family(plan_id)
        family = self.get_family(family_id)
        if to_id not in family.caregiver_ids:
            raise UnknownCaregiver(f"{to_id} is not a caregiver in {family_id}")

        schedule = self.get_schedule(plan_id)
        before = {
            c.detail
            for c in detect_conflicts(family, schedule)
            if c.kind == "owner_unavailable" and subtask_name in c.subtasks
        }

        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            status, owners_raw, log_raw, notes = self._subtask_row(
                cursor, plan_id, subtask_name
            )
            owners = json.loads(owners_raw)
            if from_id not in owners:
                raise NotOwner(f"{from_id} does not own {subtask_name}")
            owners = sorted(set(owners) - {from_id} | {to_id})
            log = json.loads(log_raw)
            event = self._append_event(
                cursor, family_id, acting_as or from_id, "handover",
                {"plan_id": plan_id, "subtask_name": subtask_name,
                 "from": from_id, "to": to_id},
            )
            log.append([from_id, to_id, event.timestamp])
            cursor.execute(
                "UPDATE subtask_state SET owners = ?, handover_log = ?"
                " WHERE plan_id = ? AND subtask_name = ?",
                (json.dumps(owners), json.dumps(log), plan_id, subtask_name),
            )

        updated_schedule = self._schedule_with_live_owners(plan_id)
        warnings = [
            c.to_json()
            for c in detect_conflicts(family, updated_schedule)
            if c.kind == "owner_unavailable"
            and subtask_name in c.subtasks
            and c.detail not in before
        ]
        return self.subtask_live_state(plan_id, subtask_name), warnings

    def record_tutoring_use(self, family_id: str, exchange: TutoringExchange) -> None:
        self.get_family(family_id)  # existence check
        with self._write_lock, self._conn:
            cursor = self._conn.cursor()
            cursor.execute(
                "INSERT INTO exchanges VALUES (?, ?, ?)",
                (exchange.exchange_id, family_id,
                 json.dumps(exchange.to_json(), ensure_ascii=False)),
            )
            self._append_event(
                cursor, family_id, exchange.caregiver_id, "tutoring_used",
                {"mode": exchange.mode, "exchange_id": exchange.exchange_id,
                 "subtask_name": exchange.subtask_name},
            )

    def subtask_live_state(self, plan_id: str, subtask_name: str) -> dict:
        status, owners, log, notes = self._subtask_row(
            self._conn.cursor(), plan_id, subtask_name
        )
        return {
            "subtask_name": subtask_name,
            "status": status,
            "owners": json.loads(owners),
            "handover_log": json.loads(log),
            "notes": json.loads(notes),
        }

    def _schedule_with_live_owners(self, plan_id: str) -> WeeklySchedule:
        schedule = self.get_schedule(plan_id)
        live = {
            row[0]: row[1]
            for row in self._conn.execute(
                "SELECT subtask_name, owners FROM subtask_state WHERE plan_id = ?",
                (plan_id,),
            )
        }
        subtasks = tuple(
            replace_subtask(s, owners=frozenset(json.loads(live[s.subtask_name])))
            if s.subtask_name in live
            else s
            for s in schedule.subtasks
        )
        return replace(schedule, subtasks=subtasks)

    # -- views -----------------------------------------------------------------

    def get_timesheet(self, plan_id: str) -> dict:
        """Schedule joined with live status/notes, ordered by (day, start)."""
        schedule = self.get_schedule(plan_id)
        rows = []
        for s in schedule.sorted_subtasks():
            live = self.subtask_live_state(plan_id, s.subtask_name)
            obj = subtask_to_obj(s)
            obj["status"] = live["status"]
            obj["owners"] = live["owners"]
            obj["handover_log"] = live["handover_log"]
            obj["notes"] = live["notes"]
            rows.append(obj)
        return {
            "plan_id": plan_id,
            "family_id": schedule.family_id,
            "summary": schedule.summary,
            "subtasks": rows,
        }

    def get_engagement(self, family_id: str) -> list[EngagementSummary]:
        family = self.get_family(family_id)
        events = [e.to_json() for e in self.events_for_family(family_id)]
        summaries = compute_engagement(events, caregivers=family.caregiver_ids)
        return [summaries[c] for c in sorted(summaries)]

    # -- replay (event-sourcing audit) -------------------------------------------

    def snapshot_states(self, plan_id: str) -> dict[str, dict]:
        rows = self._conn.execute(
            "SELECT subtask_name, status, owners, handover_log, notes"
            " FROM subtask_state WHERE plan_id = ?",
            (plan_id,),
        ).fetchall()
        return {
            r[0]: {
                "status": r[1],
                "owners": sorted(json.loads(r[2])),
                "handovers": len(json.loads(r[3])),
                "notes": len(json.loads(r[4])),
            }
            for r in rows
        }

    def replay_states(self, plan_id: str) -> dict[str, dict]:
        """Fold the event stream into per-subtask state, ignoring snapshots."""
        family_id = self.plan_family(plan_id)
        return replay_events(
            (e.to_json() for e in self.events_for_family(family_id)), plan_id
        )


def replay_events(events: Iterable[dict], plan_id: str) -> dict[str, dict]:
    """Pure fold of an event stream into subtask state for one plan."""
    state: dict[str, dict] = {}
    for event in events:
        kind = event["kind"]
        payload = event.get("payload", {})
        if payload.get("plan_id") != plan_id and kind != "plan_generated":
            continue
        if kind == "plan_generated":
            if payload.get("plan_id") != plan_id:
                continue
            for item in payload.get("subtasks", ()):
                state[item["subtask_name"]] = {
                    "status": "pending",
                    "owners": sorted(item["owners"]),
                    "handovers": 0,
                    "notes": 0,
                }
        elif kind == "subtask_status_changed":
            entry = state.get(payload["subtask_name"])
            if entry is not None:
                entry["status"] = payload["status"]
        elif kind == "handover":
            entry = state.get(payload["subtask_name"])
            if entry is not None:
                owners = set(entry["owners"])
                owners.discard(payload["from"])
                owners.add(payload["to"])
                entry["owners"] = sorted(owners)
                entry["handovers"] += 1
        elif kind == "note_added":
            entry = state.get(payload["subtask_name"])
            if entry is not None:
                entry["notes"] += 1
    return state
