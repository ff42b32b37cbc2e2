import base64
import json
import random
from importlib import resources

import jsonschema
import pytest
from fastapi.testclient import TestClient

from famplan import codec
from famplan.api import create_app
from famplan.errors import (
    DuplicateId,
    IllegalTransition,
    NotOwner,
    TransitionConflict,
    UnknownCaregiver,
    ValidationFailure,
)
from famplan.fixtures import generate_family, generate_task_set, rule_decompose
from famplan.llm.gateway import LlmGateway
from famplan.llm.providers import StubChatProvider
from famplan.model import Status
from famplan.pipeline import Policy, generate_plan
from famplan.store import Store, replay_events

from conftest import caregiver, family, window


def fixture_family():
    rng = random.Random(1)
    return generate_family(rng, 0), generate_task_set(rng, 0)


def make_plan(store, fam, tasks, plan_id="plan-1"):
    result = generate_plan(
        fam, tasks, policy=Policy.DETERMINISTIC_ONLY,
        gateway=LlmGateway(StubChatProvider()),
        plan_id=plan_id, subtasks=rule_decompose(fam, tasks),
    )
    store.save_plan(result)
    return result


def schema(name):
    text = resources.files("famplan").joinpath(f"schemas/{name}.json").read_text()
    return json.loads(text)


class TestStoreFamilies:
    def test_create_fetch_round_trip(self):
        store = Store()
        fam, _ = fixture_family()
        store.create_family(fam)
        assert store.get_family(fam.family_id) == fam

    def test_duplicate_rejected(self):
        store = Store()
        fam, _ = fixture_family()
        store.create_family(fam)
        with pytest.raises(DuplicateId):
            store.create_family(fam)

    def test_fifth_caregiver_rejected(self):
        store = Store()
        fam = family(
            caregiver("mother"), caregiver("father"),
            caregiver("grandmother"), caregiver("grandfather"),
            family_id="full-house",
        )
        store.create_family(fam)
        extra = caregiver("uncle", windows=[window("weekend", "09:00", "11:00")])
        with pytest.raises(ValidationFailure):
            store.update_caregiver_profile(fam.family_id, extra)

    def test_availability_edit_bumps_profile_version(self):
        store = Store()
        fam, _ = fixture_family()
        store.create_family(fam)
        first = fam.caregivers[0]
        assert store.caregiver_version_count(fam.family_id, first.caregiver_id) == 1
        edited = caregiver(first.caregiver_id, tags=first.expertise_tags,
                           windows=[window("weekend", "09:00", "12:00")],
                           role=first.role_label)
        store.update_caregiver_profile(fam.family_id, edited)
        assert store.caregiver_version_count(fam.family_id, first.caregiver_id) == 2
        refreshed = store.get_family(fam.family_id)
        assert refreshed.caregiver(first.caregiver_id).availability == edited.availability


class TestStoreSubtasks:
    def _ready(self):
        store = Store()
        fam, tasks = fixture_family()
        store.create_family(fam)
        result = make_plan(store, fam, tasks)
        return store, fam, result

    def test_status_transitions(self):
        store, fam, result = self._ready()
        name = result.schedule.subtasks[0].subtask_name
        state = store.set_subtask_status("plan-1", name, Status.DONE, actor="x")
        assert state["status"] == "done"
        with pytest.raises(IllegalTransition):
            store.set_subtask_status("plan-1", name, Status.PENDING, actor="x")
        with pytest.raises(TransitionConflict):
            store.set_subtask_status("plan-1", name, Status.DONE, actor="x")

    def test_note_appended_with_author(self):
        store, fam, result = self._ready()
        name = result.schedule.subtasks[0].subtask_name
        author = next(iter(result.schedule.subtasks[0].owners))
        state = store.add_note("plan-1", name, author, "went well")
        assert state["notes"][0][0] == author
        assert state["notes"][0][1] == "went well"

    def test_handover_updates_log_and_owners(self):
        store, fam, result = self._ready()
        sub = result.schedule.subtasks[0]
        from_id = next(iter(sub.owners))
        to_id = next(c for c in fam.caregiver_ids if c != from_id)
        state, warnings = store.handover_subtask(
            "plan-1", sub.subtask_name, from_id, to_id
        )
        assert to_id in state["owners"] and from_id not in state["owners"]
        assert len(state["handover_log"]) == 1
        assert state["handover_log"][0][:2] == [from_id, to_id]

    def test_handover_into_unavailable_slot_warns_not_rejects(self):
        store = Store()
        fam = family(
            caregiver("mother", windows=[window(1, "09:00", "10:00")], role="mother"),
            caregiver("father", windows=[], role="father"),
        )
        store.create_family(fam)
        from conftest import subtask as mk_subtask, slot as mk_slot, task as mk_task
        from famplan.pipeline import PlanResult
        from famplan.evaluator import score_plan
        from conftest import schedule as mk_schedule

        sched = mk_schedule([
            mk_subtask("sums_1", "mother", child=False,
                       slot=mk_slot(1, "09:00", "09:30")),
        ], plan_id="plan-w", family_id=fam.family_id)
        tasks = [mk_task("sums")]
        result = PlanResult(
            plan_id="plan-w", schedule=sched,
            report=score_plan(fam, tasks, sched),
            summary="s", provenance=({"stage": "test"},),
        )
        store.save_plan(result)
        state, warnings = store.handover_subtask("plan-w", "sums_1", "mother", "father")
        assert state["owners"] == ["father"]
        assert len(warnings) == 1
        assert warnings[0]["kind"] == "owner_unavailable"

    def test_handover_from_non_owner_rejected(self):
        store, fam, result = self._ready()
        sub = result.schedule.subtasks[0]
        outsider = next(c for c in fam.caregiver_ids if c not in sub.owners)
        with pytest.raises(NotOwner):
            store.handover_subtask("plan-1", sub.subtask_name, outsider,
                                   next(iter(sub.owners)))
        with pytest.raises(UnknownCaregiver):
            store.handover_subtask("plan-1", sub.subtask_name,
                                   next(iter(sub.owners)), "stranger")

    def test_timesheet_reflects_replayed_events(self):
        store, fam, result = self._ready()
        names = [s.subtask_name for s in result.schedule.sorted_subtasks()]
        store.set_subtask_status("plan-1", names[0], Status.DONE, actor="x")
        store.set_subtask_status("plan-1", names[1], Status.IN_PROGRESS, actor="x")
        store.set_subtask_status("plan-1", names[1], Status.DONE, actor="x")
        sheet = store.get_timesheet("plan-1")
        by_name = {s["subtask_name"]: s for s in sheet["subtasks"]}
        assert by_name[names[0]]["status"] == "done"
        assert by_name[names[1]]["status"] == "done"
        assert by_name[names[2]]["status"] == "pending"
        starts = [(s["day"], s["start"]) for s in sheet["subtasks"]]
        assert starts == sorted(starts)

    def test_snapshot_equals_replay(self):
        store, fam, result = self._ready()
        rng = random.Random(9)
        names = [s.subtask_name for s in result.schedule.subtasks]
        for _ in range(30):
            name = rng.choice(names)
            action = rng.random()
            try:
                if action < 0.5:
                    store.set_subtask_status(
                        "plan-1", name,
                        rng.choice((Status.IN_PROGRESS, Status.DONE)), actor="x")
                elif action < 0.8:
                    state = store.subtask_live_state("plan-1", name)
                    from_id = rng.choice(state["owners"])
                    to_id = rng.choice(fam.caregiver_ids)
                    store.handover_subtask("plan-1", name, from_id, to_id)
                else:
                    store.add_note("plan-1", name, rng.choice(fam.caregiver_ids), "n")
            except (IllegalTransition, TransitionConflict, NotOwner):
                pass
        assert store.snapshot_states("plan-1") == store.replay_states("plan-1")


class TestReplayEventsPure:
    def test_fold_matches_manual(self):
        events = [
            {"kind": "plan_generated",
             "payload": {"plan_id": "p", "subtasks": [
                 {"subtask_name": "a_1", "parent_task": "a", "owners": ["m"]},
             ]}},
            {"kind": "subtask_status_changed",
             "payload": {"plan_id": "p", "subtask_name": "a_1", "status": "done"}},
            {"kind": "handover",
             "payload": {"plan_id": "p", "subtask_name": "a_1",
                         "from": "m", "to": "f"}},
            {"kind": "note_added",
             "payload": {"plan_id": "p", "subtask_name": "a_1"}},
        ]
        state = replay_events(events, "p")
        assert state["a_1"] == {"status": "done", "owners": ["f"],
                                "handovers": 1, "notes": 1}


@pytest.fixture
def client():
    store = Store()
    app = create_app(store)
    return TestClient(app), store


def auth(token):
    return {"Authorization": f"Bearer {token}"}


class TestApi:
    def _family_payload(self):
        fam, tasks = fixture_family()
        return codec.family_to_obj(fam), [codec.task_to_obj(t) for t in tasks]

    def test_family_lifecycle_and_schema(self, client):
        http, _ = client
        fam_obj, _ = self._family_payload()
        created = http.post("/families", json=fam_obj)
        assert created.status_code == 201
        token = created.json()["token"]
        fetched = http.get(f"/families/{fam_obj['family_id']}", headers=auth(token))
        assert fetched.status_code == 200
        jsonschema.validate(fetched.json(), schema("family"))
        assert fetched.json() == fam_obj

    def test_auth_required(self, client):
        http, _ = client
        fam_obj, _ = self._family_payload()
        http.post("/families", json=fam_obj)
        denied = http.get(f"/families/{fam_obj['family_id']}")
        assert denied.status_code == 422
        jsonschema.validate(denied.json(), schema("error"))

    def test_fifth_caregiver_rejected_over_http(self, client):
        http, _ = client
        fam_obj = codec.family_to_obj(family(
            caregiver("mother"), caregiver("father"),
            caregiver("grandmother"), caregiver("grandfather"),
            family_id="full-house",
        ))
        token = http.post("/families", json=fam_obj).json()["token"]
        response = http.put(
            f"/families/{fam_obj['family_id']}/caregivers/uncle",
            json={"role_label": "uncle", "expertise_tags": [], "availability": [],
                  "notes": ""},
            headers=auth(token),
        )
        assert response.status_code == 422
        assert response.json()["code"] == "validation_failure"

    def _plan(self, http, fam_obj, tasks_obj):
        token = http.post("/families", json=fam_obj).json()["token"]
        plan = http.post(
            f"/families/{fam_obj['family_id']}/plans",
            json={"tasks": tasks_obj, "policy": "deterministic_only"},
            headers=auth(token),
        )
        assert plan.status_code == 201
        return token, plan.json()

    def test_plan_timesheet_report_engagement(self, client):
        http, _ = client
        fam_obj, tasks_obj = self._family_payload()
        token, plan = self._plan(http, fam_obj, tasks_obj)
        plan_id = plan["plan_id"]

        sheet = http.get(f"/plans/{plan_id}/timesheet", headers=auth(token))
        assert sheet.status_code == 200
        jsonschema.validate(sheet.json(), schema("timesheet"))
        assert all(s["status"] == "pending" for s in sheet.json()["subtasks"])

        report = http.get(f"/plans/{plan_id}/report", headers=auth(token))
        assert report.status_code == 200
        jsonschema.validate(report.json(), schema("report"))

        engagement = http.get(f"/families/{fam_obj['family_id']}/engagement",
                              headers=auth(token))
        assert engagement.status_code == 200
        jsonschema.validate(engagement.json(), schema("engagement"))
        ids = [c["caregiver_id"] for c in engagement.json()["caregivers"]]
        assert ids == sorted(ids)

    def test_status_handover_flow(self, client):
        http, _ = client
        fam_obj, tasks_obj = self._family_payload()
        token, plan = self._plan(http, fam_obj, tasks_obj)
        plan_id = plan["plan_id"]
        first = plan["schedule"]["subtasks"][0]
        name = first["subtask_name"]
        owner = first["owners"][0]
        other = next(c["caregiver_id"] for c in fam_obj["caregivers"]
                     if c["caregiver_id"] != owner)

        done = http.post(
            f"/plans/{plan_id}/subtasks/{name}/status",
            json={"status": "done", "caregiver_id": owner},
            headers=auth(token),
        )
        assert done.status_code == 200
        again = http.post(
            f"/plans/{plan_id}/subtasks/{name}/status",
            json={"status": "done", "caregiver_id": owner},
            headers=auth(token),
        )
        assert again.status_code == 409  # retriable conflict
        backwards = http.post(
            f"/plans/{plan_id}/subtasks/{name}/status",
            json={"status": "pending", "caregiver_id": owner},
            headers=auth(token),
        )
        assert backwards.status_code == 422

        second = plan["schedule"]["subtasks"][1]
        handover = http.post(
            f"/plans/{plan_id}/subtasks/{second['subtask_name']}/handover",
            json={"from": second["owners"][0], "to": other},
            headers=auth(token),
        )
        assert handover.status_code == 200
        assert len(handover.json()["subtask"]["handover_log"]) == 1

        note = http.post(
            f"/plans/{plan_id}/subtasks/{name}/notes",
            json={"caregiver_id": owner, "text": "finished early"},
            headers=auth(token),
        )
        assert note.status_code == 200
        assert note.json()["subtask"]["notes"][0][1] == "finished early"

    def test_unknown_plan_is_404(self, client):
        http, _ = client
        response = http.get("/plans/nope/timesheet")
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_plan"

    def test_regeneration_carries_done_status(self, client):
        http, _ = client
        fam_obj, tasks_obj = self._family_payload()
        token, plan = self._plan(http, fam_obj, tasks_obj)
        name = plan["schedule"]["subtasks"][0]["subtask_name"]
        owner = plan["schedule"]["subtasks"][0]["owners"][0]
        http.post(
            f"/plans/{plan['plan_id']}/subtasks/{name}/status",
            json={"status": "done", "caregiver_id": owner},
            headers=auth(token),
        )
        second = http.post(
            f"/families/{fam_obj['family_id']}/plans",
            json={"tasks": tasks_obj, "policy": "deterministic_only"},
            headers=auth(token),
        ).json()
        assert second["plan_id"].endswith("-v2")
        assert second["parent_plan_id"] == plan["plan_id"]
        carried = next(s for s in second["schedule"]["subtasks"]
                       if s["subtask_name"] == name)
        assert carried["status"] == "done"

    def test_tutoring_modes(self, client):
        http, store = client
        fam_obj, _ = self._family_payload()
        token = http.post("/families", json=fam_obj).json()["token"]
        fid = fam_obj["family_id"]
        cid = fam_obj["caregivers"][0]["caregiver_id"]

        chat = http.post(
            "/tutoring/dialogue",
            json={"family_id": fid, "caregiver_id": cid,
                  "text": "how do I explain fractions?"},
            headers=auth(token),
        )
        assert chat.status_code == 200
        jsonschema.validate(chat.json(), schema("exchange"))

        image = base64.b64encode(b"fake image bytes").decode()
        check = http.post(
            "/tutoring/answer_check",
            json={"family_id": fid, "caregiver_id": cid, "text": "",
                  "attachments": [{"media_type": "image/png", "data_b64": image}]},
            headers=auth(token),
        )
        assert check.status_code == 200

        missing = http.post(
            "/tutoring/answer_check",
            json={"family_id": fid, "caregiver_id": cid, "text": ""},
            headers=auth(token),
        )
        assert missing.status_code == 422

        engagement = http.get(f"/families/{fid}/engagement", headers=auth(token))
        row = next(c for c in engagement.json()["caregivers"]
                   if c["caregiver_id"] == cid)
        assert row["used_answer_checking"] is True
        assert row["used_new_example"] is False

    def test_acting_as_recorded_on_events(self, client):
        http, store = client
        fam_obj, tasks_obj = self._family_payload()
        token, plan = self._plan(http, fam_obj, tasks_obj)
        name = plan["schedule"]["subtasks"][0]["subtask_name"]
        owner = plan["schedule"]["subtasks"][0]["owners"][0]
        proxy = next(c["caregiver_id"] for c in fam_obj["caregivers"]
                     if c["caregiver_id"] != owner)
        http.post(
            f"/plans/{plan['plan_id']}/subtasks/{name}/status",
            json={"status": "done", "caregiver_id": owner, "acting_as": proxy},
            headers=auth(token),
        )
        events = store.events_for_family(fam_obj["family_id"])
        status_events = [e for e in events if e.kind == "subtask_status_changed"]
        assert status_events[-1].actor == proxy
