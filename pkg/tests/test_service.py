from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from conftest import make_sample
from vifforge.errors import ConflictError
from vifforge.evalharness import PreferenceItem
from vifforge.inspection import Annotator, LanguagePair, ReviewBoard, assign_tasks
from vifforge.service import PreferenceStore, build_app


def make_items() -> list[PreferenceItem]:
    return [
        PreferenceItem(
            item_id=f"cmp-{i}",
            image=f"img://{i}",
            question="which answer describes the image better?",
            answer_a=f"answer a {i}",
            answer_b=f"answer b {i}",
            model_a="secret-model-one",
            model_b="secret-model-two",
            word_limit=60 if i == 0 else None,
        )
        for i in range(3)
    ]


def make_client(token: str = "", static_dir: Path | None = None) -> tuple:
    samples = {
        sid: make_sample(sid) for sid in ("imgA:object", "imgB:location")
    }
    annotators = [
        Annotator("minji", (LanguagePair.EN_KO, LanguagePair.EN_ZH)),
        Annotator("wei", (LanguagePair.EN_ZH,)),
    ]
    tasks = assign_tasks(list(samples.values()), annotators)
    board = ReviewBoard(tasks)
    store = PreferenceStore(make_items())
    app = build_app(
        board, samples, preference=store, token=token, static_dir=static_dir
    )
    client = TestClient(app)
    if token:
        client.headers["authorization"] = f"Bearer {token}"
    return client, board, store


def test_healthz_is_always_open() -> None:
    client, _, _ = make_client(token="sekrit")
    del client.headers["authorization"]
    assert client.get("/healthz").json() == {"ok": True}


def test_missing_or_wrong_token_is_401() -> None:
    client, _, _ = make_client(token="sekrit")
    del client.headers["authorization"]
    assert client.get("/tasks").status_code == 401
    assert client.get("/tasks", headers={"authorization": "Bearer nope"}).status_code == 401
    assert client.get("/tasks", headers={"authorization": "sekrit"}).status_code == 401
    ok = client.get("/tasks", headers={"authorization": "Bearer sekrit"})
    assert ok.status_code == 200


def test_empty_token_disables_auth() -> None:
    client, _, _ = make_client()
    assert client.get("/tasks").status_code == 200


def test_tasks_filters() -> None:
    client, _, _ = make_client()
    everything = client.get("/tasks").json()["tasks"]
    assert len(everything) == 4
    assert [t["task_id"] for t in everything] == sorted(t["task_id"] for t in everything)

    wei_only = client.get("/tasks", params={"assignee": "wei"}).json()["tasks"]
    assert wei_only and all(t["assignee"] == "wei" for t in wei_only)

    client.post(
        "/verdicts", json={"task_id": everything[0]["task_id"], "outcome": "pass"}
    )
    pending = client.get("/tasks", params={"state": "pending"}).json()["tasks"]
    done = client.get("/tasks", params={"state": "done"}).json()["tasks"]
    assert len(pending) == 3
    assert [t["task_id"] for t in done] == [everything[0]["task_id"]]


def test_sample_lookup() -> None:
    client, _, _ = make_client()
    found = client.get("/samples/imgA:object")
    assert found.status_code == 200
    body = found.json()
    assert body["sample_id"] == "imgA:object"
    assert body["turns"][0]["pairs"]["ko"]["question"].startswith("q-")

    missing = client.get("/samples/imgZ:object")
    assert missing.status_code == 404
    assert "imgZ:object" in missing.json()["error"]


def test_verdict_lifecycle() -> None:
    client, board, _ = make_client()
    task_id = "imgA:object:en-ko"

    created = client.post("/verdicts", json={"task_id": task_id, "outcome": "pass"})
    assert created.status_code == 201
    assert created.json()["task"]["state"] == "done"

    again = client.post("/verdicts", json={"task_id": task_id, "outcome": "pass"})
    assert again.status_code == 409

    unknown = client.post("/verdicts", json={"task_id": "nope:object:en-ko", "outcome": "pass"})
    assert unknown.status_code == 404

    bad_outcome = client.post("/verdicts", json={"task_id": task_id, "outcome": "maybe"})
    assert bad_outcome.status_code == 400
    assert "unknown outcome" in bad_outcome.json()["error"]

    bad_reason = client.post(
        "/verdicts",
        json={"task_id": "imgA:object:en-zh", "outcome": "error", "reason": "typo"},
    )
    assert bad_reason.status_code == 400

    # error verdicts must carry a reason; the contract violation maps to 400
    missing_reason = client.post(
        "/verdicts", json={"task_id": "imgA:object:en-zh", "outcome": "error"}
    )
    assert missing_reason.status_code == 400

    errored = client.post(
        "/verdicts",
        json={
            "task_id": "imgA:object:en-zh",
            "outcome": "error",
            "reason": "other",
            "note": "mistranslated object name",
        },
    )
    assert errored.status_code == 201
    assert board.stats().errored == 1


def test_board_shape() -> None:
    client, _, _ = make_client()
    client.post("/verdicts", json={"task_id": "imgA:object:en-ko", "outcome": "pass"})
    body = client.get("/board").json()
    totals = body["review"]["totals"]
    assert totals == {"assigned": 4, "passed": 1, "errored": 0, "pending": 3}
    assert "minji" in body["review"]["per_annotator"]
    assert body["preference"] == {"ballot_counts": {}, "aggregated": {}}


def test_preference_items_are_anonymized() -> None:
    client, _, _ = make_client()
    items = client.get("/preference/items").json()["items"]
    assert len(items) == 3
    for item in items:
        assert "model_a" not in item
        assert "model_b" not in item
    text = client.get("/preference/items").text
    assert "secret-model" not in text
    assert items[0]["word_limit"] == 60
    assert "word_limit" not in items[1]


def test_ballot_lifecycle() -> None:
    client, _, _ = make_client()

    def cast(annotator: str, choice: str, item: str = "cmp-0"):
        return client.post(
            "/preference/ballots",
            json={"item_id": item, "annotator": annotator, "choice": choice},
        )

    first = cast("ann1", "a_wins")
    assert first.status_code == 201
    assert first.json() == {"recorded": True, "ballots": 1, "aggregated": None}

    assert cast("ann2", "a_wins").json()["aggregated"] is None

    third = cast("ann3", "b_wins")
    assert third.status_code == 201
    assert third.json()["ballots"] == 3
    assert third.json()["aggregated"] == "a_wins"

    fourth = cast("ann4", "tie")
    assert fourth.status_code == 409

    duplicate = cast("ann1", "tie", item="cmp-1")
    assert duplicate.status_code == 201
    assert cast("ann1", "tie", item="cmp-1").status_code == 409

    unknown = cast("ann1", "tie", item="cmp-9")
    assert unknown.status_code == 404

    bad_choice = cast("ann5", "first", item="cmp-2")
    assert bad_choice.status_code == 400

    board = client.get("/board").json()["preference"]
    assert board["ballot_counts"]["cmp-0"] == 3
    assert board["aggregated"] == {"cmp-0": "a_wins"}


def test_three_way_split_aggregates_to_tie() -> None:
    client, _, _ = make_client()
    for annotator, choice in (("x", "a_wins"), ("y", "b_wins"), ("z", "tie")):
        client.post(
            "/preference/ballots",
            json={"item_id": "cmp-2", "annotator": annotator, "choice": choice},
        )
    board = client.get("/board").json()["preference"]
    assert board["aggregated"]["cmp-2"] == "tie"


def test_static_ui_is_served_after_api_routes(tmp_path: Path) -> None:
    (tmp_path / "index.html").write_text(
        "<!doctype html><title>review</title>ready", encoding="utf-8"
    )
    client, _, _ = make_client(static_dir=tmp_path)
    page = client.get("/")
    assert page.status_code == 200
    assert "ready" in page.text
    # API routes keep priority over the static mount
    assert client.get("/healthz").json() == {"ok": True}
    assert client.get("/tasks").status_code == 200


def test_duplicate_preference_items_rejected() -> None:
    items = make_items() + make_items()[:1]
    with pytest.raises(ConflictError) as excinfo:
        PreferenceStore(items)
    assert "duplicate preference item" in str(excinfo.value)
