"""HTTP facade over the review board and preference ballot box.

One FastAPI app serves annotators: pending tasks, sample payloads, verdict
submission, the worker board, and pairwise preference voting. Preference
items go out anonymized; model names exist only server-side. The browser UI
is mounted as static files after every API route so it can never shadow one.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dataset import Sample, sample_to_dict
from .errors import ConflictError, ContractError, NotFoundError
from .evalharness import (
    AggregatedVerdict,
    HumanBallots,
    Outcome,
    PreferenceItem,
    aggregate_human,
)
from .inspection import (
    ErrorReason,
    ReviewBoard,
    Verdict,
    VerdictOutcome,
)

BALLOTS_PER_ITEM = 3


class PreferenceStore:
    """Ballots keyed by (item, annotator); aggregates appear at three ballots."""

    def __init__(self, items: list[PreferenceItem]) -> None:
        self._lock = threading.Lock()
        self._items: dict[str, PreferenceItem] = {}
        for item in items:
            if item.item_id in self._items:
                raise ConflictError(f"duplicate preference item {item.item_id!r}")
            self._items[item.item_id] = item
        self._ballots: dict[str, dict[str, Outcome]] = {}

    def items(self) -> list[PreferenceItem]:
        with self._lock:
            return [self._items[key] for key in sorted(self._items)]

    def anonymized_items(self) -> list[dict]:
        out = []
        for item in self.items():
            record = {
                "item_id": item.item_id,
                "image": item.image,
                "question": item.question,
                "answer_a": item.answer_a,
                "answer_b": item.answer_b,
            }
            if item.word_limit is not None:
                record["word_limit"] = item.word_limit
            out.append(record)
        return out

    def cast_ballot(self, item_id: str, annotator: str, choice: Outcome) -> int:
        if not annotator:
            raise ContractError("annotator must be non-empty")
        with self._lock:
            if item_id not in self._items:
                raise NotFoundError(f"unknown preference item {item_id!r}")
            ballots = self._ballots.setdefault(item_id, {})
            if annotator in ballots:
                raise ConflictError(
                    f"annotator {annotator!r} already voted on {item_id!r}"
                )
            if len(ballots) >= BALLOTS_PER_ITEM:
                raise ConflictError(f"item {item_id!r} already has {BALLOTS_PER_ITEM} ballots")
            ballots[annotator] = choice
            return len(ballots)

    def ballot_counts(self) -> dict[str, int]:
        with self._lock:
            return {item_id: len(votes) for item_id, votes in self._ballots.items()}

    def aggregated(self) -> dict[str, AggregatedVerdict]:
        with self._lock:
            snapshot = {
                item_id: list(votes.values()) for item_id, votes in self._ballots.items()
            }
        out: dict[str, AggregatedVerdict] = {}
        for item_id, votes in snapshot.items():
            if len(votes) == BALLOTS_PER_ITEM:
                ballots = HumanBallots(
                    item_id=item_id, votes=(votes[0], votes[1], votes[2])
                )
                out[item_id] = aggregate_human(ballots)
        return out


class VerdictBody(BaseModel):
    task_id: str
    outcome: str
    reason: str | None = None
    note: str = ""


class BallotBody(BaseModel):
    item_id: str
    annotator: str
    choice: str


def build_app(
    board: ReviewBoard,
    samples: dict[str, Sample],
    preference: PreferenceStore | None = None,
    token: str = "",
    static_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="forge inspection service", docs_url=None, redoc_url=None)
    preference = preference if preference is not None else PreferenceStore([])

    def require_token(request: Request) -> None:
        if not token:
            return
        header = request.headers.get("authorization", "")
        if header != f"Bearer {token}":
            raise HTTPException(status_code=401, detail="missing or bad bearer token")

    auth = Depends(require_token)

    @app.exception_handler(NotFoundError)
    async def not_found(_, exc: NotFoundError) -> JSONResponse:
        return JSONResponse(status_code=404, content={"error": str(exc)})

    @app.exception_handler(ConflictError)
    async def conflict(_, exc: ConflictError) -> JSONResponse:
        return JSONResponse(status_code=409, content={"error": str(exc)})

    @app.exception_handler(ContractError)
    async def contract(_, exc: ContractError) -> JSONResponse:
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"ok": True}

    @app.get("/tasks", dependencies=[auth])
    def list_tasks(assignee: str | None = None, state: str | None = None) -> dict:
        tasks = board.tasks(assignee=assignee)
        if state is not None:
            tasks = [t for t in tasks if t.state.value == state]
        return {"tasks": [t.to_dict() for t in tasks]}

    @app.get("/samples/{sample_id}", dependencies=[auth])
    def get_sample(sample_id: str) -> dict:
        sample = samples.get(sample_id)
        if sample is None:
            raise NotFoundError(f"unknown sample {sample_id!r}")
        return sample_to_dict(sample)

    @app.post("/verdicts", status_code=201, dependencies=[auth])
    def post_verdict(body: VerdictBody) -> dict:
        try:
            outcome = VerdictOutcome(body.outcome.strip().lower())
        except ValueError:
            raise ContractError(f"unknown outcome {body.outcome!r}")
        reason: ErrorReason | None = None
        if body.reason is not None:
            try:
                reason = ErrorReason(body.reason.strip().lower())
            except ValueError:
                raise ContractError(f"unknown reason {body.reason!r}")
        verdict = Verdict(
            task_id=body.task_id, outcome=outcome, reason=reason, note=body.note
        )
        task = board.record_verdict(verdict)
        return {"task": task.to_dict()}

    @app.get("/board", dependencies=[auth])
    def get_board() -> dict:
        aggregated = preference.aggregated()
        return {
            "review": board.stats().to_dict(),
            "preference": {
                "ballot_counts": preference.ballot_counts(),
                "aggregated": {
                    item_id: verdict.outcome.value
                    for item_id, verdict in sorted(aggregated.items())
                },
            },
        }

    @app.get("/preference/items", dependencies=[auth])
    def preference_items() -> dict:
        return {"items": preference.anonymized_items()}

    @app.post("/preference/ballots", status_code=201, dependencies=[auth])
    def post_ballot(body: BallotBody) -> dict:
        choice = Outcome.parse(body.choice)
        count = preference.cast_ballot(body.item_id, body.annotator, choice)
        aggregated = preference.aggregated().get(body.item_id)
        return {
            "recorded": True,
            "ballots": count,
            "aggregated": aggregated.outcome.value if aggregated else None,
        }

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
