"""Annotator review workflow: assignment, verdicts, removals, board stats.

Review is accept/reject only. Verdicts are write-once and recorded to an
append-only JSONL log; replaying the log reconstructs the board exactly, which
is the whole persistence story. A sample is removed when any of its
language-pair tasks errors, because a parallel corpus must stay aligned.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path

from .canonical import canonical_dumps
from .dataset import DatasetManifest, Sample, derive_subset
from .errors import ConflictError, ContractError, NotFoundError, ParseError

import json


class LanguagePair(Enum):
    EN_KO = "en-ko"
    EN_ZH = "en-zh"

    @classmethod
    def parse(cls, text: str) -> "LanguagePair":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ContractError(f"unknown language pair {text!r}; expected one of: {valid}")


PAIR_LANGUAGES: dict[LanguagePair, tuple[str, str]] = {
    LanguagePair.EN_KO: ("en", "ko"),
    LanguagePair.EN_ZH: ("en", "zh"),
}


class TaskState(Enum):
    PENDING = "pending"
    DONE = "done"


class VerdictOutcome(Enum):
    PASS = "pass"
    ERROR = "error"


class ErrorReason(Enum):
    PROPER_NOUN_OBJECT = "proper_noun_object"
    CULTURAL_DIFFERENCE = "cultural_difference"
    OTHER = "other"


@dataclass(frozen=True)
class Annotator:
    annotator_id: str
    language_pairs: tuple[LanguagePair, ...]

    def __post_init__(self) -> None:
        if not self.annotator_id:
            raise ContractError("annotator_id must be non-empty")
        if not self.language_pairs:
            raise ContractError(f"annotator {self.annotator_id!r} has no capabilities")


@dataclass(frozen=True)
class ReviewTask:
    task_id: str
    sample_id: str
    language_pair: LanguagePair
    assignee: str
    state: TaskState = TaskState.PENDING

    def to_dict(self) -> dict:
        return {
            "task_id": self.task_id,
            "sample_id": self.sample_id,
            "language_pair": self.language_pair.value,
            "assignee": self.assignee,
            "state": self.state.value,
        }


@dataclass(frozen=True)
class Verdict:
    task_id: str
    outcome: VerdictOutcome
    reason: ErrorReason | None = None
    note: str = ""
    timestamp: str = ""

    def __post_init__(self) -> None:
        if self.outcome is VerdictOutcome.ERROR and self.reason is None:
            raise ContractError("error verdicts must carry a reason")
        if self.outcome is VerdictOutcome.PASS and self.reason is not None:
            raise ContractError("pass verdicts must not carry a reason")
        if self.note and self.reason is not ErrorReason.OTHER:
            raise ContractError("free-text note is only valid with reason 'other'")

    def to_dict(self) -> dict:
        out: dict = {"task_id": self.task_id, "outcome": self.outcome.value}
        if self.reason is not None:
            out["reason"] = self.reason.value
        if self.note:
            out["note"] = self.note
        if self.timestamp:
            out["timestamp"] = self.timestamp
        return out


def verdict_from_dict(data: dict) -> Verdict:
    try:
        return Verdict(
            task_id=data["task_id"],
            outcome=VerdictOutcome(data["outcome"]),
            reason=ErrorReason(data["reason"]) if "reason" in data else None,
            note=data.get("note", ""),
            timestamp=data.get("timestamp", ""),
        )
    except (KeyError, ValueError) as exc:
        raise ContractError(f"malformed verdict record: {exc}") from exc


def applicable_pairs(sample: Sample) -> list[LanguagePair]:
    pairs = []
    for pair in LanguagePair:
        if all(lang in sample.languages for lang in PAIR_LANGUAGES[pair]):
            pairs.append(pair)
    return pairs


def assign_tasks(samples: list[Sample], annotators: list[Annotator]) -> list[ReviewTask]:
    """One task per (sample, applicable pair), round-robin within capability.

    Assignment is deterministic: same samples and annotators, same board.
    """
    capable: dict[LanguagePair, list[Annotator]] = {pair: [] for pair in LanguagePair}
    for annotator in annotators:
        for pair in annotator.language_pairs:
            capable[pair].append(annotator)

    cursor: dict[LanguagePair, int] = {pair: 0 for pair in LanguagePair}
    tasks: list[ReviewTask] = []
    for sample in samples:
        for pair in applicable_pairs(sample):
            pool = capable[pair]
            if not pool:
                raise ContractError(
                    f"no annotator can review {pair.value} "
                    f"(needed by sample {sample.sample_id!r})"
                )
            assignee = pool[cursor[pair] % len(pool)]
            cursor[pair] += 1
            tasks.append(
                ReviewTask(
                    task_id=f"{sample.sample_id}:{pair.value}",
                    sample_id=sample.sample_id,
                    language_pair=pair,
                    assignee=assignee.annotator_id,
                )
            )
    return tasks


@dataclass(frozen=True)
class BoardStats:
    per_annotator: tuple[tuple[str, dict], ...]
    assigned: int
    passed: int
    errored: int
    pending: int

    def to_dict(self) -> dict:
        return {
            "per_annotator": {name: dict(row) for name, row in self.per_annotator},
            "totals": {
                "assigned": self.assigned,
                "passed": self.passed,
                "errored": self.errored,
                "pending": self.pending,
            },
        }


def board_stats(tasks: list[ReviewTask], verdicts: dict[str, Verdict]) -> BoardStats:
    rows: dict[str, dict] = {}
    for task in tasks:
        row = rows.setdefault(
            task.assignee, {"assigned": 0, "passed": 0, "errored": 0, "pending": 0}
        )
        row["assigned"] += 1
        verdict = verdicts.get(task.task_id)
        if verdict is None:
            row["pending"] += 1
        elif verdict.outcome is VerdictOutcome.PASS:
            row["passed"] += 1
        else:
            row["errored"] += 1
    return BoardStats(
        per_annotator=tuple(sorted(rows.items())),
        assigned=sum(r["assigned"] for r in rows.values()),
        passed=sum(r["passed"] for r in rows.values()),
        errored=sum(r["errored"] for r in rows.values()),
        pending=sum(r["pending"] for r in rows.values()),
    )


class ReviewBoard:
    """In-memory task board backed by an append-only verdict log.

    Creating a board over a log that already has entries replays them, so a
    restarted review session picks up exactly where it stopped. Writes are
    serialized under one lock; reads take the same lock briefly and copy.
    """

    def __init__(self, tasks: list[ReviewTask], log_path: str | Path | None = None) -> None:
        seen: set[str] = set()
        for task in tasks:
            if task.task_id in seen:
                raise ConflictError(f"duplicate task_id {task.task_id!r}")
            seen.add(task.task_id)
        self._lock = threading.Lock()
        self._tasks: dict[str, ReviewTask] = {task.task_id: task for task in tasks}
        self._verdicts: dict[str, Verdict] = {}
        self._log_path = Path(log_path) if log_path is not None else None
        if self._log_path is not None and self._log_path.exists():
            self._replay(self._log_path)

    def _replay(self, path: Path) -> None:
        with path.open("r", encoding="utf-8") as handle:
            for lineno, line in enumerate(handle, start=1):
                if not line.strip():
                    continue
                try:
                    data = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(
                        f"{path}: line {lineno}: {exc.msg}", line=lineno
                    ) from exc
                self._apply(verdict_from_dict(data))

    def _apply(self, verdict: Verdict) -> ReviewTask:
        task = self._tasks.get(verdict.task_id)
        if task is None:
            raise NotFoundError(f"unknown task {verdict.task_id!r}")
        if task.state is TaskState.DONE:
            raise ConflictError(f"task {verdict.task_id!r} already has a verdict")
        done = ReviewTask(
            task_id=task.task_id,
            sample_id=task.sample_id,
            language_pair=task.language_pair,
            assignee=task.assignee,
            state=TaskState.DONE,
        )
        self._tasks[task.task_id] = done
        self._verdicts[verdict.task_id] = verdict
        return done

    def record_verdict(self, verdict: Verdict) -> ReviewTask:
        if not verdict.timestamp:
            stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
            verdict = Verdict(
                task_id=verdict.task_id,
                outcome=verdict.outcome,
                reason=verdict.reason,
                note=verdict.note,
                timestamp=stamp,
            )
        with self._lock:
            task = self._apply(verdict)
            if self._log_path is not None:
                with self._log_path.open("a", encoding="utf-8") as handle:
                    handle.write(canonical_dumps(verdict.to_dict()) + "\n")
        return task

    def tasks(self, assignee: str | None = None) -> list[ReviewTask]:
        with self._lock:
            tasks = list(self._tasks.values())
        if assignee is not None:
            tasks = [t for t in tasks if t.assignee == assignee]
        return sorted(tasks, key=lambda t: t.task_id)

    def task(self, task_id: str) -> ReviewTask:
        with self._lock:
            task = self._tasks.get(task_id)
        if task is None:
            raise NotFoundError(f"unknown task {task_id!r}")
        return task

    def verdicts(self) -> dict[str, Verdict]:
        with self._lock:
            return dict(self._verdicts)

    def stats(self) -> BoardStats:
        with self._lock:
            tasks = list(self._tasks.values())
            verdicts = dict(self._verdicts)
        return board_stats(tasks, verdicts)

    def errored_sample_ids(self) -> set[str]:
        with self._lock:
            return {
                self._tasks[task_id].sample_id
                for task_id, verdict in self._verdicts.items()
                if verdict.outcome is VerdictOutcome.ERROR
            }

    def pending_task_ids(self, sample_ids: set[str]) -> list[str]:
        with self._lock:
            return sorted(
                task.task_id
                for task in self._tasks.values()
                if task.sample_id in sample_ids and task.state is TaskState.PENDING
            )


def apply_removals(
    samples: list[Sample],
    board: ReviewBoard,
    name: str,
    parent_manifest: str = "",
) -> tuple[list[Sample], DatasetManifest]:
    """Drop every sample with at least one Error verdict.

    Only tasks for samples still present gate the operation, which is what
    makes re-applying to an already-cleaned dataset a no-op instead of an
    unknown-id error.
    """
    present = {sample.sample_id for sample in samples}
    pending = board.pending_task_ids(present)
    if pending:
        raise ContractError(
            "cannot apply removals with pending tasks: " + ", ".join(pending)
        )
    removals = board.errored_sample_ids() & present
    return derive_subset(samples, removals, name=name, parent_manifest=parent_manifest)
