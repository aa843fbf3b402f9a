"""VQA accuracy scoring, pairwise preference judging, and agreement analysis.

Answer normalization maps surface variants (case, punctuation, declared
equivalence classes such as the Korean yes-variants) onto canonical forms
before comparison. Pairwise judging randomizes A/B presentation order per
item under a logged seed and parses the judge's reply through a strict
verdict grammar with conservative free-text fallbacks.
"""

from __future__ import annotations

import json
import random
import re
import time
import unicodedata
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Protocol

from .errors import ContractError, ParseError, ReplyFormatError, SchemaError, TransportError


class Outcome(Enum):
    A_WINS = "a_wins"
    TIE = "tie"
    B_WINS = "b_wins"

    @classmethod
    def parse(cls, text: str) -> "Outcome":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(o.value for o in cls)
            raise ContractError(f"unknown outcome {text!r}; expected one of: {valid}")

    def mirrored(self) -> "Outcome":
        if self is Outcome.A_WINS:
            return Outcome.B_WINS
        if self is Outcome.B_WINS:
            return Outcome.A_WINS
        return Outcome.TIE


_OUTCOME_ORDER = (Outcome.A_WINS, Outcome.TIE, Outcome.B_WINS)


def _base_normalize(text: str, casefold: bool, strip_punctuation: bool) -> str:
    out = unicodedata.normalize("NFC", text)
    if casefold:
        out = out.casefold()
    if strip_punctuation:
        out = "".join(ch for ch in out if not unicodedata.category(ch).startswith("P"))
    return " ".join(out.split())


class NormalizationRules:
    """Per-language equivalence classes over casefolded, punctuation-free text.

    The representative of a class is its first member after base
    normalization; members are checked for cross-class collisions at
    construction so lookup is unambiguous.
    """

    def __init__(
        self,
        classes: dict[str, list[list[str]]] | None = None,
        casefold: bool = True,
        strip_punctuation: bool = True,
    ) -> None:
        self.casefold = casefold
        self.strip_punctuation = strip_punctuation
        self._lookup: dict[str, dict[str, str]] = {}
        for language, language_classes in (classes or {}).items():
            mapping: dict[str, str] = {}
            for members in language_classes:
                if not members:
                    raise ContractError(f"{language}: empty equivalence class")
                normalized = [
                    _base_normalize(m, casefold, strip_punctuation) for m in members
                ]
                representative = normalized[0]
                for member in normalized:
                    if member in mapping and mapping[member] != representative:
                        raise ContractError(
                            f"{language}: {member!r} appears in two equivalence classes"
                        )
                    mapping[member] = representative
            self._lookup[language] = mapping

    def representative(self, language: str, base_normalized: str) -> str:
        return self._lookup.get(language, {}).get(base_normalized, base_normalized)

    def to_dict(self) -> dict:
        classes: dict[str, dict[str, str]] = {
            language: dict(mapping) for language, mapping in self._lookup.items()
        }
        return {
            "casefold": self.casefold,
            "strip_punctuation": self.strip_punctuation,
            "lookup": classes,
        }


def load_rules(path: str | Path) -> NormalizationRules:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    try:
        return NormalizationRules(
            classes=data.get("classes", {}),
            casefold=bool(data.get("casefold", True)),
            strip_punctuation=bool(data.get("strip_punctuation", True)),
        )
    except (TypeError, AttributeError) as exc:
        raise SchemaError(f"{path}: malformed rules file: {exc}") from exc


def default_rules() -> NormalizationRules:
    path = resources.files("vifforge").joinpath("data/normalization_default.json")
    with resources.as_file(path) as real_path:
        return load_rules(real_path)


def normalize_answer(text: str, language: str, rules: NormalizationRules) -> str:
    base = _base_normalize(text, rules.casefold, rules.strip_punctuation)
    return rules.representative(language, base)


@dataclass(frozen=True)
class VqaItem:
    question_id: str
    language: str
    question: str
    gold_answers: tuple[str, ...]
    prediction: str

    def __post_init__(self) -> None:
        if not self.gold_answers:
            raise ContractError(f"item {self.question_id!r}: gold_answers must be non-empty")


@dataclass(frozen=True)
class AccuracyReport:
    accuracy: float
    correct: int
    total: int
    per_item: tuple[tuple[str, bool], ...]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "per_item": {qid: ok for qid, ok in self.per_item},
        }


def score_accuracy(items: list[VqaItem], rules: NormalizationRules) -> AccuracyReport:
    """An item is correct iff its normalized prediction hits any normalized gold."""
    if not items:
        raise ContractError("cannot score an empty item list")
    per_item: list[tuple[str, bool]] = []
    correct = 0
    for item in items:
        predicted = normalize_answer(item.prediction, item.language, rules)
        golds = {normalize_answer(g, item.language, rules) for g in item.gold_answers}
        ok = predicted in golds
        correct += ok
        per_item.append((item.question_id, ok))
    return AccuracyReport(
        accuracy=correct / len(items),
        correct=correct,
        total=len(items),
        per_item=tuple(per_item),
    )


def truncate_words(text: str, limit: int) -> str:
    """First `limit` whitespace words, inner spacing collapsed to single spaces."""
    if limit < 1:
        raise ContractError(f"word limit must be >= 1, got {limit}")
    return " ".join(text.split()[:limit])


@dataclass(frozen=True)
class PreferenceItem:
    item_id: str
    image: str
    question: str
    answer_a: str
    answer_b: str
    model_a: str = ""
    model_b: str = ""
    word_limit: int | None = None

    def __post_init__(self) -> None:
        if not self.answer_a or not self.answer_b:
            raise ContractError(f"item {self.item_id!r}: answers must be non-empty")
        if self.word_limit is not None and self.word_limit < 1:
            raise ContractError(f"item {self.item_id!r}: word_limit must be >= 1")


def swap_item(item: PreferenceItem) -> PreferenceItem:
    return PreferenceItem(
        item_id=item.item_id,
        image=item.image,
        question=item.question,
        answer_a=item.answer_b,
        answer_b=item.answer_a,
        model_a=item.model_b,
        model_b=item.model_a,
        word_limit=item.word_limit,
    )


@dataclass(frozen=True)
class JudgeVerdict:
    item_id: str
    outcome: Outcome
    rationale: str = ""
    swapped: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "outcome": self.outcome.value,
            "rationale": self.rationale,
            "swapped": self.swapped,
            "seed": self.seed,
        }


class JudgeBackend(Protocol):
    def complete(self, prompt: str, image: str) -> str: ...


JUDGE_PROMPT_HEADER = (
    "You are comparing two answers to the same question about one image. "
    "Judge helpfulness, accuracy, and relevance to the question. "
    "End your reply with a final line of exactly 'VERDICT: A', 'VERDICT: B', "
    "or 'VERDICT: TIE'."
)


def build_judge_prompt(question: str, answer_a: str, answer_b: str) -> str:
    return (
        f"{JUDGE_PROMPT_HEADER}\n\n"
        f"Question: {question}\n\n"
        f"Answer A: {answer_a}\n\n"
        f"Answer B: {answer_b}\n"
    )


class MockJudge:
    """Deterministic judge: the longer answer wins, equal lengths tie.

    Replies through the same grammar real judges are instructed to use, so
    tests exercise the full parse path.
    """

    def __init__(self, fail_times: int = 0) -> None:
        self.fail_times = fail_times
        self.calls = 0

    def complete(self, prompt: str, image: str) -> str:
        self.calls += 1
        if self.calls <= self.fail_times:
            raise TransportError("injected judge transport failure")
        a_match = re.search(r"^Answer A: (.*?)\n\nAnswer B: ", prompt, re.DOTALL | re.M)
        b_match = re.search(r"^Answer B: (.*?)\n\Z", prompt, re.DOTALL | re.M)
        if a_match is None or b_match is None:
            raise ContractError("mock judge got a prompt without both answers")
        a_text, b_text = a_match.group(1), b_match.group(1)
        if len(a_text) > len(b_text):
            verdict = "A"
        elif len(b_text) > len(a_text):
            verdict = "B"
        else:
            verdict = "TIE"
        return f"Compared both answers on length of content.\nVERDICT: {verdict}\n"


class HttpJudge:
    """JSON-over-HTTP judge: `{model, prompt, image}` in, `{text}` out."""

    def __init__(self, endpoint: str, model_name: str = "", timeout: float = 30.0) -> None:
        self.endpoint = endpoint
        self.model_name = model_name
        self.timeout = timeout

    def complete(self, prompt: str, image: str) -> str:
        import httpx

        body = {"model": self.model_name, "prompt": prompt, "image": image}
        try:
            response = httpx.post(self.endpoint, json=body, timeout=self.timeout)
        except httpx.HTTPError as exc:
            raise TransportError(f"judge transport failure: {exc}") from exc
        if response.status_code != 200:
            raise TransportError(
                f"judge returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            payload = response.json()
        except ValueError as exc:
            raise TransportError(f"judge response is not JSON: {exc}") from exc
        if "text" not in payload:
            raise TransportError("judge response missing 'text' field")
        return str(payload["text"])


_VERDICT_LINE_RE = re.compile(r"VERDICT:\s*(A|B|TIE)\b", re.IGNORECASE)
_TIE_PHRASES = (
    r"\bboth answers are similar\b",
    r"\bboth similar\b",
    r"\btie\b",
    r"\bsimilar\b",
)
_A_PHRASES = (r"\banswer a is better\b", r"\ba is better\b")
_B_PHRASES = (r"\banswer b is better\b", r"\bb is better\b")


def parse_judge_reply(text: str) -> Outcome:
    """Parse a judge reply: the last VERDICT line wins, else phrase fallbacks."""
    matches = _VERDICT_LINE_RE.findall(text)
    if matches:
        letter = matches[-1].upper()
        return {"A": Outcome.A_WINS, "B": Outcome.B_WINS, "TIE": Outcome.TIE}[letter]
    lowered = text.lower()
    for pattern in _TIE_PHRASES:
        if re.search(pattern, lowered):
            return Outcome.TIE
    for pattern in _A_PHRASES:
        if re.search(pattern, lowered):
            return Outcome.A_WINS
    for pattern in _B_PHRASES:
        if re.search(pattern, lowered):
            return Outcome.B_WINS
    raise ReplyFormatError("no verdict found in judge reply", raw_reply=text)


def judge_pair(
    item: PreferenceItem,
    judge: JudgeBackend,
    seed: int = 0,
    max_retries: int = 2,
    backoff_base: float = 0.0,
) -> JudgeVerdict:
    """Judge one item with per-item position randomization.

    The presentation order is drawn from a generator seeded by (seed,
    item_id), so a run is reproducible from its logged seed alone. The
    returned outcome is always in the caller's original A/B frame.
    """
    answer_a, answer_b = item.answer_a, item.answer_b
    if item.word_limit is not None:
        answer_a = truncate_words(answer_a, item.word_limit)
        answer_b = truncate_words(answer_b, item.word_limit)
    rng = random.Random(f"{seed}:{item.item_id}")
    swapped = rng.random() < 0.5
    shown_a, shown_b = (answer_b, answer_a) if swapped else (answer_a, answer_b)
    prompt = build_judge_prompt(item.question, shown_a, shown_b)

    attempts = 0
    while True:
        attempts += 1
        try:
            reply = judge.complete(prompt, item.image)
            break
        except TransportError as exc:
            if attempts > max_retries:
                raise TransportError(
                    f"judge failed on {item.item_id!r} after {attempts} attempts: {exc}",
                    attempts=attempts,
                ) from exc
            if backoff_base > 0:
                time.sleep(backoff_base * (2 ** (attempts - 1)))

    shown_outcome = parse_judge_reply(reply)
    outcome = shown_outcome.mirrored() if swapped else shown_outcome
    return JudgeVerdict(
        item_id=item.item_id,
        outcome=outcome,
        rationale=reply.strip(),
        swapped=swapped,
        seed=seed,
    )


def run_judgements(
    items: list[PreferenceItem],
    judge: JudgeBackend,
    seed: int = 0,
    parallelism: int = 4,
    max_retries: int = 2,
) -> list[JudgeVerdict]:
    if parallelism < 1:
        raise ContractError(f"parallelism must be >= 1, got {parallelism}")
    if not items:
        return []
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(
            pool.map(lambda item: judge_pair(item, judge, seed, max_retries), items)
        )


@dataclass(frozen=True)
class HumanBallots:
    item_id: str
    votes: tuple[Outcome, Outcome, Outcome]

    def __post_init__(self) -> None:
        if len(self.votes) != 3:
            raise ContractError(
                f"item {self.item_id!r}: exactly 3 votes required, got {len(self.votes)}"
            )


@dataclass(frozen=True)
class AggregatedVerdict:
    item_id: str
    outcome: Outcome


def aggregate_human(ballots: HumanBallots) -> AggregatedVerdict:
    """Two matching votes decide; a perfect three-way split is a tie."""
    tally: dict[Outcome, int] = {}
    for vote in ballots.votes:
        tally[vote] = tally.get(vote, 0) + 1
    for outcome, count in tally.items():
        if count >= 2:
            return AggregatedVerdict(item_id=ballots.item_id, outcome=outcome)
    return AggregatedVerdict(item_id=ballots.item_id, outcome=Outcome.TIE)


class AgreementMatrix:
    """3x3 cross-tabulation of judge outcomes against aggregated human outcomes."""

    def __init__(self, cells: dict[tuple[Outcome, Outcome], int]) -> None:
        self._cells = {
            (j, h): cells.get((j, h), 0) for j in _OUTCOME_ORDER for h in _OUTCOME_ORDER
        }
        if any(v < 0 for v in self._cells.values()):
            raise ContractError("agreement cells must be >= 0")

    def cell(self, judge: Outcome, human: Outcome) -> int:
        return self._cells[(judge, human)]

    def total(self) -> int:
        return sum(self._cells.values())

    def judge_marginals(self) -> dict[Outcome, int]:
        return {
            j: sum(self._cells[(j, h)] for h in _OUTCOME_ORDER) for j in _OUTCOME_ORDER
        }

    def human_marginals(self) -> dict[Outcome, int]:
        return {
            h: sum(self._cells[(j, h)] for j in _OUTCOME_ORDER) for h in _OUTCOME_ORDER
        }

    def rate(self, outcome: Outcome) -> float | None:
        """Diagonal over judge-row total; None when the judge never said it."""
        row_total = self.judge_marginals()[outcome]
        if row_total == 0:
            return None
        return self.cell(outcome, outcome) / row_total

    def to_dict(self) -> dict:
        return {
            "cells": {
                f"{j.value}|{h.value}": self._cells[(j, h)]
                for j in _OUTCOME_ORDER
                for h in _OUTCOME_ORDER
            },
            "rates": {
                o.value: self.rate(o) for o in _OUTCOME_ORDER
            },
            "total": self.total(),
        }


def agreement(
    judge_verdicts: list[JudgeVerdict],
    human_verdicts: list[AggregatedVerdict],
) -> AgreementMatrix:
    judge_by_id = {v.item_id: v.outcome for v in judge_verdicts}
    human_by_id = {v.item_id: v.outcome for v in human_verdicts}
    if len(judge_by_id) != len(judge_verdicts):
        raise ContractError("duplicate item_id among judge verdicts")
    if len(human_by_id) != len(human_verdicts):
        raise ContractError("duplicate item_id among human verdicts")
    only_judge = sorted(set(judge_by_id) - set(human_by_id))
    only_human = sorted(set(human_by_id) - set(judge_by_id))
    if only_judge or only_human:
        raise ContractError(
            f"item sets differ; judge-only: {only_judge}, human-only: {only_human}"
        )
    cells: dict[tuple[Outcome, Outcome], int] = {}
    for item_id, judge_outcome in judge_by_id.items():
        key = (judge_outcome, human_by_id[item_id])
        cells[key] = cells.get(key, 0) + 1
    return AgreementMatrix(cells)


def largest_remainder_percentages(
    counts: list[int], decimals: int = 1
) -> list[float]:
    """Percentages rounded to `decimals` places that sum exactly to 100.

    Floor every share at the chosen precision, then hand out the leftover
    units to the largest fractional remainders (earlier entries win exact
    ties). Deterministic, so reports diff cleanly.
    """
    total = sum(counts)
    if total <= 0:
        raise ContractError("largest-remainder rounding needs a positive total")
    if any(c < 0 for c in counts):
        raise ContractError("counts must be >= 0")
    scale = 10**decimals
    exact = [count * 100 * scale / total for count in counts]
    floors = [int(share) for share in exact]
    leftover = 100 * scale - sum(floors)
    order = sorted(
        range(len(counts)), key=lambda i: (-(exact[i] - floors[i]), i)
    )
    for i in order[:leftover]:
        floors[i] += 1
    return [f / scale for f in floors]


@dataclass(frozen=True)
class PreferenceSummary:
    model_a: str
    model_b: str
    counts: tuple[tuple[str, int], ...]
    percentages: tuple[tuple[str, float], ...]

    def to_dict(self) -> dict:
        return {
            "model_a": self.model_a,
            "model_b": self.model_b,
            "counts": dict(self.counts),
            "percentages": dict(self.percentages),
        }


def preference_summary(
    verdicts: list[JudgeVerdict | AggregatedVerdict],
    model_a: str = "",
    model_b: str = "",
) -> PreferenceSummary:
    if not verdicts:
        raise ContractError("cannot summarize an empty verdict list")
    counts = {o: 0 for o in _OUTCOME_ORDER}
    for verdict in verdicts:
        counts[verdict.outcome] += 1
    ordered = [counts[o] for o in _OUTCOME_ORDER]
    percentages = largest_remainder_percentages(ordered)
    return PreferenceSummary(
        model_a=model_a,
        model_b=model_b,
        counts=tuple((o.value, counts[o]) for o in _OUTCOME_ORDER),
        percentages=tuple(
            (o.value, pct) for o, pct in zip(_OUTCOME_ORDER, percentages)
        ),
    )


def load_vqa_items(gold_path: str | Path, predictions_path: str | Path) -> list[VqaItem]:
    """Join gold JSONL and prediction JSONL on question_id; any orphan is an error."""
    gold_records = _read_jsonl(Path(gold_path))
    pred_records = _read_jsonl(Path(predictions_path))
    predictions: dict[str, str] = {}
    for record in pred_records:
        try:
            qid = str(record["question_id"])
            predictions[qid] = str(record["prediction"])
        except KeyError as exc:
            raise SchemaError(f"{predictions_path}: prediction record missing {exc}") from exc
    items: list[VqaItem] = []
    seen: set[str] = set()
    for record in gold_records:
        try:
            qid = str(record["question_id"])
            item = VqaItem(
                question_id=qid,
                language=str(record.get("language", "en")),
                question=str(record.get("question", "")),
                gold_answers=tuple(str(a) for a in record["gold_answers"]),
                prediction=predictions.get(qid, ""),
            )
        except KeyError as exc:
            raise SchemaError(f"{gold_path}: gold record missing {exc}") from exc
        if qid not in predictions:
            raise ContractError(f"no prediction for question {qid!r}")
        seen.add(qid)
        items.append(item)
    extra = sorted(set(predictions) - seen)
    if extra:
        raise ContractError(f"predictions without gold entries: {', '.join(extra)}")
    return items


def load_preference_items(path: str | Path) -> list[PreferenceItem]:
    items = []
    for record in _read_jsonl(Path(path)):
        try:
            items.append(
                PreferenceItem(
                    item_id=str(record["item_id"]),
                    image=str(record.get("image", "")),
                    question=str(record["question"]),
                    answer_a=str(record["answer_a"]),
                    answer_b=str(record["answer_b"]),
                    model_a=str(record.get("model_a", "")),
                    model_b=str(record.get("model_b", "")),
                    word_limit=(
                        int(record["word_limit"]) if record.get("word_limit") else None
                    ),
                )
            )
        except KeyError as exc:
            raise SchemaError(f"{path}: preference record missing {exc}") from exc
    return items


def _read_jsonl(path: Path) -> list[dict]:
    records: list[dict] = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc.msg}", line=lineno) from exc
    return records
