"""Reference loss arithmetic over pluggable toy probability models.

Two losses: causal language modeling over plain token sequences, and the
multi-turn variant where only answer tokens contribute terms while the image
token, questions, and earlier turns condition the prediction. All logs are
natural; sums are compensated so analytic checks hold to 1e-9.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .errors import ContractError, ParseError, SchemaError

_DIST_SUM_TOL = 1e-9


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ContractError("token sequence must be non-empty")


@dataclass(frozen=True)
class PretrainCorpus:
    sequences: tuple[TokenSequence, ...]

    def __post_init__(self) -> None:
        if not self.sequences:
            raise ContractError("pretraining corpus must hold at least one sequence")


@dataclass(frozen=True)
class QATokens:
    question: tuple[int, ...]
    answer: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.answer:
            raise ContractError("answer token list must be non-empty")


@dataclass(frozen=True)
class ConversationSample:
    image_token: int
    turns: tuple[QATokens, ...]

    def __post_init__(self) -> None:
        if not self.turns:
            raise ContractError("conversation sample must have at least one turn")


class ProbModel(Protocol):
    @property
    def vocab_size(self) -> int: ...

    def distribution(self, prefix: tuple[int, ...]) -> Sequence[float]: ...


class UniformModel:
    def __init__(self, vocab_size: int) -> None:
        if vocab_size < 1:
            raise ContractError(f"vocab_size must be >= 1, got {vocab_size}")
        self._vocab_size = vocab_size

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def distribution(self, prefix: tuple[int, ...]) -> Sequence[float]:
        return [1.0 / self._vocab_size] * self._vocab_size


class TableModel:
    """Lookup-table model: exact conditionals per prefix, optional default row."""

    def __init__(
        self,
        vocab_size: int,
        table: dict[tuple[int, ...], Sequence[float]],
        default: Sequence[float] | None = None,
    ) -> None:
        if vocab_size < 1:
            raise ContractError(f"vocab_size must be >= 1, got {vocab_size}")
        self._vocab_size = vocab_size
        self._table = {prefix: tuple(dist) for prefix, dist in table.items()}
        self._default = tuple(default) if default is not None else None

    @property
    def vocab_size(self) -> int:
        return self._vocab_size

    def distribution(self, prefix: tuple[int, ...]) -> Sequence[float]:
        dist = self._table.get(prefix, self._default)
        if dist is None:
            raise ContractError(f"table model has no row for prefix {prefix}")
        return dist


def _next_token_logprob(model: ProbModel, prefix: tuple[int, ...], token: int) -> float:
    if not 0 <= token < model.vocab_size:
        raise ContractError(
            f"token id {token} outside vocabulary of size {model.vocab_size}"
        )
    dist = model.distribution(prefix)
    if len(dist) != model.vocab_size:
        raise ContractError(
            f"model returned {len(dist)} probabilities for vocabulary "
            f"of size {model.vocab_size}"
        )
    total = math.fsum(dist)
    if abs(total - 1.0) > _DIST_SUM_TOL:
        raise ContractError(f"model distribution sums to {total!r}, not 1")
    p = dist[token]
    if p <= 0.0:
        raise ContractError(
            f"model assigns non-positive probability {p!r} to token {token} "
            f"after prefix {prefix}"
        )
    return math.log(p)


def sequence_loss(model: ProbModel, sequence: TokenSequence) -> float:
    """Negative log-likelihood of one sequence; position 1 sees the empty prefix."""
    terms = []
    for j, token in enumerate(sequence.tokens):
        prefix = sequence.tokens[:j]
        terms.append(-_next_token_logprob(model, prefix, token))
    return math.fsum(terms)


def pretrain_loss(model: ProbModel, corpus: PretrainCorpus) -> float:
    return math.fsum(sequence_loss(model, seq) for seq in corpus.sequences)


def sample_vit_loss(model: ProbModel, sample: ConversationSample) -> float:
    """Loss over answer tokens only, under the rolling dialogue prefix.

    The prefix for answer token j of turn t is the image token, every earlier
    question and answer in order, turn t's question, and turn t's answer
    tokens before j. Question tokens never produce loss terms themselves.
    """
    terms = []
    context: tuple[int, ...] = (sample.image_token,)
    for turn in sample.turns:
        context = context + turn.question
        for j, token in enumerate(turn.answer):
            prefix = context + turn.answer[:j]
            terms.append(-_next_token_logprob(model, prefix, token))
        context = context + turn.answer
    return math.fsum(terms)


def vit_loss(model: ProbModel, samples: list[ConversationSample]) -> float:
    if not samples:
        raise ContractError("vit_loss needs at least one sample")
    return math.fsum(sample_vit_loss(model, sample) for sample in samples)


@dataclass(frozen=True)
class StageDescriptor:
    stage: int
    sources: tuple[tuple[str, int], ...]
    total: int

    def to_dict(self) -> dict:
        return {
            "stage": self.stage,
            "sources": {name: count for name, count in self.sources},
            "total": self.total,
        }


def stage_datasets(
    caption_sets: list[tuple[str, list[ConversationSample]]],
    instruction_sets: list[tuple[str, list[ConversationSample]]],
) -> tuple[StageDescriptor, StageDescriptor]:
    """Describe the two training stages; stage 1 admits single-turn samples only."""
    for name, samples in caption_sets:
        for index, sample in enumerate(samples):
            if len(sample.turns) != 1:
                raise ContractError(
                    f"stage 1 requires single-turn samples; source {name!r} "
                    f"sample {index} has {len(sample.turns)} turns"
                )
    stage1 = StageDescriptor(
        stage=1,
        sources=tuple((name, len(samples)) for name, samples in caption_sets),
        total=sum(len(samples) for _, samples in caption_sets),
    )
    stage2 = StageDescriptor(
        stage=2,
        sources=tuple((name, len(samples)) for name, samples in instruction_sets),
        total=sum(len(samples) for _, samples in instruction_sets),
    )
    return stage1, stage2


def load_model(path: str | Path) -> ProbModel:
    """Load a toy model from JSON.

    Uniform: {"vocab_size": 4, "uniform": true}. Table: {"vocab_size": 2,
    "table": {"": [..], "0": [..], "0,1": [..]}, "default": [..]} with
    comma-joined token-id prefixes as keys.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    try:
        vocab_size = int(data["vocab_size"])
        if data.get("uniform"):
            return UniformModel(vocab_size)
        table: dict[tuple[int, ...], Sequence[float]] = {}
        for key, dist in data["table"].items():
            prefix = tuple(int(t) for t in key.split(",")) if key else ()
            table[prefix] = [float(p) for p in dist]
        default = data.get("default")
        if default is not None:
            default = [float(p) for p in default]
        return TableModel(vocab_size, table, default)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed model file: {exc}") from exc


def load_pretrain_corpus(path: str | Path) -> PretrainCorpus:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    try:
        return PretrainCorpus(
            sequences=tuple(
                TokenSequence(tokens=tuple(int(t) for t in seq))
                for seq in data["sequences"]
            )
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed corpus file: {exc}") from exc


def load_conversation_samples(path: str | Path) -> list[ConversationSample]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc.msg}") from exc
    try:
        return [
            ConversationSample(
                image_token=int(raw["image_token"]),
                turns=tuple(
                    QATokens(
                        question=tuple(int(t) for t in turn["question"]),
                        answer=tuple(int(t) for t in turn["answer"]),
                    )
                    for turn in raw["turns"]
                ),
            )
            for raw in data["samples"]
        ]
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed samples file: {exc}") from exc
