"""Parallel multilingual sample model, validation, and JSONL persistence.

A sample holds the same conversation in every language of its language set;
validation reports violations as data rather than raising, so a pipeline can
triage a whole file in one pass. Serialization is canonical (sorted keys,
UTF-8, no floats) to keep golden files and manifests byte-stable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .canonical import canonical_dumps
from .errors import ConflictError, ContractError, NotFoundError, ParseError, SchemaError
from .promptgen import CONVERSATION_TURNS, DataKind

LANGUAGES = ("en", "ko", "zh")


@dataclass(frozen=True)
class QAPair:
    language: str
    question: str
    answer: str

    def __post_init__(self) -> None:
        if self.language not in LANGUAGES:
            raise ContractError(f"unknown language tag {self.language!r}")


@dataclass(frozen=True)
class Turn:
    index: int
    pairs: tuple[QAPair, ...]

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ContractError(f"turn index must be >= 1, got {self.index}")

    def pair_for(self, language: str) -> QAPair | None:
        for pair in self.pairs:
            if pair.language == language:
                return pair
        return None


@dataclass(frozen=True)
class Provenance:
    template_hash: str = ""
    model_name: str = ""
    timestamp: str = ""


@dataclass(frozen=True)
class Sample:
    sample_id: str
    image_id: str
    kind: DataKind
    languages: tuple[str, ...]
    turns: tuple[Turn, ...]
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self) -> None:
        if not self.sample_id:
            raise ContractError("sample_id must be non-empty")
        if len(set(self.languages)) != len(self.languages):
            raise ContractError(f"duplicate language in {self.languages}")


def expected_turns(kind: DataKind) -> int:
    return CONVERSATION_TURNS if kind is DataKind.CONVERSATION else 1


def validate_sample(sample: Sample) -> list[str]:
    """Return the list of violations; a valid sample yields an empty list."""
    violations: list[str] = []
    want = expected_turns(sample.kind)
    if len(sample.turns) != want:
        violations.append(f"turns={len(sample.turns)}, expected {want}")
    if not sample.languages:
        violations.append("language set is empty")
    for position, turn in enumerate(sample.turns, start=1):
        if turn.index != position:
            violations.append(f"turn index {turn.index} at position {position}")
        seen: set[str] = set()
        for pair in turn.pairs:
            if pair.language in seen:
                violations.append(f"turn {position}: duplicate {pair.language} pair")
            seen.add(pair.language)
            if pair.language not in sample.languages:
                violations.append(
                    f"turn {position}: pair language {pair.language} outside sample set"
                )
            if not pair.question.strip():
                violations.append(f"turn {position}: empty question ({pair.language})")
            if not pair.answer.strip():
                violations.append(f"turn {position}: empty answer ({pair.language})")
        for language in sample.languages:
            if language not in seen:
                violations.append(f"turn {position}: missing {language} pair")
    return violations


@dataclass(frozen=True)
class DatasetManifest:
    name: str
    sample_count: int
    pair_count: int
    per_kind: tuple[tuple[str, int], ...]
    removed_count: int = 0
    parent_manifest: str = ""

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "sample_count": self.sample_count,
            "pair_count": self.pair_count,
            "per_kind": dict(self.per_kind),
            "removed_count": self.removed_count,
        }
        if self.parent_manifest:
            out["parent_manifest"] = self.parent_manifest
        return out


def pair_count(sample: Sample) -> int:
    return len(sample.turns) * len(sample.languages)


def build_manifest(
    samples: Iterable[Sample],
    name: str,
    removed_count: int = 0,
    parent_manifest: str = "",
) -> DatasetManifest:
    """Recompute all counts from the samples themselves; nothing is trusted."""
    if removed_count < 0:
        raise ContractError(f"removed_count must be >= 0, got {removed_count}")
    per_kind = {kind.value: 0 for kind in DataKind}
    n = 0
    pairs = 0
    for sample in samples:
        n += 1
        pairs += pair_count(sample)
        per_kind[sample.kind.value] += 1
    return DatasetManifest(
        name=name,
        sample_count=n,
        pair_count=pairs,
        per_kind=tuple(sorted(per_kind.items())),
        removed_count=removed_count,
        parent_manifest=parent_manifest,
    )


def sample_to_dict(sample: Sample) -> dict:
    return {
        "sample_id": sample.sample_id,
        "image_id": sample.image_id,
        "kind": sample.kind.value,
        "languages": list(sample.languages),
        "turns": [
            {
                "index": turn.index,
                "pairs": {
                    pair.language: {"question": pair.question, "answer": pair.answer}
                    for pair in turn.pairs
                },
            }
            for turn in sample.turns
        ],
        "provenance": {
            "template_hash": sample.provenance.template_hash,
            "model_name": sample.provenance.model_name,
            "timestamp": sample.provenance.timestamp,
        },
    }


def sample_from_dict(data: dict) -> Sample:
    try:
        turns = tuple(
            Turn(
                index=int(raw["index"]),
                pairs=tuple(
                    QAPair(language=lang, question=body["question"], answer=body["answer"])
                    for lang, body in sorted(raw["pairs"].items())
                ),
            )
            for raw in data["turns"]
        )
        prov = data.get("provenance", {})
        return Sample(
            sample_id=data["sample_id"],
            image_id=data["image_id"],
            kind=DataKind(data["kind"]),
            languages=tuple(data["languages"]),
            turns=turns,
            provenance=Provenance(
                template_hash=prov.get("template_hash", ""),
                model_name=prov.get("model_name", ""),
                timestamp=prov.get("timestamp", ""),
            ),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed sample record: {exc}") from exc


def export_jsonl(samples: list[Sample], path: str | Path) -> DatasetManifest:
    """Write one canonical JSON line per sample plus a manifest sidecar.

    Any invalid sample refuses the whole export; partial files are worse
    than loud failures here.
    """
    for sample in samples:
        report = validate_sample(sample)
        if report:
            raise SchemaError(
                f"sample {sample.sample_id!r} invalid: " + "; ".join(report)
            )
    path = Path(path)
    manifest = build_manifest(samples, name=path.stem)
    with path.open("w", encoding="utf-8") as handle:
        for sample in samples:
            handle.write(canonical_dumps(sample_to_dict(sample)))
            handle.write("\n")
    manifest_path = path.with_suffix(path.suffix + ".manifest.json")
    manifest_path.write_text(canonical_dumps(manifest.to_dict()) + "\n", encoding="utf-8")
    return manifest


def import_jsonl(path: str | Path) -> list[Sample]:
    path = Path(path)
    samples: list[Sample] = []
    seen: set[str] = set()
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc.msg}", line=lineno) from exc
            try:
                sample = sample_from_dict(data)
            except SchemaError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}", line=lineno) from exc
            if sample.sample_id in seen:
                raise ConflictError(
                    f"{path}: line {lineno}: duplicate sample_id {sample.sample_id!r}"
                )
            seen.add(sample.sample_id)
            samples.append(sample)
    return samples


def derive_subset(
    samples: list[Sample],
    removals: set[str],
    name: str,
    parent_manifest: str = "",
) -> tuple[list[Sample], DatasetManifest]:
    """Drop the named samples and account for them in the new manifest."""
    present = {sample.sample_id for sample in samples}
    missing = sorted(removals - present)
    if missing:
        raise NotFoundError(f"removal ids not in dataset: {', '.join(missing)}")
    kept = [sample for sample in samples if sample.sample_id not in removals]
    manifest = build_manifest(
        kept,
        name=name,
        removed_count=len(removals),
        parent_manifest=parent_manifest,
    )
    return kept, manifest
