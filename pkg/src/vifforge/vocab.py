"""Tokenizer vocabulary expansion and embedding-table extension.

Token ids are positions in the vocabulary file, so id stability across a
merge is the load-bearing guarantee: every pretrained embedding row keeps
meaning the same token. Files are deliberately dumb formats, one token per
line and a flat little-endian float32 matrix, so golden tests can be
byte-exact.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, ParseError

SCRIPT_CLASSES = ("latin", "hangul", "han", "other")

_HANGUL_RANGES = (
    (0x1100, 0x11FF),
    (0x3130, 0x318F),
    (0xA960, 0xA97F),
    (0xAC00, 0xD7A3),
    (0xD7B0, 0xD7FF),
)
_HAN_RANGES = (
    (0x2E80, 0x2EFF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
    (0x20000, 0x2A6DF),
)
_LATIN_RANGES = (
    (0x0041, 0x005A),
    (0x0061, 0x007A),
    (0x00C0, 0x024F),
    (0x1E00, 0x1EFF),
)


def char_script(ch: str) -> str:
    code = ord(ch)
    for lo, hi in _LATIN_RANGES:
        if lo <= code <= hi:
            return "latin"
    for lo, hi in _HANGUL_RANGES:
        if lo <= code <= hi:
            return "hangul"
    for lo, hi in _HAN_RANGES:
        if lo <= code <= hi:
            return "han"
    return "other"


def token_script(token: str) -> str:
    """Majority script over the token's letters; ties break in SCRIPT_CLASSES order."""
    counts = {name: 0 for name in SCRIPT_CLASSES}
    for ch in token:
        if ch.isalpha():
            counts[char_script(ch)] += 1
    if sum(counts.values()) == 0:
        return "other"
    return max(SCRIPT_CLASSES, key=lambda name: counts[name])


class Vocabulary:
    """Ordered token list; a token's id is its index."""

    def __init__(self, tokens: list[str] | tuple[str, ...]) -> None:
        self._tokens = tuple(tokens)
        self._ids: dict[str, int] = {}
        for i, token in enumerate(self._tokens):
            if not token:
                raise ContractError(f"empty token at id {i}")
            if "\n" in token or "\r" in token:
                raise ContractError(f"token at id {i} contains a line break")
            if token in self._ids:
                raise ContractError(
                    f"duplicate token {token!r} at ids {self._ids[token]} and {i}"
                )
            self._ids[token] = i

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._ids

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    @property
    def tokens(self) -> tuple[str, ...]:
        return self._tokens

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise ContractError(f"token {token!r} not in vocabulary")

    def token_at(self, token_id: int) -> str:
        if not 0 <= token_id < len(self._tokens):
            raise ContractError(f"token id {token_id} out of range 0..{len(self) - 1}")
        return self._tokens[token_id]


def load_vocab(path: str | Path) -> Vocabulary:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    for lineno, line in enumerate(lines, start=1):
        if line == "":
            raise ParseError(f"{path}: line {lineno}: empty token line", line=lineno)
    return Vocabulary(lines)


def save_vocab(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_text("".join(t + "\n" for t in vocab.tokens), encoding="utf-8")


@dataclass(frozen=True)
class ExpansionReport:
    base_size: int
    added_requested: int
    added_effective: int
    final_size: int
    overlap: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.final_size != self.base_size + self.added_effective:
            raise ContractError("final_size must equal base_size + added_effective")
        if self.added_effective != self.added_requested - len(self.overlap):
            raise ContractError("added_effective must equal requested minus overlap")

    def to_dict(self) -> dict:
        return {
            "base_size": self.base_size,
            "added_requested": self.added_requested,
            "added_effective": self.added_effective,
            "final_size": self.final_size,
            "overlap": list(self.overlap),
        }


def merge_vocab(base: Vocabulary, additions: list[str]) -> tuple[Vocabulary, ExpansionReport]:
    """Append new tokens without disturbing a single existing id.

    Skipped additions, whether they collide with the base or repeat within
    the additions themselves, land in the overlap list so the report's
    arithmetic stays exact.
    """
    merged = list(base.tokens)
    present = set(merged)
    overlap: list[str] = []
    for token in additions:
        if token in present:
            overlap.append(token)
        else:
            merged.append(token)
            present.add(token)
    vocab = Vocabulary(merged)
    report = ExpansionReport(
        base_size=len(base),
        added_requested=len(additions),
        added_effective=len(additions) - len(overlap),
        final_size=len(vocab),
        overlap=tuple(overlap),
    )
    return vocab, report


DEFAULT_INIT_SCALE = 0.02

_EMB_HEADER = struct.Struct("<II")


@dataclass(frozen=True)
class EmbeddingTable:
    values: np.ndarray
    seed: int = 0

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ContractError(f"embedding matrix must be 2-D, got {self.values.ndim}-D")
        if self.values.dtype != np.float32:
            raise ContractError(f"embedding matrix must be float32, got {self.values.dtype}")
        if not np.isfinite(self.values).all():
            raise ContractError("embedding matrix contains non-finite values")

    @property
    def rows(self) -> int:
        return int(self.values.shape[0])

    @property
    def dim(self) -> int:
        return int(self.values.shape[1])


def extend_embeddings(
    table: EmbeddingTable,
    new_count: int,
    seed: int,
    scale: float = DEFAULT_INIT_SCALE,
) -> EmbeddingTable:
    """Append seeded normal(0, scale) rows; existing rows stay bit-identical."""
    if new_count < 0:
        raise ContractError(f"new_count must be >= 0, got {new_count}")
    if new_count == 0:
        return EmbeddingTable(values=table.values.copy(), seed=seed)
    rng = np.random.default_rng(seed)
    fresh = rng.normal(0.0, scale, size=(new_count, table.dim)).astype(np.float32)
    return EmbeddingTable(values=np.concatenate([table.values, fresh], axis=0), seed=seed)


def save_embeddings(table: EmbeddingTable, path: str | Path) -> None:
    with Path(path).open("wb") as handle:
        handle.write(_EMB_HEADER.pack(table.rows, table.dim))
        handle.write(np.ascontiguousarray(table.values, dtype="<f4").tobytes())


def load_embeddings(path: str | Path, seed: int = 0) -> EmbeddingTable:
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _EMB_HEADER.size:
        raise ParseError(f"{path}: too short for embedding header")
    rows, dim = _EMB_HEADER.unpack_from(blob)
    expected = _EMB_HEADER.size + rows * dim * 4
    if len(blob) != expected:
        raise ParseError(
            f"{path}: expected {expected} bytes for {rows}x{dim} matrix, got {len(blob)}"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=_EMB_HEADER.size).reshape(rows, dim)
    return EmbeddingTable(values=values.astype(np.float32, copy=True), seed=seed)


def script_distribution(vocab: Vocabulary) -> dict[str, float]:
    """Fraction of tokens per majority script; all zeros for an empty vocabulary."""
    counts = {name: 0 for name in SCRIPT_CLASSES}
    for token in vocab.tokens:
        counts[token_script(token)] += 1
    total = len(vocab)
    if total == 0:
        return {name: 0.0 for name in SCRIPT_CLASSES}
    return {name: counts[name] / total for name in SCRIPT_CLASSES}
