"""Corpus statistics: positional word frequency, lengths, POS counts, token histograms.

Every statistic here has two forms: a builder over a list of texts and an
associative merge over partial results, because real corpora arrive in
shards. A word is a whitespace token throughout; that convention is shared
with the evaluation harness's word-limit truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Iterable, Protocol

from .errors import ContractError
from .vocab import token_script


@dataclass
class PositionalFrequency:
    max_position: int
    counts: dict[int, dict[str, int]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "max_position": self.max_position,
            "positions": {
                str(pos): dict(sorted(words.items()))
                for pos, words in sorted(self.counts.items())
            },
        }


def positional_frequency(texts: Iterable[str], max_position: int) -> PositionalFrequency:
    """Count which words open sentences, which come second, and so on."""
    if max_position < 1:
        raise ContractError(f"max_position must be >= 1, got {max_position}")
    result = PositionalFrequency(max_position=max_position)
    for text in texts:
        words = text.split()
        for pos, word in enumerate(words[:max_position], start=1):
            bucket = result.counts.setdefault(pos, {})
            bucket[word] = bucket.get(word, 0) + 1
    return result


def merge_positional(a: PositionalFrequency, b: PositionalFrequency) -> PositionalFrequency:
    if a.max_position != b.max_position:
        raise ContractError(
            f"cannot merge positional frequencies with max_position "
            f"{a.max_position} and {b.max_position}"
        )
    merged = PositionalFrequency(max_position=a.max_position)
    for source in (a, b):
        for pos, words in source.counts.items():
            bucket = merged.counts.setdefault(pos, {})
            for word, count in words.items():
                bucket[word] = bucket.get(word, 0) + count
    return merged


@dataclass
class LengthDistribution:
    histogram: dict[int, int]
    count: int
    mean: float
    median: float
    max: int

    def to_dict(self) -> dict:
        return {
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "count": self.count,
            "mean": self.mean,
            "median": self.median,
            "max": self.max,
        }


def _summarize_lengths(histogram: dict[int, int]) -> LengthDistribution:
    count = sum(histogram.values())
    if count == 0:
        return LengthDistribution(histogram={}, count=0, mean=0.0, median=0.0, max=0)
    total = sum(length * n for length, n in histogram.items())
    # Median via cumulative walk over the sorted histogram, no materialized list.
    midpoints = (count - 1) // 2, count // 2
    picked: list[int] = []
    cumulative = 0
    for length in sorted(histogram):
        cumulative += histogram[length]
        while len(picked) < 2 and midpoints[len(picked)] < cumulative:
            picked.append(length)
        if len(picked) == 2:
            break
    return LengthDistribution(
        histogram=dict(histogram),
        count=count,
        mean=total / count,
        median=(picked[0] + picked[1]) / 2,
        max=max(histogram),
    )


def length_distribution(texts: Iterable[str]) -> LengthDistribution:
    """Histogram of whitespace word counts; an empty text counts as length 0."""
    histogram: dict[int, int] = {}
    for text in texts:
        n = len(text.split())
        histogram[n] = histogram.get(n, 0) + 1
    return _summarize_lengths(histogram)


def merge_lengths(a: LengthDistribution, b: LengthDistribution) -> LengthDistribution:
    histogram = dict(a.histogram)
    for length, n in b.histogram.items():
        histogram[length] = histogram.get(length, 0) + n
    return _summarize_lengths(histogram)


class PosClass(Enum):
    NOUN = "noun"
    VERB = "verb"
    MODIFIER = "modifier"
    INDEPENDENT = "independent"
    RELATIONAL = "relational"
    ENDING = "ending"
    AFFIX = "affix"
    SYMBOLS = "symbols"
    FOREIGN_LANGUAGE = "foreign_language"


class MorphAnalyzer(Protocol):
    def analyze(self, text: str) -> list[tuple[str, PosClass]]: ...


class DictionaryMorphAnalyzer:
    """Lookup-table analyzer; a stand-in, not a real morphological model.

    Unknown tokens fall back to shape heuristics: no letters at all is
    Symbols, all-Latin letters is ForeignLanguage (Latin words inside Korean
    answers are loanwords or code), anything else takes the default class.
    """

    def __init__(
        self,
        lexicon: dict[str, PosClass] | None = None,
        default: PosClass = PosClass.NOUN,
    ) -> None:
        self.lexicon = dict(lexicon or {})
        self.default = default

    def analyze(self, text: str) -> list[tuple[str, PosClass]]:
        out: list[tuple[str, PosClass]] = []
        for token in text.split():
            known = self.lexicon.get(token)
            if known is not None:
                out.append((token, known))
            elif not any(ch.isalpha() for ch in token):
                out.append((token, PosClass.SYMBOLS))
            elif token_script(token) == "latin":
                out.append((token, PosClass.FOREIGN_LANGUAGE))
            else:
                out.append((token, self.default))
        return out


@dataclass
class PosTally:
    """Mergeable POS accumulator: per class, every token string with its count.

    Unique counts are not additive across shards, so the tally keeps the
    full token multiset per class and the report is derived at the end.
    """

    per_class: dict[PosClass, dict[str, int]] = field(default_factory=dict)

    def add(self, token: str, pos: PosClass) -> None:
        bucket = self.per_class.setdefault(pos, {})
        bucket[token] = bucket.get(token, 0) + 1

    def finalize(self) -> "PosReport":
        rows = {}
        for pos in PosClass:
            tokens = self.per_class.get(pos, {})
            rows[pos] = (sum(tokens.values()), len(tokens))
        return PosReport(
            rows=tuple((pos, dup, uniq) for pos, (dup, uniq) in rows.items()),
            total_duplicates=sum(dup for dup, _ in rows.values()),
            total_unique=sum(uniq for _, uniq in rows.values()),
        )


@dataclass(frozen=True)
class PosReport:
    rows: tuple[tuple[PosClass, int, int], ...]
    total_duplicates: int
    total_unique: int

    def row(self, pos: PosClass) -> tuple[int, int]:
        for row_pos, dup, uniq in self.rows:
            if row_pos is pos:
                return dup, uniq
        raise ContractError(f"no row for {pos.value}")

    def to_dict(self) -> dict:
        return {
            "classes": {
                pos.value: {"duplicate_count": dup, "unique_count": uniq}
                for pos, dup, uniq in self.rows
            },
            "total": {
                "duplicate_count": self.total_duplicates,
                "unique_count": self.total_unique,
            },
        }


def pos_tally(texts: Iterable[str], analyzer: MorphAnalyzer) -> PosTally:
    tally = PosTally()
    for index, text in enumerate(texts):
        try:
            analyzed = analyzer.analyze(text)
        except Exception as exc:
            raise ContractError(f"analyzer failed on text {index}: {exc}") from exc
        for token, pos in analyzed:
            tally.add(token, pos)
    return tally


def merge_pos_tally(a: PosTally, b: PosTally) -> PosTally:
    merged = PosTally()
    for source in (a, b):
        for pos, tokens in source.per_class.items():
            for token, count in tokens.items():
                bucket = merged.per_class.setdefault(pos, {})
                bucket[token] = bucket.get(token, 0) + count
    return merged


def pos_report(texts: Iterable[str], analyzer: MorphAnalyzer) -> PosReport:
    return pos_tally(texts, analyzer).finalize()


@dataclass
class PairedHistogram:
    bin_edges: tuple[int, ...]
    a_counts: list[int]
    b_counts: list[int]
    a_overflow: int = 0
    b_overflow: int = 0

    def to_dict(self) -> dict:
        labels = [
            f"[{lo},{hi})" for lo, hi in zip(self.bin_edges, self.bin_edges[1:])
        ]
        return {
            "bins": labels,
            "a": list(self.a_counts),
            "b": list(self.b_counts),
            "a_overflow": self.a_overflow,
            "b_overflow": self.b_overflow,
        }


def _bin_counts(
    texts: Iterable[str],
    tokenizer: Callable[[str], int],
    edges: tuple[int, ...],
) -> tuple[list[int], int]:
    counts = [0] * (len(edges) - 1)
    overflow = 0
    for text in texts:
        n = tokenizer(text)
        if n < edges[0] or n >= edges[-1]:
            overflow += 1
            continue
        for i in range(len(edges) - 1):
            if edges[i] <= n < edges[i + 1]:
                counts[i] += 1
                break
    return counts, overflow


def token_length_histogram(
    a_texts: list[str],
    b_texts: list[str],
    tokenizer: Callable[[str], int],
    bins: list[int] | tuple[int, ...],
) -> PairedHistogram:
    """Two corpora binned over identical half-open edges [b0,b1), [b1,b2), ...

    Texts falling outside the edges are tallied as overflow rather than
    silently dropped.
    """
    edges = tuple(bins)
    if len(edges) < 2:
        raise ContractError("bins need at least two edges")
    if any(lo >= hi for lo, hi in zip(edges, edges[1:])):
        raise ContractError(f"bin edges must be strictly increasing, got {edges}")
    a_counts, a_over = _bin_counts(a_texts, tokenizer, edges)
    b_counts, b_over = _bin_counts(b_texts, tokenizer, edges)
    return PairedHistogram(
        bin_edges=edges,
        a_counts=a_counts,
        b_counts=b_counts,
        a_overflow=a_over,
        b_overflow=b_over,
    )


def merge_token_hist(a: PairedHistogram, b: PairedHistogram) -> PairedHistogram:
    if a.bin_edges != b.bin_edges:
        raise ContractError(
            f"cannot merge histograms with edges {a.bin_edges} and {b.bin_edges}"
        )
    return PairedHistogram(
        bin_edges=a.bin_edges,
        a_counts=[x + y for x, y in zip(a.a_counts, b.a_counts)],
        b_counts=[x + y for x, y in zip(a.b_counts, b.b_counts)],
        a_overflow=a.a_overflow + b.a_overflow,
        b_overflow=b.b_overflow + a.b_overflow,
    )


def whitespace_token_count(text: str) -> int:
    return len(text.split())
