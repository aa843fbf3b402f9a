"""Shared fixtures plus the acceptance-summary reporter.

Tests named test_acceptance_* each cover one acceptance criterion; the
terminal summary prints one PASS/FAIL line per criterion so a run's
acceptance status is readable without scrolling the dot output.
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from vifforge.dataset import QAPair, Sample, Turn, expected_turns
from vifforge.promptgen import DataKind

_ACCEPTANCE_RESULTS: dict[str, str] = {}


def make_sample(
    sample_id: str,
    kind: DataKind = DataKind.OBJECT_CENTRIC,
    languages: tuple[str, ...] = ("en", "ko", "zh"),
    turns: int | None = None,
) -> Sample:
    """A schema-valid sample with stand-in text, one pair per language per turn."""
    count = expected_turns(kind) if turns is None else turns
    built = tuple(
        Turn(
            index=i,
            pairs=tuple(
                QAPair(
                    language=lang,
                    question=f"q-{sample_id}-{i}-{lang}",
                    answer=f"a-{sample_id}-{i}-{lang}",
                )
                for lang in languages
            ),
        )
        for i in range(1, count + 1)
    )
    return Sample(
        sample_id=sample_id,
        image_id=sample_id.rpartition(":")[0] or sample_id,
        kind=kind,
        languages=languages,
        turns=built,
    )


@pytest.fixture
def sample_factory():
    return make_sample


def _criterion_label(nodeid: str) -> str | None:
    name = nodeid.rsplit("::", 1)[-1]
    prefix = "test_acceptance_"
    if not name.startswith(prefix):
        return None
    return name[len(prefix) :].split("[")[0].replace("_", "-")


def pytest_runtest_logreport(report: pytest.TestReport) -> None:
    label = _criterion_label(report.nodeid)
    if label is None:
        return
    if report.when == "call":
        _ACCEPTANCE_RESULTS[label] = "PASS" if report.passed else "FAIL"
    elif report.when == "setup" and report.failed:
        _ACCEPTANCE_RESULTS[label] = "FAIL"
    elif report.when == "setup" and report.skipped:
        _ACCEPTANCE_RESULTS[label] = "SKIP"


def pytest_terminal_summary(terminalreporter) -> None:
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(_ACCEPTANCE_RESULTS):
        status = _ACCEPTANCE_RESULTS[label]
        terminalreporter.write_line(f"[{status}] {label}")
