from __future__ import annotations

from pathlib import Path

import pytest

from labelscout.synth import generate

FIXTURES = Path(__file__).parent / "fixtures"

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def report(name: str, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}"
        if detail:
            line = f"{line}  [{detail}]"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def taxonomy_path() -> Path:
    return FIXTURES / "taxonomy_toy.txt"


@pytest.fixture(scope="session")
def vocabulary_path() -> Path:
    return FIXTURES / "vocabulary_toy.txt"


@pytest.fixture(scope="session")
def affinity_path() -> Path:
    return FIXTURES / "affinity_toy.txt"


@pytest.fixture(scope="session")
def small_instance():
    """A 60-label noise-free synthetic instance shared by read-only tests."""
    return generate(
        n_labels=60, n_actions=10, n_objects=8, dim=16, n_queries=2, seed=5
    )
