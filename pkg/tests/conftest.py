import numpy as np
import pytest

from leadrig.scores import ScoreMatrix


def make(rows: dict, tasks=None) -> ScoreMatrix:
    """Matrix from {model: [scores...]}; tasks default to D1..Dm."""
    ids = list(rows)
    scores = np.array([rows[a] for a in ids], dtype=np.float64)
    if tasks is None:
        tasks = [f"D{j + 1}" for j in range(scores.shape[1])]
    return ScoreMatrix(ids, tasks, scores)


@pytest.fixture
def three_models():
    return make({"a": [0.1, 0.1], "b": [0.9, 0.2], "c": [0.5, 0.9]})


# filled by test_acceptance.report and printed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
