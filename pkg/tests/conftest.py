import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_CRITERIA: dict[str, str] = {}


@pytest.fixture(scope="session")
def criterion():
    """Record a one-line verdict per acceptance criterion."""

    def record(name: str, ok: bool, detail: str) -> None:
        line = f"{name}: {'PASS' if ok else 'FAIL'} ({detail})"
        _CRITERIA[name] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for name in sorted(_CRITERIA, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(_CRITERIA[name])
