"""Shared fixtures and the acceptance summary printer."""
import numpy as np
import pytest

_ACCEPTANCE: dict[str, str] = {}


def record_acceptance(key: str, passed: bool, detail: str) -> None:
    """Remember one acceptance line; printed at the end of the session."""
    line = f"[{'PASS' if passed else 'FAIL'}] {key}: {detail}"
    _ACCEPTANCE[key] = line
    print(line)


@pytest.fixture
def acceptance():
    return record_acceptance


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE, key=lambda k: int(k.split()[1].rstrip(":"))):
        terminalreporter.write_line(_ACCEPTANCE[key])
