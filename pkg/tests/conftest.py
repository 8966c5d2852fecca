import re

import numpy as np
import pytest

from clkattack.encoder import HashKeys


@pytest.fixture(scope="session")
def keys():
    return HashKeys.from_strings("test-key-f", "test-key-g")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """``criterion(label, ok, detail)`` records one acceptance line and returns ``ok``."""
    def record(label, ok, detail=""):
        ACCEPTANCE[label] = (bool(ok), detail)
        print(f"criterion {label}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: (int(re.match(r"\d+", s).group()), s)):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"criterion {label:<6} {'PASS' if ok else 'FAIL'}  {detail}")
