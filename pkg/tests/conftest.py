from pathlib import Path

import pytest

from resmatch.formats import parse_market_file

FIXTURES = Path(__file__).parent / "fixtures"

# filled by test_acceptance.py, printed after the run
ACCEPTANCE_RESULTS: list = []


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def two_by_two():
    return parse_market_file(FIXTURES / "two_by_two.csv")


@pytest.fixture
def boston_market():
    return parse_market_file(FIXTURES / "boston_instability.csv")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number}. {name}: {detail}")
