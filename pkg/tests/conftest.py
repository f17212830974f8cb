import pytest

from scenarios import box_field

CRITERIA: dict[int, str] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, passed: bool, detail: str):
        CRITERIA[number] = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(CRITERIA[number])
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for number in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[number])


@pytest.fixture
def empty_field():
    return box_field([])


@pytest.fixture
def pillar_field():
    """4 x 4 x 1 m slab with a 0.8 m square pillar in the middle."""
    return box_field([((1.6, 1.6, 0.0), (2.4, 2.4, 1.0))])
