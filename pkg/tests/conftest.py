import itertools

import pytest

from overdx.eventlog import TraceVariant

_ids = itertools.count()


def make_variant(activities, frequency=1):
    if isinstance(activities, str):
        activities = tuple(activities)
    ids = frozenset(f"v{next(_ids)}" for _ in range(frequency))
    return TraceVariant(tuple(activities), frequency, ids)


@pytest.fixture
def variant():
    return make_variant


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
