import re

import pytest

from helpers import F1_SETS, dataset_from_sets


@pytest.fixture
def f1_dataset():
    return dataset_from_sets(F1_SETS, k=2)


# one line per acceptance criterion in the terminal summary
_ACCEPTANCE = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    match = re.search(r"test_acceptance\.py::test_ac(\d+)_(\w+)", report.nodeid)
    if match:
        key = int(match.group(1))
        name = match.group(2).split("[")[0].replace("_", " ")
        # a parametrised criterion fails if any of its cases fails
        if _ACCEPTANCE.get(key, ("", "PASSED"))[1] == "PASSED":
            _ACCEPTANCE[key] = (name, report.outcome.upper())


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_ACCEPTANCE):
        name, outcome = _ACCEPTANCE[key]
        terminalreporter.write_line(f"AC-{key:02d} {outcome:<7} {name}")
