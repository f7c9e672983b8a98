import re

import pytest

CRITERION = re.compile(r"test_criterion_(\d+)_(\w+)")
_results: dict[int, tuple[str, str]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = CRITERION.match(item.name)
    if not m:
        return
    n, label = int(m.group(1)), m.group(2).replace("_", " ")
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        _results[n] = (label, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_results):
        label, status = _results[n]
        terminalreporter.write_line(f"criterion {n:2d} {label}: {status}")
