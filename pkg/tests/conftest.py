import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")

_ACCEPTANCE: list[tuple[int, str, str, str]] = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call":
        return
    number, title = mark.args
    detail = dict(item.user_properties).get("detail", "")
    if rep.passed and not hasattr(rep, "wasxfail"):
        status = "PASS"
    elif hasattr(rep, "wasxfail") and rep.passed:
        status = "PASS (expected failure did not occur)"
    else:
        status = "FAIL"
    _ACCEPTANCE.append((number, title, status, detail))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, detail in sorted(_ACCEPTANCE):
        line = f"criterion {number:>2} {status:<4}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
