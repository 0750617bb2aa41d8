"""Prints one pass/fail line per acceptance criterion after the run."""

import pytest


@pytest.fixture
def record(request):
    """Attach a measured value to the current test's report."""

    def _record(text: str) -> None:
        request.node.user_properties.append(("measured", text))

    return _record


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" and outcome != "error":
                continue
            marker = dict(rep.user_properties).get("criterion")
            if marker is None:
                continue
            measured = "; ".join(v for k, v in rep.user_properties if k == "measured")
            status = "PASS" if outcome == "passed" else "FAIL"
            lines.append((marker, f"{marker} {status}  {measured}"))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda item: int(item[0][2:])):
        terminalreporter.write_line(line)


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args[0]))


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id): acceptance criterion identifier such as AC3")
