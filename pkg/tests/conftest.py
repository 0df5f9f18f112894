import pytest

CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by the test")


@pytest.fixture
def record(request):
    """Per-criterion notes shown in the acceptance summary."""
    marker = request.node.get_closest_marker("criterion")
    notes = []
    if marker is not None:
        CRITERIA.setdefault(marker.args[0], {"title": marker.args[1], "notes": notes, "outcome": None})
        notes = CRITERIA[marker.args[0]]["notes"]
    return notes.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call":
        return
    entry = CRITERIA.setdefault(marker.args[0], {"title": marker.args[1], "notes": [], "outcome": None})
    entry["outcome"] = "PASS" if report.passed else "FAIL"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        entry = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d} {entry['outcome'] or 'NOT RUN'}: {entry['title']}")
        for note in entry["notes"]:
            terminalreporter.write_line(f"    {note}")
