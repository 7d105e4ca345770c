import pytest

# criterion number -> (title, passed, detail); filled by the acceptance tests
_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.fixture
def criterion_detail(request):
    """Tests append human-readable measurements here; shown in the summary."""
    lines = []
    request.node.criterion_lines = lines
    return lines


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None and (report.when == "call" or report.failed):
        n, title = marker.args
        detail = "; ".join(getattr(item, "criterion_lines", []))
        prev = _CRITERIA.get(n)
        passed = report.passed and (prev is None or prev[1])
        _CRITERIA[n] = (title, passed, detail or (prev[2] if prev else ""))
    return report


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[n]
        line = f"criterion {n}: {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)
