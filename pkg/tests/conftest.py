import pytest

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or report.when != "call" and not report.failed:
        return
    n, title = mark.args
    prev = _RESULTS.get(n, (True, title, ""))
    ok = prev[0] and report.passed
    detail = getattr(item, "criterion_detail", "")
    _RESULTS[n] = (ok, title, detail or prev[2])


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        ok, title, detail = _RESULTS[n]
        tail = f" [{detail}]" if detail else ""
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}{tail}")
