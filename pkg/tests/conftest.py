import re

N_CRITERIA = 14
_criteria = {}
_pattern = re.compile(r"test_acceptance\.py::.*::test_c(\d\d)_")


def pytest_runtest_logreport(report):
    m = _pattern.search(report.nodeid)
    if m is None:
        return
    key = int(m.group(1))
    if report.failed:
        _criteria[key] = False
    elif report.when == "call":
        _criteria.setdefault(key, report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for k in range(1, N_CRITERIA + 1):
        state = _criteria.get(k)
        label = "NOT RUN" if state is None else ("PASS" if state else "FAIL")
        terminalreporter.write_line(f"criterion {k:02d}: {label}")
