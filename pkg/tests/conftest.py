import pytest

CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion's outcome for the summary lines."""
    def record(cid, title):
        CRITERIA[cid] = {"title": title, "node": request.node.nodeid}
    return record


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        for v in CRITERIA.values():
            if v["node"] == item.nodeid:
                v["passed"] = rep.passed


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(CRITERIA):
        v = CRITERIA[cid]
        status = "PASS" if v.get("passed") else "FAIL"
        terminalreporter.write_line(f"{status}  criterion {cid:>2}: {v['title']}")
