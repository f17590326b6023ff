import pytest

# acceptance tests report one line each at the end of the run
_outcomes = {}
_details = {}


@pytest.fixture
def detail(request):
    def put(text):
        _details[request.node.nodeid] = text
    return put


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or report.outcome != "passed":
        _outcomes[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in _outcomes.items():
        mark = "PASS" if outcome == "passed" else "FAIL"
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{mark}  {name}  {_details.get(nodeid, '')}".rstrip())
