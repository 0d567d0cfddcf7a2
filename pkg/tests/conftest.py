import pytest

_ACCEPTANCE: dict[int, tuple[str, str]] = {}


@pytest.fixture
def criterion(request):
    """Attach a one-line detail to the running acceptance criterion."""

    def note(text):
        request.node.user_properties.append(("detail", text))
        print(text)

    return note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number = marker.args[0]
    details = "; ".join(v for k, v in item.user_properties if k == "detail")
    status = "PASS" if report.passed else "FAIL"
    if number not in _ACCEPTANCE or status == "FAIL":
        _ACCEPTANCE[number] = (status, f"{item.name}" + (f" ({details})" if details else ""))


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(n): numbered acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, text = _ACCEPTANCE[number]
        terminalreporter.write_line(f"ACCEPTANCE {number}: {status} {text}")
