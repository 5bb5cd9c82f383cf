import pytest


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, title): numbered end-to-end check, reported PASS/FAIL",
    )


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    if report.when != "call":
        return
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    num, title = marker.args
    if report.passed:
        status = "PASS"
    elif report.skipped and hasattr(report, "wasxfail"):
        status = "FAIL (expected, see notes)"
    else:
        status = "FAIL"
    tr = item.config.pluginmanager.get_plugin("terminalreporter")
    if tr is not None:
        tr.write_line(f"ACCEPTANCE {num} [{title}]: {status}")
