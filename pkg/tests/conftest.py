import pytest

from builders import synth_dataset

_criteria: dict[int, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marker = dict(report.user_properties).get("criterion")
    if marker is None:
        return
    number, name = marker
    _criteria[number] = (name, "PASS" if report.outcome == "passed" else "FAIL")


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, outcome = _criteria[number]
        terminalreporter.write_line(f"{outcome}  AC{number:02d}  {name}")


@pytest.fixture(scope="session")
def ds300():
    return synth_dataset(n_days=300, seed=11)
