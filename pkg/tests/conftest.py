import time

import pytest

from twisty import pipeline as pl

_RUNS = {}


@pytest.fixture(scope="session")
def preset_runs(tmp_path_factory):
    """Run each preset at most once per session: name -> (bundle, seconds)."""
    root = tmp_path_factory.mktemp("presets")

    def get(name):
        if name not in _RUNS:
            start = time.perf_counter()
            bundle = pl.run_experiment(pl.preset(name), out_dir=root / name, plots=False)
            _RUNS[name] = (bundle, time.perf_counter() - start)
        return _RUNS[name]

    return get


_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call" and not report.failed:
        return
    number, title = marker.args
    detail = dict(item.user_properties).get("detail", "")
    if report.failed and not detail:
        detail = str(call.excinfo.value).splitlines()[0] if call.excinfo else ""
    _ACCEPTANCE[number] = (title, "PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, verdict, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{verdict}] {number:>2}. {title}: {detail}")
