import pytest

_OUTCOMES: dict[int, tuple[str, bool]] = {}
_NOTES: dict[int, list[str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or rep.when not in ("setup", "call"):
        return
    n, title = marker.args
    if rep.when == "setup" and rep.passed:
        return
    prev = _OUTCOMES.get(n, (title, True))[1]
    _OUTCOMES[n] = (title, prev and rep.passed)


@pytest.fixture
def note(request):
    """Attach a line to this criterion's summary (soft targets, measured values)."""
    marker = request.node.get_closest_marker("criterion")

    def add(text: str) -> None:
        print(text)
        if marker is not None:
            _NOTES.setdefault(marker.args[0], []).append(text)

    return add


def pytest_terminal_summary(terminalreporter):
    if not _OUTCOMES:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n in sorted(_OUTCOMES):
        title, ok = _OUTCOMES[n]
        tr.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {title}")
        for line in _NOTES.get(n, []):
            tr.write_line(f"              {line}")
