import pytest

_LINES: list[str] = []


class _Recorder:
    def __init__(self):
        self.done = set()

    def __call__(self, number: int, ok: bool, detail: str = "") -> bool:
        self.done.add(number)
        _LINES.append(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        return ok


@pytest.fixture
def criterion(request):
    rec = _Recorder()
    yield rec
    number = getattr(request.function, "criterion_number", None)
    if number is not None and number not in rec.done:
        _LINES.append(f"criterion {number}: FAIL  did not complete")


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
